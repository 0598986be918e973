#include <doctest.h>

#include <random>

#include "slicever/metrics.h"

using namespace slicever;
using namespace slicever::metrics;

TEST_CASE("confusion_matrix") {
  const std::vector<int> same = {0, 1, 2, 2};
  const auto diag = confusion_matrix(same, same);
  CHECK(diag[0][0] == 1);
  CHECK(diag[2][2] == 2);
  CHECK(diag[0][1] == 0);

  const auto empty = confusion_matrix({}, {});
  for (const auto& row : empty) {
    for (auto v : row) CHECK(v == 0);
  }

  const std::vector<int> preds = {0, 1}, labels = {1, 1};
  const auto m = confusion_matrix(preds, labels);
  CHECK(m[1][0] == 1);
  CHECK(m[1][1] == 1);

  const std::vector<int> short_labels = {1};
  CHECK_THROWS(confusion_matrix(preds, short_labels));
}

TEST_CASE("classification_report") {
  SUBCASE("hand-computed two-class case") {
    const auto r = classification_report({{{8, 2, 0}, {1, 9, 0}, {0, 0, 0}}});
    CHECK(r.per_class[0].precision == doctest::Approx(8.0 / 9));
    CHECK(r.per_class[0].recall == doctest::Approx(0.8));
    CHECK(r.per_class[0].f1 == doctest::Approx(0.8421).epsilon(1e-4));
    CHECK(r.per_class[2].precision == 0.0);
    CHECK(r.per_class[2].support == 0);
    CHECK(r.accuracy == doctest::Approx(17.0 / 20));
  }
  SUBCASE("perfect diagonal") {
    const auto r = classification_report({{{5, 0, 0}, {0, 6, 0}, {0, 0, 7}}});
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro.f1 == 1.0);
    CHECK(r.weighted.precision == 1.0);
  }
  SUBCASE("all-zero matrix") {
    CHECK_THROWS_WITH(classification_report(ConfusionMatrix{}), "no samples");
  }
}

TEST_CASE("report identities (property)") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::int64_t> cell(0, 50);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix m{};
    std::int64_t total = 0;
    for (auto& row : m) {
      for (auto& v : row) {
        v = trial % 7 == 0 ? cell(rng) % 3 : cell(rng);
        total += v;
      }
    }
    if (total == 0) continue;
    const auto r = classification_report(m);
    std::int64_t support = 0;
    double recall_weighted = 0.0, max_f1 = 0.0;
    for (const auto& c : r.per_class) {
      support += c.support;
      recall_weighted += static_cast<double>(c.support) * c.recall;
      max_f1 = std::max(max_f1, c.f1);
    }
    REQUIRE(support == total);
    REQUIRE(r.macro.f1 <= max_f1 + 1e-12);
    REQUIRE(r.accuracy == doctest::Approx(recall_weighted / static_cast<double>(support)).epsilon(1e-12));
  }
}
