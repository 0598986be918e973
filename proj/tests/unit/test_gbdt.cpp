#include <doctest.h>

#include <cmath>
#include <random>

#include "slicever/gbdt.h"

using namespace slicever;
using namespace slicever::tree;

namespace {

// Three tight, axis-separated blobs in 2-D.
Dataset blobs(std::uint64_t seed, std::size_t per_class, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  Dataset d(2);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double row[] = {centers[c][0] + noise(rng), centers[c][1] + noise(rng)};
      d.add(row, c);
    }
  }
  return d;
}

}  // namespace

TEST_CASE("softmax of equal scores is uniform") {
  const auto p = softmax({0.0, 0.0, 0.0});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3));
  const auto big = softmax({1000.0, 0.0, -1000.0});
  CHECK(big[0] == doctest::Approx(1.0));
}

TEST_CASE("first-round residuals from a uniform start") {
  // Balanced classes make the base score uniform, so a sample of class 0
  // carries residuals (2/3, -1/3, -1/3); a depth-limited stump trained on a
  // single class-0 row per leaf reproduces them as leaf values.
  Dataset d(1);
  for (int c = 0; c < 3; ++c) {
    const double x = c;
    d.add(std::span<const double>(&x, 1), c);
  }
  const auto e = fit_gbdt(d, {1, 1.0}, {2, 2, 1e-9});
  const double x0 = 0.0;
  CHECK(e.trees[0][0].leaf_for(std::span<const double>(&x0, 1)).value == doctest::Approx(2.0 / 3));
  CHECK(e.trees[1][0].leaf_for(std::span<const double>(&x0, 1)).value == doctest::Approx(-1.0 / 3));
  CHECK(e.trees[2][0].leaf_for(std::span<const double>(&x0, 1)).value == doctest::Approx(-1.0 / 3));
}

TEST_CASE("zero rounds predicts the class priors") {
  Dataset d(1);
  const int labels[] = {0, 0, 0, 1, 2, 2};
  for (int i = 0; i < 6; ++i) {
    const double x = i;
    d.add(std::span<const double>(&x, 1), labels[i]);
  }
  const auto e = fit_gbdt(d, {0, 0.3});
  for (double x : {-5.0, 0.0, 3.3, 100.0}) {
    const auto p = predict_ensemble(e, std::span<const double>(&x, 1));
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(1.0 / 6));
    CHECK(p[2] == doctest::Approx(1.0 / 3));
  }
}

TEST_CASE("missing class is rejected") {
  Dataset d(1);
  for (int i = 0; i < 4; ++i) {
    const double x = i;
    d.add(std::span<const double>(&x, 1), i % 2);
  }
  CHECK_THROWS_WITH_AS(fit_gbdt(d), "class absent from training data", ValidationError);
}

TEST_CASE("separable blobs are learned exactly") {
  const auto d = blobs(7, 100, 0.01);
  const auto e = fit_gbdt(d);
  for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(e.trees[c].size() == 50);
  int hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    hits += argmax_class(predict_ensemble(e, d.row(i))) == d.label(i) ? 1 : 0;
  }
  CHECK(hits == static_cast<int>(d.size()));
}

TEST_CASE("training log-loss is non-increasing per round") {
  const auto d = blobs(3, 60, 0.5);
  double prev = std::numeric_limits<double>::infinity();
  for (int rounds = 0; rounds <= 30; ++rounds) {
    const auto e = fit_gbdt(d, {rounds, 0.3});
    const double loss = log_loss(e, d);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
  }
}

TEST_CASE("ensemble probabilities are normalized (property)") {
  const auto d = blobs(9, 40, 3.0);
  const auto e = fit_gbdt(d, {20, 0.3});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const double x[] = {u(rng), u(rng)};
    const auto p = predict_ensemble(e, x);
    REQUIRE(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("fitting is deterministic") {
  const auto d = blobs(11, 50, 2.0);
  CHECK(fit_gbdt(d, {10, 0.3}) == fit_gbdt(d, {10, 0.3}));
}
