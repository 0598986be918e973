#include <doctest.h>

#include <random>

#include "slicever/domain.h"

using namespace slicever;

namespace {

SlicingAction action(int embb, int mmtc, int urllc) {
  SlicingAction a;
  a[SliceId::kEmbb].prbs = embb;
  a[SliceId::kMmtc].prbs = mmtc;
  a[SliceId::kUrllc].prbs = urllc;
  return a;
}

std::vector<FeatureVector> column(std::initializer_list<double> bitrates) {
  std::vector<FeatureVector> out;
  for (double b : bitrates) out.push_back({b, 0.0, 0.0});
  return out;
}

}  // namespace

TEST_CASE("slice and scheduler names round trip in fixed class order") {
  CHECK(index_of(SliceId::kEmbb) == 0);
  CHECK(index_of(SliceId::kMmtc) == 1);
  CHECK(index_of(SliceId::kUrllc) == 2);
  for (SliceId s : kAllSlices) CHECK(parse_slice(slice_name(s)) == s);
  CHECK(scheduler_name(SchedulerPolicy::kWaterfilling) == "WF");
  CHECK(parse_scheduler("PF") == SchedulerPolicy::kProportionalFair);
  CHECK_FALSE(parse_slice("EMBB").has_value());
}

TEST_CASE("validate_action") {
  CHECK(validate_action(action(20, 15, 15), 50).ok());
  CHECK(validate_action(action(50, 0, 0), 50).ok());

  const auto over = validate_action(action(30, 30, 30), 50);
  REQUIRE_FALSE(over.ok());
  CHECK(over.violations.front() == "sum 90 > 50");

  const auto negative = validate_action(action(-1, 10, 10), 50);
  REQUIRE_FALSE(negative.ok());
  CHECK(negative.violations.front() == "slice embb prbs -1 < 0");
}

TEST_CASE("validate_action ok implies the action invariants (fuzz)") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> prbs(-5, 60);
  std::uniform_int_distribution<int> total(1, 100);
  for (int i = 0; i < 20000; ++i) {
    const auto a = action(prbs(rng), prbs(rng), prbs(rng));
    const int t = total(rng);
    const bool invariant = a.slices[0].prbs >= 0 && a.slices[1].prbs >= 0 && a.slices[2].prbs >= 0 &&
                           a.slices[0].prbs + a.slices[1].prbs + a.slices[2].prbs <= t;
    REQUIRE(validate_action(a, t).ok() == invariant);
  }
}

TEST_CASE("feature_stats") {
  SUBCASE("empty reference set is rejected") {
    std::vector<FeatureVector> none;
    CHECK_THROWS_WITH_AS(feature_stats(std::span<const FeatureVector>(none)), "empty reference set", ValidationError);
  }
  SUBCASE("single sample has zero spread") {
    const std::vector<FeatureVector> one = {{3.0, 7.0, 11.0}};
    const auto s = feature_stats(std::span<const FeatureVector>(one));
    for (double sd : s.stddev) CHECK(sd == 0.0);
    CHECK(s.mean[1] == 7.0);
  }
  SUBCASE("population standard deviation") {
    const auto data = column({1.0, 3.0});
    const auto s = feature_stats(std::span<const FeatureVector>(data));
    CHECK(s.mean[0] == doctest::Approx(2.0));
    CHECK(s.stddev[0] == doctest::Approx(1.0));
  }
  SUBCASE("constant column gets padded edges") {
    const auto data = column({5.0, 5.0, 5.0});
    const auto s = feature_stats(std::span<const FeatureVector>(data));
    CHECK(s.stddev[0] == 0.0);
    CHECK(s.edges[0][0] == 5.0);
    for (std::size_t b = 1; b <= kHistogramBins; ++b) {
      CHECK(s.edges[0][b] > s.edges[0][b - 1]);
      CHECK(s.edges[0][b] - s.edges[0][b - 1] == doctest::Approx(kEdgeEpsilon).epsilon(1e-3));
    }
    CHECK(s.bin_props[0][0] == 1.0);
  }
  SUBCASE("edges are nearest-rank deciles") {
    std::vector<FeatureVector> data;
    for (int v = 1; v <= 100; ++v) data.push_back({static_cast<double>(v), 0.0, 0.0});
    const auto s = feature_stats(std::span<const FeatureVector>(data));
    CHECK(s.edges[0][0] == 1.0);
    CHECK(s.edges[0][1] == 10.0);
    CHECK(s.edges[0][5] == 50.0);
    CHECK(s.edges[0][10] == 100.0);
  }
}

TEST_CASE("feature_stats edges strictly increasing and bin shares sum to one (property)") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 200);
  std::uniform_int_distribution<int> small(0, 3);
  std::lognormal_distribution<double> wide(10.0, 4.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<FeatureVector> data(static_cast<std::size_t>(size(rng)));
    for (auto& x : data) x = {wide(rng), static_cast<double>(small(rng)), 1e8 + small(rng)};
    const auto s = feature_stats(std::span<const FeatureVector>(data));
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double sum = 0.0;
      for (std::size_t b = 0; b < kHistogramBins; ++b) {
        REQUIRE(s.edges[f][b + 1] > s.edges[f][b]);
        sum += s.bin_props[f][b];
      }
      REQUIRE(sum == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("zscore_normalize") {
  FeatureStats s;
  s.mean = {1.0, 2.0, 3.0};
  s.stddev = {2.0, 0.0, 4.0};
  const auto at_mean = zscore_normalize({1.0, 2.0, 3.0}, s);
  CHECK(at_mean == FeatureVector{0.0, 0.0, 0.0});
  const auto one_sd = zscore_normalize({3.0, 99.0, 7.0}, s);
  CHECK(one_sd[0] == doctest::Approx(1.0));
  CHECK(one_sd[1] == 0.0);  // degenerate feature
  CHECK(one_sd[2] == doctest::Approx(1.0));
}

TEST_CASE("nearest_rank uses ceil(q n)") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(nearest_rank(v, 0.99) == 99.0);
  CHECK(nearest_rank(v, 0.5) == 50.0);
  CHECK(nearest_rank(v, 0.0) == 1.0);
  CHECK(nearest_rank(v, 1.0) == 100.0);
}

TEST_CASE("check_kpi rejects negative and non-finite values") {
  UserKpi k;
  CHECK_NOTHROW(check_kpi(k));
  k.tx_packets = -1;
  CHECK_THROWS_AS(check_kpi(k), ValidationError);
  k.tx_packets = 0;
  k.tx_bitrate_mbps = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(check_kpi(k), ValidationError);
}
