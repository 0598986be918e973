#include <doctest.h>

#include <cmath>
#include <random>

#include "slicever/datagen.h"
#include "slicever/verifier.h"

using namespace slicever;
using namespace slicever::verify;

namespace {

// A model whose classifier always answers `forced`, with identity normalization.
VerifierModel stub_model(SliceId forced) {
  tree::TreeNode leaf;
  leaf.counts[index_of(forced)] = 1;
  leaf.probs[index_of(forced)] = 1.0;
  VerifierModel m;
  m.classifier = tree::Tree{{leaf}};
  m.normalization.stddev = {1.0, 1.0, 1.0};
  return m;
}

UserKpi kpi(SliceId s, double rate, std::int64_t packets, std::int64_t buffer, std::int64_t window = 0) {
  UserKpi k;
  k.slice = s;
  k.tx_bitrate_mbps = rate;
  k.tx_packets = packets;
  k.dl_buffer_bytes = buffer;
  k.window_id = window;
  return k;
}

std::vector<UserKpi> separated_corpus(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<UserKpi> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    out.push_back(kpi(SliceId::kEmbb, 20.0 + noise(rng), 400, 90000));
    out.push_back(kpi(SliceId::kMmtc, 0.1 + std::abs(noise(rng)), 10, 100));
    out.push_back(kpi(SliceId::kUrllc, 1.0 + noise(rng), 120, 0));
  }
  return out;
}

}  // namespace

TEST_CASE("psi") {
  const std::vector<double> p = {0.5, 0.5}, q = {0.9, 0.1};
  CHECK(psi(p, q) == doctest::Approx(0.8789).epsilon(1e-4));
  CHECK(psi(q, q) == 0.0);
  const std::vector<double> with_zero = {1.0, 0.0};
  CHECK(std::isfinite(psi(with_zero, q)));
}

TEST_CASE("psi is nonnegative (property)") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> a(10), b(10);
    double sa = 0.0, sb = 0.0;
    for (int i = 0; i < 10; ++i) {
      a[i] = trial % 3 == 0 && i % 2 == 0 ? 0.0 : u(rng);
      b[i] = u(rng);
      sa += a[i];
      sb += b[i];
    }
    for (int i = 0; i < 10; ++i) {
      a[i] /= sa;
      b[i] /= sb;
    }
    REQUIRE(psi(a, b) >= 0.0);
    REQUIRE(psi(a, a) == 0.0);
  }
}

TEST_CASE("check_drift") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> ref_dist(10.0, 2.0);
  std::vector<FeatureVector> ref;
  for (int i = 0; i < 5000; ++i) ref.push_back({ref_dist(rng), ref_dist(rng), ref_dist(rng)});
  const auto stats = feature_stats(std::span<const FeatureVector>(ref));

  SUBCASE("insufficient data gives no decision") {
    DriftState st(500);
    for (int i = 0; i < 249; ++i) st.push(SliceId::kEmbb, ref[i]);
    CHECK_FALSE(check_drift(st, SliceId::kEmbb, stats).evaluated);
    st.push(SliceId::kEmbb, ref[249]);
    CHECK(check_drift(st, SliceId::kEmbb, stats).evaluated);
  }
  SUBCASE("same distribution stays under threshold") {
    DriftState st(500);
    for (int i = 0; i < 500; ++i) st.push(SliceId::kEmbb, {ref_dist(rng), ref_dist(rng), ref_dist(rng)});
    const auto c = check_drift(st, SliceId::kEmbb, stats);
    CHECK_FALSE(c.over_threshold);
    for (double v : c.psi) CHECK(v < 0.1);
  }
  SUBCASE("window is bounded") {
    DriftState st(50);
    for (int i = 0; i < 500; ++i) st.push(SliceId::kMmtc, ref[i]);
    CHECK(st.slice(SliceId::kMmtc).samples.size() == 50);
  }
}

TEST_CASE("drift breach needs consecutive evaluations") {
  VerifierModel model = stub_model(SliceId::kEmbb);
  std::vector<FeatureVector> ref;
  for (int i = 0; i < 100; ++i) ref.push_back({static_cast<double>(i), static_cast<double>(i), static_cast<double>(i)});
  for (auto& r : model.slice_reference) r = feature_stats(std::span<const FeatureVector>(ref));

  VerifierParams params;
  params.drift_window = 100;
  VerifierState state(params);
  auto fill = [&](double shift) {
    for (int i = 0; i < 100; ++i) {
      const double v = shift + i;
      state.drift.push(SliceId::kEmbb, {v, v, v});
    }
  };
  auto eval = [&] { return evaluate_drift(model, state)[0]; };

  fill(1000.0);
  CHECK(eval().over_threshold);
  CHECK_FALSE(state.drift.slice(SliceId::kEmbb).breached);
  fill(0.0);
  CHECK_FALSE(eval().over_threshold);  // recovery resets the streak
  fill(1000.0);
  eval();
  eval();
  CHECK_FALSE(state.drift.slice(SliceId::kEmbb).breached);
  eval();
  CHECK(state.drift.slice(SliceId::kEmbb).breached);
  CHECK(verify_sample(model, state, kpi(SliceId::kEmbb, 1, 1, 1)).flags.drift);
  CHECK_FALSE(verify_sample(model, state, kpi(SliceId::kMmtc, 1, 1, 1)).flags.drift);
}

TEST_CASE("conflict cache") {
  ConflictCache cache(3, 0.1);
  CHECK_FALSE(cache.check_and_insert({0, 0, 0}, SliceId::kEmbb, 0));
  CHECK_FALSE(cache.check_and_insert({0, 0, 0}, SliceId::kEmbb, 1));
  CHECK(cache.check_and_insert({0.05, 0, 0}, SliceId::kMmtc, 2));
  CHECK_FALSE(cache.check_and_insert({0.5, 0, 0}, SliceId::kUrllc, 3));
  CHECK(cache.size() == 3);
  CHECK(cache.entries().front().window_id == 1);  // FIFO eviction
}

TEST_CASE("no conflict when every cached prediction agrees (property)") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    ConflictCache cache(200, 0.1);
    const SliceId s = slice_from_index(trial % 3);
    for (int i = 0; i < 300; ++i) REQUIRE_FALSE(cache.check_and_insert({z(rng), z(rng), z(rng)}, s, i));
  }
}

TEST_CASE("verify_sample flags") {
  const UserKpi sample = kpi(SliceId::kEmbb, 5.0, 40, 100);

  SUBCASE("clean path") {
    VerifierState state;
    const auto v = verify_sample(stub_model(SliceId::kEmbb), state, sample);
    CHECK_FALSE(v.flags.drift);
    CHECK_FALSE(v.flags.misclass);
    CHECK_FALSE(v.flags.conflict);
    CHECK(v.latency_us >= 0);
    CHECK(v.predicted_slice == SliceId::kEmbb);
  }
  SUBCASE("misclassification") {
    VerifierState state;
    const auto v = verify_sample(stub_model(SliceId::kUrllc), state, sample);
    CHECK(v.flags.misclass);
  }
  SUBCASE("conflict across two stub models") {
    VerifierState state;
    const auto first = verify_sample(stub_model(SliceId::kEmbb), state, sample);
    const auto second = verify_sample(stub_model(SliceId::kMmtc), state, sample);
    CHECK_FALSE(first.flags.conflict);
    CHECK(second.flags.conflict);
  }
  SUBCASE("the model is left untouched") {
    const auto model = stub_model(SliceId::kMmtc);
    const auto copy = model;
    VerifierState state;
    for (int i = 0; i < 100; ++i) verify_sample(model, state, sample);
    CHECK(model == copy);
    CHECK(state.cache.size() == 100);
  }
}

TEST_CASE("train_verifier") {
  const auto corpus = separated_corpus(200, 3);
  VerifierParams params;

  SUBCASE("full fraction on separable data is exact") {
    std::mt19937_64 rng(1);
    const auto model = train_verifier(corpus, 1.0, params, rng);
    CHECK(model.train_size == corpus.size());
    for (const auto& k : corpus) REQUIRE(predict_slice(model, features_of(k)) == k.slice);
  }
  SUBCASE("too small a fraction fails loudly") {
    std::mt19937_64 rng(1);
    CHECK_THROWS_WITH_AS(train_verifier(corpus, 0.05, params, rng), "insufficient support for class embb",
                         ValidationError);
  }
  SUBCASE("deterministic under seed") {
    std::mt19937_64 a(5), b(5);
    CHECK(train_verifier(corpus, 0.5, params, a) == train_verifier(corpus, 0.5, params, b));
  }
  SUBCASE("the tree classifier is available too") {
    std::mt19937_64 rng(1);
    params.classifier = ClassifierKind::kTree;
    const auto model = train_verifier(corpus, 0.5, params, rng);
    CHECK(std::holds_alternative<tree::Tree>(model.classifier));
  }
}

TEST_CASE("misclass flag is definitional on a trained model (property)") {
  datagen::GenConfig cfg = datagen::GenConfig::embb_oriented();
  cfg.n_samples = 3000;
  const auto corpus = datagen::sample_dataset(cfg);
  std::mt19937_64 rng(2);
  VerifierParams params;
  params.ensemble.rounds = 10;
  const auto model = train_verifier(corpus, 0.3, params, rng);
  VerifierState state(params);
  for (const auto& k : corpus) {
    const auto v = verify_sample(model, state, k);
    REQUIRE(v.flags.misclass == (v.predicted_slice != v.true_slice));
    REQUIRE(v.latency_us >= 0);
  }
}

TEST_CASE("Escalator") {
  Verdict ok, wrong;
  wrong.flags.misclass = true;

  SUBCASE("sustained misclassification escalates once") {
    Escalator esc;
    std::vector<bus::EscalationMsg> all;
    for (int w = 0; w < 40; ++w) {
      for (int i = 0; i < 10; ++i) esc.observe(i < 3 ? wrong : ok);
      for (auto& e : esc.close_window(w, false)) all.push_back(e);
    }
    REQUIRE(all.size() == 1);
    CHECK(all[0].reason == "misclass_rate");
    CHECK(all[0].window_id == 19);
  }
  SUBCASE("an isolated misclassification does not escalate") {
    Escalator esc;
    for (int w = 0; w < 40; ++w) {
      for (int i = 0; i < 10; ++i) esc.observe(w == 5 && i == 0 ? wrong : ok);
      CHECK(esc.close_window(w, false).empty());
    }
  }
  SUBCASE("drift escalates immediately") {
    Escalator esc;
    const auto e = esc.close_window(0, true);
    REQUIRE(e.size() == 1);
    CHECK(e[0].reason == "drift");
    CHECK(esc.close_window(1, true).empty());
  }
  SUBCASE("a conflict verdict escalates immediately") {
    Escalator esc;
    Verdict c;
    c.window_id = 4;
    c.flags.conflict = true;
    const auto e = esc.observe(c);
    REQUIRE(e.size() == 1);
    CHECK(e[0].reason == "conflict");
    CHECK(e[0].window_id == 4);
  }
}

TEST_CASE("latency_stats") {
  std::vector<std::int64_t> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const auto s = latency_stats(v);
  CHECK(s.p99 == 99);
  CHECK(s.p50 == 50);
  CHECK(s.p95 == 95);
  CHECK(s.max == 100);

  const std::vector<std::int64_t> one = {7};
  CHECK(latency_stats(one) == LatencyStats{7, 7, 7, 7});
  const std::vector<std::int64_t> flat(20, 3);
  CHECK(latency_stats(flat) == LatencyStats{3, 3, 3, 3});
  CHECK_THROWS(latency_stats(std::span<const std::int64_t>()));
}
