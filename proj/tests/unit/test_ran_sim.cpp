#include <doctest.h>

#include <numeric>
#include <random>

#include "slicever/ran_sim.h"

using namespace slicever;
using namespace slicever::sim;

namespace {

std::vector<SchedCandidate> backlogged(std::size_t n, double eff = 1.0) {
  std::vector<SchedCandidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({static_cast<std::int64_t>(i), kSaturated, eff, 0.0, 0.0});
  }
  return out;
}

int total(const std::vector<std::int32_t>& v) { return std::accumulate(v.begin(), v.end(), 0); }

double slice_mean_buffer(const KpiReport& r, SliceId s) {
  double sum = 0.0;
  int n = 0;
  for (const auto& u : r.users) {
    if (u.slice != s) continue;
    sum += static_cast<double>(u.dl_buffer_bytes);
    ++n;
  }
  return sum / n;
}

}  // namespace

TEST_CASE("packets_per_tti") {
  SliceTrafficProfile p{800.0, 1000, 0.0, 1.0};
  CHECK(packets_per_tti(p) == doctest::Approx(0.1));
}

TEST_CASE("arrivals") {
  std::mt19937_64 rng(5);
  SUBCASE("zero rate gives zero bits") {
    UserState u;
    u.burst_on = true;
    SliceTrafficProfile p{0.0, 1500, 0.0, 1.0};
    for (int t = 0; t < 1000; ++t) REQUIRE(arrivals(p, u, rng) == 0);
  }
  SUBCASE("absorbing off state") {
    UserState u;
    u.burst_on = false;
    SliceTrafficProfile p{4000.0, 1500, 0.0, 0.0};
    for (int t = 0; t < 1000; ++t) REQUIRE(arrivals(p, u, rng) == 0);
  }
  SUBCASE("Poisson mean matches the configured rate") {
    UserState u;
    u.burst_on = true;
    SliceTrafficProfile p{800.0, 1000, 0.0, 1.0};
    const int ttis = 100000;
    std::int64_t bits = 0;
    for (int t = 0; t < ttis; ++t) bits += arrivals(p, u, rng);
    const double packets_per = static_cast<double>(bits) / (8.0 * 1000.0) / ttis;
    CHECK(std::abs(packets_per - 0.1) / 0.1 < 0.05);
  }
  SUBCASE("on/off source spends the stationary share ON") {
    UserState u;
    SliceTrafficProfile p{50.0, 200, 0.3, 0.1};
    int on = 0;
    const int ttis = 200000;
    for (int t = 0; t < ttis; ++t) {
      arrivals(p, u, rng);
      on += u.burst_on ? 1 : 0;
    }
    CHECK(static_cast<double>(on) / ttis == doctest::Approx(0.25).epsilon(0.05));
  }
}

TEST_CASE("PacketQueue completes packets only when fully drained") {
  PacketQueue q;
  q.push(100, 3);
  CHECK(q.bits() == 300);
  CHECK(q.serve(150) == 1);
  CHECK(q.bits() == 150);
  CHECK(q.serve(40) == 0);
  CHECK(q.serve(1000) == 2);
  CHECK(q.empty());
}

TEST_CASE("schedule_rr") {
  CHECK(schedule_rr(backlogged(3), 12, 0) == std::vector<std::int32_t>{4, 4, 4});
  CHECK(schedule_rr(backlogged(3), 12, 2) == std::vector<std::int32_t>{4, 4, 4});
  CHECK(schedule_rr(backlogged(3), 10, 0) == std::vector<std::int32_t>{4, 3, 3});
  CHECK(schedule_rr(backlogged(3), 10, 1) == std::vector<std::int32_t>{3, 4, 3});
  std::vector<SchedCandidate> idle = backlogged(2);
  for (auto& c : idle) c.need_prbs = 0;
  CHECK(total(schedule_rr(idle, 5, 0)) == 0);
  CHECK(total(schedule_rr({}, 5, 0)) == 0);
}

TEST_CASE("schedule_wf") {
  std::vector<SchedCandidate> two = backlogged(2);
  two[0].spectral_eff = 2.0;
  two[1].spectral_eff = 1.0;
  CHECK(schedule_wf(two, 3) == std::vector<std::int32_t>{1, 2});
  CHECK(schedule_wf(backlogged(1), 7) == std::vector<std::int32_t>{7});
  CHECK(schedule_wf(backlogged(2), 4) == std::vector<std::int32_t>{2, 2});
}

TEST_CASE("schedule_pf") {
  std::vector<SchedCandidate> rate = backlogged(2);
  rate[0].spectral_eff = 3.0;
  rate[0].ema_throughput_mbps = rate[1].ema_throughput_mbps = 5.0;
  CHECK(schedule_pf(rate, 1, 0.25)[0] == 1);

  std::vector<SchedCandidate> starved = backlogged(2);
  starved[0].ema_throughput_mbps = 10.0;
  starved[1].ema_throughput_mbps = 1.0;
  CHECK(schedule_pf(starved, 1, 0.25)[1] == 1);

  std::vector<SchedCandidate> one = backlogged(3);
  one[0].need_prbs = 0;
  one[2].need_prbs = 0;
  CHECK(schedule_pf(one, 9, 0.25) == std::vector<std::int32_t>{0, 9, 0});
}

TEST_CASE("schedulers conserve PRBs and respect need caps (property)") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> n_users(0, 8);
  std::uniform_int_distribution<int> prbs(0, 60);
  std::uniform_int_distribution<int> need(0, 12);
  std::uniform_real_distribution<double> eff(36.0, 1404.0);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<SchedCandidate> users(static_cast<std::size_t>(n_users(rng)));
    std::int64_t demand = 0;
    for (std::size_t i = 0; i < users.size(); ++i) {
      users[i] = {static_cast<std::int64_t>(i), need(rng), eff(rng), eff(rng) * need(rng), eff(rng) / 100.0};
      demand += users[i].need_prbs;
    }
    const int p = prbs(rng);
    for (const auto& grants : {schedule_rr(users, p, static_cast<std::uint64_t>(trial)), schedule_wf(users, p),
                               schedule_pf(users, p, 0.25)}) {
      REQUIRE(grants.size() == users.size());
      REQUIRE(total(grants) == std::min<std::int64_t>(p, demand));
      for (std::size_t i = 0; i < users.size(); ++i) {
        REQUIRE(grants[i] >= 0);
        REQUIRE(grants[i] <= users[i].need_prbs);
      }
    }
  }
}

TEST_CASE("RanSimulator run_window") {
  SimConfig cfg;
  cfg.seed = 9;

  SUBCASE("a slice with no PRBs has zero bitrate and accumulates its arrivals") {
    RanSimulator sim(cfg);
    SlicingAction a = RanSimulator::equal_split(cfg.total_prbs, SchedulerPolicy::kRoundRobin);
    a[SliceId::kUrllc].prbs = 0;
    const auto r = sim.run_window(a);
    for (std::size_t i = 0; i < r.report.users.size(); ++i) {
      const auto& u = r.report.users[i];
      if (u.slice != SliceId::kUrllc) continue;
      CHECK(u.tx_bitrate_mbps == 0.0);
      CHECK(u.tx_packets == 0);
      CHECK(u.dl_buffer_bytes * 8 == r.trace.users[i].arrived_bits);
    }
  }

  SUBCASE("ample capacity drains the buffer") {
    RanSimulator sim(cfg);
    SlicingAction a;
    a[SliceId::kEmbb].prbs = 0;
    a[SliceId::kMmtc].prbs = 10;
    a[SliceId::kUrllc].prbs = 40;
    int empty_windows = 0;
    for (int w = 0; w < 20; ++w) {
      const auto r = sim.run_window(a);
      empty_windows += slice_mean_buffer(r.report, SliceId::kUrllc) == 0.0 ? 1 : 0;
    }
    CHECK(empty_windows >= 19);
  }

  SUBCASE("deterministic under seed") {
    RanSimulator a(cfg), b(cfg);
    for (int w = 0; w < 10; ++w) {
      const auto act = RanSimulator::equal_split(cfg.total_prbs, static_cast<SchedulerPolicy>(w % 3));
      REQUIRE(a.run_window(act).report == b.run_window(act).report);
    }
  }

  SUBCASE("an invalid action is rejected and the previous one applied") {
    RanSimulator sim(cfg);
    SlicingAction good = RanSimulator::equal_split(cfg.total_prbs, SchedulerPolicy::kWaterfilling);
    sim.run_window(good);
    SlicingAction bad = good;
    bad[SliceId::kEmbb].prbs = 100;
    const auto r = sim.run_window(bad);
    CHECK(r.report.action_rejected);
    CHECK_FALSE(r.violations.empty());
    CHECK(r.trace.applied_action == good);
  }
}

TEST_CASE("window accounting invariants hold under random actions (property)") {
  SimConfig cfg;
  cfg.seed = 21;
  RanSimulator sim(cfg);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> prb(0, 25);
  std::uniform_int_distribution<int> sched(0, 2);
  std::vector<std::int64_t> queue_end(sim.users().size(), 0);
  for (int w = 0; w < 40; ++w) {
    SlicingAction a;
    for (auto& s : a.slices) s = {prb(rng), static_cast<SchedulerPolicy>(sched(rng))};
    const auto r = sim.run_window(a);
    REQUIRE(r.report.window_id == w);
    REQUIRE(r.report.users.size() == 18);
    const auto& applied = r.trace.applied_action;
    for (SliceId s : kAllSlices) {
      REQUIRE(r.trace.prbs_granted[index_of(s)] <= r.trace.prbs_offered[index_of(s)]);
      REQUIRE(r.trace.prbs_offered[index_of(s)] == static_cast<std::int64_t>(applied[s].prbs) * cfg.tti_per_window);
    }
    for (std::size_t i = 0; i < r.trace.users.size(); ++i) {
      const auto& t = r.trace.users[i];
      REQUIRE(t.queue_start_bits == queue_end[i]);
      REQUIRE(t.queue_start_bits + t.arrived_bits - t.served_bits == t.queue_end_bits);
      REQUIRE(t.idle_grants == 0);
      REQUIRE(r.report.users[i].dl_buffer_bytes == t.queue_end_bits / 8);
      REQUIRE(r.report.users[i].tx_bitrate_mbps ==
              doctest::Approx(static_cast<double>(t.served_bits) / cfg.window_seconds() / 1e6));
      queue_end[i] = t.queue_end_bits;
    }
  }
}

TEST_CASE("drift injection") {
  SimConfig cfg;
  cfg.seed = 4;
  const auto act = RanSimulator::equal_split(cfg.total_prbs, SchedulerPolicy::kRoundRobin);

  SUBCASE("unknown parameter is rejected") {
    RanSimulator sim(cfg);
    CHECK_THROWS_AS(sim.inject_drift({SliceId::kMmtc, "colour", 2.0, 0}), ValidationError);
  }

  SUBCASE("multiplier 1 is an identity") {
    RanSimulator a(cfg), b(cfg);
    b.inject_drift({SliceId::kMmtc, "mean_arrival_kbps", 1.0, 3});
    for (int w = 0; w < 10; ++w) REQUIRE(a.run_window(act).report == b.run_window(act).report);
  }

  SUBCASE("start beyond the run has no effect") {
    RanSimulator a(cfg), b(cfg);
    b.inject_drift({SliceId::kEmbb, "mean_arrival_kbps", 3.0, 1000});
    for (int w = 0; w < 10; ++w) REQUIRE(a.run_window(act).report == b.run_window(act).report);
  }

  SUBCASE("tripled mMTC load raises mMTC traffic and, when service is tight, its buffer") {
    SlicingAction tight = act;
    tight[SliceId::kMmtc].prbs = 1;
    for (const auto& service : {act, tight}) {
      RanSimulator base(cfg), drifted(cfg);
      drifted.inject_drift({SliceId::kMmtc, "mean_arrival_kbps", 3.0, 0});
      double base_buf = 0.0, drift_buf = 0.0, base_rate = 0.0, drift_rate = 0.0;
      for (int w = 0; w < 10; ++w) {
        const auto b = base.run_window(service).report;
        const auto d = drifted.run_window(service).report;
        base_buf += slice_mean_buffer(b, SliceId::kMmtc);
        drift_buf += slice_mean_buffer(d, SliceId::kMmtc);
        for (std::size_t i = 6; i < 12; ++i) {
          base_rate += b.users[i].tx_bitrate_mbps;
          drift_rate += d.users[i].tx_bitrate_mbps;
        }
      }
      CHECK(drift_rate > 2.0 * base_rate);
      if (service == tight) {
        CHECK(drift_buf > base_buf);
      } else {
        // The default share drains mMTC queues every window.
        CHECK(drift_buf >= base_buf);
      }
    }
    RanSimulator sim(cfg);
    sim.inject_drift({SliceId::kMmtc, "mean_arrival_kbps", 3.0, 0});
    sim.run_window(act);
    CHECK(sim.effective_profile(SliceId::kMmtc).mean_arrival_kbps == doctest::Approx(150.0));
  }

  SUBCASE("PF serves at least as much as RR with saturated, heterogeneous users") {
    SimConfig sat = cfg;
    for (auto& t : sat.traffic) t = {20000.0, 1500, 0.0, 1.0};
    RanSimulator rr(sat), pf(sat);
    double rr_bits = 0.0, pf_bits = 0.0;
    for (int w = 0; w < 200; ++w) {
      for (const auto& u : rr.run_window(RanSimulator::equal_split(50, SchedulerPolicy::kRoundRobin)).report.users) {
        rr_bits += u.tx_bitrate_mbps;
      }
      for (const auto& u :
           pf.run_window(RanSimulator::equal_split(50, SchedulerPolicy::kProportionalFair)).report.users) {
        pf_bits += u.tx_bitrate_mbps;
      }
    }
    CHECK(pf_bits >= rr_bits);
  }
}
