#include <gtest/gtest.h>

#include <cmath>

#include "dtnsim/simulator.hpp"
#include "dtnsim/workload.hpp"

using namespace dtnsim;

namespace {

Catalog make_catalog(int n, double rate) {
  Catalog c;
  for (int i = 0; i < n; ++i) c.add({"o" + std::to_string(i), i, 0, rate});
  return c;
}

SimConfig config(Strategy s) {
  SimConfig c;
  c.strategy = s;
  return c;
}

void expect_conserved(const SimReport& r) {
  EXPECT_EQ(r.bytes_total, r.bytes_local + r.bytes_peer + r.bytes_origin + r.bytes_prefetch + r.bytes_stream);
  EXPECT_EQ(r.origin_queue_bytes, r.bytes_origin);
  EXPECT_LE(r.max_in_service, 10u);
  if (r.prefetch_bytes > 0) {
    EXPECT_EQ(r.prefetch_bytes, r.prefetch_consumed + r.prefetch_wrong + r.prefetch_late + r.prefetch_evicted);
  }
}

SyntheticTrace small_workload(std::uint64_t seed) {
  WorkloadSpec s;
  s.n_users = 40;
  s.duration = 10 * 86400;
  s.program_bytes = 2e10;
  s.rng_seed = seed;
  return synthesize_trace(s);
}

}  // namespace

TEST(Simulator, EmptyTrace) {
  auto cat = make_catalog(1, 1);
  for (auto s : {Strategy::NoCache, Strategy::HPM}) {
    auto r = simulate({}, cat, Topology::standard(1000), config(s));
    EXPECT_EQ(r.requests, 0u);
    EXPECT_EQ(r.bytes_total, 0u);
    EXPECT_TRUE(std::isnan(r.recall));
  }
}

TEST(Simulator, EleventhRequestWaitsForAWorker) {
  // 11 simultaneous 0.5 GB requests to one 40 Gbps client: ten share the
  // server port and finish together after 1 s.
  auto cat = make_catalog(11, 5e6);
  std::vector<AccessRecord> trace;
  for (int i = 0; i < 11; ++i) trace.push_back({1000.0, "u", "o" + std::to_string(i), {0, 100}});
  auto r = simulate(trace, cat, Topology::standard(0, NetworkCondition::Best, {40}), config(Strategy::NoCache));
  EXPECT_EQ(r.latency_samples, 11u);
  EXPECT_EQ(r.max_in_service, 10u);
  EXPECT_NEAR(r.p99_latency_s, 1.0, 1e-9);
  EXPECT_NEAR(r.mean_latency_s, 1.0 / 11.0, 1e-9);
  expect_conserved(r);
}

TEST(Simulator, NoCacheSendsEverythingToOrigin) {
  auto w = small_workload(3);
  auto r = simulate(w.records, w.catalog, Topology::standard(Bytes{1} << 40), config(Strategy::NoCache));
  EXPECT_EQ(r.requests, w.records.size());
  EXPECT_DOUBLE_EQ(r.normalized_origin_requests, 1.0);
  EXPECT_EQ(r.bytes_origin, r.bytes_total);
  expect_conserved(r);
}

TEST(Simulator, RepeatedRequestHitsLocally) {
  auto cat = make_catalog(1, 1000);
  std::vector<AccessRecord> trace{{0, "u", "o0", {0, 100}}, {10000, "u", "o0", {0, 100}}};
  auto r = simulate(trace, cat, Topology::standard(1 << 20), config(Strategy::CacheOnly));
  EXPECT_EQ(r.origin_requests, 1u);
  EXPECT_EQ(r.bytes_local, 100000u);
  EXPECT_DOUBLE_EQ(r.local_access_fraction, 0.5);
}

TEST(Simulator, PeerServesWhenFaster) {
  auto cat = make_catalog(1, 1000);
  // Find two users homed on different DTNs.
  std::string a = "u0", b;
  for (int i = 1; b.empty(); ++i) {
    auto cand = "u" + std::to_string(i);
    if (fnv1a(cand) % 6 != fnv1a(a) % 6) b = cand;
  }
  std::vector<AccessRecord> trace{{0, a, "o0", {0, 100}}, {10000, b, "o0", {0, 100}}};
  auto r = simulate(trace, cat, Topology::standard(1 << 20), config(Strategy::CacheOnly));
  // The peer link is never slower than the origin link for the second user.
  EXPECT_EQ(r.origin_requests, 1u);
  EXPECT_EQ(r.bytes_peer, 100000u);
  expect_conserved(r);
}

TEST(Simulator, DeterministicAcrossRuns) {
  auto w = small_workload(5);
  auto topo = Topology::standard(Bytes{20} << 30);
  for (auto s : {Strategy::CacheOnly, Strategy::MD1, Strategy::MD2, Strategy::HPM}) {
    auto a = simulate(w.records, w.catalog, topo, config(s));
    auto b = simulate(w.records, w.catalog, topo, config(s));
    EXPECT_EQ(a.bytes_local, b.bytes_local) << to_string(s);
    EXPECT_EQ(a.origin_requests, b.origin_requests) << to_string(s);
    EXPECT_EQ(a.prefetch_bytes, b.prefetch_bytes) << to_string(s);
    EXPECT_EQ(a.events, b.events) << to_string(s);
    EXPECT_DOUBLE_EQ(a.mean_throughput_mbps, b.mean_throughput_mbps) << to_string(s);
    expect_conserved(a);
  }
}

TEST(Simulator, PerfectlyPeriodicUserIsPrefetched) {
  auto cat = make_catalog(1, 100);
  std::vector<AccessRecord> trace;
  for (std::int64_t g = 3600; g <= 14 * 86400; g += 3600)
    trace.push_back({static_cast<double>(g + 30), "u", "o0", {g - 3600, g}});
  auto r = simulate(trace, cat, Topology::standard(Bytes{1} << 30), config(Strategy::HPM));
  ASSERT_GT(r.prefetch_bytes, 0u);
  EXPECT_GT(r.recall, 0.99);
  EXPECT_EQ(r.prefetch_late, 0u);
  EXPECT_EQ(r.prefetch_evicted, 0u);
  // Requests after the program pattern is established are served by prefetches.
  EXPECT_GT(r.bytes_prefetch, r.bytes_total / 3);
  expect_conserved(r);
}

TEST(Simulator, TinyCacheEvictsPrefetches) {
  // Two interleaved periodic objects; the cache holds one hour of one object.
  auto cat = make_catalog(2, 100);
  std::vector<AccessRecord> trace;
  for (std::int64_t g = 3600; g <= 12 * 86400; g += 3600) {
    trace.push_back({static_cast<double>(g + 30), "u", "o0", {g - 3600, g}});
    trace.push_back({static_cast<double>(g + 40), "u", "o1", {g - 3600, g}});
  }
  auto r = simulate(trace, cat, Topology::standard(360000), config(Strategy::HPM));
  ASSERT_GT(r.prefetch_bytes, 0u);
  EXPECT_GT(r.prefetch_evicted, 0u);
  expect_conserved(r);
}

TEST(Simulator, RealTimePollsAreStreamed) {
  auto cat = make_catalog(1, 10);
  std::vector<AccessRecord> trace;
  for (std::int64_t g = 60; g <= 6 * 3600; g += 60)
    trace.push_back({static_cast<double>(g + 2), "u", "o0", {g - 60, g}});
  auto r = simulate(trace, cat, Topology::standard(Bytes{1} << 30), config(Strategy::HPM));
  EXPECT_EQ(r.streams_created, 1u);
  EXPECT_GT(r.stream_origin_reads, 300u);
  EXPECT_LE(r.stream_origin_reads, static_cast<std::uint64_t>(std::ceil(r.stream_active_s / 60)));
  EXPECT_LT(r.origin_requests, 10u);
  EXPECT_GT(r.bytes_stream, r.bytes_total * 9 / 10);
  expect_conserved(r);
  auto cache_only = simulate(trace, cat, Topology::standard(Bytes{1} << 30), config(Strategy::CacheOnly));
  EXPECT_EQ(cache_only.origin_requests, trace.size());
}

TEST(Simulator, RejectsBadInput) {
  auto cat = make_catalog(1, 1);
  EXPECT_THROW(simulate({{0, "u", "zz", {0, 1}}}, cat, Topology::standard(1), config(Strategy::HPM)),
               std::invalid_argument);
  auto c = config(Strategy::HPM);
  c.traffic_factor = 0;
  EXPECT_THROW(simulate({}, cat, Topology::standard(1), c), std::invalid_argument);
  EXPECT_EQ(parse_strategy("MD2"), Strategy::MD2);
  EXPECT_THROW(parse_strategy("x"), std::invalid_argument);
}
