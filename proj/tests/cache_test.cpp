#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dtnsim/cache.hpp"
#include "oracles/eviction.hpp"

using namespace dtnsim;

namespace {
Catalog unit_catalog(int n) {
  Catalog c;
  for (int i = 0; i < n; ++i) c.add({"o" + std::to_string(i), 1, i, 1.0});
  return c;
}

std::vector<std::string> ids(const std::vector<CachedPiece>& v) {
  std::vector<std::string> out;
  for (const auto& p : v) out.push_back(p.object_id);
  return out;
}
}  // namespace

TEST(Cache, PartialHit) {
  auto cat = unit_catalog(1);
  CacheStore c(1'000'000, EvictionPolicy::LRU, cat);
  c.insert("o0", {0, 7200}, 1);
  auto r = c.lookup("o0", {3600, 10800}, 2);
  EXPECT_EQ(r.hit, IntervalSet(Interval{3600, 7200}));
  EXPECT_EQ(r.miss, IntervalSet(Interval{7200, 10800}));
  EXPECT_EQ(r.bytes_hit, 3600u);
  EXPECT_EQ(r.bytes_miss, 3600u);
}

TEST(Cache, EmptyStoreMissesEverything) {
  auto cat = unit_catalog(1);
  CacheStore c(100, EvictionPolicy::LRU, cat);
  auto r = c.lookup("o0", {0, 50}, 0);
  EXPECT_TRUE(r.hit.empty());
  EXPECT_EQ(r.bytes_miss, 50u);
}

TEST(Cache, SupersetIsFullHit) {
  auto cat = unit_catalog(1);
  CacheStore c(100, EvictionPolicy::LRU, cat);
  c.insert("o0", {0, 100}, 0);
  auto r = c.lookup("o0", {10, 20}, 1);
  EXPECT_EQ(r.bytes_hit, 10u);
  EXPECT_EQ(r.bytes_miss, 0u);
  EXPECT_TRUE(r.miss.empty());
}

TEST(Cache, LruEvictsOldest) {
  auto cat = unit_catalog(3);
  CacheStore c(2, EvictionPolicy::LRU, cat);
  c.insert("o0", {0, 1}, 10);
  c.insert("o1", {0, 1}, 20);
  auto ev = c.insert("o2", {0, 1}, 30);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].object_id, "o0");
  EXPECT_EQ(ev[0].tr, (Interval{0, 1}));
}

TEST(Cache, LfuEvictsLeastFrequent) {
  auto cat = unit_catalog(3);
  CacheStore c(2, EvictionPolicy::LFU, cat);
  c.insert("o0", {0, 1}, 10);
  c.insert("o1", {0, 1}, 20);
  for (int i = 0; i < 4; ++i) c.lookup("o0", {0, 1}, 5);  // count 5, recency stays 10
  auto ev = c.insert("o2", {0, 1}, 30);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].object_id, "o1");
}

TEST(Cache, AdjacentInsertCoalesces) {
  auto cat = unit_catalog(1);
  CacheStore c(100'000, EvictionPolicy::LRU, cat);
  c.insert("o0", {0, 3600}, 1);
  c.insert("o0", {3600, 7200}, 2);
  auto content = c.contents();
  ASSERT_EQ(content.size(), 1u);
  EXPECT_EQ(content[0].tr, (Interval{0, 7200}));
  EXPECT_EQ(content[0].access_count, 2u);
  EXPECT_EQ(content[0].last_access, 2);
  EXPECT_EQ(c.used(), 7200u);
}

TEST(Cache, OversizedSegmentRejectedAndStoreUnchanged) {
  auto cat = unit_catalog(1);
  CacheStore c(100, EvictionPolicy::LRU, cat);
  c.insert("o0", {0, 40}, 1);
  EXPECT_THROW(c.insert("o0", {0, 101}, 2), CapacityError);
  EXPECT_EQ(c.used(), 40u);
  EXPECT_EQ(c.holdings("o0"), IntervalSet(Interval{0, 40}));
}

TEST(Cache, MergedRunTooLargeKeepsNewRange) {
  auto cat = unit_catalog(1);
  CacheStore c(100, EvictionPolicy::LRU, cat);
  c.insert("o0", {0, 80}, 1);
  auto ev = c.insert("o0", {50, 150}, 2);
  EXPECT_EQ(c.holdings("o0"), IntervalSet(Interval{50, 150}));
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].tr, (Interval{0, 50}));
  EXPECT_LE(c.used(), c.capacity());
}

TEST(Cache, VictimsMatchReferenceOnUnitWorkloads) {
  for (auto policy : {EvictionPolicy::LRU, EvictionPolicy::LFU}) {
    std::mt19937_64 gen(policy == EvictionPolicy::LRU ? 1 : 2);
    for (int round = 0; round < 40; ++round) {
      const int n_objects = 3 + static_cast<int>(gen() % 15);
      const std::size_t cap = 1 + gen() % 8;
      auto cat = unit_catalog(n_objects);
      CacheStore c(cap, policy, cat);
      oracle::UnitCache ref{cap, policy == EvictionPolicy::LFU, {}, 0};
      double now = 0;
      for (int op = 0; op < 500; ++op) {
        now += static_cast<double>(gen() % 3);  // repeated timestamps exercise tie-breaks
        const std::string id = "o" + std::to_string(gen() % static_cast<std::uint64_t>(n_objects));
        if (gen() % 2) {
          const bool hit = c.lookup(id, {0, 1}, now).bytes_hit == 1;
          ASSERT_EQ(hit, ref.lookup(id, now)) << "round " << round << " op " << op;
        } else {
          ASSERT_EQ(ids(c.insert(id, {0, 1}, now)), ref.insert(id, now)) << "round " << round << " op " << op;
        }
        ASSERT_LE(c.used(), c.capacity());
      }
    }
  }
}

TEST(Cache, DoublingCapacityNeverLowersLruHits) {
  std::mt19937_64 gen(9);
  for (int round = 0; round < 50; ++round) {
    const int n_objects = 4 + static_cast<int>(gen() % 20);
    auto cat = unit_catalog(n_objects);
    std::vector<std::string> trace;
    for (int i = 0; i < 400; ++i) trace.push_back("o" + std::to_string(gen() % static_cast<std::uint64_t>(n_objects)));
    const std::size_t cap = 1 + gen() % 6;
    auto run = [&](std::size_t capacity) {
      CacheStore c(capacity, EvictionPolicy::LRU, cat);
      Bytes hits = 0;
      double now = 0;
      for (const auto& id : trace) {
        auto r = c.lookup(id, {0, 1}, ++now);
        hits += r.bytes_hit;
        if (r.bytes_miss) c.insert(id, {0, 1}, now);
      }
      return hits;
    };
    EXPECT_GE(run(2 * cap), run(cap)) << "round " << round;
  }
}

TEST(Cache, RandomVariableSizeOperationsStayConsistent) {
  std::mt19937_64 gen(21);
  Catalog cat;
  for (int i = 0; i < 6; ++i) cat.add({"o" + std::to_string(i), 1, i, 1.0 + i});
  for (auto policy : {EvictionPolicy::LRU, EvictionPolicy::LFU}) {
    CacheStore c(2000, policy, cat);
    std::map<std::string, IntervalSet> ever;
    for (int op = 0; op < 3000; ++op) {
      const std::string id = "o" + std::to_string(gen() % 6);
      const auto b = static_cast<std::int64_t>(gen() % 1000);
      const Interval tr{b, b + 1 + static_cast<std::int64_t>(gen() % 120)};
      if (gen() % 3) {
        if (c.fits(id, tr)) {
          c.insert(id, tr, op);
          ever[id].add(tr);
        }
      } else {
        auto r = c.lookup(id, tr, op);
        IntervalSet whole = r.hit;
        whole.add(r.miss);
        ASSERT_EQ(whole, IntervalSet(tr));
        ASSERT_TRUE(r.hit.intersection(r.miss).empty());
      }
      Bytes sum = 0;
      std::map<std::string, std::vector<Interval>> per_object;
      for (const auto& s : c.contents()) {
        sum += s.bytes;
        per_object[s.object_id].push_back(s.tr);
        ASSERT_EQ(s.bytes, bytes_for(cat.at(s.object_id).data_rate, s.tr.length()));
      }
      ASSERT_EQ(sum, c.used());
      ASSERT_LE(c.used(), c.capacity());
      for (const auto& [id2, v] : per_object) {
        for (std::size_t i = 1; i < v.size(); ++i) ASSERT_LT(v[i - 1].end, v[i].begin);  // disjoint, not adjacent
        IntervalSet held;
        for (const auto& iv : v) held.add(iv);
        IntervalSet extra = held;
        extra.subtract(ever[id2]);
        ASSERT_TRUE(extra.empty());
      }
    }
  }
}

TEST(Cache, CoveredDoesNotTouchMetadata) {
  auto cat = unit_catalog(1);
  CacheStore c(100, EvictionPolicy::LFU, cat);
  c.insert("o0", {0, 10}, 1);
  EXPECT_EQ(c.covered("o0", {5, 20}), IntervalSet(Interval{5, 10}));
  EXPECT_EQ(c.contents()[0].access_count, 1u);
  EXPECT_EQ(c.contents()[0].last_access, 1);
}

TEST(PeerLookup, FastPeerWins) {
  auto cat = unit_catalog(1);
  CacheStore peer(1000, EvictionPolicy::LRU, cat);
  peer.insert("o0", {0, 100}, 0);
  auto plan = peer_lookup("o0", IntervalSet(Interval{0, 100}), {{1, &peer, 20e9 / 8}}, 1e9 / 8);
  ASSERT_EQ(plan.assignments.size(), 1u);
  EXPECT_EQ(plan.assignments[0].dtn, 1);
  EXPECT_TRUE(plan.from_origin().empty());
}

TEST(PeerLookup, NothingHeldGoesToOrigin) {
  auto cat = unit_catalog(1);
  CacheStore peer(1000, EvictionPolicy::LRU, cat);
  auto plan = peer_lookup("o0", IntervalSet(Interval{0, 100}), {{1, &peer, 20e9}}, 1e9);
  ASSERT_EQ(plan.assignments.size(), 1u);
  EXPECT_EQ(plan.assignments[0].dtn, kOrigin);
  EXPECT_EQ(plan.from_origin(), IntervalSet(Interval{0, 100}));
}

TEST(PeerLookup, FasterOfTwoPeers) {
  auto cat = unit_catalog(1);
  CacheStore a(1000, EvictionPolicy::LRU, cat), b(1000, EvictionPolicy::LRU, cat);
  a.insert("o0", {0, 100}, 0);
  b.insert("o0", {0, 100}, 0);
  auto plan = peer_lookup("o0", IntervalSet(Interval{0, 100}), {{1, &a, 10e9}, {2, &b, 15e9}}, 1e9);
  ASSERT_EQ(plan.assignments.size(), 1u);
  EXPECT_EQ(plan.assignments[0].dtn, 2);
}

TEST(PeerLookup, SplitsAcrossHoldersAndMatchesCostOracle) {
  std::mt19937_64 gen(4);
  auto cat = unit_catalog(1);
  for (int round = 0; round < 100; ++round) {
    std::vector<CacheStore> stores;
    for (int p = 0; p < 4; ++p) stores.emplace_back(10'000, EvictionPolicy::LRU, cat);
    std::vector<PeerSource> peers;
    for (int p = 0; p < 4; ++p) {
      for (int k = 0; k < 3; ++k) {
        const auto b = static_cast<std::int64_t>(gen() % 200);
        stores[static_cast<std::size_t>(p)].insert("o0", {b, b + 1 + static_cast<std::int64_t>(gen() % 50)}, 0);
      }
      peers.push_back({p + 1, &stores[static_cast<std::size_t>(p)], static_cast<double>(1 + gen() % 40)});
    }
    const double origin = static_cast<double>(1 + gen() % 40);
    const Interval want{0, 250};
    auto plan = peer_lookup("o0", IntervalSet(want), peers, origin);
    // Per-second oracle: the best eligible throughput holding that second.
    IntervalSet seen;
    for (const auto& a : plan.assignments) {
      ASSERT_TRUE(seen.intersection(a.ranges).empty());
      seen.add(a.ranges);
      for (const Interval& iv : a.ranges)
        for (auto t = iv.begin; t < iv.end; ++t) {
          double best = origin;
          int best_id = kOrigin;
          for (const auto& p : peers)
            if (p.store->holdings("o0").covers(Interval{t, t + 1}) &&
                (p.throughput > best || (p.throughput == best && (best_id == kOrigin || p.dtn < best_id)))) {
              best = p.throughput;
              best_id = p.dtn;
            }
          ASSERT_EQ(a.dtn, best_id) << "second " << t;
        }
    }
    ASSERT_EQ(seen, IntervalSet(want));
  }
}

TEST(Cache, ContentDump) {
  auto cat = unit_catalog(2);
  CacheStore c(100, EvictionPolicy::LRU, cat);
  c.insert("o1", {5, 10}, 2.5);
  c.insert("o0", {0, 3}, 1);
  std::ostringstream os;
  write_contents(os, c);
  EXPECT_EQ(os.str(), "object_id,begin,end,bytes,last_access,access_count\no0,0,3,3,1,1\no1,5,10,5,2.5,1\n");
}

TEST(Cache, PolicyParsing) {
  EXPECT_EQ(parse_policy("lfu"), EvictionPolicy::LFU);
  EXPECT_THROW(parse_policy("fifo"), std::invalid_argument);
}
