#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "dtnsim/interval.hpp"
#include "dtnsim/trace.hpp"

namespace dtnsim {

enum class EvictionPolicy { LRU, LFU };

inline const char* to_string(EvictionPolicy p) { return p == EvictionPolicy::LRU ? "lru" : "lfu"; }

inline EvictionPolicy parse_policy(const std::string& s) {
  if (s == "lru" || s == "LRU") return EvictionPolicy::LRU;
  if (s == "lfu" || s == "LFU") return EvictionPolicy::LFU;
  throw std::invalid_argument("unknown eviction policy: " + s);
}

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LookupResult {
  IntervalSet hit;
  IntervalSet miss;
  Bytes bytes_hit = 0;
  Bytes bytes_miss = 0;
};

struct CachedPiece {
  std::string object_id;
  Interval tr;
};

struct SegmentInfo {
  std::string object_id;
  Interval tr;
  Bytes bytes = 0;
  Timestamp last_access = 0;
  std::uint64_t access_count = 0;
};

/// Interval-indexed store of (object, time range) segments. Segments of one
/// object are kept disjoint and coalesced; eviction removes whole segments.
class CacheStore {
 public:
  CacheStore(Bytes capacity, EvictionPolicy policy, const Catalog& catalog)
      : capacity_(capacity), policy_(policy), catalog_(&catalog) {}

  Bytes capacity() const noexcept { return capacity_; }
  Bytes used() const noexcept { return used_; }
  Bytes free_bytes() const noexcept { return capacity_ - used_; }
  double free_fraction() const noexcept {
    return capacity_ ? static_cast<double>(capacity_ - used_) / static_cast<double>(capacity_) : 0.0;
  }
  EvictionPolicy policy() const noexcept { return policy_; }
  std::size_t segment_count() const noexcept { return order_.size(); }

  Bytes size_of(const std::string& object_id, std::int64_t length) const {
    return bytes_for(catalog_->at(object_id).data_rate, length);
  }
  bool fits(const std::string& object_id, const Interval& tr) const { return size_of(object_id, tr.length()) <= capacity_; }

  /// Cached part of `tr`, without touching metadata.
  IntervalSet covered(const std::string& object_id, const Interval& tr) const {
    IntervalSet out;
    auto oit = objects_.find(object_id);
    if (oit == objects_.end() || tr.empty()) return out;
    const auto& segs = oit->second;
    auto it = segs.upper_bound(tr.begin);
    if (it != segs.begin()) --it;
    for (; it != segs.end() && it->first < tr.end; ++it) {
      const Interval piece = intersect({it->first, it->second.end}, tr);
      if (!piece.empty()) out.add(piece);
    }
    return out;
  }

  /// Local lookup: splits `tr` into cached and missing parts and records an
  /// access on every segment it touches.
  LookupResult lookup(const std::string& object_id, const Interval& tr, Timestamp now) {
    if (!tr.valid()) throw std::invalid_argument("lookup: malformed interval");
    LookupResult r;
    r.hit = covered(object_id, tr);
    r.miss = IntervalSet(tr);
    r.miss.subtract(r.hit);
    const double rate = catalog_->at(object_id).data_rate;
    r.bytes_hit = bytes_for(rate, r.hit.measure());
    r.bytes_miss = bytes_for(rate, tr.length()) - r.bytes_hit;
    touch(object_id, r.hit, now);
    return r;
  }

  /// Records an access on every segment intersecting `ranges`.
  void touch(const std::string& object_id, const IntervalSet& ranges, Timestamp now) {
    auto oit = objects_.find(object_id);
    if (oit == objects_.end()) return;
    auto& segs = oit->second;
    for (const Interval& q : ranges) {
      auto it = segs.upper_bound(q.begin);
      if (it != segs.begin()) --it;
      for (; it != segs.end() && it->first < q.end; ++it) {
        if (it->second.end <= q.begin) continue;
        Segment& s = it->second;
        order_.erase(key(s));
        s.last_access = std::max(s.last_access, now);
        ++s.access_count;
        order_.insert(key(s));
      }
    }
  }

  /// Adds `tr` of `object_id`, coalescing with touching segments and evicting
  /// by policy until it fits. Returns the ranges that stopped being cached.
  std::vector<CachedPiece> insert(const std::string& object_id, const Interval& tr, Timestamp now) {
    if (!tr.valid() || tr.empty()) throw std::invalid_argument("insert: empty or malformed interval");
    const double rate = catalog_->at(object_id).data_rate;
    if (bytes_for(rate, tr.length()) > capacity_)
      throw CapacityError("segment of " + std::to_string(bytes_for(rate, tr.length())) +
                          " bytes exceeds cache capacity of " + std::to_string(capacity_));

    auto& segs = objects_[object_id];
    std::vector<std::int64_t> absorbed;
    Interval merged = tr;
    Timestamp last = now;
    std::uint64_t count = 1;
    Bytes absorbed_bytes = 0;
    {
      auto it = segs.upper_bound(tr.begin);
      if (it != segs.begin()) --it;
      for (; it != segs.end() && it->first <= tr.end; ++it) {
        if (it->second.end < tr.begin) continue;
        absorbed.push_back(it->first);
        merged = {std::min(merged.begin, it->first), std::max(merged.end, it->second.end)};
        last = std::max(last, it->second.last_access);
        count += it->second.access_count;
        absorbed_bytes += it->second.bytes;
      }
    }

    std::vector<CachedPiece> evicted;
    Bytes merged_bytes = bytes_for(rate, merged.length());
    if (merged_bytes > capacity_) {
      // The coalesced run no longer fits anywhere: keep only the new range.
      for (auto start : absorbed) {
        IntervalSet gone(Interval{start, segs.at(start).end});
        gone.subtract(tr);
        for (const Interval& g : gone) evicted.push_back({object_id, g});
        erase_segment(segs, start);
      }
      absorbed.clear();
      absorbed_bytes = 0;
      merged = tr;
      merged_bytes = bytes_for(rate, tr.length());
      last = now;
      count = 1;
    }

    // Victims never include the segments being merged.
    std::set<std::uint64_t> keep;
    for (auto start : absorbed) keep.insert(segs.at(start).seq);
    auto vit = order_.begin();
    while (used_ - absorbed_bytes + merged_bytes > capacity_) {
      while (vit != order_.end() && keep.count(std::get<2>(*vit))) ++vit;
      if (vit == order_.end()) throw std::logic_error("cache accounting error");
      const auto [obj, start] = where_.at(std::get<2>(*vit));
      ++vit;
      auto& vsegs = objects_.at(obj);
      evicted.push_back({obj, {start, vsegs.at(start).end}});
      erase_segment(vsegs, start);
      if (vsegs.empty() && obj != object_id) objects_.erase(obj);
    }

    for (auto start : absorbed) erase_segment(segs, start);
    Segment s{merged.end, merged_bytes, last, count, next_seq_++};
    segs.emplace(merged.begin, s);
    order_.insert(key(s));
    where_.emplace(s.seq, std::make_pair(object_id, merged.begin));
    used_ += merged_bytes;
    return evicted;
  }

  std::vector<SegmentInfo> contents() const {
    std::vector<SegmentInfo> out;
    std::vector<std::string> ids;
    for (const auto& [id, _] : objects_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids)
      for (const auto& [start, s] : objects_.at(id))
        out.push_back({id, {start, s.end}, s.bytes, s.last_access, s.access_count});
    return out;
  }

  /// Cached ranges of one object as a canonical interval set.
  IntervalSet holdings(const std::string& object_id) const {
    IntervalSet out;
    auto it = objects_.find(object_id);
    if (it != objects_.end())
      for (const auto& [start, s] : it->second) out.add(Interval{start, s.end});
    return out;
  }

 private:
  struct Segment {
    std::int64_t end;
    Bytes bytes;
    Timestamp last_access;
    std::uint64_t access_count;
    std::uint64_t seq;
  };
  // (primary, recency, seq): primary is the access count under LFU, 0 under LRU.
  using Key = std::tuple<std::uint64_t, Timestamp, std::uint64_t>;

  Key key(const Segment& s) const {
    return {policy_ == EvictionPolicy::LFU ? s.access_count : 0, s.last_access, s.seq};
  }

  void erase_segment(std::map<std::int64_t, Segment>& segs, std::int64_t start) {
    auto it = segs.find(start);
    order_.erase(key(it->second));
    where_.erase(it->second.seq);
    used_ -= it->second.bytes;
    segs.erase(it);
  }

  Bytes capacity_;
  Bytes used_ = 0;
  EvictionPolicy policy_;
  const Catalog* catalog_;
  std::uint64_t next_seq_ = 0;
  std::unordered_map<std::string, std::map<std::int64_t, Segment>> objects_;
  std::set<Key> order_;
  std::unordered_map<std::uint64_t, std::pair<std::string, std::int64_t>> where_;
};

/// object_id,begin,end,bytes,last_access,access_count
inline void write_contents(std::ostream& os, const CacheStore& store) {
  os << "object_id,begin,end,bytes,last_access,access_count\n";
  for (const auto& s : store.contents())
    os << s.object_id << ',' << s.tr.begin << ',' << s.tr.end << ',' << s.bytes << ','
       << detail::format_double(s.last_access) << ',' << s.access_count << '\n';
}

struct PeerSource {
  int dtn = 0;
  const CacheStore* store = nullptr;
  double throughput = 0;  // estimated bytes/s from this peer to the requester
};

struct SourceAssignment {
  int dtn;  // kOrigin for the origin server
  IntervalSet ranges;
};

inline constexpr int kOrigin = -1;

struct PeerPlan {
  std::vector<SourceAssignment> assignments;  // peers first (chosen order), origin last

  IntervalSet from_origin() const {
    for (const auto& a : assignments)
      if (a.dtn == kOrigin) return a.ranges;
    return {};
  }
};

/// Assigns every missing sub-range to the cheapest holder: peers whose
/// estimated transfer time is no worse than the origin's, fastest first (ties
/// by DTN id); whatever no such peer holds comes from the origin.
inline PeerPlan peer_lookup(const std::string& object_id, const IntervalSet& missing, std::vector<PeerSource> peers,
                            double origin_throughput) {
  std::sort(peers.begin(), peers.end(), [](const PeerSource& a, const PeerSource& b) {
    return a.throughput != b.throughput ? a.throughput > b.throughput : a.dtn < b.dtn;
  });
  PeerPlan plan;
  IntervalSet remaining = missing;
  for (const auto& p : peers) {
    if (remaining.empty()) break;
    if (!(p.throughput > 0) || p.throughput < origin_throughput || p.store == nullptr) continue;
    IntervalSet got = p.store->holdings(object_id).intersection(remaining);
    if (got.empty()) continue;
    remaining.subtract(got);
    plan.assignments.push_back({p.dtn, std::move(got)});
  }
  if (!remaining.empty()) plan.assignments.push_back({kOrigin, std::move(remaining)});
  return plan;
}

}  // namespace dtnsim
