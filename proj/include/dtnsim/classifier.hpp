#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtnsim/interval.hpp"
#include "dtnsim/trace.hpp"

namespace dtnsim {

inline constexpr std::int64_t kDay = 86400;

struct ClassifierConfig {
  double window = 7.0 * kDay;
  int min_daily_repeats = 1;   // "more than once per day": >= min_daily_repeats + 1 requests
  int pattern_days = 0;        // 0: every day of the window
  double realtime_period_max = 300.0;
  int program_repeat_threshold = 3;

  int days() const {
    return pattern_days > 0 ? pattern_days : std::max(1, static_cast<int>(std::lround(window / kDay)));
  }
};

inline void validate(const ClassifierConfig& c) {
  if (!(c.window > 0)) throw std::invalid_argument("classifier window must be positive");
  if (c.min_daily_repeats < 1 || c.program_repeat_threshold < 1 || !(c.realtime_period_max > 0) || c.pattern_days < 0)
    throw std::invalid_argument("classifier thresholds must be positive");
}

enum class UserKind { Human, Program };
enum class RequestClass { Unclassified, Regular, RealTime, Overlapping };

inline const char* to_string(RequestClass c) {
  switch (c) {
    case RequestClass::Unclassified: return "unclassified";
    case RequestClass::Regular: return "regular";
    case RequestClass::RealTime: return "realtime";
    case RequestClass::Overlapping: return "overlapping";
  }
  return "?";
}

struct ObjectSetVerdict {
  std::set<std::string> objects;
  Timestamp detected_at = 0;
};

struct UserClass {
  UserKind kind = UserKind::Human;
  std::vector<ObjectSetVerdict> program_sets;

  bool is_program_for(const std::string& object_id) const {
    for (const auto& v : program_sets)
      if (v.objects.count(object_id)) return true;
    return false;
  }
};

/// Per-user daily request counts. Answers "which object set has this user
/// requested more than once per day on every day of the window ending at `now`".
class UserActivity {
 public:
  void add(const AccessRecord& r) {
    const auto day = static_cast<std::int64_t>(std::floor(r.ts / kDay));
    ++days_[day][r.object_id];
  }

  /// Program object set for the window preceding the calendar day containing `now`;
  /// empty when the pattern does not hold.
  std::set<std::string> program_set(Timestamp now, const ClassifierConfig& cfg) const {
    const auto last = static_cast<std::int64_t>(std::floor(now / kDay));
    const int span = cfg.days();
    std::set<std::string> pattern;
    for (std::int64_t d = last - span; d < last; ++d) {
      auto it = days_.find(d);
      if (it == days_.end()) return {};
      std::set<std::string> today;
      for (const auto& [obj, n] : it->second)
        if (n >= cfg.min_daily_repeats + 1) today.insert(obj);
      if (today.empty()) return {};
      if (d == last - span)
        pattern = std::move(today);
      else if (today != pattern)
        return {};
    }
    return pattern;
  }

  UserClass classify(Timestamp now, const ClassifierConfig& cfg) const {
    UserClass out;
    auto set = program_set(now, cfg);
    if (set.empty()) return out;
    out.kind = UserKind::Program;
    // Earliest day boundary from which the same verdict held continuously.
    Timestamp detected = now;
    auto day = static_cast<std::int64_t>(std::floor(now / kDay));
    for (auto d = day; d > day - 400; --d) {
      const Timestamp boundary = static_cast<double>(d * kDay);
      if (program_set(boundary, cfg) != set) break;
      detected = boundary;
    }
    out.program_sets.push_back({std::move(set), detected});
    return out;
  }

 private:
  std::map<std::int64_t, std::map<std::string, int>> days_;
};

inline UserClass classify_user(const RequestSequence& seq, const ClassifierConfig& cfg, Timestamp now) {
  validate(cfg);
  UserActivity act;
  for (const auto& r : seq.records)
    if (r.ts < now) act.add(r);
  return act.classify(now, cfg);
}

inline RequestClass classify_request(const AccessRecord* prev, const AccessRecord& cur, const ClassifierConfig& cfg) {
  if (prev == nullptr) return RequestClass::Unclassified;
  if (prev->user_id != cur.user_id || prev->object_id != cur.object_id)
    throw std::invalid_argument("classify_request: records differ in user or object");
  if (std::abs(cur.ts - prev->ts) <= cfg.realtime_period_max) return RequestClass::RealTime;
  if (!intersect(prev->tr, cur.tr).empty()) return RequestClass::Overlapping;
  return RequestClass::Regular;
}

inline RequestClass classify_request(const std::optional<AccessRecord>& prev, const AccessRecord& cur,
                                     const ClassifierConfig& cfg) {
  return classify_request(prev ? &*prev : nullptr, cur, cfg);
}

struct OverlapSplit {
  IntervalSet fresh;
  IntervalSet duplicate;
};

inline OverlapSplit decompose_overlap(const IntervalSet& prev_ranges, const Interval& cur) {
  OverlapSplit out;
  out.duplicate = prev_ranges.intersection(cur);
  out.fresh = IntervalSet(cur);
  out.fresh.subtract(out.duplicate);
  return out;
}

inline OverlapSplit decompose_overlap(const IntervalSet& prev_ranges, const AccessRecord& cur) {
  return decompose_overlap(prev_ranges, cur.tr);
}

/// Aggregate user and request statistics of a trace, classified as of its end.
struct TraceClassification {
  std::size_t n_users = 0;
  std::size_t n_program_users = 0;
  double human_bytes = 0;
  double program_bytes = 0;
  double regular_bytes = 0;
  double realtime_bytes = 0;
  double overlapping_bytes = 0;
  double unclassified_program_bytes = 0;
  double fresh_bytes = 0;
  double duplicate_bytes = 0;

  double human_user_share() const { return n_users ? 1.0 - static_cast<double>(n_program_users) / n_users : 0.0; }
  double program_volume_share() const {
    const double t = human_bytes + program_bytes;
    return t > 0 ? program_bytes / t : 0.0;
  }
  double typed_bytes() const { return regular_bytes + realtime_bytes + overlapping_bytes; }
  double share(double part) const {
    const double t = typed_bytes();
    return t > 0 ? part / t : 0.0;
  }
  double duplicate_share() const {
    const double t = fresh_bytes + duplicate_bytes;
    return t > 0 ? duplicate_bytes / t : 0.0;
  }
};

/// Users are classified with the window ending at the last request; a program
/// user's requests for its program object set count as program volume, and the
/// request-type mix is measured over those requests.
inline TraceClassification summarize_trace(const std::vector<AccessRecord>& records, const Catalog& catalog,
                                           const ClassifierConfig& cfg) {
  validate(cfg);
  TraceClassification out;
  if (records.empty()) return out;
  Timestamp now = 0;
  for (const auto& r : records) now = std::max(now, r.ts);
  // Include the final day in the window.
  now = std::floor(now / kDay) * kDay + kDay;

  for (const auto& seq : group_by_user(records)) {
    ++out.n_users;
    UserActivity act;
    for (const auto& r : seq.records) act.add(r);
    const auto pset = act.program_set(now, cfg);
    if (!pset.empty()) ++out.n_program_users;

    std::unordered_map<std::string, const AccessRecord*> prev;
    std::unordered_map<std::string, IntervalSet> seen;
    for (const auto& r : seq.records) {
      const double bytes = static_cast<double>(request_bytes(r, catalog));
      const bool program = pset.count(r.object_id) != 0;
      (program ? out.program_bytes : out.human_bytes) += bytes;
      auto pit = prev.find(r.object_id);
      const AccessRecord* p = pit == prev.end() ? nullptr : pit->second;
      if (program) {
        switch (classify_request(p, r, cfg)) {
          case RequestClass::Unclassified: out.unclassified_program_bytes += bytes; break;
          case RequestClass::Regular: out.regular_bytes += bytes; break;
          case RequestClass::RealTime: out.realtime_bytes += bytes; break;
          case RequestClass::Overlapping: {
            out.overlapping_bytes += bytes;
            const double rate = catalog.at(r.object_id).data_rate;
            auto split = decompose_overlap(seen[r.object_id], r);
            out.fresh_bytes += rate * static_cast<double>(split.fresh.measure());
            out.duplicate_bytes += rate * static_cast<double>(split.duplicate.measure());
            break;
          }
        }
      }
      seen[r.object_id].add(r.tr);
      prev[r.object_id] = &r;
    }
  }
  return out;
}

}  // namespace dtnsim
