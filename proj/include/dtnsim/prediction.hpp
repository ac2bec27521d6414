#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtnsim/arima.hpp"
#include "dtnsim/classifier.hpp"
#include "dtnsim/fpgrowth.hpp"
#include "dtnsim/trace.hpp"

namespace dtnsim {

struct PredictorConfig {
  int arima_window = 60;
  double prefetch_offset = 0.8;
  double learning_period = 7.0 * kDay;
  int repeat_threshold = 3;
  ArimaOrder order{};
  // Advance the predicted range by the observed step between the last two
  // ranges instead of by the forecast gap. Keeps range predictions exact when
  // request timestamps jitter around a fixed polling grid.
  bool advance_by_range_stride = false;
};

inline void validate(const PredictorConfig& c) {
  if (c.arima_window < c.order.min_length()) throw std::invalid_argument("arima_window shorter than p+d+q+1");
  if (!(c.prefetch_offset > 0 && c.prefetch_offset <= 1)) throw std::invalid_argument("prefetch_offset must be in (0,1]");
  if (!(c.learning_period > 0) || c.repeat_threshold < 1) throw std::invalid_argument("invalid learning parameters");
}

enum class PlanSource { History, Mining, Markov };

inline const char* to_string(PlanSource s) {
  switch (s) {
    case PlanSource::History: return "history";
    case PlanSource::Mining: return "mining";
    case PlanSource::Markov: return "markov";
  }
  return "?";
}

struct PrefetchPlan {
  std::string user_id;
  std::string object_id;
  Interval tr;
  Timestamp fire_at = 0;
  Timestamp predicted_request_ts = 0;
  PlanSource source = PlanSource::History;
};

inline Timestamp fire_time(Timestamp last_ts, Timestamp predicted_ts, double offset) {
  return last_ts + offset * (predicted_ts - last_ts);
}

/// Next inter-arrival gap: ARIMA over the most recent gaps when there are
/// enough of them, otherwise the last observed gap. Non-positive or
/// non-finite forecasts fall back to the last gap too.
inline double forecast_gap(std::span<const double> gaps, const PredictorConfig& cfg) {
  if (gaps.empty()) throw std::invalid_argument("forecast_gap needs at least one gap");
  const auto n = std::min<std::size_t>(gaps.size(), static_cast<std::size_t>(cfg.arima_window));
  auto recent = gaps.subspan(gaps.size() - n);
  if (recent.size() < static_cast<std::size_t>(cfg.order.min_length())) return recent.back();
  const double f = arima_fit_forecast(recent, cfg.order);
  return std::isfinite(f) && f > 0 ? f : recent.back();
}

/// History-based plan for the object of `last`, given the same-object request
/// timestamps `ts` (ascending, ending at last.ts) and the previous range.
inline std::optional<PrefetchPlan> plan_from_history(const AccessRecord& last, std::span<const Timestamp> ts,
                                                     const std::optional<Interval>& prev_tr,
                                                     const PredictorConfig& cfg) {
  if (ts.size() < 2) return std::nullopt;
  std::vector<double> gaps(ts.size() - 1);
  for (std::size_t i = 1; i < ts.size(); ++i) gaps[i - 1] = ts[i] - ts[i - 1];
  const double gap = forecast_gap(gaps, cfg);
  std::int64_t step = std::llround(gap);
  if (cfg.advance_by_range_stride && prev_tr && last.tr.begin > prev_tr->begin) step = last.tr.begin - prev_tr->begin;
  PrefetchPlan p;
  p.user_id = last.user_id;
  p.object_id = last.object_id;
  p.tr = {last.tr.begin + step, last.tr.end + step};
  p.predicted_request_ts = last.ts + gap;
  p.fire_at = fire_time(last.ts, p.predicted_request_ts, cfg.prefetch_offset);
  p.source = PlanSource::History;
  return p;
}

/// History-based prediction for the user's most recent request. Returns none
/// unless that object was requested at least `repeat_threshold` times within
/// the learning period ending at the last request.
inline std::optional<PrefetchPlan> predict_next_request(const RequestSequence& seq, const PredictorConfig& cfg) {
  validate(cfg);
  if (seq.records.empty()) return std::nullopt;
  const auto& last = seq.records.back();
  std::vector<Timestamp> ts;
  std::optional<Interval> prev_tr;
  int in_window = 0;
  for (const auto& r : seq.records) {
    if (r.object_id != last.object_id) continue;
    if (&r != &last) prev_tr = r.tr;
    ts.push_back(r.ts);
    if (r.ts >= last.ts - cfg.learning_period) ++in_window;
  }
  if (in_window < cfg.repeat_threshold) return std::nullopt;
  const auto keep = std::min<std::size_t>(ts.size(), static_cast<std::size_t>(cfg.arima_window) + 1);
  return plan_from_history(last, std::span<const Timestamp>(ts).last(keep), prev_tr, cfg);
}

/// Predicted timestamp shared by the mining and Markov strategies: repeat the
/// user's last inter-request gap, or use the default period without a previous
/// request (or with a simultaneous one).
inline Timestamp next_request_ts(const AccessRecord& last, const AccessRecord* prev, const MinerConfig& cfg) {
  if (prev == nullptr || !(last.ts > prev->ts))
    return last.ts + cfg.default_period;
  return last.ts + (last.ts - prev->ts);
}

struct ScoredObject {
  std::string object_id;
  double confidence = 0;
  std::uint64_t support = 0;
};

inline bool better(const ScoredObject& a, const ScoredObject& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.support != b.support) return a.support > b.support;
  return a.object_id < b.object_id;
}

/// Immutable rule lookup, rules bucketed by their first antecedent item.
class RuleIndex {
 public:
  RuleIndex() = default;
  explicit RuleIndex(RuleSet rules) : rules_(std::move(rules)) {
    for (std::size_t i = 0; i < rules_.rules.size(); ++i)
      by_item_[rules_.rules[i].antecedent.front()].push_back(i);
  }

  const RuleSet& rules() const noexcept { return rules_; }

  /// Best consequents whose rule antecedent is contained in `context`, excluding
  /// objects already in the context.
  std::vector<ScoredObject> candidates(const std::set<std::string>& context, std::size_t top_n) const {
    std::map<std::string, ScoredObject> best;
    for (const auto& item : context) {
      auto it = by_item_.find(item);
      if (it == by_item_.end()) continue;
      for (auto idx : it->second) {
        const auto& r = rules_.rules[idx];
        if (context.count(r.consequent)) continue;
        if (!std::includes(context.begin(), context.end(), r.antecedent.begin(), r.antecedent.end())) continue;
        ScoredObject s{r.consequent, r.confidence, r.support};
        auto [pos, inserted] = best.emplace(r.consequent, s);
        if (!inserted && better(s, pos->second)) pos->second = s;
      }
    }
    std::vector<ScoredObject> out;
    for (auto& [_, s] : best) out.push_back(std::move(s));
    std::sort(out.begin(), out.end(), better);
    if (out.size() > top_n) out.resize(top_n);
    return out;
  }

 private:
  RuleSet rules_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_item_;  // keyed by first antecedent item
};

inline std::vector<PrefetchPlan> plans_for(const std::vector<ScoredObject>& picks, const AccessRecord& last,
                                           Timestamp predicted_ts, double offset, PlanSource source) {
  std::vector<PrefetchPlan> out;
  for (const auto& s : picks)
    out.push_back({last.user_id, s.object_id, last.tr, fire_time(last.ts, predicted_ts, offset), predicted_ts, source});
  return out;
}

/// Rule-based prediction with an explicit session context.
inline std::vector<PrefetchPlan> predict_by_rules(const AccessRecord& last, const AccessRecord* prev,
                                                  const std::set<std::string>& context, const RuleIndex& rules,
                                                  const MinerConfig& cfg, double offset = 0.8) {
  const auto picks = rules.candidates(context, cfg.top_n);
  return plans_for(picks, last, next_request_ts(last, prev, cfg), offset, PlanSource::Mining);
}

inline std::vector<PrefetchPlan> predict_by_rules(const AccessRecord& last, const std::optional<AccessRecord>& prev,
                                                  const RuleSet& rules, const MinerConfig& cfg, double offset = 0.8) {
  validate(cfg);
  return predict_by_rules(last, prev ? &*prev : nullptr, {last.object_id}, RuleIndex(rules), cfg, offset);
}

/// First-order transition counts over serialized object access paths.
class MarkovModel {
 public:
  void observe(const std::string& from, const std::string& to) {
    ++transitions_[from][to];
    ++totals_[from];
  }

  void observe_path(const std::vector<std::string>& path) {
    for (std::size_t i = 1; i < path.size(); ++i) observe(path[i - 1], path[i]);
  }

  /// Most probable successors of `state`; ties broken by object id.
  std::vector<ScoredObject> successors(const std::string& state, std::size_t top_n) const {
    std::vector<ScoredObject> out;
    auto it = transitions_.find(state);
    if (it == transitions_.end()) return out;
    using Entry = const std::pair<const std::string, std::uint64_t>*;
    std::vector<Entry> entries;
    entries.reserve(it->second.size());
    for (const auto& e : it->second) entries.push_back(&e);
    // Same total for every entry, so the count order is the probability order.
    const auto k = std::min(top_n, entries.size());
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k), entries.end(),
                      [](Entry a, Entry b) { return a->second != b->second ? a->second > b->second : a->first < b->first; });
    const double total = static_cast<double>(totals_.at(state));
    for (std::size_t i = 0; i < k; ++i)
      out.push_back({entries[i]->first, static_cast<double>(entries[i]->second) / total, entries[i]->second});
    return out;
  }

  std::size_t states() const noexcept { return transitions_.size(); }

 private:
  std::unordered_map<std::string, std::map<std::string, std::uint64_t>> transitions_;
  std::unordered_map<std::string, std::uint64_t> totals_;
};

inline std::vector<ScoredObject> markov_predict(const std::vector<std::string>& history, const std::string& last,
                                                std::size_t top_n = 3) {
  MarkovModel m;
  m.observe_path(history);
  return m.successors(last, top_n);
}

inline std::vector<PrefetchPlan> markov_plans(const MarkovModel& model, const AccessRecord& last,
                                              const AccessRecord* prev, const MinerConfig& cfg, double offset = 0.8) {
  return plans_for(model.successors(last.object_id, cfg.top_n), last, next_request_ts(last, prev, cfg), offset,
                   PlanSource::Markov);
}

/// Prediction for the last request of a user's sequence. Requests that repeat
/// within the real-time threshold belong to streaming; program objects use the
/// history model; everything else (and programs without a forecast) uses rules
/// over the current session's object set.
inline std::vector<PrefetchPlan> hybrid_dispatch(const RequestSequence& seq, const UserClass& user,
                                                 const RuleIndex& rules, const PredictorConfig& pcfg,
                                                 const MinerConfig& mcfg, const ClassifierConfig& ccfg = {}) {
  if (seq.records.empty()) return {};
  const auto& last = seq.records.back();
  const AccessRecord* prev_same = nullptr;
  const AccessRecord* prev_any = seq.records.size() > 1 ? &seq.records[seq.records.size() - 2] : nullptr;
  for (auto it = seq.records.rbegin() + 1; it != seq.records.rend(); ++it)
    if (it->object_id == last.object_id) {
      prev_same = &*it;
      break;
    }
  if (classify_request(prev_same, last, ccfg) == RequestClass::RealTime) return {};
  if (user.is_program_for(last.object_id))
    if (auto plan = predict_next_request(seq, pcfg)) return {*plan};

  std::set<std::string> context{last.object_id};
  for (auto it = seq.records.rbegin() + 1; it != seq.records.rend(); ++it) {
    if ((it - 1)->ts - it->ts > mcfg.session_gap) break;
    context.insert(it->object_id);
  }
  return predict_by_rules(last, prev_any, context, rules, mcfg, pcfg.prefetch_offset);
}

}  // namespace dtnsim
