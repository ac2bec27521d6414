#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtnsim/classifier.hpp"
#include "dtnsim/interval.hpp"
#include "dtnsim/trace.hpp"

namespace dtnsim {

struct StreamConfig {
  int repeat_threshold = 3;  // consecutive real-time requests before promotion
  double idle_periods = 10;  // subscribers silent this many periods are dropped
};

inline void validate(const StreamConfig& c) {
  if (c.repeat_threshold < 1 || !(c.idle_periods > 0)) throw std::invalid_argument("invalid stream config");
}

struct Subscriber {
  int client_dtn = 0;
  double period = 0;  // observed request period
  Timestamp last_activity = 0;
};

struct StreamSubscription {
  std::string object_id;
  std::map<std::string, Subscriber> subscribers;
  double period = 0;            // minimum subscriber period
  std::int64_t start = 0;       // data time the stream began at
  std::int64_t high_water = 0;  // data pushed so far ends here
  std::uint64_t origin_reads = 0;

  std::vector<int> client_dtns() const {
    std::set<int> s;
    for (const auto& [_, sub] : subscribers) s.insert(sub.client_dtn);
    return {s.begin(), s.end()};
  }
  void refresh_period() {
    period = 0;
    for (const auto& [_, s] : subscribers) period = period == 0 ? s.period : std::min(period, s.period);
  }
};

struct Push {
  std::string object_id;
  Interval range;
  std::vector<int> client_dtns;  // one delivery per distinct client DTN
  std::size_t subscribers = 0;
};

struct ExpireResult {
  std::vector<std::string> dropped;
  bool terminated = false;
};

/// Server-side stream registry: at most one subscription per object.
class StreamServer {
 public:
  explicit StreamServer(StreamConfig cfg = {}) : cfg_(cfg) { validate(cfg_); }

  const StreamConfig& config() const noexcept { return cfg_; }

  /// Feeds one request and its real-time verdict. Returns true once the user
  /// has made `repeat_threshold` consecutive real-time requests for the object.
  bool observe(const std::string& user_id, const std::string& object_id, RequestClass verdict) {
    auto& n = streak_[{user_id, object_id}];
    n = verdict == RequestClass::RealTime ? n + 1 : 0;
    return n >= cfg_.repeat_threshold;
  }

  /// Creates the object's subscription or joins it. A new stream starts at
  /// `high_water`, the end of the data the user already holds.
  StreamSubscription& promote(const std::string& user_id, const std::string& object_id, int client_dtn,
                              double observed_period, std::int64_t high_water, Timestamp now) {
    if (!(observed_period > 0)) throw std::invalid_argument("stream period must be positive");
    auto [it, created] = subs_.try_emplace(object_id);
    auto& sub = it->second;
    if (created) {
      sub.object_id = object_id;
      sub.start = sub.high_water = high_water;
    }
    sub.subscribers[user_id] = {client_dtn, observed_period, now};
    sub.refresh_period();
    return sub;
  }

  bool subscribed(const std::string& user_id, const std::string& object_id) const {
    auto it = subs_.find(object_id);
    return it != subs_.end() && it->second.subscribers.count(user_id);
  }

  /// Marks subscriber activity (a poll for the streamed object).
  void touch(const std::string& user_id, const std::string& object_id, Timestamp now) {
    auto it = subs_.find(object_id);
    if (it == subs_.end()) return;
    auto sit = it->second.subscribers.find(user_id);
    if (sit != it->second.subscribers.end()) sit->second.last_activity = std::max(sit->second.last_activity, now);
  }

  /// One origin read of everything new up to `available`, fanned out to each
  /// client DTN. Nothing new: no push and no read.
  std::optional<Push> tick(const std::string& object_id, std::int64_t available) {
    auto it = subs_.find(object_id);
    if (it == subs_.end()) throw std::out_of_range("no stream for " + object_id);
    auto& sub = it->second;
    if (available <= sub.high_water) return std::nullopt;
    Push p{object_id, {sub.high_water, available}, sub.client_dtns(), sub.subscribers.size()};
    sub.high_water = available;
    ++sub.origin_reads;
    return p;
  }

  /// Drops subscribers idle for `idle_periods` subscription periods; the
  /// subscription ends with its last subscriber, and so do their streaks.
  ExpireResult expire(const std::string& object_id, Timestamp now) {
    ExpireResult r;
    auto it = subs_.find(object_id);
    if (it == subs_.end()) return r;
    auto& sub = it->second;
    const double timeout = cfg_.idle_periods * sub.period;
    for (auto s = sub.subscribers.begin(); s != sub.subscribers.end();) {
      if (now - s->second.last_activity >= timeout) {
        r.dropped.push_back(s->first);
        streak_.erase({s->first, object_id});
        s = sub.subscribers.erase(s);
      } else {
        ++s;
      }
    }
    if (sub.subscribers.empty()) {
      subs_.erase(it);
      r.terminated = true;
    } else if (!r.dropped.empty()) {
      sub.refresh_period();
    }
    return r;
  }

  const StreamSubscription* find(const std::string& object_id) const {
    auto it = subs_.find(object_id);
    return it == subs_.end() ? nullptr : &it->second;
  }
  std::size_t active() const noexcept { return subs_.size(); }
  const std::map<std::string, StreamSubscription>& subscriptions() const noexcept { return subs_; }

 private:
  StreamConfig cfg_;
  std::map<std::string, StreamSubscription> subs_;
  std::map<std::pair<std::string, std::string>, int> streak_;
};

}  // namespace dtnsim
