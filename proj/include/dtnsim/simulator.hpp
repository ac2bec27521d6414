#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtnsim/cache.hpp"
#include "dtnsim/classifier.hpp"
#include "dtnsim/network.hpp"
#include "dtnsim/placement.hpp"
#include "dtnsim/prediction.hpp"
#include "dtnsim/random.hpp"
#include "dtnsim/streaming.hpp"
#include "dtnsim/trace.hpp"

namespace dtnsim {

enum class Strategy { NoCache, CacheOnly, MD1, MD2, HPM };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::NoCache: return "NoCache";
    case Strategy::CacheOnly: return "CacheOnly";
    case Strategy::MD1: return "MD1";
    case Strategy::MD2: return "MD2";
    case Strategy::HPM: return "HPM";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  for (auto v : {Strategy::NoCache, Strategy::CacheOnly, Strategy::MD1, Strategy::MD2, Strategy::HPM})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown strategy: " + s);
}

struct SimConfig {
  Strategy strategy = Strategy::HPM;
  EvictionPolicy policy = EvictionPolicy::LRU;
  int origin_workers = 10;
  // Request timestamps are compressed by this factor before replay; data
  // availability and behavioral windows stay on the original time axis.
  double traffic_factor = 1.0;
  PredictorConfig predictor = [] {
    PredictorConfig p;
    p.advance_by_range_stride = true;
    return p;
  }();
  MinerConfig miner{};
  ClassifierConfig classifier{};
  StreamConfig stream{};
  double remine_interval = 86400.0;
  double rebalance_interval = 7.0 * 86400.0;
  int groups = 0;  // 0: one per client DTN
  double replication_budget = 0.1;  // fraction of hub capacity per rebalance
  std::uint64_t seed = 1;
};

inline void validate(const SimConfig& c) {
  if (c.origin_workers < 1) throw std::invalid_argument("origin_workers must be >= 1");
  if (!(c.traffic_factor > 0) || !std::isfinite(c.traffic_factor)) throw std::invalid_argument("traffic factor must be positive");
  if (!(c.remine_interval > 0) || !(c.rebalance_interval > 0)) throw std::invalid_argument("intervals must be positive");
  if (c.groups < 0 || c.replication_budget < 0 || c.replication_budget > 1)
    throw std::invalid_argument("invalid placement parameters");
  validate(c.predictor);
  validate(c.miner);
  validate(c.classifier);
  validate(c.stream);
}

struct SimReport {
  std::string strategy;
  std::string policy;
  std::string network_condition;
  double condition_scale = 1.0;
  double traffic_factor = 1.0;
  Bytes cache_capacity = 0;

  std::uint64_t requests = 0;
  std::uint64_t origin_requests = 0;  // user requests that needed the origin
  double normalized_origin_requests = 0;

  Bytes bytes_total = 0;
  Bytes bytes_local = 0;
  Bytes bytes_peer = 0;
  Bytes bytes_origin = 0;
  Bytes bytes_prefetch = 0;
  Bytes bytes_stream = 0;
  double local_access_fraction = 0;

  std::uint64_t latency_samples = 0;
  double mean_latency_s = 0;
  double p50_latency_s = 0;
  double p95_latency_s = 0;
  double p99_latency_s = 0;
  double mean_throughput_mbps = 0;

  std::uint64_t prefetch_plans = 0;
  std::uint64_t prefetch_transfers = 0;
  Bytes prefetch_bytes = 0;
  Bytes prefetch_consumed = 0;
  Bytes prefetch_wrong = 0;
  Bytes prefetch_late = 0;
  Bytes prefetch_evicted = 0;
  double recall = std::numeric_limits<double>::quiet_NaN();  // NaN: nothing prefetched

  std::uint64_t streams_created = 0;
  std::uint64_t stream_origin_reads = 0;
  std::uint64_t stream_deliveries = 0;
  Bytes stream_bytes = 0;
  double stream_active_s = 0;  // summed wall time from stream creation to termination

  std::uint64_t rebalances = 0;
  Bytes replicated_bytes = 0;
  Bytes migration_bytes = 0;

  Bytes origin_queue_bytes = 0;  // demand bytes served through the worker queue
  Bytes origin_bytes_total = 0;  // every byte read from the origin, any purpose
  std::uint64_t max_in_service = 0;
  double max_port_utilization = 0;
  std::uint64_t events = 0;
};

namespace detail {

enum class Source { Local = 0, Peer, Origin, Prefetch, Stream };

struct RequestState {
  Timestamp submit = 0;
  Timestamp ready = 0;
  Bytes bytes = 0;
  int home = 0;
  int pending = 0;
  bool origin = false;
  Timestamp service_start = 0;
};

struct Job {
  enum Kind { DemandPeer, DemandOrigin, Prefetch, Stream, Replicate } kind;
  std::size_t request = 0;
  int dst = 0;
  std::size_t object = 0;
  IntervalSet ranges;
  Bytes bytes = 0;
};

struct Event {
  Timestamp time;
  std::uint64_t seq;
  enum Kind { Fire, Tick, Remine, Rebalance } kind;
  std::uint64_t a = 0;
  std::int64_t b = 0;
  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Ledger {
  IntervalSet prefetched;  // cached by a prefetch, not yet read
  IntervalSet streamed;    // cached by a stream push, not yet read
  IntervalSet inflight;    // prefetches on the way
};

}  // namespace detail

/// Discrete-event replay of an access trace over a DTN topology.
class Simulator {
 public:
  Simulator(std::vector<AccessRecord> records, const Catalog& catalog, Topology topology, SimConfig cfg)
      : cfg_(std::move(cfg)), topo_(std::move(topology)), catalog_(&catalog), flows_(topo_) {
    validate(cfg_);
    topo_.validate();
    sort_records(records);
    for (const auto& r : records) {
      if (!catalog.contains(r.object_id)) throw std::invalid_argument("trace references unknown object " + r.object_id);
      if (!r.tr.valid() || r.tr.empty()) throw std::invalid_argument("trace has an empty or malformed range");
    }
    original_ = std::move(records);
    wall_ = scale_traffic(original_, cfg_.traffic_factor);
    t0_ = original_.empty() ? 0.0 : original_.front().ts;

    server_ = topo_.server();
    clients_ = topo_.clients();
    caching_ = cfg_.strategy != Strategy::NoCache;
    predictive_ = cfg_.strategy == Strategy::MD1 || cfg_.strategy == Strategy::MD2 || cfg_.strategy == Strategy::HPM;
    if (caching_)
      for (const auto& d : topo_.dtns) {
        caches_.emplace_back(d.server ? nullptr : std::make_unique<CacheStore>(d.cache_capacity, cfg_.policy, catalog));
      }
    streams_ = StreamServer(cfg_.stream);

    std::map<std::string, int> users;
    for (const auto& r : original_) users.emplace(r.user_id, 0);
    int next = 0;
    for (auto& [id, idx] : users) {
      idx = next++;
      user_names_.push_back(id);
      home_.push_back(clients_[fnv1a(id) % clients_.size()]);
    }
    user_index_.insert(users.begin(), users.end());
    users_.resize(user_names_.size());
    requests_.resize(original_.size());
    service_started_.assign(original_.size(), false);
  }

  SimReport run() {
    if (ran_) throw std::logic_error("Simulator::run called twice");
    ran_ = true;
    if (predictive_ && !wall_.empty()) {
      schedule(wall_time(t0_ + cfg_.rebalance_interval), detail::Event::Rebalance);
      if (cfg_.strategy != Strategy::MD1) schedule(wall_time(t0_ + cfg_.remine_interval), detail::Event::Remine);
    }
    const Timestamp inf = std::numeric_limits<double>::infinity();
    std::size_t next = 0;
    while (true) {
      const Timestamp t_rec = next < wall_.size() ? wall_[next].ts : inf;
      const Timestamp t_flow = flows_.next_completion();
      const Timestamp t_ev = events_.empty() ? inf : events_.top().time;
      if (t_rec == inf && t_flow == inf && t_ev == inf) break;
      ++report_.events;
      if (t_flow <= t_ev && t_flow <= t_rec) {
        for (const auto& tr : flows_.complete(t_flow)) on_transfer_done(tr, t_flow);
      } else if (t_ev <= t_rec) {
        auto ev = events_.top();
        events_.pop();
        on_event(ev);
      } else {
        on_request(next++);
      }
    }
    finish();
    return report_;
  }

 private:
  // ---- time axes -------------------------------------------------------
  Timestamp behavior_time(Timestamp wall) const { return t0_ + (wall - t0_) * cfg_.traffic_factor; }
  Timestamp wall_time(Timestamp behavior) const { return t0_ + (behavior - t0_) / cfg_.traffic_factor; }
  Timestamp last_wall() const { return wall_.empty() ? t0_ : wall_.back().ts; }

  void schedule(Timestamp t, detail::Event::Kind kind, std::uint64_t a = 0, std::int64_t b = 0) {
    events_.push({t, seq_++, kind, a, b});
  }

  CacheStore* cache(int dtn) { return caching_ ? caches_[static_cast<std::size_t>(dtn)].get() : nullptr; }
  const std::string& object_name(std::size_t obj) const { return catalog_->objects()[obj].object_id; }
  // Rounds at range endpoints so that byte counts add up exactly over any
  // partition of a range.
  Bytes bytes_of(std::size_t obj, const Interval& iv) const {
    if (iv.empty()) return 0;
    const double rate = catalog_->objects()[obj].data_rate;
    return static_cast<Bytes>(std::llround(rate * static_cast<double>(iv.end)) -
                              std::llround(rate * static_cast<double>(iv.begin)));
  }
  Bytes bytes_of(std::size_t obj, const IntervalSet& s) const {
    Bytes b = 0;
    for (const Interval& iv : s) b += bytes_of(obj, iv);
    return b;
  }
  detail::Ledger& ledger(int dtn, std::size_t obj) { return ledgers_[{dtn, obj}]; }

  // ---- per-user behavioral state -----------------------------------------
  struct ObjectHistory {
    std::deque<Timestamp> wall;      // recent request times (wall clock)
    std::deque<Timestamp> behavior;  // same, original time axis
    std::optional<AccessRecord> last;  // original-axis record
    std::optional<Interval> prev_tr;
  };
  struct UserState {
    UserActivity activity;
    std::int64_t class_day = std::numeric_limits<std::int64_t>::min();
    std::set<std::string> program_objects;
    std::unordered_map<std::size_t, ObjectHistory> objects;
    std::optional<std::size_t> last_record;  // index of the user's previous request
    std::set<std::string> session;
    Timestamp session_last = -std::numeric_limits<double>::infinity();
  };

  // ---- request handling --------------------------------------------------
  void on_request(std::size_t i) {
    const AccessRecord& wr = wall_[i];
    const AccessRecord& orig = original_[i];
    const Timestamp now = wr.ts;
    const int uidx = user_index_.at(wr.user_id);
    const std::size_t obj = catalog_->index_of(wr.object_id);
    auto& st = requests_[i];
    st.submit = now;
    st.ready = now;
    st.bytes = bytes_of(obj, wr.tr);
    st.home = home_[static_cast<std::size_t>(uidx)];
    ++report_.requests;
    report_.bytes_total += st.bytes;

    UserState& us = users_[static_cast<std::size_t>(uidx)];
    ObjectHistory& oh = us.objects[obj];
    const RequestClass verdict = oh.last ? classify_request(&*oh.last, orig, cfg_.classifier) : RequestClass::Unclassified;

    if (!caching_) {
      enqueue_origin(i, obj, IntervalSet(wr.tr));
    } else {
      serve_cached(i, obj, wr.tr);
    }
    if (st.pending == 0) finalize(i);

    if (predictive_) {
      streaming_step(i, uidx, obj, verdict, oh);
      predict(i, uidx, obj, verdict, us, oh);
    }
    // Behavioral state after the request is served.
    us.activity.add(orig);
    oh.wall.push_back(now);
    oh.behavior.push_back(orig.ts);
    const auto keep = static_cast<std::size_t>(cfg_.predictor.arima_window) + 1;
    while (oh.wall.size() > keep) {
      oh.wall.pop_front();
      oh.behavior.pop_front();
    }
    oh.prev_tr = oh.last ? std::optional<Interval>(oh.last->tr) : std::nullopt;
    oh.last = orig;
    // The Markov baseline learns from the serialized request log, all users interleaved.
    if (cfg_.strategy == Strategy::MD1 && i > 0) markov_.observe(original_[i - 1].object_id, orig.object_id);
    if (orig.ts - us.session_last > cfg_.miner.session_gap) {
      if (!us.session.empty()) transactions_.push_back(us.session);
      us.session.clear();
    }
    us.session.insert(orig.object_id);
    us.session_last = orig.ts;
    us.last_record = i;
  }

  void serve_cached(std::size_t i, std::size_t obj, const Interval& tr) {
    auto& st = requests_[i];
    const Timestamp now = st.submit;
    CacheStore* home = cache(st.home);
    const std::string& name = object_name(obj);
    LookupResult hit = home->lookup(name, tr, now);
    if (!hit.hit.empty()) attribute_local(st, obj, hit.hit);
    if (hit.miss.empty()) return;

    std::vector<PeerSource> peers;
    for (int c : clients_)
      if (c != st.home) peers.push_back({c, cache(c), topo_.pair_rate(c, st.home)});
    const PeerPlan plan = peer_lookup(name, hit.miss, peers, topo_.pair_rate(server_, st.home));
    for (const auto& a : plan.assignments) {
      if (a.dtn == kOrigin) {
        enqueue_origin(i, obj, a.ranges);
        continue;
      }
      cache(a.dtn)->touch(name, a.ranges, now);
      auto& lg = ledger(a.dtn, obj);
      consume(lg, obj, a.ranges);
      const Bytes b = bytes_of(obj, a.ranges);
      report_.bytes_peer += b;
      ++st.pending;
      start_transfer(a.dtn, st.home, b, now, TransferPurpose::Demand,
                     {detail::Job::DemandPeer, i, st.home, obj, a.ranges, b});
    }
  }

  // Splits a local hit into prefetch-, stream- and plain-cache bytes.
  void attribute_local(detail::RequestState& st, std::size_t obj, const IntervalSet& hit) {
    auto it = ledgers_.find({st.home, obj});
    Bytes pf = 0, sm = 0;
    if (it != ledgers_.end()) {
      auto& lg = it->second;
      const IntervalSet p = lg.prefetched.intersection(hit);
      pf = bytes_of(obj, p);
      lg.prefetched.subtract(p);
      report_.prefetch_consumed += pf;
      IntervalSet rest = hit;
      rest.subtract(p);
      const IntervalSet s = lg.streamed.intersection(rest);
      sm = bytes_of(obj, s);
      lg.streamed.subtract(hit);
    }
    const Bytes total = bytes_of(obj, hit);
    report_.bytes_prefetch += pf;
    report_.bytes_stream += sm;
    report_.bytes_local += total - std::min(total, pf + sm);
  }

  void consume(detail::Ledger& lg, std::size_t obj, const IntervalSet& ranges) {
    const IntervalSet p = lg.prefetched.intersection(ranges);
    report_.prefetch_consumed += bytes_of(obj, p);
    lg.prefetched.subtract(p);
    lg.streamed.subtract(ranges);
  }

  void enqueue_origin(std::size_t i, std::size_t obj, const IntervalSet& ranges) {
    auto& st = requests_[i];
    const Bytes b = bytes_of(obj, ranges);
    report_.bytes_origin += b;
    report_.origin_queue_bytes += b;
    if (!st.origin) {
      st.origin = true;
      ++report_.origin_requests;
    }
    ++st.pending;
    queue_.push_back({detail::Job::DemandOrigin, i, st.home, obj, ranges, b});
    dispatch(st.submit);
  }

  void dispatch(Timestamp now) {
    while (busy_ < cfg_.origin_workers && !queue_.empty()) {
      detail::Job job = std::move(queue_.front());
      queue_.pop_front();
      ++busy_;
      report_.max_in_service = std::max<std::uint64_t>(report_.max_in_service, static_cast<std::uint64_t>(busy_));
      auto& st = requests_[job.request];
      if (!service_started_[job.request]) {
        service_started_[job.request] = true;
        latencies_.push_back(now - st.submit);
      }
      report_.origin_bytes_total += job.bytes;
      const Bytes b = job.bytes;
      start_transfer(server_, job.dst, b, now, TransferPurpose::Demand, std::move(job));
    }
  }

  void start_transfer(int src, int dst, Bytes bytes, Timestamp now, TransferPurpose purpose, detail::Job job) {
    const std::uint64_t token = next_token_++;
    jobs_.emplace(token, std::move(job));
    flows_.start(src, dst, static_cast<double>(std::max<Bytes>(bytes, 1)), now, purpose, token);
    for (int port : {src, dst})
      report_.max_port_utilization =
          std::max(report_.max_port_utilization, flows_.port_flow(port) / topo_.port_rate(port));
  }

  void on_transfer_done(const Transfer& tr, Timestamp now) {
    auto node = jobs_.extract(tr.token);
    detail::Job& job = node.mapped();
    switch (job.kind) {
      case detail::Job::DemandOrigin:
        --busy_;
        [[fallthrough]];
      case detail::Job::DemandPeer: {
        store(job.dst, job.object, job.ranges, now);
        auto& st = requests_[job.request];
        st.ready = std::max(st.ready, now);
        if (--st.pending == 0) finalize(job.request);
        if (job.kind == detail::Job::DemandOrigin) dispatch(now);
        break;
      }
      case detail::Job::Prefetch: {
        auto& lg = ledger(job.dst, job.object);
        lg.inflight.subtract(job.ranges);
        IntervalSet already;
        for (const Interval& iv : job.ranges) already.add(cache(job.dst)->covered(object_name(job.object), iv));
        IntervalSet fresh = job.ranges;
        fresh.subtract(already);
        report_.prefetch_late += bytes_of(job.object, already);
        store(job.dst, job.object, job.ranges, now);
        // Only ranges that actually ended up cached count as pending prefetches.
        IntervalSet kept;
        for (const Interval& iv : fresh) kept.add(cache(job.dst)->covered(object_name(job.object), iv));
        report_.prefetch_evicted += bytes_of(job.object, fresh) - bytes_of(job.object, kept);
        ledger(job.dst, job.object).prefetched.add(kept);
        break;
      }
      case detail::Job::Stream: {
        IntervalSet already;
        for (const Interval& iv : job.ranges) already.add(cache(job.dst)->covered(object_name(job.object), iv));
        IntervalSet fresh = job.ranges;
        fresh.subtract(already);
        store(job.dst, job.object, job.ranges, now);
        IntervalSet kept;
        for (const Interval& iv : fresh) kept.add(cache(job.dst)->covered(object_name(job.object), iv));
        ledger(job.dst, job.object).streamed.add(kept);
        break;
      }
      case detail::Job::Replicate:
        store(job.dst, job.object, job.ranges, now);
        break;
    }
  }

  // Inserts fetched ranges into a DTN cache and settles evictions in the ledger.
  void store(int dtn, std::size_t obj, const IntervalSet& ranges, Timestamp now) {
    CacheStore* c = cache(dtn);
    if (c == nullptr) return;
    const std::string& name = object_name(obj);
    for (const Interval& iv : ranges) {
      if (!c->fits(name, iv)) continue;
      for (const auto& ev : c->insert(name, iv, now)) {
        auto it = ledgers_.find({dtn, catalog_->index_of(ev.object_id)});
        if (it == ledgers_.end()) continue;
        const IntervalSet gone = it->second.prefetched.intersection(ev.tr);
        report_.prefetch_evicted += bytes_of(catalog_->index_of(ev.object_id), gone);
        it->second.prefetched.subtract(gone);
        it->second.streamed.subtract(ev.tr);
      }
    }
  }

  void finalize(std::size_t i) {
    auto& st = requests_[i];
    const Timestamp done = st.ready + static_cast<double>(st.bytes) / topo_.access_rate();
    const double elapsed = done - st.submit;
    if (st.bytes > 0 && elapsed > 0) {
      throughput_sum_ += static_cast<double>(st.bytes) * 8.0 / 1e6 / elapsed;
      ++throughput_n_;
    }
  }

  // ---- streaming ---------------------------------------------------------
  void streaming_step(std::size_t i, int uidx, std::size_t obj, RequestClass verdict, const ObjectHistory& oh) {
    const AccessRecord& wr = wall_[i];
    const std::string& user = user_names_[static_cast<std::size_t>(uidx)];
    const std::string& name = wr.object_id;
    streams_.touch(user, name, wr.ts);
    if (!streams_.observe(user, name, verdict) || streams_.subscribed(user, name)) return;
    double period = 0;
    if (oh.last && wr.tr.begin > oh.last->tr.begin)
      period = static_cast<double>(wr.tr.begin - oh.last->tr.begin) / cfg_.traffic_factor;
    else if (!oh.wall.empty())
      period = wr.ts - oh.wall.back();
    if (!(period > 0)) return;
    const bool fresh = streams_.find(name) == nullptr;
    streams_.promote(user, name, home_[static_cast<std::size_t>(uidx)], period, wr.tr.end, wr.ts);
    if (fresh) {
      ++report_.streams_created;
      stream_born_[obj] = wr.ts;
      schedule_tick(obj, wr.ts);
    }
  }

  void schedule_tick(std::size_t obj, Timestamp now) {
    const StreamSubscription* sub = streams_.find(object_name(obj));
    if (sub == nullptr) return;
    const auto stride = std::max<std::int64_t>(1, std::llround(sub->period * cfg_.traffic_factor));
    const std::int64_t target = sub->high_water + stride;
    schedule(std::max(now, wall_time(static_cast<double>(target))), detail::Event::Tick, obj, target);
  }

  void on_tick(std::size_t obj, std::int64_t target, Timestamp now) {
    const std::string& name = object_name(obj);
    if (streams_.expire(name, now).terminated) {
      report_.stream_active_s += now - stream_born_.at(obj);
      stream_born_.erase(obj);
      return;
    }
    if (auto push = streams_.tick(name, target)) {
      ++report_.stream_origin_reads;
      const Bytes b = bytes_of(obj, push->range);
      report_.origin_bytes_total += b;
      for (int dtn : push->client_dtns) {
        ++report_.stream_deliveries;
        report_.stream_bytes += b;
        start_transfer(server_, dtn, b, now, TransferPurpose::Stream,
                       {detail::Job::Stream, 0, dtn, obj, IntervalSet(push->range), b});
      }
    }
    schedule_tick(obj, now);
  }

  // ---- prediction --------------------------------------------------------
  bool is_program(UserState& us, const std::string& object, Timestamp behavior_now) {
    const auto day = static_cast<std::int64_t>(std::floor(behavior_now / kDay));
    if (day != us.class_day) {
      us.class_day = day;
      us.program_objects = us.activity.program_set(behavior_now, cfg_.classifier);
    }
    return us.program_objects.count(object) != 0;
  }

  void predict(std::size_t i, int uidx, std::size_t obj, RequestClass verdict, UserState& us, const ObjectHistory& oh) {
    const AccessRecord& wr = wall_[i];
    const AccessRecord* prev = us.last_record ? &wall_[*us.last_record] : nullptr;
    std::vector<PrefetchPlan> plans;
    switch (cfg_.strategy) {
      case Strategy::MD1:
        plans = markov_plans(markov_, wr, prev, cfg_.miner, cfg_.predictor.prefetch_offset);
        break;
      case Strategy::MD2:
        plans = predict_by_rules(wr, prev, session_context(us, original_[i]), rules_, cfg_.miner,
                                 cfg_.predictor.prefetch_offset);
        break;
      case Strategy::HPM: {
        if (verdict == RequestClass::RealTime) break;
        if (is_program(us, wr.object_id, original_[i].ts)) {
          if (auto p = history_plan(wr, oh)) {
            plans.push_back(*p);
            break;
          }
        }
        plans = predict_by_rules(wr, prev, session_context(us, original_[i]), rules_, cfg_.miner,
                                 cfg_.predictor.prefetch_offset);
        break;
      }
      default:
        break;
    }
    (void)uidx;
    (void)obj;
    for (auto& p : plans) {
      ++report_.prefetch_plans;
      const std::uint64_t id = next_plan_++;
      const Timestamp at = p.fire_at;
      plans_.emplace(id, std::make_pair(home_[static_cast<std::size_t>(uidx)], std::move(p)));
      schedule(at, detail::Event::Fire, id);
    }
  }

  std::optional<PrefetchPlan> history_plan(const AccessRecord& wr, const ObjectHistory& oh) const {
    std::vector<Timestamp> ts(oh.wall.begin(), oh.wall.end());
    ts.push_back(wr.ts);
    int recent = 1;
    for (Timestamp b : oh.behavior)
      if (b >= behavior_time(wr.ts) - cfg_.predictor.learning_period) ++recent;
    if (recent < cfg_.predictor.repeat_threshold) return std::nullopt;
    const std::optional<Interval> prev_tr = oh.last ? std::optional<Interval>(oh.last->tr) : std::nullopt;
    return plan_from_history(wr, ts, prev_tr, cfg_.predictor);
  }

  std::set<std::string> session_context(const UserState& us, const AccessRecord& orig) const {
    std::set<std::string> ctx{orig.object_id};
    if (orig.ts - us.session_last <= cfg_.miner.session_gap) ctx.insert(us.session.begin(), us.session.end());
    return ctx;
  }

  void on_fire(std::uint64_t id, Timestamp now) {
    auto node = plans_.extract(id);
    const int dtn = node.mapped().first;
    const PrefetchPlan& p = node.mapped().second;
    if (!p.tr.valid() || p.tr.empty()) return;
    const std::size_t obj = catalog_->index_of(p.object_id);
    CacheStore* c = cache(dtn);
    if (!c->fits(p.object_id, p.tr)) return;
    auto& lg = ledger(dtn, obj);
    IntervalSet missing(p.tr);
    missing.subtract(c->covered(p.object_id, p.tr));
    missing.subtract(lg.inflight);
    if (missing.empty()) return;
    lg.inflight.add(missing);
    const Bytes b = bytes_of(obj, missing);
    ++report_.prefetch_transfers;
    report_.prefetch_bytes += b;
    report_.origin_bytes_total += b;
    start_transfer(server_, dtn, b, now, TransferPurpose::Prefetch, {detail::Job::Prefetch, 0, dtn, obj, missing, b});
  }

  // ---- periodic maintenance ---------------------------------------------
  void on_remine(Timestamp now) {
    if (!transactions_.empty()) rules_ = RuleIndex(mine_rules(transactions_, cfg_.miner));
    const Timestamp next = wall_time(behavior_time(now) + cfg_.remine_interval);
    if (next <= last_wall()) schedule(next, detail::Event::Remine);
  }

  void on_rebalance(Timestamp now) {
    ++report_.rebalances;
    const Timestamp b_now = behavior_time(now);
    const Timestamp from = b_now - cfg_.rebalance_interval;
    std::unordered_map<std::string, int> home_of;
    for (std::size_t u = 0; u < user_names_.size(); ++u) home_of[user_names_[u]] = home_[u];
    // Records up to now on the original axis are exactly the ones already replayed.
    std::vector<AccessRecord> window;
    for (const auto& r : original_) {
      if (r.ts >= b_now) break;
      if (r.ts >= from) window.push_back(r);
    }
    auto vectors = interest_vectors(window, *catalog_, from, b_now, [&](const std::string& u) { return home_of.at(u); });
    const int k = cfg_.groups > 0 ? cfg_.groups : static_cast<int>(clients_.size());
    const double hours = cfg_.rebalance_interval / 3600.0;

    std::unordered_map<std::string, int> group_of_user;
    auto inputs = [&](const VirtualGroup& g) {
      std::map<int, std::uint64_t> via;
      std::set<std::string> members(g.members.begin(), g.members.end());
      for (const auto& r : window)
        if (members.count(r.user_id)) ++via[home_of.at(r.user_id)];
      std::vector<HubCandidate> out;
      const auto dtns = g.dtns();
      for (int d : dtns) {
        double p = 0;
        for (int e : dtns)
          if (e != d) p += topo_.bandwidth[static_cast<std::size_t>(d)][static_cast<std::size_t>(e)] * topo_.scale;
        out.push_back({d, p, cache(d)->free_fraction(), static_cast<double>(via[d]) / hours});
      }
      return out;
    };
    const Placement placement = rebalance(vectors, k, cfg_.seed + report_.rebalances, inputs);

    for (const auto& g : placement.groups) {
      const int hub = g.hub();
      std::set<std::string> members(g.members.begin(), g.members.end());
      std::map<std::string, HotObject> hot;
      for (const auto& r : window) {
        if (!members.count(r.user_id)) continue;
        auto& h = hot[r.object_id];
        h.object_id = r.object_id;
        ++h.count;
        h.tr = r.tr;
      }
      std::vector<HotObject> ranked;
      for (auto& [id, h] : hot) {
        h.bytes = request_bytes({0, "", id, h.tr}, *catalog_);
        ranked.push_back(h);
      }
      const auto budget = static_cast<Bytes>(cfg_.replication_budget * static_cast<double>(cache(hub)->capacity()));
      for (const auto& rep : replicate_hot(ranked, budget)) {
        const std::size_t obj = catalog_->index_of(rep.object_id);
        IntervalSet missing(rep.tr);
        missing.subtract(cache(hub)->covered(rep.object_id, rep.tr));
        if (missing.empty()) continue;
        const Bytes b = bytes_of(obj, missing);
        report_.replicated_bytes += b;
        report_.origin_bytes_total += b;
        start_transfer(server_, hub, b, now, TransferPurpose::Replicate,
                       {detail::Job::Replicate, 0, hub, obj, missing, b});
      }
    }
    const Timestamp next = wall_time(b_now + cfg_.rebalance_interval);
    if (next <= last_wall()) schedule(next, detail::Event::Rebalance);
  }

  void on_event(const detail::Event& ev) {
    switch (ev.kind) {
      case detail::Event::Fire: on_fire(ev.a, ev.time); break;
      case detail::Event::Tick: on_tick(static_cast<std::size_t>(ev.a), ev.b, ev.time); break;
      case detail::Event::Remine: on_remine(ev.time); break;
      case detail::Event::Rebalance: on_rebalance(ev.time); break;
    }
  }

  void finish() {
    auto& r = report_;
    r.strategy = to_string(cfg_.strategy);
    r.policy = to_string(cfg_.policy);
    r.condition_scale = topo_.scale;
    r.traffic_factor = cfg_.traffic_factor;
    for (const auto& d : topo_.dtns)
      if (!d.server) r.cache_capacity = d.cache_capacity;
    if (r.requests) r.normalized_origin_requests = static_cast<double>(r.origin_requests) / static_cast<double>(r.requests);
    if (r.bytes_total)
      r.local_access_fraction =
          static_cast<double>(r.bytes_local + r.bytes_prefetch + r.bytes_stream) / static_cast<double>(r.bytes_total);
    r.latency_samples = latencies_.size();
    if (!latencies_.empty()) {
      double sum = 0;
      for (double l : latencies_) sum += l;
      r.mean_latency_s = sum / static_cast<double>(latencies_.size());
      std::vector<double> sorted = latencies_;
      std::sort(sorted.begin(), sorted.end());
      auto pct = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()))) - 1;
        return sorted[std::min(idx, sorted.size() - 1)];
      };
      r.p50_latency_s = pct(0.50);
      r.p95_latency_s = pct(0.95);
      r.p99_latency_s = pct(0.99);
    }
    if (throughput_n_) r.mean_throughput_mbps = throughput_sum_ / static_cast<double>(throughput_n_);
    for (const auto& [key, lg] : ledgers_) r.prefetch_wrong += bytes_of(key.second, lg.prefetched);
    if (r.prefetch_bytes > 0)
      r.recall = static_cast<double>(r.prefetch_consumed) / static_cast<double>(r.prefetch_bytes);
  }

  SimConfig cfg_;
  Topology topo_;
  const Catalog* catalog_;
  FlowNetwork flows_;
  std::vector<AccessRecord> original_;
  std::vector<AccessRecord> wall_;
  Timestamp t0_ = 0;
  int server_ = 0;
  std::vector<int> clients_;
  bool caching_ = false;
  bool predictive_ = false;
  bool ran_ = false;

  std::vector<std::unique_ptr<CacheStore>> caches_;
  std::map<std::pair<int, std::size_t>, detail::Ledger> ledgers_;
  StreamServer streams_;
  std::map<std::size_t, Timestamp> stream_born_;
  RuleIndex rules_;
  MarkovModel markov_;
  std::vector<Transaction> transactions_;

  std::vector<std::string> user_names_;
  std::unordered_map<std::string, int> user_index_;
  std::vector<int> home_;
  std::vector<UserState> users_;
  std::vector<detail::RequestState> requests_;
  std::vector<bool> service_started_ = {};

  std::deque<detail::Job> queue_;
  int busy_ = 0;
  std::unordered_map<std::uint64_t, detail::Job> jobs_;
  std::uint64_t next_token_ = 0;
  std::unordered_map<std::uint64_t, std::pair<int, PrefetchPlan>> plans_;
  std::uint64_t next_plan_ = 0;
  std::priority_queue<detail::Event, std::vector<detail::Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;

  std::vector<double> latencies_;
  double throughput_sum_ = 0;
  std::uint64_t throughput_n_ = 0;
  SimReport report_;
};

inline SimReport simulate(std::vector<AccessRecord> records, const Catalog& catalog, const Topology& topology,
                          const SimConfig& cfg) {
  return Simulator(std::move(records), catalog, topology, cfg).run();
}

}  // namespace dtnsim
