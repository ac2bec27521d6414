#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtnsim/random.hpp"
#include "dtnsim/trace.hpp"

namespace dtnsim {

enum class AccessKind { Human, Regular, RealTime, Overlapping };

inline const char* to_string(AccessKind k) {
  switch (k) {
    case AccessKind::Human: return "human";
    case AccessKind::Regular: return "regular";
    case AccessKind::RealTime: return "realtime";
    case AccessKind::Overlapping: return "overlapping";
  }
  return "?";
}

struct RequestTypeMix {
  double regular = 1.0;
  double realtime = 0.0;
  double overlapping = 0.0;

  friend bool operator==(const RequestTypeMix&, const RequestTypeMix&) = default;
};

/// Periodic request shape of one program-request type: a request every `period`
/// seconds for the `window` seconds of observation data ending at the last period boundary.
struct PeriodicShape {
  std::int64_t period = 3600;
  std::int64_t window = 3600;

  friend bool operator==(const PeriodicShape&, const PeriodicShape&) = default;
};

struct WorkloadSpec {
  int n_users = 200;
  double human_user_fraction = 0.867;
  double program_volume_fraction = 0.901;
  // Published shares 13.8/25.7/60.8 sum to 100.3%; renormalized to 1.
  RequestTypeMix mix{0.138 / 1.003, 0.257 / 1.003, 0.608 / 1.003};
  /// Target duplicate share within overlapping requests; <= 0 keeps overlap_shape.window.
  double overlap_duplicate_fraction = 0.904;
  std::int64_t duration = 30 * 86400;
  int n_instruments = 12;
  int n_locations = 24;
  double spatial_correlation = 0.8;
  std::uint64_t rng_seed = 1;

  PeriodicShape regular_shape{3600, 3600};
  PeriodicShape realtime_shape{60, 60};
  PeriodicShape overlap_shape{3600, 86400};
  double jitter_fraction = 0.005;  // of the period, at most 0.01
  int users_per_program_object = 2;
  double program_bytes = 8e12;  // total program-request volume over the trace

  double human_sessions_mean = 6.0;
  int human_session_min_steps = 3;
  int human_session_max_steps = 6;
  int n_regions = 24;
  int region_width = 5;
  double region_zipf = 1.0;

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

inline void validate(const WorkloadSpec& s) {
  auto frac = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0,1]");
  };
  if (s.n_users < 1) throw std::invalid_argument("n_users must be >= 1");
  frac(s.human_user_fraction, "human_user_fraction");
  frac(s.program_volume_fraction, "program_volume_fraction");
  frac(s.mix.regular, "mix.regular");
  frac(s.mix.realtime, "mix.realtime");
  frac(s.mix.overlapping, "mix.overlapping");
  frac(s.spatial_correlation, "spatial_correlation");
  if (s.overlap_duplicate_fraction >= 1.0) throw std::invalid_argument("overlap_duplicate_fraction must be < 1");
  if (std::abs(s.mix.regular + s.mix.realtime + s.mix.overlapping - 1.0) > 1e-9)
    throw std::invalid_argument("request-type mix must sum to 1");
  if (s.duration <= 0) throw std::invalid_argument("duration must be positive");
  if (s.n_instruments < 1 || s.n_locations < 1) throw std::invalid_argument("catalog dimensions must be positive");
  if (!(s.jitter_fraction >= 0 && s.jitter_fraction <= 0.01))
    throw std::invalid_argument("jitter_fraction must be in [0, 0.01]");
  for (const auto* shape : {&s.regular_shape, &s.realtime_shape, &s.overlap_shape})
    if (shape->period <= 0 || shape->window <= 0) throw std::invalid_argument("periods and windows must be positive");
  if (s.users_per_program_object < 1) throw std::invalid_argument("users_per_program_object must be >= 1");
  if (!(s.program_bytes > 0)) throw std::invalid_argument("program_bytes must be positive");
  if (s.human_session_min_steps < 1 || s.human_session_max_steps < s.human_session_min_steps)
    throw std::invalid_argument("bad human session step bounds");
  if (s.n_regions < 1 || s.region_width < 1) throw std::invalid_argument("bad region configuration");
  if (s.human_sessions_mean < 1) throw std::invalid_argument("human_sessions_mean must be >= 1");
}

inline WorkloadSpec workload_preset(const std::string& name) {
  WorkloadSpec s;
  if (name == "ooi-like") return s;
  if (name == "gage-like") {
    s.human_user_fraction = 0.941;
    s.program_volume_fraction = 0.906;
    s.mix = {0.772 / 1.005, 0.061 / 1.005, 0.172 / 1.005};
    s.overlap_duplicate_fraction = 0.896;
    s.program_bytes = 2e12;
    s.rng_seed = 2;
    return s;
  }
  throw std::invalid_argument("unknown workload preset '" + name + "'");
}

struct SyntheticTrace {
  std::vector<AccessRecord> records;
  Catalog catalog;
  std::map<std::string, AccessKind> user_kind;  // ground truth
  std::int64_t start = 0;                       // wall-clock start of the trace
};

namespace detail {

inline std::string object_name(int inst, int loc) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "i%02dl%03d", inst, loc);
  return buf;
}

inline std::string user_name(int idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%04d", idx);
  return buf;
}

/// Integer apportionment of `n` across weights; every positive weight gets >= 1 when n allows.
inline std::vector<int> apportion(int n, const std::vector<double>& weights) {
  std::vector<int> out(weights.size(), 0);
  int positive = 0;
  for (double w : weights) positive += w > 0;
  if (n <= 0 || positive == 0) return out;
  int remaining = n;
  if (n >= positive) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i] > 0) out[i] = 1;
    remaining -= positive;
  }
  double total = 0;
  for (double w : weights) total += w;
  std::vector<std::pair<double, std::size_t>> rema;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double exact = remaining * weights[i] / total;
    int whole = static_cast<int>(std::floor(exact));
    out[i] += whole;
    assigned += whole;
    rema.push_back({-(exact - whole), i});
  }
  std::sort(rema.begin(), rema.end());
  for (int k = 0; k < remaining - assigned; ++k) out[rema[static_cast<std::size_t>(k) % rema.size()].second] += 1;
  return out;
}

}  // namespace detail

/// Generates a calibrated synthetic access trace. Deterministic in spec.rng_seed.
///
/// Program users poll one object periodically with a per-user phase delay and
/// bounded jitter; observation windows end on period boundaries. Program objects
/// are drawn from per-type pools whose data rates are scaled so that per-type
/// volume matches `mix` and the total matches `program_bytes`. Human users issue
/// short sessions that walk a spatial region of the catalog; their window lengths
/// are scaled to hit `program_volume_fraction`.
inline SyntheticTrace synthesize_trace(const WorkloadSpec& spec) {
  validate(spec);
  Rng rng(spec.rng_seed);
  SyntheticTrace out;

  PeriodicShape overlap = spec.overlap_shape;
  if (spec.overlap_duplicate_fraction > 0)
    overlap.window = std::llround(static_cast<double>(overlap.period) / (1.0 - spec.overlap_duplicate_fraction));
  const PeriodicShape shapes[3] = {spec.regular_shape, spec.realtime_shape, overlap};
  const AccessKind kinds[3] = {AccessKind::Regular, AccessKind::RealTime, AccessKind::Overlapping};

  std::int64_t max_window = 86400;
  for (const auto& sh : shapes) max_window = std::max(max_window, sh.window);
  const std::int64_t start = (max_window + 86399) / 86400 * 86400;
  const std::int64_t stop = start + spec.duration;
  out.start = start;

  // Catalog: instruments x locations, location ids ordered by proximity.
  const int n_objects = spec.n_instruments * spec.n_locations;
  std::vector<double> base_rate(static_cast<std::size_t>(n_objects));
  std::vector<std::pair<int, int>> coords(static_cast<std::size_t>(n_objects));
  for (int i = 0; i < spec.n_instruments; ++i)
    for (int l = 0; l < spec.n_locations; ++l) {
      auto idx = static_cast<std::size_t>(i * spec.n_locations + l);
      coords[idx] = {i, l};
      base_rate[idx] = rng.uniform(0.5, 1.5);
    }

  const int n_human = static_cast<int>(std::lround(spec.n_users * spec.human_user_fraction));
  const int n_program = spec.n_users - n_human;
  const std::vector<double> mix_w = {spec.mix.regular, spec.mix.realtime, spec.mix.overlapping};
  const auto type_counts = detail::apportion(n_program, mix_w);

  for (int t = 0; t < 3; ++t)
    if (type_counts[static_cast<std::size_t>(t)] > 0 && spec.duration < shapes[t].period)
      throw std::invalid_argument("duration shorter than one program period");

  // Disjoint object pools per program type.
  std::vector<std::size_t> order(static_cast<std::size_t>(n_objects));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> pools(3);
  std::size_t cursor = 0;
  std::vector<int> pool_of(static_cast<std::size_t>(n_objects), -1);
  for (int t = 0; t < 3; ++t) {
    int cnt = type_counts[static_cast<std::size_t>(t)];
    if (cnt == 0) continue;
    std::size_t size = static_cast<std::size_t>((cnt + spec.users_per_program_object - 1) / spec.users_per_program_object);
    if (cursor + size > order.size()) throw std::invalid_argument("catalog too small for program object pools");
    for (std::size_t k = 0; k < size; ++k) {
      pools[static_cast<std::size_t>(t)].push_back(order[cursor + k]);
      pool_of[order[cursor + k]] = t;
    }
    cursor += size;
  }

  // User identities, shuffled so that ids do not reveal the kind.
  std::vector<int> ids(static_cast<std::size_t>(spec.n_users));
  for (int i = 0; i < spec.n_users; ++i) ids[static_cast<std::size_t>(i)] = i;
  rng.shuffle(ids);
  std::size_t next_id = 0;

  struct Pending {
    Timestamp ts;
    int user;
    std::size_t object;
    Interval tr;
  };
  std::vector<Pending> pending;
  std::vector<double> type_volume(3, 0.0);

  for (int t = 0; t < 3; ++t) {
    const auto& shape = shapes[t];
    const auto& pool = pools[static_cast<std::size_t>(t)];
    for (int u = 0; u < type_counts[static_cast<std::size_t>(t)]; ++u) {
      const int uid = ids[next_id++];
      out.user_kind[detail::user_name(uid)] = kinds[t];
      // Round-robin keeps pool sharing even: users_per_program_object users per object.
      const std::size_t obj = pool[static_cast<std::size_t>(u) % pool.size()];
      const double per = static_cast<double>(shape.period);
      const double jitter = spec.jitter_fraction * per;
      const double delay = std::max(2.0 * jitter + 0.5, rng.uniform(0.02, 0.2) * per);
      for (std::int64_t g = (start / shape.period + 1) * shape.period;; g += shape.period) {
        Timestamp ts = static_cast<double>(g) + delay + (jitter > 0 ? rng.uniform(-jitter, jitter) : 0.0);
        if (ts >= static_cast<double>(stop)) break;
        Interval tr{g - shape.window, g};
        pending.push_back({ts, uid, obj, tr});
        type_volume[static_cast<std::size_t>(t)] += base_rate[obj] * static_cast<double>(tr.length());
      }
    }
  }

  // Rescale pool rates so per-type volume matches the mix.
  std::vector<double> rate = base_rate;
  for (int t = 0; t < 3; ++t) {
    if (type_volume[static_cast<std::size_t>(t)] <= 0) continue;
    const double scale = mix_w[static_cast<std::size_t>(t)] * spec.program_bytes / type_volume[static_cast<std::size_t>(t)];
    for (auto obj : pools[static_cast<std::size_t>(t)]) rate[obj] = base_rate[obj] * scale;
  }
  // Non-pool objects get the average program byte rate per object so human
  // windows have a comparable scale.
  {
    double acc = 0;
    int n = 0;
    for (std::size_t i = 0; i < rate.size(); ++i)
      if (pool_of[i] >= 0) {
        acc += rate[i] / base_rate[i];
        ++n;
      }
    const double typical = n ? acc / n : spec.program_bytes / static_cast<double>(spec.duration);
    for (std::size_t i = 0; i < rate.size(); ++i)
      if (pool_of[i] < 0) rate[i] = base_rate[i] * typical;
  }

  // Human sessions walking spatial regions.
  struct Region {
    std::vector<std::size_t> objects;
  };
  std::vector<Region> regions(static_cast<std::size_t>(spec.n_regions));
  for (auto& reg : regions) {
    const bool horizontal = rng.bernoulli(0.5);
    if (horizontal) {
      const int inst = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_instruments)));
      const int width = std::min(spec.region_width, spec.n_locations);
      const int l0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_locations - width + 1)));
      for (int l = l0; l < l0 + width; ++l) reg.objects.push_back(static_cast<std::size_t>(inst * spec.n_locations + l));
    } else {
      const int loc = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_locations)));
      const int width = std::min(spec.region_width, spec.n_instruments);
      const int i0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_instruments - width + 1)));
      for (int i = i0; i < i0 + width; ++i) reg.objects.push_back(static_cast<std::size_t>(i * spec.n_locations + loc));
    }
  }
  ZipfSampler pick_region(regions.size(), spec.region_zipf);

  std::vector<Pending> human;
  for (int h = 0; h < n_human; ++h) {
    const int uid = ids[next_id++];
    out.user_kind[detail::user_name(uid)] = AccessKind::Human;
    const auto max_extra = static_cast<std::uint64_t>(std::max(1.0, 2.0 * spec.human_sessions_mean - 1.0));
    const int sessions = 1 + static_cast<int>(rng.below(max_extra));
    for (int s = 0; s < sessions; ++s) {
      const auto& reg = regions[pick_region(rng)];
      auto todo = reg.objects;
      rng.shuffle(todo);
      const int steps = spec.human_session_min_steps +
                        static_cast<int>(rng.below(static_cast<std::uint64_t>(
                            spec.human_session_max_steps - spec.human_session_min_steps + 1)));
      const double gap = rng.uniform(30.0, 180.0);
      const double span = gap * 1.2 * steps;
      double ts = static_cast<double>(start) + rng.uniform() * std::max(1.0, static_cast<double>(spec.duration) - span);
      const std::int64_t day = static_cast<std::int64_t>(ts) / 86400 * 86400;
      const std::int64_t end = day - 86400 * static_cast<std::int64_t>(rng.below(30));
      const std::int64_t len = 86400 * (1 + static_cast<std::int64_t>(rng.below(7)));
      std::size_t next = 0;
      for (int k = 0; k < steps; ++k) {
        std::size_t obj;
        if (next < todo.size() && rng.bernoulli(spec.spatial_correlation))
          obj = todo[next++];
        else
          obj = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n_objects)));
        human.push_back({ts, uid, obj, Interval{end - len, end}});
        ts += gap * rng.uniform(0.9, 1.1);
      }
    }
  }

  double program_total = 0;
  for (const auto& p : pending) program_total += rate[p.object] * static_cast<double>(p.tr.length());
  if (!human.empty() && spec.program_volume_fraction < 1.0) {
    const double target = spec.program_volume_fraction > 0
                              ? program_total * (1.0 - spec.program_volume_fraction) / spec.program_volume_fraction
                              : program_total;
    // Two passes absorb the rounding of window lengths to whole seconds.
    for (int pass = 0; pass < 2; ++pass) {
      double vol = 0;
      for (const auto& p : human) vol += rate[p.object] * static_cast<double>(p.tr.length());
      const double scale = target / vol;
      for (auto& p : human) {
        const auto len = std::max<std::int64_t>(60, std::llround(static_cast<double>(p.tr.length()) * scale));
        p.tr.begin = p.tr.end - len;
      }
    }
    for (auto& p : human) pending.push_back(p);
  }

  std::vector<DataObject> objects;
  objects.reserve(static_cast<std::size_t>(n_objects));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_objects); ++i)
    objects.push_back({detail::object_name(coords[i].first, coords[i].second), coords[i].first, coords[i].second, rate[i]});
  out.catalog = Catalog(objects);

  out.records.reserve(pending.size());
  for (const auto& p : pending)
    out.records.push_back({p.ts, detail::user_name(p.user), objects[p.object].object_id, p.tr});
  sort_records(out.records);
  return out;
}

// JSON mapping for spec files.
inline void to_json(nlohmann::json& j, const PeriodicShape& s) { j = {{"period_s", s.period}, {"window_s", s.window}}; }
inline void from_json(const nlohmann::json& j, PeriodicShape& s) {
  s.period = j.at("period_s").get<std::int64_t>();
  s.window = j.at("window_s").get<std::int64_t>();
}

inline void to_json(nlohmann::json& j, const WorkloadSpec& s) {
  j = nlohmann::json{{"n_users", s.n_users},
                     {"human_user_fraction", s.human_user_fraction},
                     {"program_volume_fraction", s.program_volume_fraction},
                     {"mix", {{"regular", s.mix.regular}, {"realtime", s.mix.realtime}, {"overlapping", s.mix.overlapping}}},
                     {"overlap_duplicate_fraction", s.overlap_duplicate_fraction},
                     {"duration_s", s.duration},
                     {"n_instruments", s.n_instruments},
                     {"n_locations", s.n_locations},
                     {"spatial_correlation", s.spatial_correlation},
                     {"rng_seed", s.rng_seed},
                     {"regular_shape", s.regular_shape},
                     {"realtime_shape", s.realtime_shape},
                     {"overlap_shape", s.overlap_shape},
                     {"jitter_fraction", s.jitter_fraction},
                     {"users_per_program_object", s.users_per_program_object},
                     {"program_bytes", s.program_bytes},
                     {"human_sessions_mean", s.human_sessions_mean},
                     {"human_session_min_steps", s.human_session_min_steps},
                     {"human_session_max_steps", s.human_session_max_steps},
                     {"n_regions", s.n_regions},
                     {"region_width", s.region_width},
                     {"region_zipf", s.region_zipf}};
}

/// Missing keys keep their defaults (or the preset's, when "preset" is given).
inline void from_json(const nlohmann::json& j, WorkloadSpec& s) {
  if (j.contains("preset")) s = workload_preset(j.at("preset").get<std::string>());
  auto opt = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("n_users", s.n_users);
  opt("human_user_fraction", s.human_user_fraction);
  opt("program_volume_fraction", s.program_volume_fraction);
  if (j.contains("mix")) {
    const auto& m = j.at("mix");
    s.mix = {m.at("regular").get<double>(), m.at("realtime").get<double>(), m.at("overlapping").get<double>()};
  }
  opt("overlap_duplicate_fraction", s.overlap_duplicate_fraction);
  opt("duration_s", s.duration);
  opt("n_instruments", s.n_instruments);
  opt("n_locations", s.n_locations);
  opt("spatial_correlation", s.spatial_correlation);
  opt("rng_seed", s.rng_seed);
  opt("regular_shape", s.regular_shape);
  opt("realtime_shape", s.realtime_shape);
  opt("overlap_shape", s.overlap_shape);
  opt("jitter_fraction", s.jitter_fraction);
  opt("users_per_program_object", s.users_per_program_object);
  opt("program_bytes", s.program_bytes);
  opt("human_sessions_mean", s.human_sessions_mean);
  opt("human_session_min_steps", s.human_session_min_steps);
  opt("human_session_max_steps", s.human_session_max_steps);
  opt("n_regions", s.n_regions);
  opt("region_width", s.region_width);
  opt("region_zipf", s.region_zipf);
}

}  // namespace dtnsim
