#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dtnsim/simulator.hpp"
#include "dtnsim/trace.hpp"
#include "dtnsim/workload.hpp"

namespace dtnsim {

// ---- units ------------------------------------------------------------------

namespace detail {

struct Unit {
  const char* suffix;
  double factor;
};

inline double parse_with_units(const std::string& text, std::initializer_list<Unit> units, const char* what) {
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad ") + what + " '" + text + "'");
  }
  std::string suffix = text.substr(pos);
  while (!suffix.empty() && suffix.front() == ' ') suffix.erase(suffix.begin());
  for (const auto& u : units)
    if (suffix == u.suffix) {
      if (!std::isfinite(value) || value < 0) throw std::invalid_argument(std::string("bad ") + what + " '" + text + "'");
      return value * u.factor;
    }
  throw std::invalid_argument(std::string("unknown ") + what + " unit in '" + text + "'");
}

}  // namespace detail

/// "128GB", "1TB", "512MiB", "42B". Decimal prefixes are powers of 1000.
inline Bytes parse_bytes(const std::string& text) {
  const double v = detail::parse_with_units(
      text,
      {{"B", 1}, {"KB", 1e3}, {"MB", 1e6}, {"GB", 1e9}, {"TB", 1e12}, {"PB", 1e15},
       {"KiB", 1024.0}, {"MiB", 1048576.0}, {"GiB", 1073741824.0}, {"TiB", 1099511627776.0}},
      "size");
  if (v >= 1.8e19) throw std::invalid_argument("size too large: " + text);
  return static_cast<Bytes>(std::llround(v));
}

inline std::string format_bytes(Bytes b) {
  static const std::pair<const char*, Bytes> units[] = {
      {"PB", 1000000000000000ULL}, {"TB", 1000000000000ULL}, {"GB", 1000000000ULL}, {"MB", 1000000ULL}, {"KB", 1000ULL}};
  for (const auto& [suffix, f] : units)
    if (b >= f && b % f == 0) return std::to_string(b / f) + suffix;
  return std::to_string(b) + "B";
}

/// "40Gbps", "500Mbps"; returns Gbps.
inline double parse_gbps(const std::string& text) {
  return detail::parse_with_units(text, {{"Gbps", 1}, {"Mbps", 1e-3}, {"Tbps", 1e3}}, "bandwidth");
}

inline std::string format_gbps(double g) { return detail::format_double(g) + "Gbps"; }

/// "1800s", "30m", "1h", "7d"; returns seconds.
inline double parse_duration(const std::string& text) {
  return detail::parse_with_units(text, {{"s", 1}, {"m", 60}, {"h", 3600}, {"d", 86400}}, "duration");
}

inline std::string format_duration(double s) { return detail::format_double(s) + "s"; }

// ---- configuration ------------------------------------------------------------

struct TraceSource {
  // Either a trace file with its catalog, or a synthetic workload.
  std::string trace_path;
  std::string catalog_path;
  std::optional<WorkloadSpec> workload;

  friend bool operator==(const TraceSource&, const TraceSource&) = default;
};

struct TopologyConfig {
  std::vector<double> client_ports{40, 35, 30, 20, 15, 10};  // Gbps
  double server_port = 40;
  double access_gbps = 100;

  friend bool operator==(const TopologyConfig&, const TopologyConfig&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TraceSource trace;
  TopologyConfig topology;
  std::vector<Strategy> strategies{Strategy::NoCache, Strategy::CacheOnly, Strategy::MD1, Strategy::MD2, Strategy::HPM};
  std::vector<Bytes> cache_sizes{128000000000ULL};
  std::vector<EvictionPolicy> policies{EvictionPolicy::LRU};
  std::vector<NetworkCondition> conditions{NetworkCondition::Best};
  std::vector<double> traffic_factors{1.0};
  std::uint64_t seed = 1;
  std::string output_dir = "runs";
  int origin_workers = 10;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline void validate(const ExperimentConfig& c) {
  if (c.strategies.empty() || c.cache_sizes.empty() || c.policies.empty() || c.conditions.empty() ||
      c.traffic_factors.empty())
    throw std::invalid_argument("every sweep axis needs at least one value");
  for (Bytes b : c.cache_sizes)
    if (b == 0) throw std::invalid_argument("cache sizes must be positive");
  for (double f : c.traffic_factors)
    if (!(f > 0) || !std::isfinite(f)) throw std::invalid_argument("traffic factors must be positive");
  if (c.topology.client_ports.empty()) throw std::invalid_argument("topology needs client DTNs");
  for (double p : c.topology.client_ports)
    if (!(p > 0)) throw std::invalid_argument("port speeds must be positive");
  if (!(c.topology.server_port > 0) || !(c.topology.access_gbps > 0))
    throw std::invalid_argument("port speeds must be positive");
  if (c.origin_workers < 1) throw std::invalid_argument("origin_workers must be >= 1");
  const bool file = !c.trace.trace_path.empty() || !c.trace.catalog_path.empty();
  if (file == c.trace.workload.has_value())
    throw std::invalid_argument("trace source needs either trace+catalog files or a workload");
  if (file && (c.trace.trace_path.empty() || c.trace.catalog_path.empty()))
    throw std::invalid_argument("a trace file needs its catalog");
  if (c.trace.workload) validate(*c.trace.workload);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json trace;
  if (c.trace.workload)
    trace["workload"] = *c.trace.workload;
  else
    trace = {{"file", c.trace.trace_path}, {"catalog", c.trace.catalog_path}};
  nlohmann::json ports = nlohmann::json::array();
  for (double p : c.topology.client_ports) ports.push_back(format_gbps(p));
  auto list = [](const auto& xs, auto fmt) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : xs) a.push_back(fmt(x));
    return a;
  };
  j = nlohmann::json{
      {"name", c.name},
      {"trace", trace},
      {"topology",
       {{"client_ports", ports},
        {"server_port", format_gbps(c.topology.server_port)},
        {"access", format_gbps(c.topology.access_gbps)}}},
      {"strategies", list(c.strategies, [](Strategy s) { return std::string(to_string(s)); })},
      {"cache_sizes", list(c.cache_sizes, format_bytes)},
      {"policies", list(c.policies, [](EvictionPolicy p) { return std::string(to_string(p)); })},
      {"network_conditions", list(c.conditions, [](NetworkCondition n) { return std::string(to_string(n)); })},
      {"traffic_factors", c.traffic_factors},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"origin_workers", c.origin_workers}};
}

/// Unknown keys are rejected so that typos do not silently fall back to defaults.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const std::set<std::string> known{"name",     "trace",           "topology", "strategies",
                                           "cache_sizes", "policies",     "network_conditions", "traffic_factors",
                                           "seed",     "output_dir",      "origin_workers"};
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw std::invalid_argument("unknown config key '" + item.key() + "'");
  c = ExperimentConfig{};
  if (j.contains("name")) c.name = j.at("name").get<std::string>();
  const auto& t = j.at("trace");
  if (t.contains("workload")) {
    c.trace.workload = t.at("workload").get<WorkloadSpec>();
  } else {
    c.trace.trace_path = t.at("file").get<std::string>();
    c.trace.catalog_path = t.at("catalog").get<std::string>();
  }
  if (j.contains("topology")) {
    const auto& tp = j.at("topology");
    if (tp.contains("client_ports")) {
      c.topology.client_ports.clear();
      for (const auto& p : tp.at("client_ports")) c.topology.client_ports.push_back(parse_gbps(p.get<std::string>()));
    }
    if (tp.contains("server_port")) c.topology.server_port = parse_gbps(tp.at("server_port").get<std::string>());
    if (tp.contains("access")) c.topology.access_gbps = parse_gbps(tp.at("access").get<std::string>());
  }
  auto list = [&j](const char* key, auto& out, auto parse) {
    if (!j.contains(key)) return;
    out.clear();
    for (const auto& v : j.at(key)) out.push_back(parse(v));
  };
  list("strategies", c.strategies, [](const nlohmann::json& v) { return parse_strategy(v.get<std::string>()); });
  list("cache_sizes", c.cache_sizes, [](const nlohmann::json& v) { return parse_bytes(v.get<std::string>()); });
  list("policies", c.policies, [](const nlohmann::json& v) { return parse_policy(v.get<std::string>()); });
  list("network_conditions", c.conditions,
       [](const nlohmann::json& v) { return parse_condition(v.get<std::string>()); });
  list("traffic_factors", c.traffic_factors, [](const nlohmann::json& v) { return v.get<double>(); });
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("origin_workers")) c.origin_workers = j.at("origin_workers").get<int>();
  validate(c);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return j.get<ExperimentConfig>();
}

/// Stable hash of the canonical serialized config.
inline std::uint64_t config_hash(const ExperimentConfig& c) { return fnv1a(nlohmann::json(c).dump()); }

// ---- sweep ----------------------------------------------------------------------

struct Cell {
  std::size_t index = 0;
  Strategy strategy = Strategy::HPM;
  Bytes cache = 0;
  EvictionPolicy policy = EvictionPolicy::LRU;
  NetworkCondition condition = NetworkCondition::Best;
  double traffic_factor = 1;

  std::string label() const {
    return std::string(to_string(strategy)) + "/" + format_bytes(cache) + "/" + to_string(policy) + "/" +
           to_string(condition) + "/x" + detail::format_double(traffic_factor);
  }
};

/// Cells in sweep order: condition, traffic factor, policy, cache size, strategy.
inline std::vector<Cell> expand(const ExperimentConfig& c) {
  std::vector<Cell> out;
  for (auto cond : c.conditions)
    for (double f : c.traffic_factors)
      for (auto pol : c.policies)
        for (Bytes size : c.cache_sizes)
          for (auto s : c.strategies) out.push_back({out.size(), s, size, pol, cond, f});
  return out;
}

struct Workload {
  std::vector<AccessRecord> records;
  Catalog catalog;
};

inline Workload load_workload(const TraceSource& src) {
  if (src.workload) {
    auto t = synthesize_trace(*src.workload);
    return {std::move(t.records), std::move(t.catalog)};
  }
  Workload w;
  w.catalog = parse_catalog(src.catalog_path);
  w.records = parse_trace(src.trace_path, w.catalog);
  return w;
}

inline Topology make_topology(const TopologyConfig& t, Bytes cache, NetworkCondition cond) {
  Topology topo = Topology::standard(cache, cond, t.client_ports, t.server_port);
  topo.access_gbps = t.access_gbps;
  return topo;
}

inline SimReport run_cell(const Cell& cell, const ExperimentConfig& cfg, const Workload& w) {
  SimConfig sc;
  sc.strategy = cell.strategy;
  sc.policy = cell.policy;
  sc.traffic_factor = cell.traffic_factor;
  sc.seed = cfg.seed;
  sc.origin_workers = cfg.origin_workers;
  SimReport r = simulate(w.records, w.catalog, make_topology(cfg.topology, cell.cache, cell.condition), sc);
  r.network_condition = to_string(cell.condition);
  return r;
}

class CellError : public std::runtime_error {
 public:
  CellError(const Cell& cell, const std::string& what)
      : std::runtime_error("cell " + std::to_string(cell.index) + " (" + cell.label() + ") failed: " + what) {}
};

/// Runs every cell on up to `jobs` threads. Results come back in cell order;
/// the first failure (lowest cell index) is rethrown as a CellError after all
/// workers stop.
inline std::vector<SimReport> run_sweep(const ExperimentConfig& cfg, const Workload& w, int jobs = 1,
                                        const std::function<void(const Cell&, const SimReport&)>& progress = {}) {
  const auto cells = expand(cfg);
  std::vector<SimReport> out(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= cells.size()) return;
      try {
        out[i] = run_cell(cells[i], cfg, w);
        if (progress) {
          std::lock_guard lock(mu);
          progress(cells[i], out[i]);
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
        failed = true;
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!errors[i].empty()) throw CellError(cells[i], errors[i]);
  return out;
}

}  // namespace dtnsim
