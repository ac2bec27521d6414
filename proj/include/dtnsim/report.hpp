#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtnsim/experiment.hpp"

namespace dtnsim {

inline constexpr const char* kVersion = "1.0.0";

namespace detail {

inline std::string fmt(double v) { return std::isnan(v) ? std::string("nan") : format_double(v); }
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt(const std::string& v) { return v; }

struct Column {
  const char* name;
  std::function<std::string(const SimReport&)> get;
};

#define DTNSIM_COL(field) Column{#field, [](const SimReport& r) { return fmt(r.field); }}

inline const std::vector<Column>& report_columns() {
  static const std::vector<Column> cols{
      DTNSIM_COL(strategy),           DTNSIM_COL(policy),
      DTNSIM_COL(network_condition),  DTNSIM_COL(condition_scale),
      DTNSIM_COL(traffic_factor),     DTNSIM_COL(cache_capacity),
      DTNSIM_COL(requests),           DTNSIM_COL(origin_requests),
      DTNSIM_COL(normalized_origin_requests),
      DTNSIM_COL(bytes_total),        DTNSIM_COL(bytes_local),
      DTNSIM_COL(bytes_peer),         DTNSIM_COL(bytes_origin),
      DTNSIM_COL(bytes_prefetch),     DTNSIM_COL(bytes_stream),
      DTNSIM_COL(local_access_fraction),
      DTNSIM_COL(latency_samples),    DTNSIM_COL(mean_latency_s),
      DTNSIM_COL(p50_latency_s),      DTNSIM_COL(p95_latency_s),
      DTNSIM_COL(p99_latency_s),      DTNSIM_COL(mean_throughput_mbps),
      DTNSIM_COL(prefetch_plans),     DTNSIM_COL(prefetch_transfers),
      DTNSIM_COL(prefetch_bytes),     DTNSIM_COL(prefetch_consumed),
      DTNSIM_COL(prefetch_wrong),     DTNSIM_COL(prefetch_late),
      DTNSIM_COL(prefetch_evicted),   DTNSIM_COL(recall),
      DTNSIM_COL(streams_created),    DTNSIM_COL(stream_origin_reads),
      DTNSIM_COL(stream_deliveries),  DTNSIM_COL(stream_bytes),
      DTNSIM_COL(stream_active_s),
      DTNSIM_COL(rebalances),         DTNSIM_COL(replicated_bytes),
      DTNSIM_COL(migration_bytes),    DTNSIM_COL(origin_queue_bytes),
      DTNSIM_COL(origin_bytes_total), DTNSIM_COL(max_in_service),
      DTNSIM_COL(max_port_utilization), DTNSIM_COL(events)};
  return cols;
}

#undef DTNSIM_COL

}  // namespace detail

/// Metrics that can be pivoted into a strategy-by-configuration table.
inline std::vector<std::string> table_metrics() {
  return {"normalized_origin_requests", "mean_throughput_mbps", "mean_latency_s", "recall", "local_access_fraction",
          "origin_bytes_total"};
}

/// One row per sweep cell.
inline void write_cells(std::ostream& os, const std::vector<Cell>& cells, const std::vector<SimReport>& reports) {
  if (cells.size() != reports.size()) throw std::invalid_argument("cells and reports differ in length");
  os << "cell";
  for (const auto& c : detail::report_columns()) os << ',' << c.name;
  os << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    os << cells[i].index;
    for (const auto& c : detail::report_columns()) os << ',' << c.get(reports[i]);
    os << '\n';
  }
}

/// Parsed cells file: header plus rows of raw fields.
struct CellTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("no column '" + name + "' in cells file");
  }
};

inline CellTable read_cells(std::istream& in) {
  CellTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    for (auto f : detail::split(line, ',')) fields.emplace_back(f);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size()) throw ParseError("wrong number of fields", lineno);
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw std::invalid_argument("empty cells file");
  return t;
}

/// Strategy columns by configuration rows (network condition, traffic
/// factor, policy, cache size), in first-seen order.
inline void write_table(std::ostream& os, const CellTable& t, const std::string& metric) {
  const auto c_strategy = t.column("strategy");
  const auto c_metric = t.column(metric);
  const std::vector<std::size_t> keys{t.column("network_condition"), t.column("traffic_factor"), t.column("policy"),
                                      t.column("cache_capacity")};
  std::vector<std::string> strategies;
  std::vector<std::vector<std::string>> row_keys;
  std::map<std::pair<std::vector<std::string>, std::string>, std::string> values;
  for (const auto& row : t.rows) {
    std::vector<std::string> k;
    for (auto c : keys) k.push_back(row[c]);
    if (std::find(row_keys.begin(), row_keys.end(), k) == row_keys.end()) row_keys.push_back(k);
    if (std::find(strategies.begin(), strategies.end(), row[c_strategy]) == strategies.end())
      strategies.push_back(row[c_strategy]);
    values[{k, row[c_strategy]}] = row[c_metric];
  }
  os << "network_condition,traffic_factor,policy,cache_capacity";
  for (const auto& s : strategies) os << ',' << s;
  os << '\n';
  for (const auto& k : row_keys) {
    os << k[0] << ',' << k[1] << ',' << k[2] << ',' << k[3];
    for (const auto& s : strategies) {
      auto it = values.find({k, s});
      os << ',' << (it == values.end() ? "" : it->second);
    }
    os << '\n';
  }
}

inline nlohmann::json manifest(const ExperimentConfig& cfg, const Workload& w, std::size_t n_cells) {
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << config_hash(cfg);
  std::uint64_t trace_hash = 1469598103934665603ULL;
  for (const auto& r : w.records) {
    std::ostringstream line;
    line << detail::format_double(r.ts) << ',' << r.user_id << ',' << r.object_id << ',' << r.tr.begin << ','
         << r.tr.end;
    trace_hash ^= fnv1a(line.str());
    trace_hash *= 1099511628211ULL;
  }
  std::ostringstream thex;
  thex << std::hex << std::setw(16) << std::setfill('0') << trace_hash;
  return {{"dtnsim_version", kVersion},
          {"config_hash", hex.str()},
          {"config", cfg},
          {"trace", {{"records", w.records.size()}, {"objects", w.catalog.size()}, {"hash", thex.str()}}},
          {"cells", n_cells},
          {"versions",
           {{"compiler", __VERSION__},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)}}}};
}

/// A fresh run-NNN directory under `<output_dir>/<name>`; earlier runs are never touched.
inline std::filesystem::path new_run_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path base = std::filesystem::path(cfg.output_dir) / cfg.name;
  std::filesystem::create_directories(base);
  for (int n = 1; n < 100000; ++n) {
    std::ostringstream name;
    name << "run-" << std::setw(3) << std::setfill('0') << n;
    const auto dir = base / name.str();
    if (std::filesystem::create_directory(dir)) return dir;
  }
  throw std::runtime_error("no free run directory under " + base.string());
}

namespace detail {
inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}
}  // namespace detail

/// Writes cells.csv, one table_<metric>.csv per pivot metric, and manifest.json.
inline void write_run(const std::filesystem::path& dir, const ExperimentConfig& cfg, const Workload& w,
                      const std::vector<Cell>& cells, const std::vector<SimReport>& reports) {
  std::ostringstream buf;
  write_cells(buf, cells, reports);
  detail::open_out(dir / "cells.csv") << buf.str();
  std::istringstream in(buf.str());
  const CellTable table = read_cells(in);
  for (const auto& m : table_metrics()) {
    auto out = detail::open_out(dir / ("table_" + m + ".csv"));
    write_table(out, table, m);
  }
  detail::open_out(dir / "manifest.json") << manifest(cfg, w, cells.size()).dump(2) << '\n';
}

}  // namespace dtnsim
