#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "dtnsim/classifier.hpp"
#include "dtnsim/report.hpp"
#include "dtnsim/workload.hpp"

namespace fs = std::filesystem;
using namespace dtnsim;

namespace {

int verbosity = 0;

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void print_summary(std::ostream& os, const TraceClassification& c, const WorkloadSpec* target) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f%%", 100.0 * v);
    return std::string(buf);
  };
  auto line = [&](const char* label, double measured, std::optional<double> goal) {
    os << "  " << label << "  " << pct(measured);
    if (goal) os << "   target " << pct(*goal);
    os << '\n';
  };
  auto goal = [&](double WorkloadSpec::*f) { return target ? std::optional<double>(target->*f) : std::nullopt; };
  os << "users " << c.n_users << " (program " << c.n_program_users << ")\n";
  line("human users        ", c.human_user_share(), goal(&WorkloadSpec::human_user_fraction));
  line("program volume     ", c.program_volume_share(), goal(&WorkloadSpec::program_volume_fraction));
  line("regular volume     ", c.share(c.regular_bytes), target ? std::optional(target->mix.regular) : std::nullopt);
  line("real-time volume   ", c.share(c.realtime_bytes), target ? std::optional(target->mix.realtime) : std::nullopt);
  line("overlapping volume ", c.share(c.overlapping_bytes),
       target ? std::optional(target->mix.overlapping) : std::nullopt);
  line("duplicate in overlap", c.duplicate_share(), goal(&WorkloadSpec::overlap_duplicate_fraction));
}

WorkloadSpec load_spec(const std::string& preset, const std::string& spec_path) {
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw std::runtime_error("cannot open spec " + spec_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(spec_path + ": " + e.what());
    }
    return j.get<WorkloadSpec>();
  }
  return workload_preset(preset);
}

void cmd_generate(const std::string& preset, const std::string& spec_path, const std::string& out_dir,
                  std::optional<std::uint64_t> seed, std::optional<int> users) {
  WorkloadSpec spec = load_spec(preset, spec_path);
  if (seed) spec.rng_seed = *seed;
  if (users) spec.n_users = *users;
  validate(spec);
  const auto trace = synthesize_trace(spec);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    auto out = open_out(dir / "trace.csv");
    write_trace(out, trace.records);
  }
  {
    auto out = open_out(dir / "catalog.csv");
    write_catalog(out, trace.catalog);
  }
  open_out(dir / "spec.json") << nlohmann::json(spec).dump(2) << '\n';
  std::cout << "wrote " << trace.records.size() << " requests over " << trace.catalog.size() << " objects to "
            << out_dir << '\n';
  print_summary(std::cout, summarize_trace(trace.records, trace.catalog, ClassifierConfig{}), &spec);
}

void cmd_classify(const std::string& trace_path, const std::string& catalog_path) {
  const Catalog catalog = parse_catalog(catalog_path);
  const auto records = parse_trace(trace_path, catalog);
  std::cout << records.size() << " requests\n";
  print_summary(std::cout, summarize_trace(records, catalog, ClassifierConfig{}), nullptr);
}

void cmd_run(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
             int jobs) {
  ExperimentConfig cfg = load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seed) cfg.seed = *seed;
  const auto workload = load_workload(cfg.trace);
  const auto cells = expand(cfg);
  if (verbosity > 0)
    std::cerr << cells.size() << " cells, " << workload.records.size() << " requests, " << jobs << " jobs\n";
  const auto reports = run_sweep(cfg, workload, jobs, [](const Cell& c, const SimReport& r) {
    if (verbosity > 0)
      std::cerr << "done " << c.label() << "  origin " << r.normalized_origin_requests << "  throughput "
                << r.mean_throughput_mbps << " Mbps\n";
  });
  const fs::path dir = new_run_dir(cfg);
  write_run(dir, cfg, workload, cells, reports);
  std::cout << dir.string() << '\n';
}

void cmd_report(const std::string& run_dir, const std::string& metric) {
  std::ifstream in(fs::path(run_dir) / "cells.csv");
  if (!in) throw std::runtime_error("no cells.csv in " + run_dir);
  write_table(std::cout, read_cells(in), metric);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator for push-based data delivery across DTNs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbosity, "Progress output on stderr (repeat for more)");

  std::string preset = "ooi-like", spec_path, out_dir = "trace";
  std::optional<std::uint64_t> seed;
  std::optional<int> users;
  auto* gen = app.add_subcommand("generate", "Synthesize a trace and catalog from a workload spec");
  gen->add_option("--preset", preset, "ooi-like or gage-like")->capture_default_str();
  gen->add_option("--spec", spec_path, "Workload spec JSON (overrides --preset)")->check(CLI::ExistingFile);
  gen->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--users", users, "Number of users");

  std::string trace_path, catalog_path;
  auto* cls = app.add_subcommand("classify", "Summarize user classes and request-type volumes of a trace");
  cls->add_option("trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
  cls->add_option("catalog", catalog_path, "Catalog CSV")->required()->check(CLI::ExistingFile);

  std::string config_path, run_out;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run an experiment sweep");
  run->add_option("config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", run_out, "Output directory (overrides the config)");
  run->add_option("--seed", seed, "Seed (overrides the config)");
  run->add_option("-j,--jobs", jobs, "Parallel sweep cells")->check(CLI::PositiveNumber)->capture_default_str();

  std::string run_dir, metric = "normalized_origin_requests";
  auto* rep = app.add_subcommand("report", "Print a strategy-by-configuration table from a run directory");
  rep->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("-m,--metric", metric, "Metric column")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) cmd_generate(preset, spec_path, out_dir, seed, users);
    if (*cls) cmd_classify(trace_path, catalog_path);
    if (*run) cmd_run(config_path, run_out, seed, jobs);
    if (*rep) cmd_report(run_dir, metric);
  } catch (const std::exception& e) {
    std::cerr << "dtnsim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
