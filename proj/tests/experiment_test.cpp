#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "dtnsim/report.hpp"

using namespace dtnsim;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  WorkloadSpec w;
  w.n_users = 15;
  w.duration = 3 * 86400;
  w.program_bytes = 1e9;
  c.trace.workload = w;
  c.strategies = {Strategy::NoCache, Strategy::CacheOnly, Strategy::HPM};
  c.cache_sizes = {parse_bytes("1GB")};
  return c;
}

std::string cells_text(const ExperimentConfig& c, int jobs) {
  const auto w = load_workload(c.trace);
  const auto reports = run_sweep(c, w, jobs);
  std::ostringstream os;
  write_cells(os, expand(c), reports);
  return os.str();
}

}  // namespace

TEST(Units, ParseAndFormat) {
  EXPECT_EQ(parse_bytes("128GB"), 128000000000ULL);
  EXPECT_EQ(parse_bytes("1TB"), 1000000000000ULL);
  EXPECT_EQ(parse_bytes("2GiB"), 2147483648ULL);
  EXPECT_EQ(parse_bytes("1.5KB"), 1500ULL);
  EXPECT_EQ(format_bytes(128000000000ULL), "128GB");
  EXPECT_EQ(format_bytes(10000000000000ULL), "10TB");
  EXPECT_EQ(format_bytes(1500), "1500B");
  EXPECT_DOUBLE_EQ(parse_gbps("40Gbps"), 40);
  EXPECT_DOUBLE_EQ(parse_gbps("500Mbps"), 0.5);
  EXPECT_DOUBLE_EQ(parse_duration("30m"), 1800);
  EXPECT_DOUBLE_EQ(parse_duration("1d"), 86400);
  EXPECT_THROW(parse_bytes("12"), std::invalid_argument);
  EXPECT_THROW(parse_bytes("GB"), std::invalid_argument);
  EXPECT_THROW(parse_bytes("-1GB"), std::invalid_argument);
  EXPECT_THROW(parse_gbps("40GB"), std::invalid_argument);
}

TEST(Units, BytesRoundTrip) {
  for (Bytes b : {1ULL, 999ULL, 1000ULL, 32000000000ULL, 1234567ULL, 10000000000000ULL})
    EXPECT_EQ(parse_bytes(format_bytes(b)), b);
}

TEST(Config, RoundTrip) {
  ExperimentConfig c = tiny_config();
  c.conditions = {NetworkCondition::Best, NetworkCondition::Worst};
  c.traffic_factors = {0.5, 1, 4};
  c.policies = {EvictionPolicy::LRU, EvictionPolicy::LFU};
  c.topology.client_ports = {40, 10.5};
  c.trace.workload->mix = {0.2, 0.3, 0.5};
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<ExperimentConfig>(), c);
  EXPECT_EQ(config_hash(j.get<ExperimentConfig>()), config_hash(c));

  ExperimentConfig f;
  f.trace = {"trace.csv", "catalog.csv", std::nullopt};
  EXPECT_EQ(nlohmann::json(f).get<ExperimentConfig>(), f);
}

TEST(Config, PresetAndUnitsFromText) {
  auto j = nlohmann::json::parse(R"({
    "trace": {"workload": {"preset": "gage-like", "n_users": 50}},
    "cache_sizes": ["32GB", "10TB"],
    "network_conditions": ["best", "medium"],
    "topology": {"client_ports": ["40Gbps", "10Gbps"]}
  })");
  auto c = j.get<ExperimentConfig>();
  EXPECT_EQ(c.cache_sizes, (std::vector<Bytes>{32000000000ULL, 10000000000000ULL}));
  EXPECT_EQ(c.trace.workload->n_users, 50);
  EXPECT_EQ(c.trace.workload->rng_seed, workload_preset("gage-like").rng_seed);
  EXPECT_EQ(c.topology.client_ports, (std::vector<double>{40, 10}));
}

TEST(Config, Rejections) {
  EXPECT_THROW(nlohmann::json::parse(R"({"trace": {"file": "t"}, "strategies": []})").get<ExperimentConfig>(),
               std::exception);
  EXPECT_THROW(nlohmann::json::parse(R"({"trace": {"workload": {}}, "strategy": ["HPM"]})").get<ExperimentConfig>(),
               std::invalid_argument);
  EXPECT_THROW(nlohmann::json::parse(R"({"trace": {"workload": {}}, "strategies": []})").get<ExperimentConfig>(),
               std::invalid_argument);
  EXPECT_THROW(nlohmann::json::parse(R"({"trace": {"workload": {}}, "cache_sizes": ["0GB"]})").get<ExperimentConfig>(),
               std::invalid_argument);
  EXPECT_THROW(nlohmann::json::parse(R"({"trace": {"workload": {}}, "strategies": ["MD3"]})").get<ExperimentConfig>(),
               std::invalid_argument);
}

TEST(Sweep, Cardinality) {
  ExperimentConfig c = tiny_config();
  EXPECT_EQ(expand(c).size(), 3u);
  c.strategies = {Strategy::NoCache, Strategy::CacheOnly, Strategy::MD1, Strategy::MD2, Strategy::HPM};
  c.conditions = {NetworkCondition::Best, NetworkCondition::Medium, NetworkCondition::Worst};
  c.traffic_factors = {0.5, 1, 4};
  const auto cells = expand(c);
  ASSERT_EQ(cells.size(), 45u);
  for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(cells[i].index, i);
}

TEST(Sweep, ParallelMatchesSerial) {
  auto c = tiny_config();
  c.traffic_factors = {1, 2};
  EXPECT_EQ(cells_text(c, 1), cells_text(c, 4));
}

TEST(Sweep, FailingCellIsNamed) {
  auto c = tiny_config();
  c.trace.workload.reset();
  c.trace.trace_path = "t";
  c.trace.catalog_path = "c";
  Workload w;
  w.catalog.add({"o", 0, 0, 1});
  w.records.push_back({0, "u", "missing", {0, 10}});
  try {
    run_sweep(c, w, 2);
    FAIL() << "expected a CellError";
  } catch (const CellError& e) {
    EXPECT_NE(std::string(e.what()).find("cell 0 (NoCache/1GB/lru/best/x1)"), std::string::npos) << e.what();
  }
}

TEST(Report, TableLayout) {
  std::istringstream in(
      "cell,strategy,network_condition,traffic_factor,policy,cache_capacity,recall\n"
      "0,NoCache,best,1,LRU,100,nan\n"
      "1,HPM,best,1,LRU,100,0.9\n"
      "2,NoCache,worst,1,LRU,100,nan\n"
      "3,HPM,worst,1,LRU,100,0.8\n");
  std::ostringstream os;
  write_table(os, read_cells(in), "recall");
  EXPECT_EQ(os.str(),
            "network_condition,traffic_factor,policy,cache_capacity,NoCache,HPM\n"
            "best,1,LRU,100,nan,0.9\n"
            "worst,1,LRU,100,nan,0.8\n");
}

TEST(Report, RunDirectoriesAreAppendOnlyAndReproducible) {
  auto c = tiny_config();
  c.output_dir = (std::filesystem::temp_directory_path() / "dtnsim_experiment_test").string();
  std::filesystem::remove_all(c.output_dir);
  const auto w = load_workload(c.trace);
  const auto cells = expand(c);
  std::vector<std::filesystem::path> dirs;
  for (int i = 0; i < 2; ++i) {
    dirs.push_back(new_run_dir(c));
    write_run(dirs.back(), c, w, cells, run_sweep(c, w, 2));
  }
  EXPECT_NE(dirs[0], dirs[1]);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const auto& entry : std::filesystem::directory_iterator(dirs[0])) {
    const auto name = entry.path().filename();
    EXPECT_EQ(slurp(entry.path()), slurp(dirs[1] / name)) << name;
  }
  EXPECT_TRUE(std::filesystem::exists(dirs[0] / "table_normalized_origin_requests.csv"));
  const auto m = nlohmann::json::parse(slurp(dirs[0] / "manifest.json"));
  EXPECT_EQ(m.at("cells"), 3);
  EXPECT_EQ(m.at("config").get<ExperimentConfig>(), c);
  std::filesystem::remove_all(c.output_dir);
}
