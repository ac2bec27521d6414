#include <gtest/gtest.h>

#include <random>

#include "dtnsim/prediction.hpp"
#include "dtnsim/workload.hpp"

using namespace dtnsim;

namespace {
RequestSequence hourly(int n, double last_ts) {
  RequestSequence seq{"u1", {}};
  for (int i = n - 1; i >= 0; --i) {
    const double ts = last_ts - 3600.0 * i;
    const auto end = static_cast<std::int64_t>(ts);
    seq.records.push_back({ts, "u1", "objA", {end - 3600, end}});
  }
  return seq;
}

AccessRecord rec(double ts, std::string obj, Interval tr = {0, 3600}) { return {ts, "u1", std::move(obj), tr}; }

RuleSet abcd_rules() {
  RuleSet rs;
  rs.rules = {{{"A"}, "B", 90, 100, 0.9}, {{"A"}, "C", 60, 100, 0.6}, {{"A"}, "D", 40, 100, 0.4}};
  return rs;
}
}  // namespace

TEST(HistoryPrediction, HourlyUser) {
  auto plan = predict_next_request(hourly(20, 36000), {});
  ASSERT_TRUE(plan);
  EXPECT_NEAR(plan->fire_at, 38880.0, 1e-6);
  EXPECT_NEAR(plan->predicted_request_ts, 39600.0, 1e-6);
  EXPECT_EQ(plan->tr, (Interval{36000, 39600}));
  EXPECT_EQ(plan->object_id, "objA");
  EXPECT_EQ(plan->source, PlanSource::History);
}

TEST(HistoryPrediction, BelowRepeatThresholdGivesNothing) {
  EXPECT_FALSE(predict_next_request(hourly(2, 36000), {}));
  EXPECT_TRUE(predict_next_request(hourly(3, 36000), {}));
  EXPECT_FALSE(predict_next_request(RequestSequence{"u1", {}}, {}));
}

TEST(HistoryPrediction, RepeatsOutsideLearningPeriodDoNotCount) {
  auto seq = hourly(3, 36000);
  seq.records[0].ts = 36000 - 8.0 * kDay;
  EXPECT_FALSE(predict_next_request(seq, {}));
}

TEST(HistoryPrediction, AlternatingPeriodFiresBeforeForecast) {
  RequestSequence seq{"u1", {}};
  double ts = 0;
  for (int i = 0; i < 61; ++i) {
    seq.records.push_back(rec(ts, "objA", {static_cast<std::int64_t>(ts), static_cast<std::int64_t>(ts) + 60}));
    ts += i % 2 ? 7200 : 3600;
  }
  auto plan = predict_next_request(seq, {});
  ASSERT_TRUE(plan);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < seq.records.size(); ++i) gaps.push_back(seq.records[i].ts - seq.records[i - 1].ts);
  const double oracle = seq.records.back().ts + arima_fit_forecast(gaps, {1, 1, 0});
  EXPECT_NEAR(plan->predicted_request_ts, oracle, 1e-6);
  EXPECT_GT(plan->fire_at, seq.records.back().ts);
  EXPECT_LT(plan->fire_at, plan->predicted_request_ts);
}

TEST(HistoryPrediction, FireTimeAlwaysInsideHorizon) {
  std::mt19937_64 gen(3);
  for (int round = 0; round < 200; ++round) {
    PredictorConfig cfg;
    cfg.prefetch_offset = std::uniform_real_distribution<double>(0.01, 1.0)(gen);
    if (round % 10 == 0) cfg.prefetch_offset = 1.0;
    RequestSequence seq{"u1", {}};
    double ts = 1000;
    const int n = 3 + static_cast<int>(gen() % 80);
    for (int i = 0; i < n; ++i) {
      seq.records.push_back(rec(ts, "objA", {static_cast<std::int64_t>(ts), static_cast<std::int64_t>(ts) + 10}));
      ts += std::uniform_real_distribution<double>(10, 5000)(gen);
    }
    auto plan = predict_next_request(seq, cfg);
    ASSERT_TRUE(plan);
    const double last = seq.records.back().ts;
    EXPECT_GT(plan->fire_at, last);
    EXPECT_LE(plan->fire_at, plan->predicted_request_ts);
    EXPECT_TRUE(plan->tr.valid());
  }
}

TEST(HistoryPrediction, RangeStrideOption) {
  auto seq = hourly(20, 36000);
  seq.records.back().ts += 17;  // jittered timestamp, range still on the grid
  PredictorConfig cfg;
  cfg.advance_by_range_stride = true;
  auto plan = predict_next_request(seq, cfg);
  ASSERT_TRUE(plan);
  EXPECT_EQ(plan->tr, (Interval{36000, 39600}));
}

TEST(HistoryPrediction, ExactOnZeroJitterSyntheticTrace) {
  WorkloadSpec spec;
  spec.n_users = 40;
  spec.duration = 10.0 * kDay;
  spec.jitter_fraction = 0.0;
  spec.program_bytes = 1e10;
  auto trace = synthesize_trace(spec);
  std::size_t checked = 0, hits = 0;
  for (const auto& seq : group_by_user(trace.records)) {
    if (trace.user_kind.at(seq.user_id) == AccessKind::Human) continue;
    RequestSequence prefix{seq.user_id, {}};
    std::map<std::string, std::size_t> next_index;
    for (std::size_t i = 0; i < seq.records.size(); ++i) {
      prefix.records.push_back(seq.records[i]);
      if (seq.records[i].ts < trace.start + 7.0 * kDay) continue;
      const AccessRecord* next = nullptr;
      for (std::size_t j = i + 1; j < seq.records.size(); ++j)
        if (seq.records[j].object_id == seq.records[i].object_id) {
          next = &seq.records[j];
          break;
        }
      if (!next) continue;
      auto plan = predict_next_request(prefix, {});
      ++checked;
      if (plan && plan->object_id == next->object_id && plan->tr == next->tr &&
          std::abs(plan->predicted_request_ts - next->ts) < 1e-3)
        ++hits;
    }
  }
  ASSERT_GT(checked, 100u);
  EXPECT_EQ(hits, checked);
}

TEST(RulePrediction, TopNInConfidenceOrder) {
  MinerConfig cfg;
  auto plans = predict_by_rules(rec(100, "A"), std::nullopt, abcd_rules(), cfg);
  ASSERT_EQ(plans.size(), 3u);
  EXPECT_EQ(plans[0].object_id, "B");
  EXPECT_EQ(plans[1].object_id, "C");
  EXPECT_EQ(plans[2].object_id, "D");
  for (const auto& p : plans) EXPECT_EQ(p.source, PlanSource::Mining);
  cfg.top_n = 2;
  EXPECT_EQ(predict_by_rules(rec(100, "A"), std::nullopt, abcd_rules(), cfg).size(), 2u);
}

TEST(RulePrediction, TimingRepeatsLastGap) {
  auto plans = predict_by_rules(rec(7200, "A"), rec(3600, "X"), abcd_rules(), {});
  ASSERT_FALSE(plans.empty());
  EXPECT_NEAR(plans[0].predicted_request_ts, 10800, 1e-9);
  EXPECT_EQ(plans[0].tr, (Interval{0, 3600}));
  EXPECT_NEAR(plans[0].fire_at, 7200 + 0.8 * 3600, 1e-9);
  auto lone = predict_by_rules(rec(7200, "A"), std::nullopt, abcd_rules(), {});
  EXPECT_NEAR(lone[0].predicted_request_ts, 7200 + MinerConfig{}.default_period, 1e-9);
}

TEST(RulePrediction, NoMatchIsEmpty) {
  EXPECT_TRUE(predict_by_rules(rec(1, "Z"), std::nullopt, abcd_rules(), {}).empty());
}

TEST(RulePrediction, TiesBySupportThenObject) {
  RuleSet rs;
  rs.rules = {{{"A"}, "Q", 5, 10, 0.5}, {{"A"}, "P", 5, 10, 0.5}, {{"A"}, "R", 8, 16, 0.5}};
  auto plans = predict_by_rules(rec(1, "A"), std::nullopt, rs, {});
  ASSERT_EQ(plans.size(), 3u);
  EXPECT_EQ(plans[0].object_id, "R");
  EXPECT_EQ(plans[1].object_id, "P");
  EXPECT_EQ(plans[2].object_id, "Q");
}

TEST(RulePrediction, SessionContextEnablesMultiItemRules) {
  RuleSet rs;
  rs.rules = {{{"A", "B"}, "C", 30, 30, 1.0}, {{"A"}, "B", 30, 40, 0.75}};
  RuleIndex idx(rs);
  auto plans = predict_by_rules(rec(10, "B"), nullptr, {"A", "B"}, idx, {});
  ASSERT_EQ(plans.size(), 1u);  // B already in context
  EXPECT_EQ(plans[0].object_id, "C");
}

TEST(Markov, DominantSuccessor) {
  auto s = markov_predict({"A", "B", "A", "B", "A"}, "A");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].object_id, "B");
  EXPECT_DOUBLE_EQ(s[0].confidence, 1.0);
}

TEST(Markov, UnseenStateIsEmpty) { EXPECT_TRUE(markov_predict({"A", "B"}, "Z").empty()); }

TEST(Markov, TiesByObjectId) {
  auto s = markov_predict({"A", "C", "A", "B"}, "A");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].object_id, "B");
  EXPECT_EQ(s[1].object_id, "C");
}

TEST(Markov, MatchesCountOracle) {
  std::mt19937_64 gen(11);
  std::vector<std::string> path;
  for (int i = 0; i < 500; ++i) path.push_back(std::string(1, static_cast<char>('A' + gen() % 5)));
  MarkovModel m;
  m.observe_path(path);
  for (char c = 'A'; c <= 'E'; ++c) {
    std::map<std::string, int> counts;
    int total = 0;
    for (std::size_t i = 1; i < path.size(); ++i)
      if (path[i - 1] == std::string(1, c)) ++counts[path[i]], ++total;
    for (const auto& s : m.successors(std::string(1, c), 5))
      EXPECT_NEAR(s.confidence, static_cast<double>(counts[s.object_id]) / total, 1e-12);
  }
}

TEST(Dispatch, ProgramUserGetsOneHistoryPlan) {
  auto seq = hourly(20, 36000);
  UserClass uc{UserKind::Program, {{{"objA"}, 0}}};
  RuleSet rs;
  rs.rules = {{{"objA"}, "objB", 40, 40, 1.0}};
  auto plans = hybrid_dispatch(seq, uc, RuleIndex(rs), {}, {});
  ASSERT_EQ(plans.size(), 1u);
  EXPECT_EQ(plans[0].source, PlanSource::History);
}

TEST(Dispatch, HumanUserGetsMiningPlans) {
  RequestSequence seq{"u1", {rec(100, "X"), rec(400, "A")}};
  auto plans = hybrid_dispatch(seq, UserClass{}, RuleIndex(abcd_rules()), {}, {});
  ASSERT_EQ(plans.size(), 3u);
  for (const auto& p : plans) EXPECT_EQ(p.source, PlanSource::Mining);
  EXPECT_NEAR(plans[0].predicted_request_ts, 700, 1e-9);
}

TEST(Dispatch, RealTimeRequestsGetNothing) {
  RequestSequence seq{"u1", {rec(0, "A", {0, 60}), rec(60, "A", {60, 120}), rec(120, "A", {120, 180})}};
  UserClass uc{UserKind::Program, {{{"A"}, 0}}};
  EXPECT_TRUE(hybrid_dispatch(seq, uc, RuleIndex(abcd_rules()), {}, {}).empty());
}

TEST(Dispatch, NeverMixesHistoryAndMiningForOneTarget) {
  std::mt19937_64 gen(5);
  RuleSet rs;
  rs.rules = {{{"A"}, "B", 40, 40, 1.0}, {{"B"}, "A", 40, 40, 1.0}};
  RuleIndex idx(rs);
  for (int round = 0; round < 100; ++round) {
    RequestSequence seq{"u1", {}};
    double ts = 0;
    for (int i = 0; i < 30; ++i) {
      ts += std::uniform_real_distribution<double>(400, 4000)(gen);
      seq.records.push_back(rec(ts, gen() % 2 ? "A" : "B"));
    }
    UserClass uc{UserKind::Program, {{{"A"}, 0}}};
    auto plans = hybrid_dispatch(seq, uc, idx, {}, {});
    std::set<PlanSource> kinds;
    for (const auto& p : plans) kinds.insert(p.source);
    EXPECT_LE(kinds.size(), 1u);
  }
}

TEST(PredictorConfig, Validation) {
  PredictorConfig c;
  c.prefetch_offset = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = {};
  c.arima_window = 2;
  EXPECT_THROW(validate(c), std::invalid_argument);
}
