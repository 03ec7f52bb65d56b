#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mecshield/config.hpp"
#include "mecshield/sim.hpp"

using namespace mecshield;

namespace {

// The reference scenario scaled down so a full matrix runs in seconds.
ScenarioConfig small_scenario() {
  std::ifstream in(std::string(MECSHIELD_SOURCE_DIR) + "/configs/reference.json");
  auto doc = nlohmann::json::parse(in);
  doc["duration"] = 30;
  doc["training"]["samples_per_agent"] = 3000;
  doc["som"]["width"] = 10;
  doc["som"]["height"] = 10;
  for (auto& a : doc["agents"]) {
    a["benign"]["devices"] = std::max(1, a["benign"]["devices"].get<int>() / 4);
    for (auto& t : a["training_attacks"]) t["bots"] = t["bots"].get<int>() / 10;
  }
  for (auto& at : doc["attacks"]) {
    at["start"] = 10;
    at["duration"] = 10;
  }
  return parse_run_config(doc).scenario;
}

const std::vector<MatrixRow>& matrix() {
  static const std::vector<MatrixRow> rows = [] {
    const Scheme schemes[] = {Scheme::MECshield, Scheme::DistributedSOM, Scheme::CentralizedSOM};
    const double levels[] = {50.0, 100.0, 200.0, 300.0};
    return run_matrix(small_scenario(), schemes, levels);
  }();
  return rows;
}

const RunResult& single(Scheme s) {
  static std::map<Scheme, RunResult> cache;
  auto it = cache.find(s);
  if (it == cache.end()) {
    ScenarioConfig cfg = small_scenario();
    cfg.scheme = s;
    it = cache.emplace(s, run(cfg)).first;
  }
  return it->second;
}

EventLog skeleton() {
  EventLog log;
  log.duration = 10.0;
  log.window_length = 5.0;
  log.controller_capacity = 100.0;
  log.entities = {{0, "controller", std::nullopt, AgentMode::Normal}, {1, "a", AgentId{1}, AgentMode::Normal}};
  return log;
}

LogEvent verdict(SimTime t, Decision d, std::optional<Label> truth, bool classified = true) {
  LogEvent e;
  e.kind = LogKind::Verdict;
  e.time = t;
  e.arrived_at = t;
  e.entity = 1;
  e.decision = d;
  e.classified = classified;
  e.truth = truth;
  return e;
}

}  // namespace

TEST(Metrics, HandBuiltLog) {
  EventLog log = skeleton();
  const auto M = Label::Malicious;
  const auto B = Label::Benign;
  // 8 malicious (7 caught), 2 benign (1 wrongly dropped).
  const std::vector<std::pair<Decision, Label>> rows{
      {Decision::Forward, M}, {Decision::Drop, M}, {Decision::Drop, M},  {Decision::Block, M}, {Decision::Drop, M},
      {Decision::Drop, M},    {Decision::Drop, M}, {Decision::Drop, B},  {Decision::Forward, B}, {Decision::Drop, M}};
  for (std::size_t i = 0; i < rows.size(); ++i) log.events.push_back(verdict(1.0 + 0.5 * i, rows[i].first, rows[i].second));

  std::uint64_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& [d, l] : rows) {
    const bool hit = d != Decision::Forward;
    if (l == M) (hit ? tp : fn)++;
    else (hit ? fp : tn)++;
  }
  const auto m = compute_metrics(log);
  EXPECT_EQ(m.true_positives, tp);
  EXPECT_EQ(m.false_negatives, fn);
  EXPECT_DOUBLE_EQ(*m.detection_rate, static_cast<double>(tp) / (tp + fn));
  EXPECT_DOUBLE_EQ(*m.accuracy, static_cast<double>(tp + tn) / rows.size());
  EXPECT_DOUBLE_EQ(*m.detection_rate, 0.875);
  EXPECT_DOUBLE_EQ(*m.accuracy, 0.8);
  ASSERT_EQ(m.agents.size(), 1u);
  EXPECT_EQ(m.agents[0].presented, 10u);
  EXPECT_EQ(m.agents[0].blocked, 1u);
  EXPECT_DOUBLE_EQ(*m.agents[0].reaction_time, 0.5);
}

TEST(Metrics, UndefinedRatesAreAbsent) {
  EventLog log = skeleton();
  log.events.push_back(verdict(1.0, Decision::Forward, Label::Benign, false));
  auto m = compute_metrics(log);
  EXPECT_FALSE(m.detection_rate);
  EXPECT_FALSE(m.accuracy);
  EXPECT_FALSE(m.agents[0].reaction_time);

  log.events.push_back(verdict(2.0, Decision::Forward, Label::Benign));
  m = compute_metrics(log);
  EXPECT_FALSE(m.detection_rate);
  EXPECT_DOUBLE_EQ(*m.accuracy, 1.0);
}

TEST(Metrics, NeverReactingAgentIsInfinite) {
  EventLog log = skeleton();
  log.events.push_back(verdict(1.0, Decision::Forward, Label::Malicious, false));
  const auto m = compute_metrics(log);
  ASSERT_TRUE(m.agents[0].reaction_time);
  EXPECT_TRUE(std::isinf(*m.agents[0].reaction_time));
}

TEST(Metrics, ClassifiedWithoutTruthRejected) {
  EventLog log = skeleton();
  log.events.push_back(verdict(1.0, Decision::Drop, std::nullopt));
  EXPECT_THROW(compute_metrics(log), EvaluationError);
}

TEST(Metrics, ActiveFilterIntegral) {
  EventLog log = skeleton();
  log.entities[1].initial_mode = AgentMode::Protection;
  LogEvent off;
  off.kind = LogKind::ModeChange;
  off.entity = 1;
  off.time = 2.0;
  off.from = AgentMode::Protection;
  off.to = AgentMode::Normal;
  LogEvent on = off;
  on.time = 7.5;
  on.from = AgentMode::Normal;
  on.to = AgentMode::Protection;
  log.events = {off, on};
  const auto m = compute_metrics(log);
  EXPECT_DOUBLE_EQ(m.agents[0].active_filter_seconds, 2.0 + 2.5);
  EXPECT_DOUBLE_EQ(m.mean_active_filters, 0.45);
}

TEST(Run, DeterministicForSameSeed) {
  ScenarioConfig cfg = small_scenario();
  const auto a = run(cfg);
  const auto& b = single(Scheme::MECshield);
  EXPECT_EQ(a.traffic_digest, b.traffic_digest);
  EXPECT_EQ(event_log_digest(a.log), event_log_digest(b.log));
  EXPECT_EQ(a.metrics, b.metrics);
}

TEST(Run, VerdictsConserveArrivals) {
  for (Scheme s : {Scheme::MECshield, Scheme::DistributedSOM, Scheme::CentralizedSOM}) {
    const auto& r = single(s);
    std::uint64_t presented = 0;
    for (std::size_t i = 0; i < r.metrics.agents.size(); ++i) {
      const auto& a = r.metrics.agents[i];
      EXPECT_EQ(a.presented, a.forwarded + a.dropped + a.blocked);
      EXPECT_EQ(a.presented, r.arrivals[i]);
      presented += a.presented;
    }
    EXPECT_EQ(presented, r.flows);
    EXPECT_EQ(compute_metrics(r.log), r.metrics);
  }
}

TEST(Run, CentralizedVerdictsPayTheRoundTrip) {
  const auto& r = single(Scheme::CentralizedSOM);
  const double floor = 2 * r.log.link_delay + r.log.analysis_delay;
  std::size_t remote = 0;
  for (const auto& e : r.log.events) {
    if (e.kind != LogKind::Verdict || !e.classified) continue;
    ++remote;
    EXPECT_GE(e.time - e.arrived_at, floor - 1e-9);
  }
  EXPECT_GT(remote, 0u);
}

TEST(Run, LocalReactionBeatsTheRoundTrip) {
  const auto& r = single(Scheme::MECshield);
  const auto& c = single(Scheme::CentralizedSOM);
  ASSERT_TRUE(r.metrics.reaction_time_max);
  ASSERT_TRUE(c.metrics.reaction_time_mean);
  EXPECT_LT(*r.metrics.reaction_time_max, 2 * r.log.link_delay + r.log.analysis_delay);
  EXPECT_LT(*r.metrics.reaction_time_mean, *c.metrics.reaction_time_mean);
}

TEST(Run, MalformedConfigRejected) {
  ScenarioConfig cfg = small_scenario();
  cfg.attacks[0].site = 42;
  EXPECT_THROW(run(cfg), ConfigError);
}

TEST(Matrix, RowsAndPairedTraffic) {
  const auto& rows = matrix();
  ASSERT_EQ(rows.size(), 12u);
  const Scheme order[] = {Scheme::MECshield, Scheme::DistributedSOM, Scheme::CentralizedSOM};
  const double levels[] = {50.0, 100.0, 200.0, 300.0};
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t l = 0; l < 4; ++l) {
      const auto& row = rows[s * 4 + l];
      EXPECT_EQ(row.metrics.scheme, order[s]);
      EXPECT_EQ(row.metrics.level, levels[l]);
      EXPECT_EQ(row.traffic_digest, rows[l].traffic_digest);
      EXPECT_EQ(row.traffic_bytes, rows[l].traffic_bytes);
    }
  }
  EXPECT_NE(rows[0].traffic_digest, rows[3].traffic_digest);
}

TEST(Matrix, BatchMatchesSingleRun) {
  const auto& r = single(Scheme::CentralizedSOM);
  const auto& row = matrix()[8];  // centralized, first level
  ScenarioConfig cfg = small_scenario();
  EXPECT_EQ(cfg.attacks[0].profile.offered_rate, 100.0);
  // The single run uses the config's own level, which sits at index 1.
  EXPECT_EQ(matrix()[9].traffic_digest, r.traffic_digest);
  EXPECT_EQ(matrix()[9].log_digest, event_log_digest(r.log));
  EXPECT_NE(row.log_digest, matrix()[9].log_digest);
}

TEST(EventLogIo, RoundTrip) {
  const auto& r = single(Scheme::DistributedSOM);
  std::stringstream ss;
  write_event_log(ss, r.log);
  const EventLog back = read_event_log(ss);
  EXPECT_EQ(back, r.log);
  EXPECT_EQ(event_log_digest(back), event_log_digest(r.log));
  EXPECT_EQ(compute_metrics(back), r.metrics);
}

TEST(EventLogIo, MalformedLineReportsPosition) {
  std::stringstream ss;
  write_event_log(ss, skeleton());
  ss << "{not json\n";
  try {
    read_event_log(ss);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_GT(e.line(), 0u);
  }
}
