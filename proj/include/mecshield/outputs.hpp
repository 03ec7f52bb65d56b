#pragma once

// Run outputs: metrics.csv, events.jsonl and summary.json.
//
// metrics.csv has one row per (scheme, level) in run order with the columns
// of kMetricsColumns. Empty cells are undefined values (no malicious flow
// classified, no agent attacked); "inf" marks an agent that never reacted.
// Per-agent and per-window columns hold ';'-separated entries.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecshield/config.hpp"
#include "mecshield/event_log_io.hpp"
#include "mecshield/sim.hpp"
#include "mecshield/traffic.hpp"

namespace mecshield {

inline constexpr std::string_view kMetricsColumns[] = {
    "scheme",
    "level",
    "seed",
    "flows",
    "traffic_bytes",
    "true_positives",
    "false_positives",
    "true_negatives",
    "false_negatives",
    "detection_rate",
    "accuracy",
    "reaction_time_mean",
    "reaction_time_max",
    "reaction_time_per_agent",
    "controller_load_mean",
    "controller_load_attack_mean",
    "controller_utilization",
    "controller_load_per_window",
    "agent_load_mean",
    "active_filter_seconds",
    "mean_active_filters",
    "traffic_digest",
    "event_log_digest",
};

namespace detail {

inline std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace detail

inline void write_metrics_header(std::ostream& os) {
  for (std::size_t i = 0; i < std::size(kMetricsColumns); ++i) os << (i ? "," : "") << kMetricsColumns[i];
  os << '\n';
}

inline void write_metrics_row(std::ostream& os, const MatrixRow& row) {
  const RunMetrics& m = row.metrics;
  std::string per_agent;
  for (const auto& a : m.agents) {
    if (!a.reaction_time) continue;
    if (!per_agent.empty()) per_agent += ';';
    per_agent += a.name + "=" + format_double(*a.reaction_time);
  }
  std::string loads;
  for (std::size_t w = 0; w < m.controller_load.size(); ++w) loads += (w ? ";" : "") + std::to_string(m.controller_load[w]);
  os << to_string(m.scheme) << ',' << format_double(m.level) << ',' << m.seed << ',' << row.flows << ','
     << row.traffic_bytes << ',' << m.true_positives << ',' << m.false_positives << ',' << m.true_negatives << ','
     << m.false_negatives << ',' << detail::cell(m.detection_rate) << ',' << detail::cell(m.accuracy) << ','
     << detail::cell(m.reaction_time_mean) << ',' << detail::cell(m.reaction_time_max) << ',' << per_agent << ','
     << format_double(m.controller_load_mean) << ',' << format_double(m.controller_load_attack_mean) << ','
     << format_double(m.controller_utilization) << ',' << loads << ',' << format_double(m.agent_load_mean) << ','
     << format_double(m.active_filter_seconds) << ',' << format_double(m.mean_active_filters) << ','
     << row.traffic_digest << ',' << row.log_digest << '\n';
}

inline nlohmann::ordered_json metrics_to_json(const MatrixRow& row) {
  using nlohmann::ordered_json;
  const RunMetrics& m = row.metrics;
  auto opt = [](const std::optional<double>& v) -> ordered_json {
    if (!v) return nullptr;
    if (std::isinf(*v)) return "inf";
    return *v;
  };
  ordered_json j;
  j["scheme"] = to_string(m.scheme);
  j["level"] = m.level;
  j["seed"] = m.seed;
  j["flows"] = row.flows;
  j["traffic_bytes"] = row.traffic_bytes;
  j["traffic_digest"] = row.traffic_digest;
  j["event_log_digest"] = row.log_digest;
  j["detection_rate"] = opt(m.detection_rate);
  j["accuracy"] = opt(m.accuracy);
  j["reaction_time_mean"] = opt(m.reaction_time_mean);
  j["controller_load_attack_mean"] = m.controller_load_attack_mean;
  j["active_filter_seconds"] = m.active_filter_seconds;
  j["agents"] = ordered_json::array();
  for (const auto& a : m.agents) {
    j["agents"].push_back({{"agent", a.agent},
                           {"name", a.name},
                           {"reaction_time", opt(a.reaction_time)},
                           {"presented", a.presented},
                           {"forwarded", a.forwarded},
                           {"dropped", a.dropped},
                           {"blocked", a.blocked},
                           {"classified", a.classified},
                           {"active_filter_seconds", a.active_filter_seconds},
                           {"load", a.load}});
  }
  return j;
}

struct OutputPaths {
  std::filesystem::path metrics;
  std::filesystem::path events;
  std::filesystem::path summary;

  static OutputPaths in(const std::filesystem::path& dir) {
    return {dir / "metrics.csv", dir / "events.jsonl", dir / "summary.json"};
  }
};

/// Runs the configured matrix and writes the three output files. On any
/// failure the files written so far are removed and the error is rethrown.
inline std::vector<MatrixRow> run_and_write(const RunConfig& rc, const std::filesystem::path& dir) {
  const OutputPaths paths = OutputPaths::in(dir);
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : {paths.metrics, paths.events, paths.summary}) std::filesystem::remove(p, ec);
  };
  try {
    std::filesystem::create_directories(dir);
    std::ofstream events(paths.events, std::ios::binary);
    if (!events) throw std::runtime_error("cannot write " + paths.events.string());
    const auto rows = run_matrix(rc.scenario, rc.schemes, rc.attack_levels,
                                 [&](const RunResult& r) { write_event_log(events, r.log); });
    events.close();
    if (!events) throw std::runtime_error("failed writing " + paths.events.string());

    std::ofstream csv(paths.metrics, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + paths.metrics.string());
    write_metrics_header(csv);
    for (const auto& row : rows) write_metrics_row(csv, row);
    csv.close();
    if (!csv) throw std::runtime_error("failed writing " + paths.metrics.string());

    nlohmann::ordered_json summary;
    summary["config"] = to_json(rc);
    summary["runs"] = nlohmann::ordered_json::array();
    for (const auto& row : rows) summary["runs"].push_back(metrics_to_json(row));
    std::ifstream check(paths.metrics, std::ios::binary);
    std::stringstream ss;
    ss << check.rdbuf();
    summary["metrics_digest"] = sha256_hex(ss.str());
    std::ofstream js(paths.summary, std::ios::binary);
    if (!js) throw std::runtime_error("cannot write " + paths.summary.string());
    js << summary.dump(2) << '\n';
    js.close();
    if (!js) throw std::runtime_error("failed writing " + paths.summary.string());
    return rows;
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace mecshield
