#pragma once

// JSON Lines form of the event log: a header line, then one line per event.

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mecshield/digest.hpp"
#include "mecshield/sim.hpp"

namespace mecshield {

namespace detail {

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const E (&values)[N], std::string_view field) {
  for (E v : values)
    if (to_string(v) == s) return v;
  throw DataError("event log: unknown " + std::string(field) + " '" + s + "'");
}

inline constexpr LogKind kLogKinds[] = {LogKind::Verdict,      LogKind::ModeChange,    LogKind::Report,
                                        LogKind::Assessment,   LogKind::PolicyIssued,  LogKind::PolicyApplied,
                                        LogKind::Load};
inline constexpr Decision kDecisions[] = {Decision::Forward, Decision::Drop, Decision::Block};
inline constexpr VerdictReason kReasons[] = {VerdictReason::SomMalicious, VerdictReason::PolicyDrop,
                                             VerdictReason::PolicyBlock, VerdictReason::Benign};
inline constexpr AgentMode kModes[] = {AgentMode::Normal, AgentMode::Protection};
inline constexpr Scheme kSchemes[] = {Scheme::MECshield, Scheme::DistributedSOM, Scheme::CentralizedSOM};

}  // namespace detail

inline nlohmann::ordered_json header_to_json(const EventLog& log) {
  nlohmann::ordered_json j;
  j["type"] = "header";
  j["scheme"] = to_string(log.scheme);
  j["level"] = log.level;
  j["seed"] = log.seed;
  j["duration"] = log.duration;
  j["window_length"] = log.window_length;
  j["link_delay"] = log.link_delay;
  j["analysis_delay"] = log.analysis_delay;
  j["controller_capacity"] = log.controller_capacity;
  auto& ents = j["entities"] = nlohmann::ordered_json::array();
  for (const auto& e : log.entities) {
    nlohmann::ordered_json x;
    x["entity"] = e.entity;
    x["name"] = e.name;
    if (e.agent) x["agent"] = *e.agent;
    x["initial_mode"] = to_string(e.initial_mode);
    ents.push_back(std::move(x));
  }
  auto& atks = j["attacks"] = nlohmann::ordered_json::array();
  for (const auto& p : log.attacks) atks.push_back({{"start", p.start}, {"end", p.end}, {"site", p.site}});
  return j;
}

inline nlohmann::ordered_json event_to_json(const LogEvent& e) {
  nlohmann::ordered_json j;
  j["type"] = to_string(e.kind);
  j["t"] = e.time;
  j["entity"] = e.entity;
  switch (e.kind) {
    case LogKind::Verdict:
      j["flow"] = e.flow_id;
      j["arrived_at"] = e.arrived_at;
      j["decision"] = to_string(e.decision);
      j["reason"] = to_string(e.reason);
      j["classified"] = e.classified;
      if (e.truth) j["truth"] = to_string(*e.truth);
      break;
    case LogKind::ModeChange:
      j["from"] = to_string(e.from);
      j["to"] = to_string(e.to);
      j["cause"] = e.detail;
      break;
    case LogKind::Report:
      j["window"] = e.window;
      j["flows"] = e.count;
      break;
    case LogKind::Assessment:
      j["window"] = e.window;
      j["method"] = e.detail;
      j["victims"] = e.count;
      break;
    case LogKind::PolicyIssued:
    case LogKind::PolicyApplied:
      j["policy"] = e.detail;
      j["agent"] = e.count;
      break;
    case LogKind::Load:
      j["window"] = e.window;
      j["units"] = e.units;
      break;
  }
  return j;
}

inline void write_event_log(std::ostream& os, const EventLog& log) {
  os << header_to_json(log).dump() << '\n';
  for (const auto& e : log.events) os << event_to_json(e).dump() << '\n';
}

inline std::string event_log_text(const EventLog& log) {
  std::ostringstream os;
  write_event_log(os, log);
  return os.str();
}

inline std::string event_log_digest(const EventLog& log) {
  Sha256 sha;
  std::string line;
  sha.update(header_to_json(log).dump()).update("\n");
  for (const auto& e : log.events) sha.update(event_to_json(e).dump()).update("\n");
  return sha.hex();
}

/// Reads one run's log. Throws DataError with the line number on malformed input.
inline EventLog read_event_log(std::istream& in) {
  using nlohmann::json;
  EventLog log;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (header) throw DataError("second header in one log");
        header = true;
        log.scheme = detail::parse_enum(j.at("scheme").get<std::string>(), detail::kSchemes, "scheme");
        log.level = j.at("level").get<double>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.duration = j.at("duration").get<double>();
        log.window_length = j.at("window_length").get<double>();
        log.link_delay = j.at("link_delay").get<double>();
        log.analysis_delay = j.at("analysis_delay").get<double>();
        log.controller_capacity = j.at("controller_capacity").get<double>();
        for (const auto& x : j.at("entities")) {
          LogEntity e;
          e.entity = x.at("entity").get<std::uint32_t>();
          e.name = x.at("name").get<std::string>();
          if (x.contains("agent")) e.agent = x.at("agent").get<AgentId>();
          e.initial_mode = detail::parse_enum(x.at("initial_mode").get<std::string>(), detail::kModes, "mode");
          log.entities.push_back(std::move(e));
        }
        for (const auto& x : j.at("attacks"))
          log.attacks.push_back({x.at("start").get<double>(), x.at("end").get<double>(), x.at("site").get<AgentId>()});
        continue;
      }
      if (!header) throw DataError("event before the header");
      LogEvent e;
      e.kind = detail::parse_enum(type, detail::kLogKinds, "event type");
      e.time = j.at("t").get<double>();
      e.entity = j.at("entity").get<std::uint32_t>();
      switch (e.kind) {
        case LogKind::Verdict:
          e.flow_id = j.at("flow").get<std::uint64_t>();
          e.arrived_at = j.at("arrived_at").get<double>();
          e.decision = detail::parse_enum(j.at("decision").get<std::string>(), detail::kDecisions, "decision");
          e.reason = detail::parse_enum(j.at("reason").get<std::string>(), detail::kReasons, "reason");
          e.classified = j.at("classified").get<bool>();
          if (j.contains("truth")) e.truth = parse_label(j.at("truth").get<std::string>());
          break;
        case LogKind::ModeChange:
          e.from = detail::parse_enum(j.at("from").get<std::string>(), detail::kModes, "mode");
          e.to = detail::parse_enum(j.at("to").get<std::string>(), detail::kModes, "mode");
          e.detail = j.at("cause").get<std::string>();
          break;
        case LogKind::Report:
          e.window = j.at("window").get<std::uint64_t>();
          e.count = j.at("flows").get<std::uint64_t>();
          break;
        case LogKind::Assessment:
          e.window = j.at("window").get<std::uint64_t>();
          e.detail = j.at("method").get<std::string>();
          e.count = j.at("victims").get<std::uint64_t>();
          break;
        case LogKind::PolicyIssued:
        case LogKind::PolicyApplied:
          e.detail = j.at("policy").get<std::string>();
          e.count = j.at("agent").get<std::uint64_t>();
          break;
        case LogKind::Load:
          e.window = j.at("window").get<std::uint64_t>();
          e.units = j.at("units").get<std::uint64_t>();
          break;
      }
      log.events.push_back(std::move(e));
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    } catch (const json::exception& e) {
      throw DataError(std::string("event log: ") + e.what(), line_no);
    } catch (const InvalidArgument& e) {
      throw DataError(e.what(), line_no);
    }
  }
  if (!header) throw DataError("event log has no header");
  return log;
}

}  // namespace mecshield
