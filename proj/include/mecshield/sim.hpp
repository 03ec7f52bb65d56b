#pragma once

// Discrete-event harness: edge agents, the controller, traffic generators and
// link delays, for MECshield and the two SOM baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mecshield/agent.hpp"
#include "mecshield/controller.hpp"
#include "mecshield/digest.hpp"
#include "mecshield/errors.hpp"
#include "mecshield/features.hpp"
#include "mecshield/messages.hpp"
#include "mecshield/random.hpp"
#include "mecshield/som.hpp"
#include "mecshield/traffic.hpp"
#include "mecshield/types.hpp"

namespace mecshield {

enum class Scheme : std::uint8_t { MECshield, DistributedSOM, CentralizedSOM };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::MECshield: return "mecshield";
    case Scheme::DistributedSOM: return "distributed_som";
    case Scheme::CentralizedSOM: return "centralized_som";
  }
  return "mecshield";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "mecshield") return Scheme::MECshield;
  if (s == "distributed_som") return Scheme::DistributedSOM;
  if (s == "centralized_som") return Scheme::CentralizedSOM;
  throw InvalidArgument("unknown scheme '" + std::string(s) + "'");
}

struct AgentSpec {
  AgentId id = 0;
  std::string name;
  AddressRange range{};
  BenignProfile benign;
  // Malicious traffic of this site used for pre-training (not replayed at run time).
  std::vector<AttackProfile> training_attacks;

  bool operator==(const AgentSpec&) const = default;
};

struct AttackSpec {
  AgentId site = 0;  // agent fronting the bots
  SimTime start = 0.0;
  SimTime duration = 0.0;
  AttackProfile profile;

  bool operator==(const AttackSpec&) const = default;
};

struct TrainingSpec {
  std::uint64_t samples_per_agent = 10000;
  double benign_fraction = 0.5;
  SimTime benign_duration = 600.0;
  SimTime attack_duration = 20.0;

  bool operator==(const TrainingSpec&) const = default;
};

struct SomGrid {
  std::size_t width = 20;
  std::size_t height = 20;
  double learning_rate = 0.1;

  bool operator==(const SomGrid&) const = default;
};

struct ScenarioConfig {
  Scheme scheme = Scheme::MECshield;
  std::vector<AgentSpec> agents;
  std::vector<AttackSpec> attacks;
  double link_delay = 0.010;      // agent <-> controller, one way
  double analysis_delay = 0.050;  // controller processing before a verdict or policy leaves
  SimTime duration = 90.0;
  std::uint64_t seed = 1;
  SomGrid som;
  TrainingSpec training;
  // Thresholds and normalization shared by all agents. The scheme decides
  // always_on, online_training and the SOM schedule.
  AgentConfig agent;
  DetectionThresholds detection;
  double policy_lifetime = 300.0;
  double controller_capacity = 5000.0;  // work units per window counted as full utilization

  double window_length() const { return agent.normalization.window_length; }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
    if (agents.empty()) fail("agents", "at least one agent is required");
    if (!(duration > 0.0) || !std::isfinite(duration)) fail("duration", "must be positive");
    if (!(link_delay > 0.0)) fail("link_delay", "must be positive");
    if (!(analysis_delay > 0.0)) fail("analysis_delay", "must be positive");
    if (!(policy_lifetime > 0.0)) fail("policy_lifetime", "must be positive");
    if (!(controller_capacity > 0.0)) fail("controller_capacity", "must be positive");
    if (som.width == 0 || som.height == 0) fail("som", "grid sides must be positive");
    if (!(som.learning_rate > 0.0 && som.learning_rate <= 1.0)) fail("som.learning_rate", "must lie in (0, 1]");
    if (training.samples_per_agent == 0) fail("training.samples_per_agent", "must be positive");
    if (!(training.benign_fraction >= 0.0 && training.benign_fraction <= 1.0))
      fail("training.benign_fraction", "must lie in [0, 1]");
    if (!(training.benign_duration > 0.0)) fail("training.benign_duration", "must be positive");
    if (!(training.attack_duration > 0.0)) fail("training.attack_duration", "must be positive");
    try {
      agent.normalization.validate();
    } catch (const InvalidArgument& e) {
      fail("normalization", e.what());
    }
    if (!(agent.quiet_period > 0.0)) fail("agent.quiet_period", "must be positive");

    std::set<AgentId> ids;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const auto& a = agents[i];
      const std::string where = "agents[" + std::to_string(i) + "]";
      if (!ids.insert(a.id).second) fail(where + ".id", "duplicate agent id " + std::to_string(a.id));
      if (a.range.first > a.range.last) fail(where + ".range", "first address exceeds last");
      for (std::size_t k = 0; k < i; ++k)
        if (agents[k].range.intersects(a.range))
          fail(where + ".range", "overlaps the range of agents[" + std::to_string(k) + "]");
      try {
        a.benign.validate();
      } catch (const InvalidArgument& e) {
        fail(where + ".benign", e.what());
      }
      for (std::size_t k = 0; k < a.training_attacks.size(); ++k) {
        try {
          a.training_attacks[k].validate();
        } catch (const InvalidArgument& e) {
          fail(where + ".training_attacks[" + std::to_string(k) + "]", e.what());
        }
      }
    }
    for (std::size_t i = 0; i < attacks.size(); ++i) {
      const auto& at = attacks[i];
      const std::string where = "attacks[" + std::to_string(i) + "]";
      if (!ids.contains(at.site)) fail(where + ".site", "no agent with id " + std::to_string(at.site));
      if (!(at.start >= 0.0)) fail(where + ".start", "must be non-negative");
      if (!(at.duration > 0.0)) fail(where + ".duration", "must be positive");
      try {
        at.profile.validate();
      } catch (const InvalidArgument& e) {
        fail(where + ".profile", e.what());
      }
    }
  }

  bool operator==(const ScenarioConfig&) const = default;
};

inline std::size_t agent_index(const ScenarioConfig& cfg, AgentId id) {
  for (std::size_t i = 0; i < cfg.agents.size(); ++i)
    if (cfg.agents[i].id == id) return i;
  throw ConfigError("no agent with id " + std::to_string(id));
}

// ---------------------------------------------------------------------------
// Pre-training

struct TrainingSets {
  std::vector<TrainingSample> source;
  std::vector<TrainingSample> destination;
};

/// Labeled vectors drawn from one site's own traffic: the site's benign
/// devices plus its training attacks, run through the agent feature pipeline.
/// samples_per_agent vectors are drawn with replacement, benign_fraction of
/// them benign, then shuffled.
inline TrainingSets build_training_set(const ScenarioConfig& cfg, std::size_t index) {
  const AgentSpec& spec = cfg.agents.at(index);
  std::vector<FlowRecord> flows =
      gen_benign(spec.benign, cfg.training.benign_duration, derive_seed(cfg.seed, "train-benign", index));
  for (std::size_t k = 0; k < spec.training_attacks.size(); ++k) {
    auto atk = gen_attack(spec.training_attacks[k], cfg.training.attack_duration,
                          derive_seed(cfg.seed, "train-attack", index * 64 + k));
    flows.insert(flows.end(), std::make_move_iterator(atk.begin()), std::make_move_iterator(atk.end()));
  }
  std::stable_sort(flows.begin(), flows.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.start_time < b.start_time; });

  const auto& norm = cfg.agent.normalization;
  TrailingFlowCounter counter(norm.window_length);
  std::vector<std::size_t> pool[2];  // by Label
  std::vector<std::vector<double>> src_vecs, dst_vecs;
  src_vecs.reserve(flows.size());
  dst_vecs.reserve(flows.size());
  for (const auto& f : flows) {
    const std::uint64_t n = counter.record(f.src_addr, f.start_time);
    const WindowStats window{f.start_time, norm.window_length, {}};
    src_vecs.push_back(make_vector(f, n, FeatureMode::SourceSite, norm, window).values);
    dst_vecs.push_back(make_vector(f, n, FeatureMode::DestinationSite, norm, window).values);
    pool[f.truth_label == Label::Malicious ? 1 : 0].push_back(src_vecs.size() - 1);
  }

  const std::uint64_t total = cfg.training.samples_per_agent;
  std::uint64_t benign = static_cast<std::uint64_t>(std::llround(cfg.training.benign_fraction * static_cast<double>(total)));
  if (pool[1].empty()) benign = total;
  if (pool[0].empty()) benign = 0;
  if (pool[0].empty() && pool[1].empty())
    throw ConfigError("agents[" + std::to_string(index) + "]: site generates no training traffic");

  Rng rng(derive_seed(cfg.seed, "train-sample", index));
  std::vector<std::pair<std::size_t, Label>> picks;
  picks.reserve(total);
  for (std::uint64_t i = 0; i < total; ++i) {
    const int cls = i < benign ? 0 : 1;
    const auto& p = pool[cls];
    picks.push_back({p[rng.below(p.size())], cls ? Label::Malicious : Label::Benign});
  }
  for (std::size_t i = picks.size(); i > 1; --i) std::swap(picks[i - 1], picks[rng.below(i)]);

  TrainingSets out;
  out.source.reserve(total);
  out.destination.reserve(total);
  for (const auto& [k, label] : picks) {
    out.source.push_back({src_vecs[k], label});
    out.destination.push_back({dst_vecs[k], label});
  }
  return out;
}

inline std::vector<TrainingSets> build_training_sets(const ScenarioConfig& cfg) {
  std::vector<TrainingSets> out;
  out.reserve(cfg.agents.size());
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) out.push_back(build_training_set(cfg, i));
  return out;
}

/// Trains a fresh map on the samples in order and labels it.
inline SomMap pretrain_map(const ScenarioConfig& cfg, std::span<const TrainingSample> samples, std::size_t dim) {
  const auto hp = SomHyperParams::for_grid(cfg.som.width, cfg.som.height, samples.size(),
                                           derive_seed(cfg.seed, "som-init", dim), cfg.som.learning_rate);
  SomMap map = init_map(cfg.som.width, cfg.som.height, dim, hp.rng_seed);
  for (const auto& s : samples) train_step(map, s, hp);
  label_neurons(map);
  return map;
}

struct Filters {
  Scheme scheme = Scheme::MECshield;
  std::vector<SomMap> source;       // per agent
  std::vector<SomMap> destination;  // per agent
  SomMap central;
  SomHyperParams agent_params;
  SomHyperParams central_params;
};

/// MECshield: each agent trains both tuples on its own site.
/// DistributedSOM: local source-tuple maps merged and redistributed.
/// CentralizedSOM: one map trained on every site's samples.
inline Filters pretrain(const ScenarioConfig& cfg, Scheme scheme, std::span<const TrainingSets> sets) {
  if (sets.size() != cfg.agents.size()) throw InvalidArgument("one training set per agent is required");
  Filters f;
  f.scheme = scheme;
  const std::size_t n = cfg.agents.size();
  const std::uint64_t per_agent = cfg.training.samples_per_agent;
  f.agent_params = SomHyperParams::for_grid(cfg.som.width, cfg.som.height, per_agent,
                                            derive_seed(cfg.seed, "som-init", 5), cfg.som.learning_rate);
  f.central_params = SomHyperParams::for_grid(cfg.som.width, cfg.som.height, per_agent * n,
                                              derive_seed(cfg.seed, "som-init", 5), cfg.som.learning_rate);
  switch (scheme) {
    case Scheme::MECshield:
      for (const auto& s : sets) {
        f.source.push_back(pretrain_map(cfg, s.source, 5));
        f.destination.push_back(pretrain_map(cfg, s.destination, 3));
      }
      break;
    case Scheme::DistributedSOM: {
      std::vector<SomMap> local;
      for (const auto& s : sets) local.push_back(pretrain_map(cfg, s.source, 5));
      const SomMap merged = merge_maps(local);
      f.source.assign(n, merged);
      f.destination.assign(n, SomMap{});
      break;
    }
    case Scheme::CentralizedSOM: {
      std::vector<TrainingSample> all;
      all.reserve(per_agent * n);
      for (const auto& s : sets) all.insert(all.end(), s.source.begin(), s.source.end());
      Rng rng(derive_seed(cfg.seed, "central-shuffle"));
      for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
      f.central = pretrain_map(cfg, all, 5);
      f.source.assign(n, SomMap{});
      f.destination.assign(n, SomMap{});
      break;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Run-time traffic

struct ScenarioTraffic {
  std::vector<FlowRecord> flows;     // arrival order; flow_id is the index
  std::vector<std::size_t> ingress;  // agent index presenting each flow
  std::string digest;                // SHA-256 over the canonical flow listing
  std::uint64_t total_bytes = 0;
};

/// Benign traffic of every site over [0, duration) plus the configured
/// attacks. Application-layer flows and amplification requests enter at the
/// attacking site; responses enter at the agent owning their destination, or
/// nowhere if none does. Depends on the seed and attack rates, not the scheme.
inline ScenarioTraffic generate_traffic(const ScenarioConfig& cfg) {
  struct Tagged {
    FlowRecord flow;
    std::size_t ingress;
    std::uint64_t order;
  };
  std::vector<Tagged> all;
  std::uint64_t order = 0;
  for (std::size_t i = 0; i < cfg.agents.size(); ++i)
    for (auto& f : gen_benign(cfg.agents[i].benign, cfg.duration, derive_seed(cfg.seed, "run-benign", i)))
      all.push_back({std::move(f), i, order++});

  for (std::size_t k = 0; k < cfg.attacks.size(); ++k) {
    const auto& at = cfg.attacks[k];
    const SimTime stop = std::min(at.start + at.duration, cfg.duration);
    if (at.start >= stop) continue;
    const std::size_t site = agent_index(cfg, at.site);
    for (auto& f : gen_attack(at.profile, stop - at.start, derive_seed(cfg.seed, "run-attack", k))) {
      std::optional<std::size_t> where = site;
      if (at.profile.scenario == AttackScenario::Volumetric && f.src_addr == at.profile.amplifier_addr) {
        where.reset();
        for (std::size_t i = 0; i < cfg.agents.size(); ++i)
          if (cfg.agents[i].range.contains(f.dst_addr)) where = i;
      }
      if (!where) continue;
      f.start_time += at.start;
      f.end_time += at.start;
      for (double& t : f.packet_timestamps) t += at.start;
      all.push_back({std::move(f), *where, order++});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) {
    if (a.flow.start_time != b.flow.start_time) return a.flow.start_time < b.flow.start_time;
    if (a.ingress != b.ingress) return a.ingress < b.ingress;
    return a.order < b.order;
  });

  ScenarioTraffic out;
  out.flows.reserve(all.size());
  out.ingress.reserve(all.size());
  Sha256 sha;
  std::string line;
  for (std::size_t i = 0; i < all.size(); ++i) {
    FlowRecord& f = all[i].flow;
    f.flow_id = i;
    out.total_bytes += f.byte_count;
    line = std::to_string(i) + ',' + std::to_string(all[i].ingress) + ',' + std::to_string(f.src_addr) + ',' +
           std::to_string(f.dst_addr) + ',' + std::string(to_string(f.protocol)) + ',' + std::to_string(f.dst_port) +
           ',' + std::to_string(f.packet_count) + ',' + std::to_string(f.byte_count) + ',' +
           format_double(f.start_time) + ',' + format_double(f.end_time) + ',' +
           std::string(to_string(f.truth_label)) + '\n';
    sha.update(line);
    out.ingress.push_back(all[i].ingress);
    out.flows.push_back(std::move(f));
  }
  out.digest = sha.hex();
  return out;
}

// ---------------------------------------------------------------------------
// Event log

enum class LogKind : std::uint8_t { Verdict, ModeChange, Report, Assessment, PolicyIssued, PolicyApplied, Load };

inline std::string_view to_string(LogKind k) {
  switch (k) {
    case LogKind::Verdict: return "verdict";
    case LogKind::ModeChange: return "mode_change";
    case LogKind::Report: return "report";
    case LogKind::Assessment: return "assessment";
    case LogKind::PolicyIssued: return "policy_issued";
    case LogKind::PolicyApplied: return "policy_applied";
    case LogKind::Load: return "load";
  }
  return "verdict";
}

/// One log line. Which fields are meaningful depends on kind:
///  verdict        flow_id, arrived_at, decision, reason, classified, truth
///  mode_change    from, to, detail (cause)
///  report         window, count (flows reported)
///  assessment     detail (method), count (victims)
///  policy_*       detail (policy id), count (addressed agent)
///  load           window, units
struct LogEvent {
  LogKind kind = LogKind::Verdict;
  SimTime time = 0.0;
  std::uint32_t entity = 0;  // 0 is the controller, agent i is i + 1
  std::uint64_t flow_id = 0;
  SimTime arrived_at = 0.0;
  Decision decision = Decision::Forward;
  VerdictReason reason = VerdictReason::Benign;
  bool classified = false;
  std::optional<Label> truth;
  AgentMode from = AgentMode::Normal;
  AgentMode to = AgentMode::Normal;
  std::string detail;
  std::uint64_t window = 0;
  std::uint64_t units = 0;
  std::uint64_t count = 0;

  bool operator==(const LogEvent&) const = default;
};

struct LogEntity {
  std::uint32_t entity = 0;
  std::string name;
  std::optional<AgentId> agent;
  AgentMode initial_mode = AgentMode::Normal;

  bool operator==(const LogEntity&) const = default;
};

struct AttackPeriod {
  SimTime start = 0.0;
  SimTime end = 0.0;
  AgentId site = 0;

  bool operator==(const AttackPeriod&) const = default;
};

struct EventLog {
  Scheme scheme = Scheme::MECshield;
  double level = 0.0;  // offered attack rate of the run, 0 without attacks
  std::uint64_t seed = 0;
  SimTime duration = 0.0;
  SimTime window_length = 0.0;
  double link_delay = 0.0;
  double analysis_delay = 0.0;
  double controller_capacity = 0.0;
  std::vector<LogEntity> entities;
  std::vector<AttackPeriod> attacks;
  std::vector<LogEvent> events;

  bool operator==(const EventLog&) const = default;
};

// ---------------------------------------------------------------------------
// Metrics

struct AgentMetrics {
  AgentId agent = 0;
  std::string name;
  // First malicious arrival to the first Drop/Block at or after it; infinity
  // if the agent never acted, absent if it saw no malicious flow.
  std::optional<double> reaction_time;
  std::optional<SimTime> first_malicious_arrival;
  std::uint64_t presented = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::uint64_t blocked = 0;
  std::uint64_t classified = 0;
  double active_filter_seconds = 0.0;
  std::vector<std::uint64_t> load;  // work units per window

  bool operator==(const AgentMetrics&) const = default;
};

struct RunMetrics {
  Scheme scheme = Scheme::MECshield;
  double level = 0.0;
  std::uint64_t seed = 0;
  std::vector<AgentMetrics> agents;
  std::uint64_t true_positives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t true_negatives = 0;
  std::uint64_t false_negatives = 0;
  std::optional<double> detection_rate;  // absent when nothing malicious was classified
  std::optional<double> accuracy;        // absent when nothing was classified
  std::optional<double> reaction_time_mean;
  std::optional<double> reaction_time_max;
  std::vector<std::uint64_t> controller_load;  // work units per window
  std::vector<bool> attack_window;
  double controller_load_mean = 0.0;
  double controller_load_attack_mean = 0.0;
  double controller_utilization = 0.0;  // attack-window mean over capacity
  double agent_load_mean = 0.0;         // per agent per window
  double active_filter_seconds = 0.0;   // time integral of the active-filter count
  double mean_active_filters = 0.0;

  bool operator==(const RunMetrics&) const = default;
};

/// Recomputes every metric from a complete log. Classified verdicts without
/// a ground-truth label raise EvaluationError.
inline RunMetrics compute_metrics(const EventLog& log) {
  if (!(log.window_length > 0.0) || !(log.duration > 0.0)) throw EvaluationError("log header lacks run timing");
  RunMetrics m;
  m.scheme = log.scheme;
  m.level = log.level;
  m.seed = log.seed;

  std::map<std::uint32_t, std::size_t> slot;
  bool has_controller = false;
  for (const auto& e : log.entities) {
    if (!e.agent) {
      has_controller = true;
      continue;
    }
    slot[e.entity] = m.agents.size();
    AgentMetrics a;
    a.agent = *e.agent;
    a.name = e.name;
    m.agents.push_back(a);
  }
  if (!has_controller) throw EvaluationError("log header lacks the controller entity");

  const auto windows = static_cast<std::size_t>(std::ceil(log.duration / log.window_length - 1e-9));
  std::vector<std::size_t> load_windows(m.agents.size(), windows);
  std::size_t controller_windows = windows;
  std::vector<std::optional<SimTime>> first_action(m.agents.size());
  std::vector<AgentMode> mode(m.agents.size());
  std::vector<SimTime> since(m.agents.size(), 0.0);
  for (const auto& e : log.entities)
    if (e.agent) mode[slot.at(e.entity)] = e.initial_mode;

  auto agent_of = [&](const LogEvent& e) -> std::size_t {
    auto it = slot.find(e.entity);
    if (it == slot.end())
      throw EvaluationError("event at t=" + std::to_string(e.time) + " names unknown agent entity " +
                            std::to_string(e.entity));
    return it->second;
  };
  auto clip = [&](SimTime t) { return std::clamp(t, 0.0, log.duration); };

  // First pass: first malicious arrival per agent.
  for (const auto& e : log.events) {
    if (e.kind != LogKind::Verdict || !e.truth || *e.truth != Label::Malicious) continue;
    auto& a = m.agents[agent_of(e)];
    if (!a.first_malicious_arrival || e.arrived_at < *a.first_malicious_arrival) a.first_malicious_arrival = e.arrived_at;
  }

  for (const auto& e : log.events) {
    switch (e.kind) {
      case LogKind::Verdict: {
        const std::size_t i = agent_of(e);
        auto& a = m.agents[i];
        ++a.presented;
        switch (e.decision) {
          case Decision::Forward: ++a.forwarded; break;
          case Decision::Drop: ++a.dropped; break;
          case Decision::Block: ++a.blocked; break;
        }
        if (e.decision != Decision::Forward && a.first_malicious_arrival && e.time >= *a.first_malicious_arrival &&
            !first_action[i])
          first_action[i] = e.time;
        if (!e.classified) break;
        if (!e.truth)
          throw EvaluationError("classified verdict for flow " + std::to_string(e.flow_id) +
                                " has no ground-truth label");
        ++a.classified;
        const bool predicted = e.decision != Decision::Forward;
        const bool actual = *e.truth == Label::Malicious;
        if (predicted && actual) ++m.true_positives;
        else if (predicted) ++m.false_positives;
        else if (actual) ++m.false_negatives;
        else ++m.true_negatives;
        break;
      }
      case LogKind::ModeChange: {
        const std::size_t i = agent_of(e);
        if (e.to == mode[i]) break;
        if (mode[i] == AgentMode::Protection) m.agents[i].active_filter_seconds += clip(e.time) - clip(since[i]);
        mode[i] = e.to;
        since[i] = e.time;
        break;
      }
      case LogKind::Load: {
        if (e.entity == 0) {
          if (m.controller_load.size() <= e.window) m.controller_load.resize(e.window + 1, 0);
          m.controller_load[e.window] += e.units;
        } else {
          auto& a = m.agents[agent_of(e)];
          if (a.load.size() <= e.window) a.load.resize(e.window + 1, 0);
          a.load[e.window] += e.units;
        }
        break;
      }
      default: break;
    }
  }
  for (std::size_t i = 0; i < m.agents.size(); ++i) {
    auto& a = m.agents[i];
    if (mode[i] == AgentMode::Protection) a.active_filter_seconds += log.duration - clip(since[i]);
    m.active_filter_seconds += a.active_filter_seconds;
    if (a.first_malicious_arrival)
      a.reaction_time = first_action[i] ? *first_action[i] - *a.first_malicious_arrival
                                        : std::numeric_limits<double>::infinity();
    load_windows[i] = std::max(load_windows[i], a.load.size());
    a.load.resize(load_windows[i], 0);
    controller_windows = std::max(controller_windows, a.load.size());
  }
  controller_windows = std::max(controller_windows, m.controller_load.size());
  m.controller_load.resize(controller_windows, 0);
  m.mean_active_filters = m.active_filter_seconds / log.duration;

  const std::uint64_t positives = m.true_positives + m.false_negatives;
  const std::uint64_t total = positives + m.true_negatives + m.false_positives;
  if (positives) m.detection_rate = static_cast<double>(m.true_positives) / static_cast<double>(positives);
  if (total)
    m.accuracy = static_cast<double>(m.true_positives + m.true_negatives) / static_cast<double>(total);

  double sum = 0.0;
  std::size_t reacted = 0;
  for (const auto& a : m.agents) {
    if (!a.reaction_time) continue;
    sum += *a.reaction_time;
    ++reacted;
    m.reaction_time_max = std::max(m.reaction_time_max.value_or(0.0), *a.reaction_time);
  }
  if (reacted) m.reaction_time_mean = sum / static_cast<double>(reacted);

  m.attack_window.assign(controller_windows, false);
  for (std::size_t w = 0; w < controller_windows; ++w) {
    const SimTime lo = static_cast<double>(w) * log.window_length;
    const SimTime hi = lo + log.window_length;
    for (const auto& p : log.attacks)
      if (p.start < hi && lo < p.end) m.attack_window[w] = true;
  }
  double all = 0.0, attack = 0.0;
  std::size_t attack_n = 0;
  for (std::size_t w = 0; w < controller_windows; ++w) {
    all += static_cast<double>(m.controller_load[w]);
    if (m.attack_window[w]) {
      attack += static_cast<double>(m.controller_load[w]);
      ++attack_n;
    }
  }
  if (controller_windows) m.controller_load_mean = all / static_cast<double>(controller_windows);
  if (attack_n) m.controller_load_attack_mean = attack / static_cast<double>(attack_n);
  m.controller_utilization = m.controller_load_attack_mean / log.controller_capacity;

  double agent_units = 0.0;
  std::size_t agent_cells = 0;
  for (const auto& a : m.agents) {
    for (auto u : a.load) agent_units += static_cast<double>(u);
    agent_cells += a.load.size();
  }
  if (agent_cells) m.agent_load_mean = agent_units / static_cast<double>(agent_cells);
  return m;
}

// ---------------------------------------------------------------------------
// Simulation

struct RunResult {
  RunMetrics metrics;
  EventLog log;
  std::string traffic_digest;
  std::uint64_t traffic_bytes = 0;
  std::uint64_t flows = 0;
  std::vector<std::uint64_t> arrivals;  // flows presented per agent index
};

namespace detail {

enum class EvKind : std::uint8_t {
  FlowArrival,
  ControllerClassify,
  RemoteVerdict,
  WindowClose,
  ReportArrival,
  ControllerAnalyze,
  PolicyArrival,
};

struct SimEvent {
  SimTime time;
  std::uint32_t entity;
  std::uint64_t seq;
  EvKind kind;
  std::size_t a;
  std::size_t b;
};

struct Later {
  bool operator()(const SimEvent& x, const SimEvent& y) const {
    if (x.time != y.time) return x.time > y.time;
    if (x.entity != y.entity) return x.entity > y.entity;
    return x.seq > y.seq;
  }
};

inline AgentConfig agent_config_for(const ScenarioConfig& cfg, const Filters& f) {
  AgentConfig ac = cfg.agent;
  ac.som_params = f.agent_params;
  ac.initial_features = FeatureMode::SourceSite;
  switch (f.scheme) {
    case Scheme::MECshield:
      ac.always_on = false;
      ac.online_training = true;
      break;
    case Scheme::DistributedSOM:
      ac.always_on = true;
      ac.online_training = true;
      break;
    case Scheme::CentralizedSOM:
      ac.always_on = true;
      ac.online_training = false;
      break;
  }
  return ac;
}

}  // namespace detail

/// Runs one scheme over pre-generated traffic with pre-trained filters.
inline RunResult run(const ScenarioConfig& cfg, const Filters& filters, const ScenarioTraffic& traffic) {
  using detail::EvKind;
  using detail::SimEvent;
  cfg.validate();
  if (filters.source.size() != cfg.agents.size() || filters.destination.size() != cfg.agents.size())
    throw InvalidArgument("filters do not match the configured agents");
  if (traffic.flows.size() != traffic.ingress.size()) throw InvalidArgument("traffic ingress table is incomplete");

  const Scheme scheme = filters.scheme;
  const std::size_t n = cfg.agents.size();
  const double W = cfg.window_length();
  const double d = cfg.link_delay;
  const double a_delay = cfg.analysis_delay;
  const auto windows = static_cast<std::size_t>(std::ceil(cfg.duration / W - 1e-9));

  RunResult res;
  res.traffic_digest = traffic.digest;
  res.traffic_bytes = traffic.total_bytes;
  res.flows = traffic.flows.size();
  res.arrivals.assign(n, 0);

  const AgentConfig ac = detail::agent_config_for(cfg, filters);
  std::vector<Agent> agents;
  agents.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    agents.emplace_back(cfg.agents[i].id, cfg.agents[i].range, ac, filters.source[i], filters.destination[i]);
  SomMap central = filters.central;

  EventLog& log = res.log;
  log.scheme = scheme;
  log.seed = cfg.seed;
  log.duration = cfg.duration;
  log.window_length = W;
  log.link_delay = d;
  log.analysis_delay = a_delay;
  log.controller_capacity = cfg.controller_capacity;
  for (const auto& at : cfg.attacks) {
    log.level = std::max(log.level, at.profile.offered_rate);
    log.attacks.push_back({at.start, std::min(at.start + at.duration, cfg.duration), at.site});
  }
  log.entities.push_back({0, "controller", std::nullopt, AgentMode::Normal});
  for (std::size_t i = 0; i < n; ++i)
    log.entities.push_back({static_cast<std::uint32_t>(i + 1), cfg.agents[i].name, cfg.agents[i].id,
                            agents[i].state().mode});

  std::priority_queue<SimEvent, std::vector<SimEvent>, detail::Later> queue;
  std::uint64_t seq = 0;
  auto schedule = [&](SimTime t, std::uint32_t entity, EvKind kind, std::size_t x = 0, std::size_t y = 0) {
    queue.push({t, entity, seq++, kind, x, y});
  };

  for (std::size_t k = 0; k < traffic.flows.size(); ++k)
    schedule(traffic.flows[k].start_time, static_cast<std::uint32_t>(traffic.ingress[k] + 1), EvKind::FlowArrival, k);
  for (std::size_t w = 1; w <= windows; ++w)
    for (std::size_t i = 0; i < n; ++i)
      schedule(static_cast<double>(w) * W, static_cast<std::uint32_t>(i + 1), EvKind::WindowClose, i, w);

  // Work units per entity per window, by the time the work happens.
  std::vector<std::vector<std::uint64_t>> units(n + 1, std::vector<std::uint64_t>(windows, 0));
  auto charge = [&](std::size_t entity, SimTime t, std::uint64_t u) {
    if (!u) return;
    const auto w = static_cast<std::size_t>(std::floor(t / W));
    auto& row = units[entity];
    if (row.size() <= w) row.resize(w + 1, 0);
    row[w] += u;
  };

  auto log_transitions = [&](std::size_t i) {
    for (auto& c : agents[i].take_transitions()) {
      LogEvent e;
      e.kind = LogKind::ModeChange;
      e.time = c.at;
      e.entity = static_cast<std::uint32_t>(i + 1);
      e.from = c.from;
      e.to = c.to;
      e.detail = std::move(c.cause);
      log.events.push_back(std::move(e));
    }
  };
  auto log_verdict = [&](std::size_t i, const Verdict& v, const FlowRecord& flow) {
    LogEvent e;
    e.kind = LogKind::Verdict;
    e.time = v.decided_at;
    e.entity = static_cast<std::uint32_t>(i + 1);
    e.flow_id = flow.flow_id;
    e.arrived_at = flow.start_time;
    e.decision = v.decision;
    e.reason = v.reason;
    e.classified = v.classified;
    e.truth = flow.truth_label;
    log.events.push_back(std::move(e));
  };

  std::vector<std::vector<double>> pending(scheme == Scheme::CentralizedSOM ? traffic.flows.size() : 0);
  std::vector<TrafficReport> reports;
  std::map<std::size_t, std::vector<std::size_t>> reports_by_window;
  std::vector<Policy> policies;
  TrafficBaseline baseline(static_cast<std::size_t>(std::max(1.0, std::round(cfg.detection.baseline_window / W))));
  Topology topology;
  for (const auto& s : cfg.agents) topology.push_back({s.id, s.range});

  while (!queue.empty()) {
    const SimEvent ev = queue.top();
    queue.pop();
    const SimTime t = ev.time;
    switch (ev.kind) {
      case EvKind::FlowArrival: {
        const FlowRecord& flow = traffic.flows[ev.a];
        const std::size_t i = traffic.ingress[ev.a];
        ++res.arrivals[i];
        if (scheme == Scheme::CentralizedSOM) {
          agents[i].tick(t);
          pending[ev.a] = agents[i].observe(flow).values;
          log_transitions(i);
          schedule(t + d, 0, EvKind::ControllerClassify, ev.a);
        } else {
          const auto out = agents[i].ingest(std::span<const FlowRecord>(&flow, 1), t);
          log_transitions(i);
          charge(i + 1, t, out.work_units);
          log_verdict(i, out.verdicts.front(), flow);
        }
        break;
      }
      case EvKind::ControllerClassify: {
        const Label predicted = classify(central, pending[ev.a]);
        pending[ev.a].clear();
        pending[ev.a].shrink_to_fit();
        charge(0, t, 1);
        const std::size_t i = traffic.ingress[ev.a];
        schedule(t + a_delay + d, static_cast<std::uint32_t>(i + 1), EvKind::RemoteVerdict, ev.a,
                 predicted == Label::Malicious ? 1 : 0);
        break;
      }
      case EvKind::RemoteVerdict: {
        const FlowRecord& flow = traffic.flows[ev.a];
        const std::size_t i = traffic.ingress[ev.a];
        const Verdict v = agents[i].apply_remote_verdict(flow, ev.b ? Label::Malicious : Label::Benign, t);
        log_transitions(i);
        log_verdict(i, v, flow);
        break;
      }
      case EvKind::WindowClose: {
        const std::size_t i = ev.a;
        agents[i].tick(t);
        log_transitions(i);
        const WindowStats window{static_cast<double>(ev.b - 1) * W, W, {}};
        reports.push_back(agents[i].make_report(window));
        LogEvent e;
        e.kind = LogKind::Report;
        e.time = t;
        e.entity = static_cast<std::uint32_t>(i + 1);
        e.window = ev.b - 1;
        e.count = reports.back().flow_count;
        log.events.push_back(std::move(e));
        schedule(t + d, 0, EvKind::ReportArrival, reports.size() - 1);
        break;
      }
      case EvKind::ReportArrival: {
        charge(0, t, 1);
        const auto w = static_cast<std::size_t>(std::llround(reports[ev.a].window_start / W));
        auto& got = reports_by_window[w];
        got.push_back(ev.a);
        if (got.size() == n) schedule(t + a_delay, 0, EvKind::ControllerAnalyze, w);
        break;
      }
      case EvKind::ControllerAnalyze: {
        std::vector<TrafficReport> batch;
        for (std::size_t r : reports_by_window[ev.a]) batch.push_back(reports[r]);
        reports_by_window.erase(ev.a);
        const AggregatedView view = collect(batch);
        std::set<Address> victims;
        if (scheme == Scheme::MECshield) {
          const AttackAssessment assessment = analyze(view, baseline, cfg.detection);
          if (assessment.detected) {
            victims.insert(assessment.victims.begin(), assessment.victims.end());
            LogEvent e;
            e.kind = LogKind::Assessment;
            e.time = t;
            e.entity = 0;
            e.window = ev.a;
            e.detail = std::string(to_string(assessment.method));
            e.count = assessment.victims.size();
            log.events.push_back(std::move(e));
            for (auto& p : make_policies(assessment, topology, t, cfg.policy_lifetime).policies) {
              const std::size_t target = agent_index(cfg, p.addressed_agents.front());
              LogEvent pe;
              pe.kind = LogKind::PolicyIssued;
              pe.time = t;
              pe.entity = 0;
              pe.detail = p.policy_id;
              pe.count = p.addressed_agents.front();
              log.events.push_back(std::move(pe));
              policies.push_back(std::move(p));
              schedule(t + d, static_cast<std::uint32_t>(target + 1), EvKind::PolicyArrival, policies.size() - 1,
                       target);
            }
          }
        }
        baseline.observe(view, victims);
        break;
      }
      case EvKind::PolicyArrival: {
        const std::size_t i = ev.b;
        const bool applied = agents[i].apply_policy(policies[ev.a], t);
        log_transitions(i);
        if (applied) {
          LogEvent e;
          e.kind = LogKind::PolicyApplied;
          e.time = t;
          e.entity = static_cast<std::uint32_t>(i + 1);
          e.detail = policies[ev.a].policy_id;
          e.count = agents[i].id();
          log.events.push_back(std::move(e));
        }
        break;
      }
    }
  }

  for (std::size_t entity = 0; entity <= n; ++entity) {
    for (std::size_t w = 0; w < units[entity].size(); ++w) {
      LogEvent e;
      e.kind = LogKind::Load;
      e.time = static_cast<double>(w + 1) * W;
      e.entity = static_cast<std::uint32_t>(entity);
      e.window = w;
      e.units = units[entity][w];
      log.events.push_back(std::move(e));
    }
  }
  res.metrics = compute_metrics(log);
  return res;
}

/// Generates traffic, pre-trains the configured scheme and runs it.
inline RunResult run(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto sets = build_training_sets(cfg);
  const Filters filters = pretrain(cfg, cfg.scheme, sets);
  return run(cfg, filters, generate_traffic(cfg));
}

/// Copy of cfg with every attack offered at the given rate.
inline ScenarioConfig at_level(ScenarioConfig cfg, double level) {
  for (auto& at : cfg.attacks) at.profile.offered_rate = level;
  return cfg;
}

struct MatrixRow {
  RunMetrics metrics;
  std::string traffic_digest;
  std::string log_digest;
  std::uint64_t traffic_bytes = 0;
  std::uint64_t flows = 0;

  bool operator==(const MatrixRow&) const = default;
};

inline std::string event_log_digest(const EventLog& log);

/// Cross product of schemes and levels under the base seed. Every scheme at
/// a level sees the same traffic; pre-training is shared across levels.
/// Rows come scheme-major in the given order. on_run sees each full result.
inline std::vector<MatrixRow> run_matrix(const ScenarioConfig& base, std::span<const Scheme> schemes,
                                         std::span<const double> levels,
                                         const std::function<void(const RunResult&)>& on_run = {}) {
  if (schemes.empty()) throw ConfigError("schemes: at least one scheme is required");
  if (levels.empty()) throw ConfigError("attack_levels: at least one level is required");
  for (double l : levels)
    if (!(l > 0.0)) throw ConfigError("attack_levels: levels must be positive");
  base.validate();

  const auto sets = build_training_sets(base);
  std::vector<ScenarioTraffic> traffic;
  traffic.reserve(levels.size());
  for (double l : levels) traffic.push_back(generate_traffic(at_level(base, l)));

  std::vector<MatrixRow> rows;
  rows.reserve(schemes.size() * levels.size());
  for (Scheme s : schemes) {
    ScenarioConfig cfg = base;
    cfg.scheme = s;
    const Filters filters = pretrain(cfg, s, sets);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      RunResult r = run(at_level(cfg, levels[l]), filters, traffic[l]);
      MatrixRow row;
      row.metrics = r.metrics;
      row.traffic_digest = r.traffic_digest;
      row.log_digest = event_log_digest(r.log);
      row.traffic_bytes = r.traffic_bytes;
      row.flows = r.flows;
      if (on_run) on_run(r);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace mecshield

#include "mecshield/event_log_io.hpp"
