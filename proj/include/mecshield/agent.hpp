#pragma once

// Edge agent: traffic monitor, local policy conductor, feature extractor and
// the smart SOM filter with its protection-mode state machine.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mecshield/features.hpp"
#include "mecshield/messages.hpp"
#include "mecshield/som.hpp"
#include "mecshield/types.hpp"

namespace mecshield {

enum class AgentMode : std::uint8_t { Normal, Protection };
enum class Decision : std::uint8_t { Forward, Drop, Block };
enum class VerdictReason : std::uint8_t { SomMalicious, PolicyDrop, PolicyBlock, Benign };

inline std::string_view to_string(AgentMode m) { return m == AgentMode::Normal ? "normal" : "protection"; }

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Forward: return "forward";
    case Decision::Drop: return "drop";
    case Decision::Block: return "block";
  }
  return "forward";
}

inline std::string_view to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::SomMalicious: return "som_malicious";
    case VerdictReason::PolicyDrop: return "policy_drop";
    case VerdictReason::PolicyBlock: return "policy_block";
    case VerdictReason::Benign: return "benign";
  }
  return "benign";
}

struct Verdict {
  std::uint64_t flow_id = 0;
  Decision decision = Decision::Forward;
  SimTime decided_at = 0.0;
  VerdictReason reason = VerdictReason::Benign;
  bool classified = false;  // the filter examined this flow
};

struct ModeChange {
  SimTime at = 0.0;
  AgentMode from = AgentMode::Normal;
  AgentMode to = AgentMode::Normal;
  std::string cause;
};

struct AgentConfig {
  double quiet_period = 30.0;
  std::uint32_t local_trigger_count = 5;  // malicious recognitions per window that arm the filter
  std::uint64_t drop_max_packets = 3;
  std::uint64_t drop_min_window_flows = 100;
  std::uint64_t block_min_packets = 1000;
  bool always_on = false;  // filter pinned on, never leaves protection
  bool online_training = true;
  FeatureMode initial_features = FeatureMode::SourceSite;
  NormalizationSpec normalization;
  SomHyperParams som_params;

  bool operator==(const AgentConfig&) const = default;
};

struct AgentCounters {
  std::uint64_t flows_processed = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::uint64_t blocked = 0;
  std::uint64_t vectors_classified = 0;
  std::uint64_t vectors_trained = 0;
  std::uint64_t work_units = 0;
};

struct IngestResult {
  std::vector<Verdict> verdicts;
  std::uint64_t work_units = 0;
};

/// One agent's state. Maps are kept per feature mode so a policy can switch
/// the tuple without discarding what the other map learned.
struct AgentState {
  AgentId agent_id = 0;
  AddressRange own_range{};
  AgentMode mode = AgentMode::Normal;
  FeatureMode feature_mode = FeatureMode::SourceSite;
  std::optional<Policy> active_policy;
  SimTime policy_activated_at = 0.0;
  SomMap source_som;
  SomMap destination_som;
  std::optional<SimTime> last_malicious_seen;
  double quiet_period = 30.0;
  AgentCounters counters;

  SomMap& som() { return feature_mode == FeatureMode::SourceSite ? source_som : destination_som; }
  const SomMap& som() const { return feature_mode == FeatureMode::SourceSite ? source_som : destination_som; }
};

class Agent {
 public:
  Agent(AgentId id, AddressRange own_range, AgentConfig cfg, SomMap source_som, SomMap destination_som)
      : cfg_(std::move(cfg)), counter_(cfg_.normalization.window_length) {
    cfg_.normalization.validate();
    cfg_.som_params.validate();
    state_.agent_id = id;
    state_.own_range = own_range;
    state_.feature_mode = cfg_.initial_features;
    state_.quiet_period = cfg_.quiet_period;
    state_.source_som = std::move(source_som);
    state_.destination_som = std::move(destination_som);
    if (cfg_.always_on) state_.mode = AgentMode::Protection;
  }

  const AgentState& state() const { return state_; }
  const AgentConfig& config() const { return cfg_; }
  AgentId id() const { return state_.agent_id; }

  /// Feature vector for a flow in the current tuple; also records the flow
  /// for the traffic report and the trailing flow counter.
  FeatureVector observe(const FlowRecord& flow) {
    ++state_.counters.flows_processed;
    window_flows_.push_back({flow.src_addr, flow.dst_addr, flow.protocol, flow.dst_port, flow.packet_count,
                             flow.byte_count, flow.start_time});
    const std::uint64_t n = counter_.record(flow.src_addr, flow.start_time);
    last_source_count_ = n;
    const WindowStats window{flow.start_time, cfg_.normalization.window_length, {}};
    return make_vector(flow, n, state_.feature_mode, cfg_.normalization, window);
  }

  /// Normal mode forwards everything and only trains; protection mode runs
  /// every flow through the filter and the installed mitigation table.
  IngestResult ingest(std::span<const FlowRecord> flows, SimTime now) {
    tick(now);
    IngestResult out;
    out.verdicts.reserve(flows.size());
    for (const auto& flow : flows) {
      const FeatureVector v = observe(flow);
      out.verdicts.push_back(filter(flow, v, now, out.work_units));
    }
    state_.counters.work_units += out.work_units;
    return out;
  }

  /// Applies a verdict computed elsewhere (centralized filtering).
  Verdict apply_remote_verdict(const FlowRecord& flow, Label predicted, SimTime now) {
    tick(now);
    Verdict v{flow.flow_id, Decision::Forward, now, VerdictReason::Benign, true};
    if (state_.mode == AgentMode::Protection && predicted == Label::Malicious) {
      v.decision = Decision::Drop;
      v.reason = VerdictReason::SomMalicious;
    }
    count(v);
    return v;
  }

  /// Installs a policy addressed to this agent. Returns false for a policy
  /// that has already expired.
  bool apply_policy(const Policy& p, SimTime now) {
    if (!p.addressed_to(state_.agent_id))
      throw AddressingError("policy " + p.policy_id + " is not addressed to agent " +
                            std::to_string(state_.agent_id));
    p.validate();
    tick(now);
    if (p.expires_at <= now) return false;
    if (state_.active_policy && state_.active_policy->policy_id == p.policy_id) {
      state_.policy_activated_at = now;
      return true;
    }
    state_.active_policy = p;
    state_.policy_activated_at = now;
    state_.feature_mode = p.required_features;
    enter_protection(now, "policy " + p.policy_id);
    return true;
  }

  /// Expires policies and blocks; leaves protection after the quiet period.
  void tick(SimTime now) {
    if (state_.active_policy && now >= state_.active_policy->expires_at) {
      state_.active_policy.reset();
      state_.feature_mode = cfg_.initial_features;
    }
    std::erase_if(blocked_, [&](const auto& kv) { return kv.second <= now; });
    if (state_.mode == AgentMode::Protection && !cfg_.always_on && !state_.active_policy) {
      const bool quiet = !state_.last_malicious_seen || now - *state_.last_malicious_seen > state_.quiet_period;
      if (quiet) transition(now, AgentMode::Normal, "quiet period elapsed");
    }
  }

  /// Statistics for flows that started in [window.window_start, window end).
  /// Those flows are released from the buffer.
  TrafficReport make_report(const WindowStats& window) {
    TrafficReport r;
    r.agent_id = state_.agent_id;
    r.window_start = window.window_start;
    r.window_length = window.window_length;
    const SimTime end = window.window_end();
    bool first = true;
    std::vector<ObservedFlow> keep;
    for (const auto& f : window_flows_) {
      if (f.start < window.window_start) continue;
      if (f.start >= end) {
        keep.push_back(f);
        continue;
      }
      const Address src = reported_source(f.src);
      ++r.flow_count;
      r.byte_count += f.bytes;
      r.packet_count += f.packets;
      ++r.protocol_histogram[static_cast<std::size_t>(f.protocol)];
      ++r.port_histogram[port_bucket(f.port)];
      if (first) {
        r.src_range = {src, src};
        r.dst_range = {f.dst, f.dst};
        first = false;
      } else {
        r.src_range = {std::min(r.src_range.first, src), std::max(r.src_range.last, src)};
        r.dst_range = {std::min(r.dst_range.first, f.dst), std::max(r.dst_range.last, f.dst)};
      }
      auto [it, inserted] = r.per_destination.try_emplace(f.dst);
      auto& d = it->second;
      if (inserted) d.sources = {src, src};
      d.sources = {std::min(d.sources.first, src), std::max(d.sources.last, src)};
      ++d.flows;
      d.bytes += f.bytes;
      d.packets += f.packets;
      ++d.protocol_flows[static_cast<std::size_t>(f.protocol)];
      ++d.port_bucket_flows[port_bucket(f.port)];
    }
    window_flows_ = std::move(keep);
    return r;
  }

  /// mode == Protection iff the filter is pinned, a malicious vector was seen
  /// within the quiet period, or an unexpired policy is installed.
  bool protection_invariant_holds(SimTime now) const {
    const bool recent = state_.last_malicious_seen && now - *state_.last_malicious_seen <= state_.quiet_period;
    const bool policy = state_.active_policy && now < state_.active_policy->expires_at;
    return (state_.mode == AgentMode::Protection) == (cfg_.always_on || recent || policy);
  }

  std::vector<ModeChange> take_transitions() { return std::exchange(transitions_, {}); }

  bool is_blocked(Address src) const { return blocked_.contains(src); }

  // Flow count of the most recently observed flow's source in the trailing window.
  std::uint64_t last_source_count() const { return last_source_count_; }

 private:
  struct ObservedFlow {
    Address src;
    Address dst;
    Protocol protocol;
    std::uint16_t port;
    std::uint64_t packets;
    std::uint64_t bytes;
    SimTime start;
  };

  // Outgoing traffic with a source outside this site is attributed to the site.
  Address reported_source(Address src) const {
    if (state_.own_range.first == 0 && state_.own_range.last == 0) return src;
    return state_.own_range.contains(src) ? src : state_.own_range.first;
  }

  Verdict filter(const FlowRecord& flow, const FeatureVector& v, SimTime now, std::uint64_t& units) {
    Verdict verdict{flow.flow_id, Decision::Forward, now, VerdictReason::Benign, false};
    SomMap& som = state_.som();
    const bool labeled = som.is_labeled();

    // Normal mode: count malicious recognitions; the K-th arms the filter,
    // which then also judges the flow that armed it.
    if (state_.mode == AgentMode::Normal && labeled && cfg_.local_trigger_count > 0 &&
        som.label(find_winner(som, v.values)) == NeuronLabel::Malicious) {
      const auto window = static_cast<std::int64_t>(std::floor(now / cfg_.normalization.window_length));
      if (window != trigger_window_) {
        trigger_window_ = window;
        recognitions_ = 0;
      }
      if (++recognitions_ >= cfg_.local_trigger_count) {
        state_.last_malicious_seen = now;
        enter_protection(now, "local SOM trigger");
      }
    }

    if (state_.mode == AgentMode::Protection) {
      verdict.classified = true;
      Label predicted = Label::Benign;
      if (labeled) {
        predicted = classify(som, v.values);
        ++state_.counters.vectors_classified;
        ++units;
      }
      const Policy* policy = state_.active_policy ? &*state_.active_policy : nullptr;
      if (blocked_.contains(flow.src_addr)) {
        verdict.decision = Decision::Block;
        verdict.reason = VerdictReason::PolicyBlock;
      } else if (policy && policy->mitigation == Mitigation::Drop && flow.packet_count <= cfg_.drop_max_packets &&
                 last_source_count_ >= cfg_.drop_min_window_flows) {
        verdict.decision = Decision::Drop;
        verdict.reason = VerdictReason::PolicyDrop;
      } else if (policy && policy->mitigation == Mitigation::Block && flow.packet_count >= cfg_.block_min_packets) {
        verdict.decision = Decision::Block;
        verdict.reason = VerdictReason::PolicyBlock;
        blocked_[flow.src_addr] = policy->expires_at;
      } else if (predicted == Label::Malicious) {
        verdict.decision = Decision::Drop;
        verdict.reason = VerdictReason::SomMalicious;
      }
      if (predicted == Label::Malicious) state_.last_malicious_seen = now;
    }

    // Training continues in both modes.
    if (cfg_.online_training && som.neuron_count() > 0) {
      train_unlabeled(som, v.values, cfg_.som_params);
      ++state_.counters.vectors_trained;
      ++units;
    }
    count(verdict);
    return verdict;
  }

  void count(const Verdict& v) {
    switch (v.decision) {
      case Decision::Forward: ++state_.counters.forwarded; break;
      case Decision::Drop: ++state_.counters.dropped; break;
      case Decision::Block: ++state_.counters.blocked; break;
    }
  }

  void enter_protection(SimTime now, std::string cause) {
    if (state_.mode != AgentMode::Protection) transition(now, AgentMode::Protection, std::move(cause));
  }

  void transition(SimTime now, AgentMode to, std::string cause) {
    transitions_.push_back({now, state_.mode, to, std::move(cause)});
    state_.mode = to;
    recognitions_ = 0;
  }

  AgentConfig cfg_;
  AgentState state_;
  TrailingFlowCounter counter_;
  std::vector<ObservedFlow> window_flows_;
  std::map<Address, SimTime> blocked_;
  std::vector<ModeChange> transitions_;
  std::int64_t trigger_window_ = -1;
  std::uint32_t recognitions_ = 0;
  std::uint64_t last_source_count_ = 0;
};

}  // namespace mecshield
