#pragma once

// Central controller: report collector, attack analyzer, policy generator.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mecshield/errors.hpp"
#include "mecshield/messages.hpp"
#include "mecshield/types.hpp"

namespace mecshield {

struct Contribution {
  AddressRange sources{};
  std::uint64_t flows = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
};

struct DestinationAggregate {
  std::uint64_t flows = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
  std::array<std::uint64_t, 4> protocol_flows{};
  std::map<std::uint32_t, std::uint64_t> port_bucket_flows;
  std::map<AgentId, Contribution> contributions;
};

/// Per-destination view of one reporting window, reduced to the fields the
/// analyzer uses.
struct AggregatedView {
  SimTime window_start = 0.0;
  SimTime window_length = 0.0;
  std::size_t reports = 0;
  std::uint64_t total_flows = 0;
  std::uint64_t total_bytes = 0;
  std::map<Address, DestinationAggregate> destinations;
  std::vector<std::string> warnings;
};

inline AggregatedView collect(std::span<const TrafficReport> reports) {
  AggregatedView view;
  std::set<std::pair<AgentId, SimTime>> seen;
  bool first = true;
  for (const auto& r : reports) {
    if (!(r.window_length > 0.0)) throw InvalidArgument("report from agent " + std::to_string(r.agent_id) +
                                                        " has a non-positive window");
    if (!seen.insert({r.agent_id, r.window_start}).second) {
      view.warnings.push_back("duplicate report from agent " + std::to_string(r.agent_id) + " for window starting " +
                              std::to_string(r.window_start) + " ignored");
      continue;
    }
    if (first) {
      view.window_start = r.window_start;
      view.window_length = r.window_length;
      first = false;
    } else {
      const SimTime end = std::max(view.window_start + view.window_length, r.window_start + r.window_length);
      view.window_start = std::min(view.window_start, r.window_start);
      view.window_length = end - view.window_start;
    }
    ++view.reports;
    for (const auto& [dst, s] : r.per_destination) {
      auto& agg = view.destinations[dst];
      agg.flows += s.flows;
      agg.bytes += s.bytes;
      agg.packets += s.packets;
      view.total_flows += s.flows;
      view.total_bytes += s.bytes;
      for (std::size_t p = 0; p < 4; ++p) agg.protocol_flows[p] += s.protocol_flows[p];
      for (const auto& [b, n] : s.port_bucket_flows) agg.port_bucket_flows[b] += n;
      auto [it, inserted] = agg.contributions.try_emplace(r.agent_id);
      auto& c = it->second;
      c.sources = inserted ? s.sources
                           : AddressRange{std::min(c.sources.first, s.sources.first),
                                          std::max(c.sources.last, s.sources.last)};
      c.flows += s.flows;
      c.bytes += s.bytes;
      c.packets += s.packets;
    }
  }
  return view;
}

struct DetectionThresholds {
  double volume_multiple = 10.0;        // byte rate vs trailing baseline
  double baseline_window = 60.0;        // seconds of history behind the baseline
  std::uint64_t syn_new_flows = 500;    // flows per window
  double syn_max_packets_per_flow = 3.0;
  double packet_multiple = 10.0;        // ICMP/UDP packets per flow vs baseline
  std::uint64_t few_flows = 10;
  double request_multiple = 10.0;       // flow rate at a service port vs baseline
  double min_byte_rate = 10000.0;       // baseline floors
  double min_flow_rate = 1.0;
  double min_packets_per_flow = 10.0;
  std::size_t min_history_windows = 2;  // no verdicts before this much history

  bool operator==(const DetectionThresholds&) const = default;
};

/// Trailing per-key rates over clean (non-victim) windows.
class TrafficBaseline {
 public:
  explicit TrafficBaseline(std::size_t depth = 12) : depth_(std::max<std::size_t>(depth, 1)) {}

  std::size_t windows_observed() const { return windows_; }

  double destination_byte_rate(Address dst) const { return mean({Kind::DstBytes, dst, 0}); }
  double destination_packets_per_flow(Address dst) const { return mean({Kind::DstPpf, dst, 0}); }
  double bucket_flow_rate(Address dst, std::uint32_t bucket) const { return mean({Kind::BucketFlows, dst, bucket}); }
  double contribution_flow_rate(Address dst, AgentId a) const { return mean({Kind::AgentFlows, dst, a}); }
  double contribution_byte_rate(Address dst, AgentId a) const { return mean({Kind::AgentBytes, dst, a}); }

  /// Folds a window into the history, skipping destinations under attack.
  void observe(const AggregatedView& view, const std::set<Address>& victims = {}) {
    ++windows_;
    if (!(view.window_length > 0.0)) return;
    const double w = view.window_length;
    std::map<Key, double> current;
    for (const auto& [dst, agg] : view.destinations) {
      if (victims.contains(dst)) continue;
      current[{Kind::DstBytes, dst, 0}] = static_cast<double>(agg.bytes) / w;
      if (agg.flows) current[{Kind::DstPpf, dst, 0}] = static_cast<double>(agg.packets) / static_cast<double>(agg.flows);
      for (const auto& [b, n] : agg.port_bucket_flows) current[{Kind::BucketFlows, dst, b}] = static_cast<double>(n) / w;
      for (const auto& [a, c] : agg.contributions) {
        current[{Kind::AgentFlows, dst, a}] = static_cast<double>(c.flows) / w;
        current[{Kind::AgentBytes, dst, a}] = static_cast<double>(c.bytes) / w;
      }
    }
    for (auto& [key, hist] : history_) {
      if (victims.contains(key.dst)) continue;
      if (!current.contains(key)) push(hist, 0.0);
    }
    for (const auto& [key, v] : current) push(history_[key], v);
  }

 private:
  enum class Kind : std::uint8_t { DstBytes, DstPpf, BucketFlows, AgentFlows, AgentBytes };
  struct Key {
    Kind kind;
    Address dst;
    std::uint32_t sub;
    auto operator<=>(const Key&) const = default;
  };

  void push(std::deque<double>& h, double v) const {
    h.push_back(v);
    while (h.size() > depth_) h.pop_front();
  }

  double mean(const Key& k) const {
    auto it = history_.find(k);
    if (it == history_.end() || it->second.empty()) return 0.0;
    double s = 0.0;
    for (double v : it->second) s += v;
    return s / static_cast<double>(it->second.size());
  }

  std::size_t depth_;
  std::size_t windows_ = 0;
  std::map<Key, std::deque<double>> history_;
};

struct SuspectedSource {
  AgentId reporter = 0;
  AddressRange range{};
  bool operator==(const SuspectedSource&) const = default;
};

struct AttackAssessment {
  bool detected = false;
  AttackMethod method = AttackMethod::Unknown;
  std::vector<Address> victims;
  std::vector<SuspectedSource> suspected_sources;
  std::map<std::string, double> evidence;  // rule -> max(observed / threshold)
};

namespace detail {

inline int method_rank(AttackMethod m) {
  switch (m) {
    case AttackMethod::SynFlood: return 4;
    case AttackMethod::SmurfFraggle: return 3;
    case AttackMethod::AppLayerFlood: return 2;
    case AttackMethod::VolumetricAmplification: return 1;
    case AttackMethod::Unknown: break;
  }
  return 0;
}

inline void note(std::map<std::string, double>& ev, const std::string& rule, double score) {
  auto [it, inserted] = ev.try_emplace(rule, score);
  if (!inserted) it->second = std::max(it->second, score);
}

}  // namespace detail

/// Threshold rules per destination:
///  volumetric  byte rate above volume_multiple x baseline
///  SYN flood   more than syn_new_flows flows with at most syn_max_packets_per_flow
///  smurf       ICMP/UDP-dominated traffic on few flows with packet_multiple x baseline packets per flow
///  app layer   flow rate at a service-port bucket above request_multiple x baseline
/// The most specific breached rule names the method.
inline AttackAssessment analyze(const AggregatedView& view, const TrafficBaseline& baseline,
                                const DetectionThresholds& th) {
  AttackAssessment out;
  if (baseline.windows_observed() < th.min_history_windows || !(view.window_length > 0.0)) return out;
  const double w = view.window_length;
  std::set<std::pair<AgentId, AddressRange>> suspects;

  for (const auto& [dst, agg] : view.destinations) {
    if (agg.flows == 0) continue;
    AttackMethod method = AttackMethod::Unknown;
    auto consider = [&](AttackMethod m) {
      if (detail::method_rank(m) > detail::method_rank(method)) method = m;
    };

    const double byte_rate = static_cast<double>(agg.bytes) / w;
    const double vol_limit = th.volume_multiple * std::max(baseline.destination_byte_rate(dst), th.min_byte_rate);
    detail::note(out.evidence, "volumetric", byte_rate / vol_limit);
    if (byte_rate > vol_limit) consider(AttackMethod::VolumetricAmplification);

    const double ppf = static_cast<double>(agg.packets) / static_cast<double>(agg.flows);
    detail::note(out.evidence, "syn_flood", static_cast<double>(agg.flows) / static_cast<double>(th.syn_new_flows));
    if (agg.flows > th.syn_new_flows && ppf <= th.syn_max_packets_per_flow) consider(AttackMethod::SynFlood);

    const std::uint64_t icmp_udp = agg.protocol_flows[static_cast<std::size_t>(Protocol::ICMP)] +
                                   agg.protocol_flows[static_cast<std::size_t>(Protocol::UDP)];
    const double ppf_limit =
        th.packet_multiple * std::max(baseline.destination_packets_per_flow(dst), th.min_packets_per_flow);
    if (2 * icmp_udp >= agg.flows) {
      detail::note(out.evidence, "smurf_fraggle", ppf / ppf_limit);
      if (agg.flows <= th.few_flows && ppf > ppf_limit) consider(AttackMethod::SmurfFraggle);
    }

    for (const auto& [bucket, n] : agg.port_bucket_flows) {
      const double rate = static_cast<double>(n) / w;
      const double limit = th.request_multiple * std::max(baseline.bucket_flow_rate(dst, bucket), th.min_flow_rate);
      detail::note(out.evidence, "app_layer", rate / limit);
      if (rate > limit) consider(AttackMethod::AppLayerFlood);
    }

    if (method == AttackMethod::Unknown) continue;
    out.victims.push_back(dst);
    if (detail::method_rank(method) > detail::method_rank(out.method)) out.method = method;

    bool any = false;
    for (const auto& [agent, c] : agg.contributions) {
      const double fr = static_cast<double>(c.flows) / w;
      const double br = static_cast<double>(c.bytes) / w;
      const bool flows_up =
          fr > th.request_multiple * std::max(baseline.contribution_flow_rate(dst, agent), th.min_flow_rate);
      const bool bytes_up =
          br > th.volume_multiple * std::max(baseline.contribution_byte_rate(dst, agent), th.min_byte_rate);
      if (flows_up || bytes_up) {
        suspects.insert({agent, c.sources});
        any = true;
      }
    }
    if (!any)
      for (const auto& [agent, c] : agg.contributions) suspects.insert({agent, c.sources});
  }
  out.detected = !out.victims.empty();
  for (const auto& [agent, range] : suspects) out.suspected_sources.push_back({agent, range});
  return out;
}

struct AgentSite {
  AgentId agent = 0;
  AddressRange range{};
  bool operator==(const AgentSite&) const = default;
};

using Topology = std::vector<AgentSite>;

inline Mitigation mitigation_for(AttackMethod m) {
  switch (m) {
    case AttackMethod::SynFlood: return Mitigation::Drop;
    case AttackMethod::SmurfFraggle: return Mitigation::Block;
    default: break;
  }
  return Mitigation::Drop;
}

struct PolicyPlan {
  std::vector<Policy> policies;
  bool partial_coverage = false;  // some suspected range has no owning agent
  std::vector<AddressRange> uncovered;
};

/// Destination policies for agents fronting a victim; source policies for
/// every agent whose range intersects a suspected source range.
inline PolicyPlan make_policies(const AttackAssessment& a, const Topology& topology, SimTime now,
                                double lifetime) {
  if (!a.detected) throw InvalidArgument("make_policies requires a detected attack");
  if (!(lifetime > 0.0)) throw InvalidArgument("policy lifetime must be positive");
  PolicyPlan plan;
  const Mitigation mitigation = mitigation_for(a.method);

  auto make = [&](AgentId agent, PolicyRole role) {
    Policy p;
    p.policy_id = std::string(role == PolicyRole::Source ? "src-" : "dst-") + std::to_string(agent) + "-" +
                  std::string(to_string(a.method));
    p.targets = a.victims;
    p.attack_method = a.method;
    p.role = role;
    p.required_features = features_for(role);
    p.mitigation = mitigation;
    p.issued_at = now;
    p.expires_at = now + lifetime;
    p.addressed_agents = {agent};
    return p;
  };

  std::set<AgentId> destination_agents;
  for (Address v : a.victims)
    for (const auto& site : topology)
      if (site.range.contains(v)) destination_agents.insert(site.agent);
  for (AgentId agent : destination_agents) plan.policies.push_back(make(agent, PolicyRole::Destination));

  std::set<AgentId> source_agents;
  for (const auto& s : a.suspected_sources) {
    bool owned = false;
    for (const auto& site : topology) {
      if (site.range.intersects(s.range)) {
        source_agents.insert(site.agent);
        owned = true;
      }
    }
    if (!owned) {
      plan.partial_coverage = true;
      plan.uncovered.push_back(s.range);
    }
  }
  for (AgentId agent : source_agents) plan.policies.push_back(make(agent, PolicyRole::Source));
  return plan;
}

}  // namespace mecshield
