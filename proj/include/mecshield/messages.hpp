#pragma once

// Messages exchanged between edge agents and the controller.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mecshield/errors.hpp"
#include "mecshield/features.hpp"
#include "mecshield/types.hpp"

namespace mecshield {

enum class AttackMethod : std::uint8_t { SmurfFraggle, SynFlood, VolumetricAmplification, AppLayerFlood, Unknown };
enum class PolicyRole : std::uint8_t { Source, Destination };
enum class Mitigation : std::uint8_t { Drop, Block, Monitor };

inline std::string_view to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::SmurfFraggle: return "smurf_fraggle";
    case AttackMethod::SynFlood: return "syn_flood";
    case AttackMethod::VolumetricAmplification: return "volumetric_amplification";
    case AttackMethod::AppLayerFlood: return "app_layer_flood";
    case AttackMethod::Unknown: break;
  }
  return "unknown";
}

inline std::string_view to_string(PolicyRole r) { return r == PolicyRole::Source ? "source" : "destination"; }

inline std::string_view to_string(Mitigation m) {
  switch (m) {
    case Mitigation::Drop: return "drop";
    case Mitigation::Block: return "block";
    case Mitigation::Monitor: break;
  }
  return "monitor";
}

inline FeatureMode features_for(PolicyRole r) {
  return r == PolicyRole::Source ? FeatureMode::SourceSite : FeatureMode::DestinationSite;
}

/// Controller-to-agent directive.
struct Policy {
  std::string policy_id;
  std::vector<Address> targets;
  AttackMethod attack_method = AttackMethod::Unknown;
  PolicyRole role = PolicyRole::Source;
  FeatureMode required_features = FeatureMode::SourceSite;
  Mitigation mitigation = Mitigation::Drop;
  SimTime issued_at = 0.0;
  SimTime expires_at = 0.0;
  std::vector<AgentId> addressed_agents;

  void validate() const {
    if (!(expires_at > issued_at)) throw InvalidArgument("policy " + policy_id + " expires before it is issued");
    if (required_features != features_for(role))
      throw InvalidArgument("policy " + policy_id + " feature tuple does not match its role");
  }
  bool addressed_to(AgentId id) const {
    for (AgentId a : addressed_agents)
      if (a == id) return true;
    return false;
  }
  bool operator==(const Policy&) const = default;
};

inline constexpr std::uint32_t kPortBucketWidth = 1024;
inline std::uint32_t port_bucket(std::uint16_t port) { return port / kPortBucketWidth; }

struct DestinationStats {
  std::uint64_t flows = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
  std::array<std::uint64_t, 4> protocol_flows{};  // indexed by Protocol
  std::map<std::uint32_t, std::uint64_t> port_bucket_flows;
  AddressRange sources{};
  bool operator==(const DestinationStats&) const = default;
};

/// Agent-to-controller traffic statistics for one observation window.
struct TrafficReport {
  AgentId agent_id = 0;
  SimTime window_start = 0.0;
  SimTime window_length = 0.0;
  std::uint64_t flow_count = 0;
  std::uint64_t byte_count = 0;
  std::uint64_t packet_count = 0;
  std::array<std::uint64_t, 4> protocol_histogram{};
  std::map<std::uint32_t, std::uint64_t> port_histogram;  // bucket -> flows
  AddressRange src_range{};
  AddressRange dst_range{};
  std::map<Address, DestinationStats> per_destination;

  bool operator==(const TrafficReport&) const = default;
};

}  // namespace mecshield
