#include <gtest/gtest.h>

#include <map>
#include <vector>

#include "mecshield/agent.hpp"
#include "mecshield/random.hpp"

using namespace mecshield;

namespace {

// Neuron 0 sits at the origin (benign), neuron 1 at the far corner (malicious).
SomMap two_neuron_map(std::size_t dim) {
  SomMap m(2, 1, dim);
  for (double& w : m.weights(1)) w = 1.0;
  m.add_votes(0, Label::Benign);
  m.add_votes(1, Label::Malicious);
  label_neurons(m);
  return m;
}

SomHyperParams gentle() {
  SomHyperParams hp;
  hp.initial_learning_rate = 0.01;
  hp.initial_radius = 0.5;
  return hp;
}

AgentConfig base_config() {
  AgentConfig c;
  c.som_params = gentle();
  return c;
}

Agent make_agent(AgentConfig cfg = base_config(), AgentId id = 1) {
  return Agent(id, {parse_address("10.1.0.0"), parse_address("10.1.255.255")}, std::move(cfg), two_neuron_map(5),
               two_neuron_map(3));
}

std::uint64_t next_id = 1000;

FlowRecord flow(SimTime t, Protocol p, std::uint16_t port, std::uint64_t packets, Address src = 0x0A010001,
                Address dst = 0x0A640001) {
  FlowRecord f;
  f.flow_id = next_id++;
  f.src_addr = src;
  f.dst_addr = dst;
  f.protocol = p;
  f.dst_port = port;
  f.packet_count = packets;
  f.byte_count = packets * 100;
  f.start_time = t;
  for (std::uint64_t i = 0; i < packets; ++i) f.packet_timestamps.push_back(t + 0.001 * static_cast<double>(i));
  f.end_time = f.packet_timestamps.empty() ? t : f.packet_timestamps.back();
  return f;
}

// Lands on the malicious neuron: ICMP, top port, long contiguous packet train.
FlowRecord hostile(SimTime t) { return flow(t, Protocol::ICMP, 65535, 1000); }
FlowRecord quiet(SimTime t) { return flow(t, Protocol::TCP, 80, 2); }

Policy policy(AgentId to, PolicyRole role, Mitigation m, SimTime at, double lifetime = 300.0,
              std::string id = "p") {
  Policy p;
  p.policy_id = std::move(id);
  p.targets = {0x0A640001};
  p.attack_method = m == Mitigation::Block ? AttackMethod::SmurfFraggle : AttackMethod::SynFlood;
  p.role = role;
  p.required_features = features_for(role);
  p.mitigation = m;
  p.issued_at = at;
  p.expires_at = at + lifetime;
  p.addressed_agents = {to};
  return p;
}

Verdict one(Agent& a, const FlowRecord& f) {
  const auto r = a.ingest(std::span<const FlowRecord>(&f, 1), f.start_time);
  return r.verdicts.front();
}

}  // namespace

TEST(Ingest, NormalModeForwardsAndOnlyTrains) {
  AgentConfig cfg = base_config();
  cfg.local_trigger_count = 0;
  Agent a = make_agent(cfg);
  const std::vector<FlowRecord> flows{quiet(0.0), hostile(0.1), hostile(0.2)};
  const auto before = a.state().source_som.epoch();
  const auto r = a.ingest(flows, 0.3);
  for (const auto& v : r.verdicts) {
    EXPECT_EQ(v.decision, Decision::Forward);
    EXPECT_FALSE(v.classified);
  }
  EXPECT_EQ(a.state().counters.vectors_classified, 0u);
  EXPECT_EQ(r.work_units, 3u);
  EXPECT_EQ(a.state().source_som.epoch(), before + 3);
  EXPECT_EQ(a.state().mode, AgentMode::Normal);
}

TEST(Ingest, ProtectionDropsMaliciousVector) {
  AgentConfig cfg = base_config();
  cfg.always_on = true;
  Agent a = make_agent(cfg);
  const auto v = one(a, hostile(1.0));
  EXPECT_EQ(v.decision, Decision::Drop);
  EXPECT_EQ(v.reason, VerdictReason::SomMalicious);
  EXPECT_TRUE(v.classified);
  EXPECT_EQ(one(a, quiet(1.1)).decision, Decision::Forward);
  EXPECT_EQ(a.state().counters.vectors_classified, 2u);
}

TEST(Ingest, SynShapedFlowsUnderDropPolicy) {
  Agent a = make_agent();
  ASSERT_TRUE(a.apply_policy(policy(1, PolicyRole::Source, Mitigation::Drop, 0.0), 0.0));
  std::vector<Verdict> verdicts;
  for (int i = 0; i < 150; ++i) verdicts.push_back(one(a, quiet(0.01 * i)));
  // From the 100th flow of the source in the window on, the drop rule applies.
  for (int i = 0; i < 99; ++i) EXPECT_EQ(verdicts[i].decision, Decision::Forward) << i;
  for (int i = 99; i < 150; ++i) {
    EXPECT_EQ(verdicts[i].decision, Decision::Drop) << i;
    EXPECT_EQ(verdicts[i].reason, VerdictReason::PolicyDrop);
  }
}

TEST(Ingest, BlockPolicySuppressesHeavySource) {
  Agent a = make_agent();
  a.apply_policy(policy(1, PolicyRole::Source, Mitigation::Block, 0.0, 100.0), 0.0);
  const Address src = parse_address("10.1.0.77");
  auto heavy = flow(1.0, Protocol::TCP, 80, 1500, src);
  const auto v = one(a, heavy);
  EXPECT_EQ(v.decision, Decision::Block);
  EXPECT_EQ(v.reason, VerdictReason::PolicyBlock);
  EXPECT_TRUE(a.is_blocked(src));
  const auto later = one(a, flow(2.0, Protocol::TCP, 80, 1, src));
  EXPECT_EQ(later.decision, Decision::Block);
  a.tick(100.0);
  EXPECT_FALSE(a.is_blocked(src));
}

TEST(Policy, SourceAndDestinationTuples) {
  Agent a = make_agent();
  a.apply_policy(policy(1, PolicyRole::Destination, Mitigation::Drop, 0.0, 300.0, "d"), 0.0);
  EXPECT_EQ(a.state().feature_mode, FeatureMode::DestinationSite);
  EXPECT_EQ(a.observe(quiet(0.5)).values.size(), 3u);
  const auto depoch = a.state().destination_som.epoch();
  one(a, quiet(0.6));
  EXPECT_EQ(a.state().destination_som.epoch(), depoch + 1);

  a.apply_policy(policy(1, PolicyRole::Source, Mitigation::Drop, 1.0, 300.0, "s"), 1.0);
  EXPECT_EQ(a.state().feature_mode, FeatureMode::SourceSite);
  EXPECT_EQ(a.observe(quiet(1.5)).values.size(), 5u);
}

TEST(Policy, DuplicateOnlyRefreshesActivation) {
  Agent a = make_agent();
  const Policy p = policy(1, PolicyRole::Source, Mitigation::Drop, 0.0);
  a.apply_policy(p, 1.0);
  const auto transitions = a.take_transitions();
  ASSERT_EQ(transitions.size(), 1u);
  AgentState before = a.state();
  a.apply_policy(p, 5.0);
  EXPECT_EQ(a.state().policy_activated_at, 5.0);
  EXPECT_EQ(a.state().mode, before.mode);
  EXPECT_EQ(a.state().feature_mode, before.feature_mode);
  EXPECT_EQ(a.state().active_policy, before.active_policy);
  EXPECT_TRUE(a.take_transitions().empty());
}

TEST(Policy, WrongAgentIsRejected) {
  Agent a = make_agent();
  EXPECT_THROW(a.apply_policy(policy(2, PolicyRole::Source, Mitigation::Drop, 0.0), 0.0), AddressingError);
  EXPECT_EQ(a.state().mode, AgentMode::Normal);
}

TEST(Policy, ExpiredPolicyIsIgnored) {
  Agent a = make_agent();
  EXPECT_FALSE(a.apply_policy(policy(1, PolicyRole::Source, Mitigation::Drop, 0.0, 10.0), 10.0));
  EXPECT_EQ(a.state().mode, AgentMode::Normal);
}

TEST(Tick, QuietPeriodEndsProtection) {
  AgentConfig cfg = base_config();
  cfg.local_trigger_count = 1;
  Agent a = make_agent(cfg);
  one(a, hostile(0.0));
  ASSERT_EQ(a.state().mode, AgentMode::Protection);
  a.tick(29.0);
  EXPECT_EQ(a.state().mode, AgentMode::Protection);
  a.tick(30.0);
  EXPECT_EQ(a.state().mode, AgentMode::Protection);
  a.tick(31.0);
  EXPECT_EQ(a.state().mode, AgentMode::Normal);
}

TEST(Tick, ActivePolicyHoldsProtection) {
  Agent a = make_agent();
  a.apply_policy(policy(1, PolicyRole::Source, Mitigation::Drop, 0.0, 100.0), 0.0);
  a.tick(60.0);
  EXPECT_EQ(a.state().mode, AgentMode::Protection);
  a.tick(100.0);
  EXPECT_EQ(a.state().mode, AgentMode::Normal);
  EXPECT_FALSE(a.state().active_policy);
}

TEST(LocalTrigger, KthRecognitionArmsAndFiltersIt) {
  Agent a = make_agent();  // K = 5
  for (int i = 0; i < 4; ++i) EXPECT_EQ(one(a, hostile(0.1 * i)).decision, Decision::Forward);
  EXPECT_EQ(a.state().mode, AgentMode::Normal);
  const auto fifth = one(a, hostile(0.5));
  EXPECT_EQ(a.state().mode, AgentMode::Protection);
  EXPECT_EQ(fifth.decision, Decision::Drop);
}

TEST(LocalTrigger, CountResetsEachWindow) {
  Agent a = make_agent();
  for (int i = 0; i < 4; ++i) one(a, hostile(4.0 + 0.1 * i));
  for (int i = 0; i < 4; ++i) one(a, hostile(5.0 + 0.1 * i));
  EXPECT_EQ(a.state().mode, AgentMode::Normal);
}

TEST(RemoteVerdict, OnlyDropsInProtection) {
  AgentConfig cfg = base_config();
  Agent normal = make_agent(cfg);
  EXPECT_EQ(normal.apply_remote_verdict(hostile(0.0), Label::Malicious, 0.1).decision, Decision::Forward);
  cfg.always_on = true;
  Agent on = make_agent(cfg);
  EXPECT_EQ(on.apply_remote_verdict(hostile(0.0), Label::Malicious, 0.1).decision, Decision::Drop);
  EXPECT_EQ(on.apply_remote_verdict(quiet(0.0), Label::Benign, 0.1).decision, Decision::Forward);
}

TEST(Training, EpochGrowsInBothModes) {
  AgentConfig cfg = base_config();
  Agent a = make_agent(cfg);
  auto epoch = [&] { return a.state().som().epoch(); };
  auto e0 = epoch();
  one(a, quiet(0.0));
  EXPECT_GT(epoch(), e0);
  a.apply_policy(policy(1, PolicyRole::Source, Mitigation::Drop, 0.0), 0.0);
  e0 = epoch();
  one(a, hostile(0.2));
  EXPECT_GT(epoch(), e0);
}

TEST(Report, SingleServiceHistogram) {
  Agent a = make_agent();
  std::vector<FlowRecord> flows;
  for (int i = 0; i < 7; ++i) flows.push_back(flow(0.5 * i, Protocol::TCP, 80, 3));
  a.ingest(flows, 3.5);
  const auto r = a.make_report({0.0, 5.0, {}});
  EXPECT_EQ(r.flow_count, 7u);
  EXPECT_EQ(r.protocol_histogram[static_cast<std::size_t>(Protocol::TCP)], 7u);
  ASSERT_EQ(r.port_histogram.size(), 1u);
  EXPECT_EQ(r.port_histogram.begin()->second, 7u);
  EXPECT_EQ(r.byte_count, 7u * 300u);
}

TEST(Report, EmptyWindowStillEmitted) {
  Agent a = make_agent();
  const auto r = a.make_report({10.0, 5.0, {}});
  EXPECT_EQ(r.agent_id, 1u);
  EXPECT_EQ(r.window_start, 10.0);
  EXPECT_EQ(r.flow_count, 0u);
  EXPECT_EQ(r.byte_count, 0u);
  EXPECT_TRUE(r.per_destination.empty());
}

TEST(Report, HistogramsConserveFlows) {
  Rng rng(9);
  Agent a = make_agent();
  std::vector<FlowRecord> flows;
  std::map<std::uint32_t, std::uint64_t> buckets;
  std::uint64_t bytes = 0;
  for (int i = 0; i < 500; ++i) {
    const auto port = static_cast<std::uint16_t>(rng.below(65536));
    flows.push_back(flow(rng.uniform(0.0, 5.0), static_cast<Protocol>(rng.below(4)), port, 1 + rng.below(5),
                         0x0A010000 + static_cast<Address>(rng.below(100)), 0x0A640000 + static_cast<Address>(rng.below(3))));
    ++buckets[port / 1024];
    bytes += flows.back().byte_count;
  }
  std::sort(flows.begin(), flows.end(), [](const auto& x, const auto& y) { return x.start_time < y.start_time; });
  a.ingest(flows, 5.0);
  // One flow past the window stays buffered for the next report.
  a.ingest(std::vector<FlowRecord>{flow(5.5, Protocol::UDP, 53, 1)}, 5.5);
  const auto r = a.make_report({0.0, 5.0, {}});
  std::uint64_t proto = 0, ports = 0, per_dst = 0;
  for (auto n : r.protocol_histogram) proto += n;
  for (const auto& [b, n] : r.port_histogram) ports += n;
  for (const auto& [d, s] : r.per_destination) per_dst += s.flows;
  EXPECT_EQ(r.flow_count, 500u);
  EXPECT_EQ(proto, 500u);
  EXPECT_EQ(ports, 500u);
  EXPECT_EQ(per_dst, 500u);
  EXPECT_EQ(r.port_histogram, buckets);
  EXPECT_EQ(r.byte_count, bytes);
  EXPECT_EQ(a.make_report({5.0, 5.0, {}}).flow_count, 1u);
}

TEST(Report, OutsideSourcesAttributedToSite) {
  Agent a = make_agent();
  a.ingest(std::vector<FlowRecord>{flow(0.0, Protocol::UDP, 123, 1, parse_address("10.2.0.1"))}, 0.0);
  const auto r = a.make_report({0.0, 5.0, {}});
  EXPECT_EQ(r.src_range.first, parse_address("10.1.0.0"));
}

// Random interleavings of flows, policies and ticks. After every step the
// mode must agree with the protection predicate recomputed here from the
// agent's visible state, and no Drop/Block may come out of Normal mode.
TEST(StateMachine, FuzzedInterleavings) {
  Rng rng(2024);
  std::size_t normal_drops = 0, violations = 0, steps = 0;
  for (int run = 0; run < 10000; ++run) {
    AgentConfig cfg = base_config();
    cfg.quiet_period = rng.uniform(1.0, 40.0);
    cfg.local_trigger_count = static_cast<std::uint32_t>(rng.below(4));
    cfg.online_training = rng.uniform() < 0.8;
    cfg.drop_min_window_flows = 1 + rng.below(5);
    cfg.always_on = rng.uniform() < 0.1;
    Agent a = make_agent(cfg);
    SimTime now = 0.0;
    int policies = 0;

    auto check = [&](SimTime t) {
      const auto& s = a.state();
      const bool recent = s.last_malicious_seen && t - *s.last_malicious_seen <= s.quiet_period;
      const bool policy_on = s.active_policy && t < s.active_policy->expires_at;
      const bool want = cfg.always_on || recent || policy_on;
      if ((s.mode == AgentMode::Protection) != want) ++violations;
    };

    const int ops = 5 + static_cast<int>(rng.below(30));
    for (int k = 0; k < ops; ++k, ++steps) {
      now += rng.uniform() < 0.2 ? rng.uniform(0.0, 60.0) : rng.uniform(0.0, 2.0);
      const auto op = rng.below(10);
      if (op < 6) {
        std::vector<FlowRecord> batch;
        const auto n = 1 + rng.below(4);
        for (std::uint64_t i = 0; i < n; ++i) {
          const double roll = rng.uniform();
          FlowRecord f = roll < 0.4   ? hostile(now)
                         : roll < 0.8 ? quiet(now)
                                      : flow(now, static_cast<Protocol>(rng.below(4)),
                                             static_cast<std::uint16_t>(rng.below(65536)), rng.below(2000),
                                             0x0A010000 + static_cast<Address>(rng.below(4)));
          batch.push_back(std::move(f));
        }
        for (const auto& f : batch) {
          const auto r = a.ingest(std::span<const FlowRecord>(&f, 1), now);
          const auto& v = r.verdicts.front();
          if (v.decision != Decision::Forward && a.state().mode != AgentMode::Protection) ++normal_drops;
          if (v.decision != Decision::Forward && !v.classified) ++normal_drops;
        }
      } else if (op < 8) {
        const auto role = rng.uniform() < 0.5 ? PolicyRole::Source : PolicyRole::Destination;
        const auto m = rng.uniform() < 0.5 ? Mitigation::Drop : Mitigation::Block;
        const bool repeat = policies > 0 && rng.uniform() < 0.3;
        const std::string id = "p" + std::to_string(repeat ? policies - 1 : policies++);
        a.apply_policy(policy(1, role, m, now - rng.uniform(0.0, 5.0), rng.uniform(1.0, 50.0), id), now);
      } else {
        a.tick(now);
      }
      check(now);
    }
  }
  EXPECT_GT(steps, 100000u);
  EXPECT_EQ(normal_drops, 0u);
  EXPECT_EQ(violations, 0u);
}
