#include <gtest/gtest.h>

#include <vector>

#include "mecshield/controller.hpp"
#include "mecshield/traffic.hpp"

using namespace mecshield;

namespace {

const AddressRange site1{0x0A010000, 0x0A01FFFF};
const AddressRange site2{0x0A020000, 0x0A02FFFF};
const AddressRange site3{0x0A030000, 0x0A03FFFF};
const Address victim = 0x0A030001;

// Builds a report straight from flows, independently of the agent code.
TrafficReport report_of(AgentId id, AddressRange range, const std::vector<FlowRecord>& flows, SimTime start,
                        SimTime length) {
  TrafficReport r;
  r.agent_id = id;
  r.window_start = start;
  r.window_length = length;
  r.src_range = range;
  for (const auto& f : flows) {
    ++r.flow_count;
    r.byte_count += f.byte_count;
    r.packet_count += f.packet_count;
    ++r.protocol_histogram[static_cast<std::size_t>(f.protocol)];
    ++r.port_histogram[f.dst_port / 1024];
    auto& d = r.per_destination[f.dst_addr];
    ++d.flows;
    d.bytes += f.byte_count;
    d.packets += f.packet_count;
    ++d.protocol_flows[static_cast<std::size_t>(f.protocol)];
    ++d.port_bucket_flows[f.dst_port / 1024];
    d.sources = range;
  }
  return r;
}

FlowRecord simple(Address src, Address dst, Protocol p, std::uint16_t port, std::uint64_t packets,
                  std::uint64_t bytes) {
  FlowRecord f;
  f.src_addr = src;
  f.dst_addr = dst;
  f.protocol = p;
  f.dst_port = port;
  f.packet_count = packets;
  f.byte_count = bytes;
  return f;
}

// Two sites send a steady trickle of 50-packet TCP sessions to the victim.
std::vector<TrafficReport> benign_window(SimTime start) {
  std::vector<FlowRecord> a, b;
  for (int i = 0; i < 4; ++i) a.push_back(simple(site1.first + 1, victim, Protocol::TCP, 8883, 50, 10000));
  for (int i = 0; i < 4; ++i) b.push_back(simple(site2.first + 1, victim, Protocol::TCP, 8883, 50, 10000));
  return {report_of(1, site1, a, start, 5.0), report_of(2, site2, b, start, 5.0)};
}

TrafficBaseline warmed(std::size_t windows = 3) {
  TrafficBaseline b;
  for (std::size_t i = 0; i < windows; ++i) b.observe(collect(benign_window(5.0 * i)));
  return b;
}

const Topology topology{{1, site1}, {2, site2}, {3, site3}};

}  // namespace

TEST(Collect, SumsPerDestination) {
  auto reports = benign_window(0.0);
  const auto view = collect(reports);
  EXPECT_EQ(view.reports, 2u);
  EXPECT_EQ(view.total_flows, 8u);
  EXPECT_EQ(view.total_bytes, 80000u);
  ASSERT_EQ(view.destinations.size(), 1u);
  const auto& agg = view.destinations.at(victim);
  EXPECT_EQ(agg.flows, 8u);
  EXPECT_EQ(agg.packets, 400u);
  EXPECT_EQ(agg.protocol_flows[0], 8u);
  EXPECT_EQ(agg.port_bucket_flows.at(8883 / 1024), 8u);
  ASSERT_EQ(agg.contributions.size(), 2u);
  EXPECT_EQ(agg.contributions.at(1).flows, 4u);
  EXPECT_EQ(agg.contributions.at(2).sources, site2);
  EXPECT_TRUE(view.warnings.empty());
}

TEST(Collect, DuplicateReportIgnoredWithWarning) {
  auto reports = benign_window(0.0);
  reports.push_back(reports.front());
  const auto view = collect(reports);
  EXPECT_EQ(view.reports, 2u);
  EXPECT_EQ(view.total_flows, 8u);
  EXPECT_EQ(view.warnings.size(), 1u);
}

TEST(Collect, EmptyInput) {
  const auto view = collect({});
  EXPECT_EQ(view.reports, 0u);
  EXPECT_TRUE(view.destinations.empty());
  EXPECT_FALSE(analyze(view, warmed(), {}).detected);
}

TEST(Collect, NonPositiveWindowRejected) {
  auto reports = benign_window(0.0);
  reports[1].window_length = 0.0;
  EXPECT_THROW(collect(reports), InvalidArgument);
}

TEST(Analyze, BenignWindowIsQuiet) {
  const auto a = analyze(collect(benign_window(15.0)), warmed(), {});
  EXPECT_FALSE(a.detected);
  EXPECT_TRUE(a.victims.empty());
}

TEST(Analyze, NoVerdictWithoutHistory) {
  auto reports = benign_window(0.0);
  for (int i = 0; i < 100; ++i) reports[0].per_destination[victim].bytes += 10000000;
  EXPECT_FALSE(analyze(collect(reports), warmed(1), {}).detected);
}

TEST(Analyze, VolumetricSurgeFromOneSite) {
  auto reports = benign_window(15.0);
  // Site 1 pushes 200x the baseline byte rate at the victim.
  std::vector<FlowRecord> flood;
  for (int i = 0; i < 4; ++i) flood.push_back(simple(site1.first + 1, victim, Protocol::TCP, 8883, 50, 10000 * 400));
  reports[0] = report_of(1, site1, flood, 15.0, 5.0);
  const auto a = analyze(collect(reports), warmed(), {});
  ASSERT_TRUE(a.detected);
  EXPECT_EQ(a.method, AttackMethod::VolumetricAmplification);
  EXPECT_EQ(a.victims, std::vector<Address>{victim});
  ASSERT_EQ(a.suspected_sources.size(), 1u);
  EXPECT_EQ(a.suspected_sources[0].reporter, 1u);
  EXPECT_EQ(a.suspected_sources[0].range, site1);
  EXPECT_GT(a.evidence.at("volumetric"), 1.0);
}

TEST(Analyze, SynShapedFloodFromGenerator) {
  AttackProfile p;
  p.bot_count = 50;
  p.first_bot = site2.first + 10;
  p.target_addr = victim;
  p.target_port = 8883;
  p.baseline.packets_per_flow = 1.0;
  p.baseline.packet_bytes = 60.0;
  p.baseline.flow_rate = 1.0;
  p.offered_rate = 0.5;
  auto flows = gen_attack(p, 5.0, 7);
  ASSERT_GT(flows.size(), 500u);
  auto reports = benign_window(15.0);
  reports[1] = report_of(2, site2, flows, 15.0, 5.0);
  const auto a = analyze(collect(reports), warmed(), {});
  ASSERT_TRUE(a.detected);
  EXPECT_EQ(a.method, AttackMethod::SynFlood);
  EXPECT_EQ(mitigation_for(a.method), Mitigation::Drop);
  ASSERT_EQ(a.suspected_sources.size(), 1u);
  EXPECT_EQ(a.suspected_sources[0].reporter, 2u);
}

TEST(Analyze, FewHeavyIcmpFlowsAreSmurf) {
  auto reports = benign_window(15.0);
  std::vector<FlowRecord> echo;
  for (int i = 0; i < 3; ++i) echo.push_back(simple(site1.first + 2, victim, Protocol::ICMP, 0, 20000, 1280000));
  reports[0] = report_of(1, site1, echo, 15.0, 5.0);
  reports.pop_back();
  const auto a = analyze(collect(reports), warmed(), {});
  ASSERT_TRUE(a.detected);
  EXPECT_EQ(a.method, AttackMethod::SmurfFraggle);
  EXPECT_EQ(mitigation_for(a.method), Mitigation::Block);
}

TEST(Analyze, EvidenceGrowsWithVolume) {
  const auto baseline = warmed();
  double last = 0.0;
  bool was_detected = false;
  for (std::uint64_t scale = 1; scale <= 4096; scale *= 2) {
    auto reports = benign_window(15.0);
    reports[0].per_destination[victim].bytes *= scale;
    const auto a = analyze(collect(reports), baseline, {});
    const double score = a.evidence.at("volumetric");
    EXPECT_GE(score, last);
    if (was_detected) {
      EXPECT_TRUE(a.detected) << scale;
    }
    was_detected = a.detected;
    last = score;
  }
  EXPECT_TRUE(was_detected);
}

TEST(Analyze, BaselineSkipsVictims) {
  TrafficBaseline b = warmed();
  auto reports = benign_window(15.0);
  reports[0].per_destination[victim].bytes *= 1000;
  const auto before = b.destination_byte_rate(victim);
  b.observe(collect(reports), {victim});
  EXPECT_EQ(b.destination_byte_rate(victim), before);
}

TEST(Policies, TopologyRouting) {
  AttackAssessment a;
  a.detected = true;
  a.method = AttackMethod::VolumetricAmplification;
  a.victims = {victim};
  a.suspected_sources = {{1, site1}};
  const auto plan = make_policies(a, topology, 20.0, 60.0);
  ASSERT_EQ(plan.policies.size(), 2u);
  EXPECT_FALSE(plan.partial_coverage);
  int dst = 0, src = 0;
  for (const auto& p : plan.policies) {
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.issued_at, 20.0);
    EXPECT_EQ(p.expires_at, 80.0);
    EXPECT_EQ(p.targets, std::vector<Address>{victim});
    ASSERT_EQ(p.addressed_agents.size(), 1u);
    EXPECT_NE(p.addressed_agents[0], 2u);  // uninvolved site stays untouched
    if (p.role == PolicyRole::Destination) {
      ++dst;
      EXPECT_EQ(p.addressed_agents[0], 3u);
      EXPECT_EQ(p.required_features, features_for(PolicyRole::Destination));
    } else {
      ++src;
      EXPECT_EQ(p.addressed_agents[0], 1u);
    }
  }
  EXPECT_EQ(dst, 1);
  EXPECT_EQ(src, 1);
}

TEST(Policies, RequiresDetection) {
  EXPECT_THROW(make_policies(AttackAssessment{}, topology, 0.0, 60.0), InvalidArgument);
}

TEST(Policies, MitigationFollowsMethod) {
  AttackAssessment a;
  a.detected = true;
  a.victims = {victim};
  a.suspected_sources = {{2, site2}};
  a.method = AttackMethod::SynFlood;
  for (const auto& p : make_policies(a, topology, 0.0, 10.0).policies) EXPECT_EQ(p.mitigation, Mitigation::Drop);
  a.method = AttackMethod::SmurfFraggle;
  for (const auto& p : make_policies(a, topology, 0.0, 10.0).policies) EXPECT_EQ(p.mitigation, Mitigation::Block);
}

TEST(Policies, PartialCoverageReported) {
  AttackAssessment a;
  a.detected = true;
  a.method = AttackMethod::AppLayerFlood;
  a.victims = {victim};
  const AddressRange outside{0xC0A80000, 0xC0A800FF};
  a.suspected_sources = {{1, site1}, {9, outside}};
  const auto plan = make_policies(a, topology, 0.0, 10.0);
  EXPECT_TRUE(plan.partial_coverage);
  EXPECT_EQ(plan.uncovered, std::vector<AddressRange>{outside});
  EXPECT_EQ(plan.policies.size(), 2u);
}
