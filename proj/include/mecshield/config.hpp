#pragma once

// Declarative run configuration (JSON). Every field has a default; errors name
// the offending field by its path, e.g. "agents[1].benign.category".

#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecshield/errors.hpp"
#include "mecshield/sim.hpp"

namespace mecshield {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  ScenarioConfig scenario;
  std::vector<Scheme> schemes{Scheme::MECshield, Scheme::DistributedSOM, Scheme::CentralizedSOM};
  std::vector<double> attack_levels{50.0, 100.0, 200.0, 300.0};
  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

namespace config_detail {

using nlohmann::json;
using nlohmann::ordered_json;

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  [[noreturn]] void fail(std::string_view key, const std::string& why) const { throw ConfigError(at(key) + ": " + why); }

  bool has(std::string_view key) const { return j_.is_object() && j_.contains(key); }

  Node child(std::string_view key) const {
    const json& c = j_.at(std::string(key));
    if (!c.is_object()) fail(key, "expected an object");
    return {c, at(key)};
  }

  std::vector<Node> items(std::string_view key) const {
    const json& c = j_.at(std::string(key));
    if (!c.is_array()) fail(key, "expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < c.size(); ++i) out.emplace_back(c[i], at(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  template <typename T>
  void read(std::string_view key, T& out) const {
    if (!has(key)) return;
    const json& v = j_.at(std::string(key));
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(key, "expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail(key, "expected an integer");
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0 && std::is_unsigned_v<T>)
          fail(key, "must not be negative");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))
          fail(key, "value out of range");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(key, "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(key, "expected a string");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  template <typename T, typename Parse>
  void read_as(std::string_view key, T& out, Parse parse) const {
    if (!has(key)) return;
    std::string s;
    read(key, s);
    try {
      out = parse(s);
    } catch (const InvalidArgument& e) {
      fail(key, e.what());
    }
  }

  void read_address(std::string_view key, Address& out) const {
    if (!has(key)) return;
    const json& v = j_.at(std::string(key));
    if (v.is_number_unsigned()) {
      if (v.get<std::uint64_t>() > 0xffffffffULL) fail(key, "address out of range");
      out = static_cast<Address>(v.get<std::uint64_t>());
      return;
    }
    read_as(key, out, [](const std::string& s) { return parse_address(s); });
  }

  void read_range(std::string_view key, AddressRange& out) const {
    if (!has(key)) return;
    const json& v = j_.at(std::string(key));
    if (!v.is_array() || v.size() != 2) fail(key, "expected [first, last]");
    const json ends{{"first", v[0]}, {"last", v[1]}};
    const Node pair(ends, at(key));
    pair.read_address("first", out.first);
    pair.read_address("last", out.last);
  }

  const json& raw() const { return j_; }

 private:
  const json& j_;
  std::string path_;
};

inline void read_bounds(const Node& n, std::string_view key, Bounds& b) {
  if (!n.has(key)) return;
  const auto c = n.child(key);
  c.read("min", b.min);
  c.read("max", b.max);
}

inline void read_normalization(const Node& n, NormalizationSpec& s) {
  read_bounds(n, "port", s.port);
  read_bounds(n, "flow_number", s.flow_number);
  read_bounds(n, "packets_per_flow", s.packets_per_flow);
  if (n.has("protocol_codes")) {
    const auto c = n.child("protocol_codes");
    c.read("tcp", s.protocols.tcp);
    c.read("udp", s.protocols.udp);
    c.read("icmp", s.protocols.icmp);
    c.read("other", s.protocols.other);
  }
  n.read("activity_quantum", s.activity_quantum);
  n.read("window_length", s.window_length);
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(n.path() + ": " + e.what());
  }
}

inline void read_benign(const Node& n, BenignProfile& p) {
  DeviceCategory category = p.category;
  n.read_as("category", category, [](const std::string& s) { return parse_category(s); });
  const BenignProfile keep = p;
  if (n.has("category")) {
    p = BenignProfile::defaults(category);
    p.device_count = keep.device_count;
    p.first_device = keep.first_device;
    p.server_addr = keep.server_addr;
  }
  n.read("devices", p.device_count);
  n.read_address("first_device", p.first_device);
  n.read_address("server", p.server_addr);
  n.read_as("protocol", p.protocol, [](const std::string& s) { return parse_protocol(s); });
  n.read("port", p.dst_port);
  n.read("flow_interval", p.flow_interval);
  n.read("packets_per_flow", p.packets_per_flow);
  n.read("packets_jitter", p.packets_jitter);
  n.read("packet_interval", p.packet_interval);
  n.read("packet_bytes", p.packet_bytes);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(n.path() + ": " + e.what());
  }
}

inline void read_attack_profile(const Node& n, AttackProfile& p, const std::map<std::string, BenignProfile>& by_category) {
  n.read_as("scenario", p.scenario, [](const std::string& s) { return parse_scenario(s); });
  n.read_as("mode", p.mode, [](const std::string& s) { return parse_attack_mode(s); });
  n.read("bots", p.bot_count);
  n.read_address("first_bot", p.first_bot);
  n.read_address("target", p.target_addr);
  n.read("port", p.target_port);
  n.read_address("amplifier", p.amplifier_addr);
  n.read("offered_rate", p.offered_rate);
  n.read("bytes_per_unit", p.bytes_per_unit);
  n.read("spoofing", p.spoofing);
  n.read("multiplier", p.multiplier);
  n.read("request_bytes", p.request_bytes);
  if (n.has("baseline_category")) {
    std::string cat;
    n.read("baseline_category", cat);
    auto it = by_category.find(cat);
    if (it == by_category.end()) n.fail("baseline_category", "no agent has benign category '" + cat + "'");
    p.baseline = ServiceBaseline::of(it->second);
  }
  if (n.has("baseline")) {
    const auto b = n.child("baseline");
    b.read("flow_rate", p.baseline.flow_rate);
    b.read("packets_per_flow", p.baseline.packets_per_flow);
    b.read("packet_bytes", p.baseline.packet_bytes);
    b.read("packet_interval", p.baseline.packet_interval);
    b.read_as("protocol", p.baseline.protocol, [](const std::string& s) { return parse_protocol(s); });
    b.read("packets_jitter", p.baseline.packets_jitter);
    b.read("poisson", p.baseline.poisson);
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(n.path() + ": " + e.what());
  }
}

inline const std::set<std::string>& known_top_level() {
  static const std::set<std::string> keys{
      "schema_version", "output_dir", "schemes", "attack_levels", "seed", "duration", "link_delay",
      "analysis_delay", "policy_lifetime", "controller_capacity", "training", "som", "normalization", "agent",
      "detection", "agents", "attacks", "scheme"};
  return keys;
}

}  // namespace config_detail

/// Parses a config document. Unknown top-level keys are rejected so typos
/// do not silently fall back to defaults.
inline RunConfig parse_run_config(const nlohmann::json& doc) {
  using config_detail::Node;
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!config_detail::known_top_level().contains(key)) throw ConfigError(key + ": unknown field");
  RunConfig rc;
  const Node root(doc, "");
  if (!root.has("schema_version")) throw ConfigError("schema_version: required field is missing");
  root.read("schema_version", rc.schema_version);
  if (rc.schema_version != kConfigSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(rc.schema_version));
  root.read("output_dir", rc.output_dir);

  if (root.has("schemes")) {
    rc.schemes.clear();
    for (const auto& item : root.items("schemes")) {
      if (!item.raw().is_string()) throw ConfigError(item.path() + ": expected a scheme name");
      try {
        rc.schemes.push_back(parse_scheme(item.raw().get<std::string>()));
      } catch (const InvalidArgument& e) {
        throw ConfigError(item.path() + ": " + e.what());
      }
    }
    if (rc.schemes.empty()) throw ConfigError("schemes: at least one scheme is required");
  }
  if (root.has("attack_levels")) {
    rc.attack_levels.clear();
    for (const auto& item : root.items("attack_levels")) {
      if (!item.raw().is_number() || !(item.raw().get<double>() > 0.0))
        throw ConfigError(item.path() + ": expected a positive number");
      rc.attack_levels.push_back(item.raw().get<double>());
    }
    if (rc.attack_levels.empty()) throw ConfigError("attack_levels: at least one level is required");
  }

  ScenarioConfig& sc = rc.scenario;
  root.read_as("scheme", sc.scheme, [](const std::string& s) { return parse_scheme(s); });
  root.read("seed", sc.seed);
  root.read("duration", sc.duration);
  root.read("link_delay", sc.link_delay);
  root.read("analysis_delay", sc.analysis_delay);
  root.read("policy_lifetime", sc.policy_lifetime);
  root.read("controller_capacity", sc.controller_capacity);
  if (root.has("training")) {
    const auto t = root.child("training");
    t.read("samples_per_agent", sc.training.samples_per_agent);
    t.read("benign_fraction", sc.training.benign_fraction);
    t.read("benign_duration", sc.training.benign_duration);
    t.read("attack_duration", sc.training.attack_duration);
  }
  if (root.has("som")) {
    const auto s = root.child("som");
    s.read("width", sc.som.width);
    s.read("height", sc.som.height);
    s.read("learning_rate", sc.som.learning_rate);
  }
  if (root.has("normalization")) config_detail::read_normalization(root.child("normalization"), sc.agent.normalization);
  if (root.has("agent")) {
    const auto a = root.child("agent");
    a.read("quiet_period", sc.agent.quiet_period);
    a.read("local_trigger_count", sc.agent.local_trigger_count);
    a.read("drop_max_packets", sc.agent.drop_max_packets);
    a.read("drop_min_window_flows", sc.agent.drop_min_window_flows);
    a.read("block_min_packets", sc.agent.block_min_packets);
  }
  if (root.has("detection")) {
    const auto d = root.child("detection");
    auto& th = sc.detection;
    d.read("volume_multiple", th.volume_multiple);
    d.read("baseline_window", th.baseline_window);
    d.read("syn_new_flows", th.syn_new_flows);
    d.read("syn_max_packets_per_flow", th.syn_max_packets_per_flow);
    d.read("packet_multiple", th.packet_multiple);
    d.read("few_flows", th.few_flows);
    d.read("request_multiple", th.request_multiple);
    d.read("min_byte_rate", th.min_byte_rate);
    d.read("min_flow_rate", th.min_flow_rate);
    d.read("min_packets_per_flow", th.min_packets_per_flow);
    d.read("min_history_windows", th.min_history_windows);
  }

  std::map<std::string, BenignProfile> by_category;
  std::vector<Node> agent_nodes;
  if (root.has("agents")) agent_nodes = root.items("agents");
  for (const auto& n : agent_nodes) {
    AgentSpec spec;
    if (!n.has("id")) n.fail("id", "required field is missing");
    n.read("id", spec.id);
    n.read("name", spec.name);
    if (!n.has("range")) n.fail("range", "required field is missing");
    n.read_range("range", spec.range);
    if (!n.has("benign")) n.fail("benign", "required field is missing");
    config_detail::read_benign(n.child("benign"), spec.benign);
    by_category.emplace(std::string(to_string(spec.benign.category)), spec.benign);
    sc.agents.push_back(std::move(spec));
  }
  for (std::size_t i = 0; i < agent_nodes.size(); ++i) {
    const auto& n = agent_nodes[i];
    if (!n.has("training_attacks")) continue;
    for (const auto& item : n.items("training_attacks")) {
      AttackProfile p;
      config_detail::read_attack_profile(item, p, by_category);
      sc.agents[i].training_attacks.push_back(p);
    }
  }
  if (root.has("attacks")) {
    for (const auto& n : root.items("attacks")) {
      AttackSpec at;
      if (!n.has("site")) n.fail("site", "required field is missing");
      n.read("site", at.site);
      n.read("start", at.start);
      n.read("duration", at.duration);
      if (!n.has("profile")) n.fail("profile", "required field is missing");
      config_detail::read_attack_profile(n.child("profile"), at.profile, by_category);
      sc.attacks.push_back(std::move(at));
    }
  }
  sc.validate();
  return rc;
}

inline RunConfig parse_run_config_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_run_config(doc);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace config_detail {

inline ordered_json benign_to_json(const BenignProfile& p) {
  return {{"category", to_string(p.category)},
          {"devices", p.device_count},
          {"first_device", format_address(p.first_device)},
          {"server", format_address(p.server_addr)},
          {"protocol", to_string(p.protocol)},
          {"port", p.dst_port},
          {"flow_interval", p.flow_interval},
          {"packets_per_flow", p.packets_per_flow},
          {"packets_jitter", p.packets_jitter},
          {"packet_interval", p.packet_interval},
          {"packet_bytes", p.packet_bytes}};
}

inline ordered_json attack_to_json(const AttackProfile& p) {
  return {{"scenario", to_string(p.scenario)},
          {"mode", to_string(p.mode)},
          {"bots", p.bot_count},
          {"first_bot", format_address(p.first_bot)},
          {"target", format_address(p.target_addr)},
          {"port", p.target_port},
          {"amplifier", format_address(p.amplifier_addr)},
          {"offered_rate", p.offered_rate},
          {"bytes_per_unit", p.bytes_per_unit},
          {"spoofing", p.spoofing},
          {"multiplier", p.multiplier},
          {"request_bytes", p.request_bytes},
          {"baseline",
           {{"flow_rate", p.baseline.flow_rate},
            {"packets_per_flow", p.baseline.packets_per_flow},
            {"packet_bytes", p.baseline.packet_bytes},
            {"packet_interval", p.baseline.packet_interval},
            {"protocol", to_string(p.baseline.protocol)},
            {"packets_jitter", p.baseline.packets_jitter},
            {"poisson", p.baseline.poisson}}}};
}

}  // namespace config_detail

/// Fully explicit form of a config; parse_run_config(to_json(rc)) == rc.
inline nlohmann::ordered_json to_json(const RunConfig& rc) {
  using config_detail::ordered_json;
  const ScenarioConfig& sc = rc.scenario;
  ordered_json j;
  j["schema_version"] = rc.schema_version;
  j["output_dir"] = rc.output_dir;
  j["schemes"] = ordered_json::array();
  for (Scheme s : rc.schemes) j["schemes"].push_back(to_string(s));
  j["attack_levels"] = rc.attack_levels;
  j["scheme"] = to_string(sc.scheme);
  j["seed"] = sc.seed;
  j["duration"] = sc.duration;
  j["link_delay"] = sc.link_delay;
  j["analysis_delay"] = sc.analysis_delay;
  j["policy_lifetime"] = sc.policy_lifetime;
  j["controller_capacity"] = sc.controller_capacity;
  j["training"] = {{"samples_per_agent", sc.training.samples_per_agent},
                   {"benign_fraction", sc.training.benign_fraction},
                   {"benign_duration", sc.training.benign_duration},
                   {"attack_duration", sc.training.attack_duration}};
  j["som"] = {{"width", sc.som.width}, {"height", sc.som.height}, {"learning_rate", sc.som.learning_rate}};
  const auto& ns = sc.agent.normalization;
  auto bounds = [](const Bounds& b) { return ordered_json{{"min", b.min}, {"max", b.max}}; };
  j["normalization"] = {{"port", bounds(ns.port)},
                        {"flow_number", bounds(ns.flow_number)},
                        {"packets_per_flow", bounds(ns.packets_per_flow)},
                        {"protocol_codes",
                         {{"tcp", ns.protocols.tcp},
                          {"udp", ns.protocols.udp},
                          {"icmp", ns.protocols.icmp},
                          {"other", ns.protocols.other}}},
                        {"activity_quantum", ns.activity_quantum},
                        {"window_length", ns.window_length}};
  j["agent"] = {{"quiet_period", sc.agent.quiet_period},
                {"local_trigger_count", sc.agent.local_trigger_count},
                {"drop_max_packets", sc.agent.drop_max_packets},
                {"drop_min_window_flows", sc.agent.drop_min_window_flows},
                {"block_min_packets", sc.agent.block_min_packets}};
  const auto& th = sc.detection;
  j["detection"] = {{"volume_multiple", th.volume_multiple},
                    {"baseline_window", th.baseline_window},
                    {"syn_new_flows", th.syn_new_flows},
                    {"syn_max_packets_per_flow", th.syn_max_packets_per_flow},
                    {"packet_multiple", th.packet_multiple},
                    {"few_flows", th.few_flows},
                    {"request_multiple", th.request_multiple},
                    {"min_byte_rate", th.min_byte_rate},
                    {"min_flow_rate", th.min_flow_rate},
                    {"min_packets_per_flow", th.min_packets_per_flow},
                    {"min_history_windows", th.min_history_windows}};
  j["agents"] = ordered_json::array();
  for (const auto& a : sc.agents) {
    ordered_json x;
    x["id"] = a.id;
    x["name"] = a.name;
    x["range"] = {format_address(a.range.first), format_address(a.range.last)};
    x["benign"] = config_detail::benign_to_json(a.benign);
    x["training_attacks"] = ordered_json::array();
    for (const auto& p : a.training_attacks) x["training_attacks"].push_back(config_detail::attack_to_json(p));
    j["agents"].push_back(std::move(x));
  }
  j["attacks"] = ordered_json::array();
  for (const auto& at : sc.attacks)
    j["attacks"].push_back({{"site", at.site},
                            {"start", at.start},
                            {"duration", at.duration},
                            {"profile", config_detail::attack_to_json(at.profile)}});
  return j;
}

}  // namespace mecshield
