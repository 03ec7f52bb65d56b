#pragma once

// Synthetic IoT traffic: benign device categories, volumetric amplification
// and application-layer floods, plus the flow-record CSV format.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mecshield/errors.hpp"
#include "mecshield/random.hpp"
#include "mecshield/types.hpp"

namespace mecshield {

enum class DeviceCategory : std::uint8_t { Sensor, Monitor, Alarm };

inline std::string_view to_string(DeviceCategory c) {
  switch (c) {
    case DeviceCategory::Sensor: return "sensor";
    case DeviceCategory::Monitor: return "monitor";
    case DeviceCategory::Alarm: return "alarm";
  }
  return "sensor";
}

inline DeviceCategory parse_category(std::string_view s) {
  if (s == "sensor") return DeviceCategory::Sensor;
  if (s == "monitor") return DeviceCategory::Monitor;
  if (s == "alarm") return DeviceCategory::Alarm;
  throw InvalidArgument("unknown device category '" + std::string(s) + "'");
}

/// Traffic shape of one device class. Sensors and monitors start flows
/// periodically (random phase per device); alarms fire as a Poisson process.
struct BenignProfile {
  DeviceCategory category = DeviceCategory::Sensor;
  std::uint32_t device_count = 1;
  Address first_device = 0;  // device i sends from first_device + i
  Address server_addr = 0;
  Protocol protocol = Protocol::UDP;
  std::uint16_t dst_port = 5683;
  double flow_interval = 10.0;  // seconds between flows of one device (mean for alarms)
  double packets_per_flow = 5.0;
  double packets_jitter = 0.0;  // relative half-width of the uniform packet-count spread
  double packet_interval = 0.1;
  double packet_bytes = 100.0;

  static BenignProfile defaults(DeviceCategory c) {
    BenignProfile p;
    p.category = c;
    switch (c) {
      case DeviceCategory::Sensor:
        break;
      case DeviceCategory::Monitor:
        p.protocol = Protocol::UDP;
        p.dst_port = 5004;
        p.flow_interval = 60.0;
        p.packets_per_flow = 500.0;
        p.packets_jitter = 0.1;
        p.packet_interval = 0.12;
        p.packet_bytes = 1000.0;
        break;
      case DeviceCategory::Alarm:
        p.protocol = Protocol::TCP;
        p.dst_port = 8883;
        p.flow_interval = 20.0;
        p.packets_per_flow = 50.0;
        p.packets_jitter = 0.2;
        p.packet_interval = 0.1;
        p.packet_bytes = 200.0;
        break;
    }
    return p;
  }

  void validate() const {
    if (device_count == 0) throw InvalidArgument("benign profile needs at least one device");
    if (!(flow_interval > 0.0) || !(packets_per_flow >= 1.0) || !(packet_interval > 0.0) || !(packet_bytes > 0.0))
      throw InvalidArgument("benign profile parameters must be positive");
    if (!(packets_jitter >= 0.0 && packets_jitter < 1.0)) throw InvalidArgument("packets_jitter must lie in [0, 1)");
  }

  bool operator==(const BenignProfile&) const = default;
};

enum class AttackScenario : std::uint8_t { Volumetric, AppLayer };
enum class AttackMode : std::uint8_t { DNS, NTP, SSDP, SessionFlood, RequestFlood, Asymmetric };

inline std::string_view to_string(AttackScenario s) { return s == AttackScenario::Volumetric ? "volumetric" : "app_layer"; }

inline AttackScenario parse_scenario(std::string_view s) {
  if (s == "volumetric") return AttackScenario::Volumetric;
  if (s == "app_layer") return AttackScenario::AppLayer;
  throw InvalidArgument("unknown attack scenario '" + std::string(s) + "'");
}

inline std::string_view to_string(AttackMode m) {
  switch (m) {
    case AttackMode::DNS: return "dns";
    case AttackMode::NTP: return "ntp";
    case AttackMode::SSDP: return "ssdp";
    case AttackMode::SessionFlood: return "session_flood";
    case AttackMode::RequestFlood: return "request_flood";
    case AttackMode::Asymmetric: return "asymmetric";
  }
  return "dns";
}

inline AttackMode parse_attack_mode(std::string_view s) {
  if (s == "dns") return AttackMode::DNS;
  if (s == "ntp") return AttackMode::NTP;
  if (s == "ssdp") return AttackMode::SSDP;
  if (s == "session_flood") return AttackMode::SessionFlood;
  if (s == "request_flood") return AttackMode::RequestFlood;
  if (s == "asymmetric") return AttackMode::Asymmetric;
  throw InvalidArgument("unknown attack mode '" + std::string(s) + "'");
}

inline bool is_volumetric(AttackMode m) { return m == AttackMode::DNS || m == AttackMode::NTP || m == AttackMode::SSDP; }

struct AmplificationRange {
  double lo;
  double hi;
};

// Bandwidth amplification of the abused UDP services.
inline AmplificationRange amplification_factor(AttackMode m) {
  switch (m) {
    case AttackMode::DNS: return {28.0, 54.0};
    case AttackMode::NTP: return {556.9, 556.9};
    case AttackMode::SSDP: return {30.8, 30.8};
    default: break;
  }
  throw InvalidArgument("attack mode " + std::string(to_string(m)) + " has no amplification factor");
}

inline std::uint16_t amplifier_port(AttackMode m) {
  switch (m) {
    case AttackMode::DNS: return 53;
    case AttackMode::NTP: return 123;
    case AttackMode::SSDP: return 1900;
    default: break;
  }
  throw InvalidArgument("attack mode " + std::string(to_string(m)) + " has no amplifier service");
}

/// How legitimate clients use the attacked service; floods scale one aspect.
struct ServiceBaseline {
  double flow_rate = 0.05;  // sessions per second per client
  double packets_per_flow = 50.0;
  double packet_bytes = 200.0;
  double packet_interval = 0.1;
  Protocol protocol = Protocol::TCP;
  double packets_jitter = 0.0;  // same meaning as in BenignProfile
  bool poisson = false;         // session arrivals Poisson rather than periodic

  static ServiceBaseline of(const BenignProfile& p) {
    return {1.0 / p.flow_interval, p.packets_per_flow, p.packet_bytes, p.packet_interval,
            p.protocol,            p.packets_jitter,   p.category == DeviceCategory::Alarm};
  }
  bool operator==(const ServiceBaseline&) const = default;
};

/// Offered rate is in simulation units; one unit is bytes_per_unit bytes/s.
struct AttackProfile {
  AttackScenario scenario = AttackScenario::AppLayer;
  AttackMode mode = AttackMode::SessionFlood;
  std::uint32_t bot_count = 100;
  Address first_bot = 0;
  Address target_addr = 0;
  std::uint16_t target_port = 80;
  Address amplifier_addr = 0;
  double offered_rate = 50.0;
  double bytes_per_unit = 125000.0;
  bool spoofing = true;
  double multiplier = 10.0;
  double request_bytes = 100.0;
  ServiceBaseline baseline;

  double offered_bytes_per_second() const { return offered_rate * bytes_per_unit; }

  void validate() const {
    if (bot_count == 0) throw InvalidArgument("attack profile needs at least one bot");
    if (is_volumetric(mode) != (scenario == AttackScenario::Volumetric))
      throw InvalidArgument("attack mode " + std::string(to_string(mode)) + " does not belong to scenario " +
                            std::string(to_string(scenario)));
    if (!(offered_rate > 0.0) || !(bytes_per_unit > 0.0)) throw InvalidArgument("offered rate must be positive");
    if (!(multiplier > 0.0)) throw InvalidArgument("multiplier must be positive");
    if (!(request_bytes >= 1.0)) throw InvalidArgument("request_bytes must be at least 1");
    if (!(baseline.flow_rate > 0.0) || !(baseline.packets_per_flow >= 1.0) || !(baseline.packet_bytes > 0.0) ||
        !(baseline.packet_interval > 0.0))
      throw InvalidArgument("service baseline parameters must be positive");
    if (!(baseline.packets_jitter >= 0.0 && baseline.packets_jitter < 1.0))
      throw InvalidArgument("baseline packets_jitter must lie in [0, 1)");
  }

  bool operator==(const AttackProfile&) const = default;
};

namespace detail {

inline std::vector<SimTime> spaced_timestamps(SimTime start, std::uint64_t n, double spacing) {
  std::vector<SimTime> ts(n);
  for (std::uint64_t i = 0; i < n; ++i) ts[i] = start + static_cast<double>(i) * spacing;
  return ts;
}

inline void order_flows(std::vector<FlowRecord>& flows) {
  std::stable_sort(flows.begin(), flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
    if (a.start_time != b.start_time) return a.start_time < b.start_time;
    return a.flow_id < b.flow_id;
  });
}

// Periodic arrivals in [0, duration) with a uniform random phase.
template <typename F>
void periodic_arrivals(Rng& rng, double period, SimTime duration, F&& emit) {
  for (SimTime t = rng.uniform() * period; t < duration; t += period) emit(t);
}

}  // namespace detail

inline std::vector<FlowRecord> gen_benign(const BenignProfile& p, SimTime duration, std::uint64_t seed) {
  p.validate();
  if (!(duration > 0.0)) throw InvalidArgument("duration must be positive");
  std::vector<FlowRecord> flows;
  std::uint64_t next_id = 0;
  for (std::uint32_t d = 0; d < p.device_count; ++d) {
    Rng rng(derive_seed(seed, "benign-device", d));
    auto emit = [&](SimTime t) {
      double ppf = p.packets_per_flow;
      if (p.packets_jitter > 0.0) ppf *= rng.uniform(1.0 - p.packets_jitter, 1.0 + p.packets_jitter);
      const auto n = static_cast<std::uint64_t>(std::max(1.0, std::round(ppf)));
      FlowRecord f;
      f.flow_id = next_id++;
      f.src_addr = p.first_device + d;
      f.dst_addr = p.server_addr;
      f.protocol = p.protocol;
      f.dst_port = p.dst_port;
      f.packet_count = n;
      f.byte_count = static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * p.packet_bytes));
      f.packet_timestamps = detail::spaced_timestamps(t, n, p.packet_interval);
      f.start_time = t;
      f.end_time = f.packet_timestamps.back();
      f.truth_label = Label::Benign;
      flows.push_back(std::move(f));
    };
    if (p.category == DeviceCategory::Alarm) {
      for (SimTime t = rng.exponential(1.0 / p.flow_interval); t < duration; t += rng.exponential(1.0 / p.flow_interval))
        emit(t);
    } else {
      detail::periodic_arrivals(rng, p.flow_interval, duration, emit);
    }
  }
  detail::order_flows(flows);
  return flows;
}

/// Attack flows starting in [0, duration). For amplification attacks each
/// request is followed by its response with the next flow id, so pairs are
/// (2k, 2k + 1).
inline std::vector<FlowRecord> gen_attack(const AttackProfile& p, SimTime duration, std::uint64_t seed) {
  p.validate();
  if (!(duration > 0.0)) throw InvalidArgument("duration must be positive");
  std::vector<FlowRecord> flows;
  std::uint64_t next_id = 0;
  const double bots = static_cast<double>(p.bot_count);

  if (p.scenario == AttackScenario::Volumetric) {
    const auto amp = amplification_factor(p.mode);
    const std::uint16_t service = amplifier_port(p.mode);
    const double mean_factor = 0.5 * (amp.lo + amp.hi);
    const double request_rate = p.offered_bytes_per_second() / (p.request_bytes * (1.0 + mean_factor));
    const double period = bots / request_rate;
    const auto req_bytes = static_cast<std::uint64_t>(std::llround(p.request_bytes));
    for (std::uint32_t b = 0; b < p.bot_count; ++b) {
      Rng rng(derive_seed(seed, "volumetric-bot", b));
      const Address bot = p.first_bot + b;
      detail::periodic_arrivals(rng, period, duration, [&](SimTime t) {
        const double factor = amp.lo == amp.hi ? amp.lo : rng.uniform(amp.lo, amp.hi);
        FlowRecord req;
        req.flow_id = next_id++;
        req.src_addr = p.spoofing ? p.target_addr : bot;
        req.dst_addr = p.amplifier_addr;
        req.protocol = Protocol::UDP;
        req.dst_port = service;
        req.packet_count = 1;
        req.byte_count = req_bytes;
        req.start_time = req.end_time = t;
        req.packet_timestamps = {t};
        req.truth_label = Label::Malicious;

        FlowRecord resp;
        resp.flow_id = next_id++;
        resp.src_addr = p.amplifier_addr;
        resp.dst_addr = p.spoofing ? p.target_addr : bot;
        resp.protocol = Protocol::UDP;
        resp.dst_port = static_cast<std::uint16_t>(1024 + rng.below(64512));
        resp.byte_count = static_cast<std::uint64_t>(std::llround(static_cast<double>(req_bytes) * factor));
        resp.packet_count = (resp.byte_count + 1399) / 1400;
        resp.packet_timestamps = detail::spaced_timestamps(t + 0.001, resp.packet_count, 0.0001);
        resp.start_time = resp.packet_timestamps.front();
        resp.end_time = resp.packet_timestamps.back();
        resp.truth_label = Label::Malicious;
        flows.push_back(std::move(req));
        flows.push_back(std::move(resp));
      });
    }
    detail::order_flows(flows);
    return flows;
  }

  // Sessions keep the legitimate client shape (packet-count spread, arrival
  // process); the mode scales one aspect by the multiplier.
  const ServiceBaseline& base = p.baseline;
  double per_bot_rate = 0.0;
  double ppf_scale = 1.0;
  double flow_bytes = 0.0;  // mean bytes per session
  switch (p.mode) {
    case AttackMode::SessionFlood:
      per_bot_rate = p.multiplier * base.flow_rate;
      flow_bytes = p.offered_bytes_per_second() / (bots * per_bot_rate);
      break;
    case AttackMode::RequestFlood:
      ppf_scale = p.multiplier;
      flow_bytes = p.multiplier * base.packets_per_flow * base.packet_bytes;
      per_bot_rate = p.offered_bytes_per_second() / (bots * flow_bytes);
      break;
    case AttackMode::Asymmetric:
      flow_bytes = base.packets_per_flow * base.packet_bytes * p.multiplier;
      per_bot_rate = p.offered_bytes_per_second() / (bots * flow_bytes);
      break;
    default:
      throw InvalidArgument("unsupported application-layer mode");
  }
  for (std::uint32_t b = 0; b < p.bot_count; ++b) {
    Rng rng(derive_seed(seed, "app-bot", b));
    auto emit = [&](SimTime t) {
      double draw = 1.0;
      if (base.packets_jitter > 0.0) draw = rng.uniform(1.0 - base.packets_jitter, 1.0 + base.packets_jitter);
      const auto n = static_cast<std::uint64_t>(std::max(1.0, std::round(ppf_scale * base.packets_per_flow * draw)));
      // Session floods carry the offered volume at a fixed session size; the
      // other modes scale bytes with the drawn packet count.
      const double bytes = p.mode == AttackMode::SessionFlood ? flow_bytes : flow_bytes * draw;
      FlowRecord f;
      f.flow_id = next_id++;
      f.src_addr = p.first_bot + b;
      f.dst_addr = p.target_addr;
      f.protocol = base.protocol;
      f.dst_port = p.target_port;
      f.packet_count = n;
      f.byte_count = static_cast<std::uint64_t>(std::max(1.0, std::round(bytes)));
      f.packet_timestamps = detail::spaced_timestamps(t, n, base.packet_interval);
      f.start_time = t;
      f.end_time = f.packet_timestamps.back();
      f.truth_label = Label::Malicious;
      flows.push_back(std::move(f));
    };
    if (base.poisson) {
      for (SimTime t = rng.exponential(per_bot_rate); t < duration; t += rng.exponential(per_bot_rate)) emit(t);
    } else {
      detail::periodic_arrivals(rng, 1.0 / per_bot_rate, duration, emit);
    }
  }
  detail::order_flows(flows);
  return flows;
}

// ---------------------------------------------------------------------------
// Flow CSV: flow_id,src_addr,dst_addr,protocol,dst_port,packet_count,
// byte_count,start_time,end_time,label

inline constexpr std::string_view kFlowCsvColumns[] = {"flow_id",      "src_addr",   "dst_addr",   "protocol",
                                                       "dst_port",     "packet_count", "byte_count", "start_time",
                                                       "end_time",     "label"};

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    auto field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::string_view column, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("column " + std::string(column) + ": cannot parse '" + std::string(s) + "'", line);
  return v;
}

}  // namespace detail

/// Parses flow records; packet timestamps are spread evenly over
/// [start_time, end_time].
inline std::vector<FlowRecord> parse_flow_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw SchemaError("missing header row");
  ++line_no;
  const auto header = detail::split_csv(line);
  std::map<std::string_view, std::size_t> index;
  std::vector<std::string> names(header.begin(), header.end());
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  std::size_t col[std::size(kFlowCsvColumns)];
  for (std::size_t c = 0; c < std::size(kFlowCsvColumns); ++c) {
    auto it = index.find(kFlowCsvColumns[c]);
    if (it == index.end()) throw SchemaError("missing column '" + std::string(kFlowCsvColumns[c]) + "'", 1);
    col[c] = it->second;
  }

  std::vector<FlowRecord> flows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != names.size())
      throw DataError("expected " + std::to_string(names.size()) + " fields, found " + std::to_string(fields.size()),
                      line_no);
    try {
      FlowRecord f;
      f.flow_id = detail::parse_number<std::uint64_t>(fields[col[0]], "flow_id", line_no);
      f.src_addr = parse_address(fields[col[1]]);
      f.dst_addr = parse_address(fields[col[2]]);
      f.protocol = parse_protocol(fields[col[3]]);
      const auto port = detail::parse_number<std::uint32_t>(fields[col[4]], "dst_port", line_no);
      if (port > 65535) throw DataError("dst_port out of range", line_no);
      f.dst_port = static_cast<std::uint16_t>(port);
      f.packet_count = detail::parse_number<std::uint64_t>(fields[col[5]], "packet_count", line_no);
      f.byte_count = detail::parse_number<std::uint64_t>(fields[col[6]], "byte_count", line_no);
      f.start_time = detail::parse_number<double>(fields[col[7]], "start_time", line_no);
      f.end_time = detail::parse_number<double>(fields[col[8]], "end_time", line_no);
      f.truth_label = parse_label(fields[col[9]]);
      if (!std::isfinite(f.start_time) || !std::isfinite(f.end_time) || f.start_time > f.end_time)
        throw DataError("start_time must not exceed end_time", line_no);
      f.packet_timestamps.resize(f.packet_count);
      for (std::uint64_t i = 0; i < f.packet_count; ++i)
        f.packet_timestamps[i] =
            f.packet_count == 1 ? f.start_time
                                : f.start_time + (f.end_time - f.start_time) * static_cast<double>(i) /
                                                     static_cast<double>(f.packet_count - 1);
      if (f.packet_count > 0) f.packet_timestamps.back() = f.end_time;
      flows.push_back(std::move(f));
    } catch (const InvalidArgument& e) {
      throw DataError(e.what(), line_no);
    }
  }
  return flows;
}

inline std::vector<FlowRecord> load_flow_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return parse_flow_csv(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_flow_csv(std::ostream& os, const std::vector<FlowRecord>& flows) {
  for (std::size_t c = 0; c < std::size(kFlowCsvColumns); ++c) os << (c ? "," : "") << kFlowCsvColumns[c];
  os << '\n';
  for (const auto& f : flows) {
    os << f.flow_id << ',' << format_address(f.src_addr) << ',' << format_address(f.dst_addr) << ','
       << to_string(f.protocol) << ',' << f.dst_port << ',' << f.packet_count << ',' << f.byte_count << ','
       << format_double(f.start_time) << ',' << format_double(f.end_time) << ',' << to_string(f.truth_label) << '\n';
  }
}

struct ProtocolMix {
  double tcp = 0.0;
  double udp = 0.0;
  double icmp = 0.0;
  double other = 0.0;
};

/// Share of flows per protocol.
inline ProtocolMix protocol_mix(const std::vector<FlowRecord>& flows) {
  ProtocolMix m;
  if (flows.empty()) return m;
  for (const auto& f : flows) {
    switch (f.protocol) {
      case Protocol::TCP: m.tcp += 1; break;
      case Protocol::UDP: m.udp += 1; break;
      case Protocol::ICMP: m.icmp += 1; break;
      case Protocol::Other: m.other += 1; break;
    }
  }
  const double n = static_cast<double>(flows.size());
  m.tcp /= n;
  m.udp /= n;
  m.icmp /= n;
  m.other /= n;
  return m;
}

}  // namespace mecshield
