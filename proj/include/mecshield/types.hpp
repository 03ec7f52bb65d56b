#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mecshield/errors.hpp"

namespace mecshield {

using SimTime = double;  // simulation seconds
using Address = std::uint32_t;
using AgentId = std::uint32_t;

enum class Label : std::uint8_t { Benign, Malicious };
enum class Protocol : std::uint8_t { TCP, UDP, ICMP, Other };

inline std::string_view to_string(Label l) { return l == Label::Benign ? "benign" : "malicious"; }

inline Label parse_label(std::string_view s) {
  if (s == "benign") return Label::Benign;
  if (s == "malicious") return Label::Malicious;
  throw InvalidArgument("unknown label '" + std::string(s) + "'");
}

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::TCP: return "TCP";
    case Protocol::UDP: return "UDP";
    case Protocol::ICMP: return "ICMP";
    case Protocol::Other: return "OTHER";
  }
  return "OTHER";
}

inline Protocol parse_protocol(std::string_view s) {
  if (s == "TCP") return Protocol::TCP;
  if (s == "UDP") return Protocol::UDP;
  if (s == "ICMP") return Protocol::ICMP;
  if (s == "OTHER") return Protocol::Other;
  throw InvalidArgument("unknown protocol '" + std::string(s) + "'");
}

// Closed address interval [first, last].
struct AddressRange {
  Address first = 0;
  Address last = 0;

  bool contains(Address a) const { return a >= first && a <= last; }
  bool intersects(const AddressRange& o) const { return first <= o.last && o.first <= last; }
  auto operator<=>(const AddressRange&) const = default;
};

inline std::string format_address(Address a) {
  return std::to_string(a >> 24) + "." + std::to_string((a >> 16) & 0xff) + "." +
         std::to_string((a >> 8) & 0xff) + "." + std::to_string(a & 0xff);
}

// Accepts dotted quads or plain integers.
inline Address parse_address(std::string_view s) {
  if (s.find('.') == std::string_view::npos) {
    std::uint64_t v = 0;
    if (s.empty()) throw InvalidArgument("empty address");
    for (char c : s) {
      if (c < '0' || c > '9') throw InvalidArgument("bad address '" + std::string(s) + "'");
      v = v * 10 + static_cast<std::uint64_t>(c - '0');
      if (v > 0xffffffffULL) throw InvalidArgument("address out of range '" + std::string(s) + "'");
    }
    return static_cast<Address>(v);
  }
  Address out = 0;
  int parts = 0;
  std::uint32_t cur = 0;
  bool have_digit = false;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '.') {
      if (!have_digit || cur > 255) throw InvalidArgument("bad address '" + std::string(s) + "'");
      out = (out << 8) | cur;
      ++parts;
      cur = 0;
      have_digit = false;
    } else if (s[i] >= '0' && s[i] <= '9') {
      cur = cur * 10 + static_cast<std::uint32_t>(s[i] - '0');
      have_digit = true;
      if (cur > 255) throw InvalidArgument("bad address '" + std::string(s) + "'");
    } else {
      throw InvalidArgument("bad address '" + std::string(s) + "'");
    }
  }
  if (parts != 4) throw InvalidArgument("bad address '" + std::string(s) + "'");
  return out;
}

// One observed traffic flow. truth_label is for evaluation only.
struct FlowRecord {
  std::uint64_t flow_id = 0;
  Address src_addr = 0;
  Address dst_addr = 0;
  Protocol protocol = Protocol::TCP;
  std::uint16_t dst_port = 0;
  std::uint64_t packet_count = 0;
  std::uint64_t byte_count = 0;
  SimTime start_time = 0.0;
  SimTime end_time = 0.0;
  std::vector<SimTime> packet_timestamps;
  Label truth_label = Label::Benign;

  bool operator==(const FlowRecord&) const = default;
};

// start <= end, timestamps sorted within [start, end], one timestamp per packet.
inline bool is_valid(const FlowRecord& f) {
  if (!(f.start_time <= f.end_time)) return false;
  if (f.packet_timestamps.size() != f.packet_count) return false;
  SimTime prev = f.start_time;
  for (SimTime t : f.packet_timestamps) {
    if (t < prev || t > f.end_time) return false;
    prev = t;
  }
  return true;
}

}  // namespace mecshield
