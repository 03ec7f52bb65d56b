#pragma once

// Flow records to normalized SOM input tuples.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mecshield/errors.hpp"
#include "mecshield/types.hpp"

namespace mecshield {

// Destination-site agents look at (protocol, port, flow number); source-site
// agents add packets per flow and transmission contiguity.
enum class FeatureMode : std::uint8_t { DestinationSite, SourceSite };

inline constexpr std::size_t feature_dim(FeatureMode m) { return m == FeatureMode::SourceSite ? 5 : 3; }

inline std::string_view to_string(FeatureMode m) {
  return m == FeatureMode::SourceSite ? "source" : "destination";
}

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "source") return FeatureMode::SourceSite;
  if (s == "destination") return FeatureMode::DestinationSite;
  throw InvalidArgument("unknown feature mode '" + std::string(s) + "'");
}

inline FeatureMode mode_for_dim(std::size_t dim) {
  if (dim == 5) return FeatureMode::SourceSite;
  if (dim == 3) return FeatureMode::DestinationSite;
  throw InvalidArgument("no feature mode has dimension " + std::to_string(dim));
}

struct FeatureVector {
  FeatureMode mode = FeatureMode::SourceSite;
  std::vector<double> values;

  bool operator==(const FeatureVector&) const = default;
};

struct Bounds {
  double min = 0.0;
  double max = 1.0;

  double normalize(double v) const { return std::clamp((v - min) / (max - min), 0.0, 1.0); }
  bool operator==(const Bounds&) const = default;
};

struct ProtocolCodes {
  double tcp = 0.0;
  double udp = 0.5;
  double icmp = 1.0;
  double other = 0.25;

  double code(Protocol p) const {
    switch (p) {
      case Protocol::TCP: return tcp;
      case Protocol::UDP: return udp;
      case Protocol::ICMP: return icmp;
      case Protocol::Other: break;
    }
    return other;
  }
  bool operator==(const ProtocolCodes&) const = default;
};

struct NormalizationSpec {
  Bounds port{0.0, 65535.0};
  Bounds flow_number{0.0, 1000.0};
  Bounds packets_per_flow{0.0, 1000.0};
  ProtocolCodes protocols;
  double activity_quantum = 1.0;  // seconds of activity credited per packet
  double window_length = 5.0;

  void validate() const {
    for (const auto* b : {&port, &flow_number, &packets_per_flow})
      if (!(b->min < b->max)) throw InvalidArgument("normalization bounds need min < max");
    const double codes[] = {protocols.tcp, protocols.udp, protocols.icmp, protocols.other};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(codes[i] >= 0.0 && codes[i] <= 1.0)) throw InvalidArgument("protocol codes must lie in [0, 1]");
      for (std::size_t k = i + 1; k < 4; ++k)
        if (codes[i] == codes[k]) throw InvalidArgument("protocol codes must be distinct");
    }
    if (!(activity_quantum > 0.0)) throw InvalidArgument("activity_quantum must be positive");
    if (!(window_length > 0.0)) throw InvalidArgument("window_length must be positive");
  }

  bool operator==(const NormalizationSpec&) const = default;
};

struct SourceAggregate {
  std::uint64_t flow_count = 0;
  double mean_packets_per_flow = 0.0;
  double active_fraction = 0.0;
};

struct WindowStats {
  SimTime window_start = 0.0;
  SimTime window_length = 5.0;
  std::map<Address, SourceAggregate> per_source;

  SimTime window_end() const { return window_start + window_length; }
};

/// Fraction of the window covered by the union of [t, t + quantum) over the
/// flow's packet timestamps.
inline double contiguity(const FlowRecord& flow, const WindowStats& window, double quantum) {
  if (flow.packet_timestamps.empty() || !(window.window_length > 0.0)) return 0.0;
  const SimTime lo = window.window_start;
  const SimTime hi = window.window_end();
  double covered = 0.0;
  SimTime run_start = 0.0;
  SimTime run_end = -1.0;
  bool open = false;
  for (SimTime t : flow.packet_timestamps) {
    const SimTime a = std::max(t, lo);
    const SimTime b = std::min(t + quantum, hi);
    if (b <= a) continue;
    if (open && a <= run_end) {
      run_end = std::max(run_end, b);
    } else {
      if (open) covered += run_end - run_start;
      run_start = a;
      run_end = b;
      open = true;
    }
  }
  if (open) covered += run_end - run_start;
  return std::clamp(covered / window.window_length, 0.0, 1.0);
}

/// One normalized tuple for a flow given its source's flow count.
inline FeatureVector make_vector(const FlowRecord& flow, std::uint64_t source_flow_count, FeatureMode mode,
                                 const NormalizationSpec& spec, const WindowStats& window) {
  FeatureVector v{mode, {}};
  v.values.reserve(feature_dim(mode));
  v.values.push_back(spec.protocols.code(flow.protocol));
  v.values.push_back(spec.port.normalize(static_cast<double>(flow.dst_port)));
  v.values.push_back(spec.flow_number.normalize(static_cast<double>(source_flow_count)));
  if (mode == FeatureMode::SourceSite) {
    v.values.push_back(spec.packets_per_flow.normalize(static_cast<double>(flow.packet_count)));
    v.values.push_back(contiguity(flow, window, spec.activity_quantum));
  }
  return v;
}

/// Per-source aggregates for the flows observed in a window.
inline WindowStats summarize_window(std::span<const FlowRecord> flows, SimTime start, SimTime length,
                                    double quantum) {
  WindowStats w{start, length, {}};
  std::map<Address, double> packets;
  std::map<Address, double> active;
  for (const auto& f : flows) {
    auto& agg = w.per_source[f.src_addr];
    ++agg.flow_count;
    packets[f.src_addr] += static_cast<double>(f.packet_count);
    active[f.src_addr] = std::max(active[f.src_addr], contiguity(f, w, quantum));
  }
  for (auto& [src, agg] : w.per_source) {
    agg.mean_packets_per_flow = packets[src] / static_cast<double>(agg.flow_count);
    agg.active_fraction = active[src];
  }
  return w;
}

/// One vector per flow. The flow number of a flow is its source's flow count
/// within the window.
inline std::vector<FeatureVector> extract(std::span<const FlowRecord> flows, FeatureMode mode,
                                          const NormalizationSpec& spec, const WindowStats& window) {
  std::map<Address, std::uint64_t> counted;
  if (window.per_source.empty())
    for (const auto& f : flows) ++counted[f.src_addr];
  std::vector<FeatureVector> out;
  out.reserve(flows.size());
  for (const auto& f : flows) {
    std::uint64_t n = 0;
    if (auto it = window.per_source.find(f.src_addr); it != window.per_source.end())
      n = it->second.flow_count;
    else
      n = counted[f.src_addr];
    out.push_back(make_vector(f, n, mode, spec, window));
  }
  return out;
}

/// Causal per-source flow counter over a trailing window (t - length, t].
/// Arrivals must be fed in nondecreasing time order.
class TrailingFlowCounter {
 public:
  explicit TrailingFlowCounter(SimTime length = 5.0) : length_(length) {}

  // Records an arrival and returns the source's count including it.
  std::uint64_t record(Address src, SimTime t) {
    auto& q = arrivals_[src];
    while (!q.empty() && q.front() <= t - length_) q.pop_front();
    q.push_back(t);
    if (++since_prune_ > 4096) prune(t);
    return q.size();
  }

  std::uint64_t count(Address src, SimTime t) const {
    auto it = arrivals_.find(src);
    if (it == arrivals_.end()) return 0;
    return static_cast<std::uint64_t>(
        std::count_if(it->second.begin(), it->second.end(), [&](SimTime a) { return a > t - length_; }));
  }

  SimTime length() const { return length_; }

 private:
  void prune(SimTime t) {
    since_prune_ = 0;
    for (auto it = arrivals_.begin(); it != arrivals_.end();) {
      auto& q = it->second;
      while (!q.empty() && q.front() <= t - length_) q.pop_front();
      it = q.empty() ? arrivals_.erase(it) : std::next(it);
    }
  }

  SimTime length_;
  std::unordered_map<Address, std::deque<SimTime>> arrivals_;
  std::size_t since_prune_ = 0;
};

/// Vector for a flow arriving at an edge agent: flow number from the trailing
/// counter, contiguity over the window opened by the flow's first packet.
inline FeatureVector observe_flow(const FlowRecord& flow, TrailingFlowCounter& counter, FeatureMode mode,
                                  const NormalizationSpec& spec) {
  const std::uint64_t n = counter.record(flow.src_addr, flow.start_time);
  const WindowStats window{flow.start_time, spec.window_length, {}};
  return make_vector(flow, n, mode, spec, window);
}

}  // namespace mecshield
