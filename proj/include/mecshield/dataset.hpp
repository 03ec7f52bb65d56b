#pragma once

// Labeled training/evaluation data for the SOM commands. Two CSV layouts are
// accepted: flow records (header contains flow_id), turned into vectors by the
// agent feature pipeline, or ready-made vectors with columns f0..f{m-1},label.

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mecshield/errors.hpp"
#include "mecshield/features.hpp"
#include "mecshield/som.hpp"
#include "mecshield/traffic.hpp"

namespace mecshield {

struct Dataset {
  std::size_t dim = 0;
  std::vector<TrainingSample> samples;
};

/// Vectors for flows in start-time order, as an edge agent would see them.
inline std::vector<TrainingSample> flows_to_samples(std::vector<FlowRecord> flows, FeatureMode mode,
                                                    const NormalizationSpec& spec) {
  std::stable_sort(flows.begin(), flows.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.start_time < b.start_time; });
  TrailingFlowCounter counter(spec.window_length);
  std::vector<TrainingSample> out;
  out.reserve(flows.size());
  for (const auto& f : flows) out.push_back({observe_flow(f, counter, mode, spec).values, f.truth_label});
  return out;
}

inline Dataset parse_vector_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("missing header row");
  const auto header = detail::split_csv(line);
  if (header.size() < 2 || header.back() != "label") throw SchemaError("last column must be 'label'", 1);
  Dataset d;
  d.dim = header.size() - 1;
  for (std::size_t i = 0; i < d.dim; ++i)
    if (header[i] != "f" + std::to_string(i))
      throw SchemaError("column " + std::to_string(i + 1) + " must be named f" + std::to_string(i), 1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != header.size())
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()),
                      line_no);
    TrainingSample s;
    for (std::size_t i = 0; i < d.dim; ++i) {
      const double v = detail::parse_number<double>(fields[i], header[i], line_no);
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("column " + std::string(header[i]) + ": value outside [0, 1]", line_no);
      s.vector.push_back(v);
    }
    try {
      s.label = parse_label(fields.back());
    } catch (const InvalidArgument& e) {
      throw DataError(e.what(), line_no);
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

/// Loads either layout. mode only applies to flow records.
inline Dataset load_dataset(const std::string& path, FeatureMode mode, const NormalizationSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  try {
    if (first.find("flow_id") != std::string::npos) {
      Dataset d;
      d.dim = feature_dim(mode);
      d.samples = flows_to_samples(parse_flow_csv(in), mode, spec);
      return d;
    }
    return parse_vector_csv(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_vector_csv(std::ostream& os, const std::vector<TrainingSample>& samples) {
  if (samples.empty()) return;
  const std::size_t dim = samples.front().vector.size();
  for (std::size_t i = 0; i < dim; ++i) os << 'f' << i << ',';
  os << "label\n";
  for (const auto& s : samples) {
    for (double v : s.vector) os << format_double(v) << ',';
    os << to_string(s.label) << '\n';
  }
}

struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::optional<double> detection_rate() const {
    if (tp + fn == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  std::optional<double> accuracy() const {
    const auto n = tp + fp + tn + fn;
    if (n == 0) return std::nullopt;
    return static_cast<double>(tp + tn) / static_cast<double>(n);
  }
};

/// Confusion matrix of a labeled map on a dataset.
inline Confusion evaluate(const SomMap& map, const std::vector<TrainingSample>& samples) {
  Confusion c;
  for (const auto& s : samples) {
    if (s.vector.size() != map.dim())
      throw InvalidArgument("map has dimension " + std::to_string(map.dim()) + " but the dataset has dimension " +
                            std::to_string(s.vector.size()));
    const bool predicted = classify(map, s.vector) == Label::Malicious;
    const bool actual = s.label == Label::Malicious;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

}  // namespace mecshield
