#pragma once

// Kohonen self-organizing map with online training, labeled neurons and
// hit-weighted merging.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecshield/errors.hpp"
#include "mecshield/random.hpp"
#include "mecshield/types.hpp"

namespace mecshield {

enum class NeuronLabel : std::uint8_t { Unlabeled, Benign, Malicious };

inline std::string_view to_string(NeuronLabel l) {
  switch (l) {
    case NeuronLabel::Benign: return "benign";
    case NeuronLabel::Malicious: return "malicious";
    case NeuronLabel::Unlabeled: break;
  }
  return "unlabeled";
}

inline NeuronLabel parse_neuron_label(std::string_view s) {
  if (s == "benign") return NeuronLabel::Benign;
  if (s == "malicious") return NeuronLabel::Malicious;
  if (s == "unlabeled") return NeuronLabel::Unlabeled;
  throw InvalidArgument("unknown neuron label '" + std::string(s) + "'");
}

/// Learning-rate and neighborhood-radius schedules.
///
/// Both decay exponentially in the number of consumed training vectors:
/// alpha(t) = initial_learning_rate * exp(-t / lr_decay_constant) and
/// sigma(t) = initial_radius * exp(-t / radius_decay_constant).
struct SomHyperParams {
  double initial_learning_rate = 0.1;
  double initial_radius = 10.0;
  double lr_decay_constant = 10000.0;
  double radius_decay_constant = 10000.0;
  std::uint64_t rng_seed = 0;

  /// Defaults for a grid: radius starts at half the longer side, the learning
  /// rate decays over the planned number of samples and the radius reaches 1
  /// when that plan is spent, so later online steps move only the winner.
  static SomHyperParams for_grid(std::size_t width, std::size_t height, std::uint64_t planned_samples,
                                 std::uint64_t seed, double learning_rate = 0.1) {
    SomHyperParams hp;
    hp.initial_learning_rate = learning_rate;
    hp.initial_radius = static_cast<double>(std::max(width, height)) / 2.0;
    hp.lr_decay_constant = static_cast<double>(std::max<std::uint64_t>(planned_samples, 1));
    hp.radius_decay_constant =
        hp.initial_radius > 1.0 ? hp.lr_decay_constant / std::log(hp.initial_radius) : hp.lr_decay_constant;
    hp.rng_seed = seed;
    return hp;
  }

  void validate() const {
    if (!(initial_learning_rate > 0.0 && initial_learning_rate <= 1.0))
      throw InvalidArgument("initial_learning_rate must lie in (0, 1]");
    if (!(initial_radius > 0.0) || !std::isfinite(initial_radius))
      throw InvalidArgument("initial_radius must be positive");
    if (!(lr_decay_constant > 0.0) || !std::isfinite(lr_decay_constant))
      throw InvalidArgument("lr_decay_constant must be positive and finite");
    if (!(radius_decay_constant > 0.0) || !std::isfinite(radius_decay_constant))
      throw InvalidArgument("radius_decay_constant must be positive and finite");
  }

  double learning_rate(std::uint64_t epoch) const {
    return initial_learning_rate * std::exp(-static_cast<double>(epoch) / lr_decay_constant);
  }
  double radius(std::uint64_t epoch) const {
    return initial_radius * std::exp(-static_cast<double>(epoch) / radius_decay_constant);
  }

  bool operator==(const SomHyperParams&) const = default;
};

struct TrainingSample {
  std::vector<double> vector;
  Label label = Label::Benign;
};

/// Row-major grid of neurons sharing one weight dimension.
///
/// Every neuron keeps separate benign/malicious tallies of the labeled
/// training vectors it won; its hit count is their sum.
class SomMap {
 public:
  SomMap() = default;
  SomMap(std::size_t width, std::size_t height, std::size_t dim)
      : width_(width), height_(height), dim_(dim) {
    if (width == 0 || height == 0 || dim == 0) throw InvalidArgument("SOM grid and dimension must be positive");
    weights_.assign(width * height * dim, 0.0);
    labels_.assign(width * height, NeuronLabel::Unlabeled);
    votes_.assign(width * height * 2, 0);
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t dim() const { return dim_; }
  std::size_t neuron_count() const { return width_ * height_; }

  std::span<const double> weights(std::size_t j) const { return {weights_.data() + j * dim_, dim_}; }
  std::span<double> weights(std::size_t j) { return {weights_.data() + j * dim_, dim_}; }
  std::span<const double> all_weights() const { return weights_; }

  NeuronLabel label(std::size_t j) const { return labels_[j]; }
  void set_label(std::size_t j, NeuronLabel l) { labels_[j] = l; }

  std::uint64_t votes(std::size_t j, Label l) const { return votes_[2 * j + (l == Label::Malicious ? 1 : 0)]; }
  void add_votes(std::size_t j, Label l, std::uint64_t n = 1) { votes_[2 * j + (l == Label::Malicious ? 1 : 0)] += n; }
  std::uint64_t hit_count(std::size_t j) const { return votes_[2 * j] + votes_[2 * j + 1]; }
  std::uint64_t total_hits() const {
    std::uint64_t s = 0;
    for (auto v : votes_) s += v;
    return s;
  }
  void reset_hits() { std::fill(votes_.begin(), votes_.end(), 0); }

  std::uint64_t epoch() const { return epoch_; }
  void set_epoch(std::uint64_t e) { epoch_ = e; }

  bool is_labeled() const {
    return std::any_of(labels_.begin(), labels_.end(), [](NeuronLabel l) { return l != NeuronLabel::Unlabeled; });
  }

  std::size_t row(std::size_t j) const { return j / width_; }
  std::size_t col(std::size_t j) const { return j % width_; }

  bool same_shape(const SomMap& o) const { return width_ == o.width_ && height_ == o.height_ && dim_ == o.dim_; }

  bool operator==(const SomMap&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> weights_;
  std::vector<NeuronLabel> labels_;
  std::vector<std::uint64_t> votes_;
  std::uint64_t epoch_ = 0;
};

/// Map with every weight drawn uniformly from [0, 1).
inline SomMap init_map(std::size_t width, std::size_t height, std::size_t dim, std::uint64_t seed) {
  SomMap map(width, height, dim);
  Rng rng(seed);
  for (std::size_t j = 0; j < map.neuron_count(); ++j)
    for (double& w : map.weights(j)) w = rng.uniform();
  return map;
}

inline void check_vector(const SomMap& map, std::span<const double> v) {
  if (v.size() != map.dim())
    throw InvalidArgument("vector dimension " + std::to_string(v.size()) + " does not match map dimension " +
                          std::to_string(map.dim()));
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

struct WinningNeuron {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Neuron with minimum Euclidean distance to v; ties go to the lowest
/// row-major index. Compares squared distances and roots only the result.
inline WinningNeuron best_match(const SomMap& map, std::span<const double> v) {
  check_vector(map, v);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const auto all = map.all_weights();
  const std::size_t dim = map.dim();
  for (std::size_t j = 0; j < map.neuron_count(); ++j) {
    const double d = squared_distance(all.subspan(j * dim, dim), v);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return {best, std::sqrt(best_d)};
}

inline std::size_t find_winner(const SomMap& map, std::span<const double> v) { return best_match(map, v).index; }

namespace detail {

inline void check_unit_range(std::span<const double> v) {
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("training vector component outside [0, 1]");
}

// Pulls the winner and its lattice neighbours (grid distance <= sigma)
// toward x with a Gaussian neighbourhood weight.
inline void update_neighbourhood(SomMap& map, std::size_t winner, std::span<const double> x, double alpha,
                                 double sigma) {
  const auto wr = static_cast<std::ptrdiff_t>(map.row(winner));
  const auto wc = static_cast<std::ptrdiff_t>(map.col(winner));
  const double sigma2 = sigma * sigma;
  const auto reach = static_cast<std::ptrdiff_t>(std::floor(sigma));
  const auto h = static_cast<std::ptrdiff_t>(map.height());
  const auto w = static_cast<std::ptrdiff_t>(map.width());
  for (std::ptrdiff_t r = std::max<std::ptrdiff_t>(0, wr - reach); r <= std::min(h - 1, wr + reach); ++r) {
    for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(0, wc - reach); c <= std::min(w - 1, wc + reach); ++c) {
      const double d2 = static_cast<double>((r - wr) * (r - wr) + (c - wc) * (c - wc));
      if (d2 > sigma2) continue;
      const double rate = d2 == 0.0 ? alpha : alpha * std::exp(-d2 / (2.0 * sigma2));
      auto wj = map.weights(static_cast<std::size_t>(r * w + c));
      for (std::size_t k = 0; k < wj.size(); ++k) wj[k] = std::clamp(wj[k] + rate * (x[k] - wj[k]), 0.0, 1.0);
    }
  }
}

}  // namespace detail

/// One online training step with a labeled vector. Returns the winner.
inline std::size_t train_step(SomMap& map, const TrainingSample& s, const SomHyperParams& hp) {
  check_vector(map, s.vector);
  detail::check_unit_range(s.vector);
  const std::size_t winner = find_winner(map, s.vector);
  detail::update_neighbourhood(map, winner, s.vector, hp.learning_rate(map.epoch()), hp.radius(map.epoch()));
  map.add_votes(winner, s.label);
  map.set_epoch(map.epoch() + 1);
  return winner;
}

/// Online step with an unlabeled vector: weights adapt, tallies do not.
inline std::size_t train_unlabeled(SomMap& map, std::span<const double> v, const SomHyperParams& hp) {
  check_vector(map, v);
  detail::check_unit_range(v);
  const std::size_t winner = find_winner(map, v);
  detail::update_neighbourhood(map, winner, v, hp.learning_rate(map.epoch()), hp.radius(map.epoch()));
  map.set_epoch(map.epoch() + 1);
  return winner;
}

/// Majority label per neuron from its tallies (ties resolve to Malicious).
/// Neurons that never won take the label of the nearest neuron that did.
inline void label_neurons(SomMap& map) {
  std::vector<std::size_t> won;
  for (std::size_t j = 0; j < map.neuron_count(); ++j) {
    if (map.hit_count(j) == 0) continue;
    won.push_back(j);
    map.set_label(j, map.votes(j, Label::Benign) > map.votes(j, Label::Malicious) ? NeuronLabel::Benign
                                                                                    : NeuronLabel::Malicious);
  }
  if (won.empty()) throw NoLabelsError("map has no labeled training presentations");
  for (std::size_t j = 0; j < map.neuron_count(); ++j) {
    if (map.hit_count(j) != 0) continue;
    std::size_t nearest = won.front();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k : won) {
      const double d = squared_distance(map.weights(j), map.weights(k));
      if (d < best) {
        best = d;
        nearest = k;
      }
    }
    map.set_label(j, map.label(nearest));
  }
}

inline Label classify(const SomMap& map, std::span<const double> v) {
  const std::size_t j = find_winner(map, v);
  switch (map.label(j)) {
    case NeuronLabel::Benign: return Label::Benign;
    case NeuronLabel::Malicious: return Label::Malicious;
    case NeuronLabel::Unlabeled: break;
  }
  throw NoLabelsError("winning neuron carries no label; run label_neurons first");
}

/// Per-neuron hit-count-weighted mean of the inputs (plain mean where no map
/// has hits). Tallies and epochs add up; the result is relabeled.
inline SomMap merge_maps(std::span<const SomMap> maps) {
  if (maps.empty()) throw InvalidArgument("merge_maps needs at least one map");
  const SomMap& first = maps.front();
  for (const auto& m : maps)
    if (!m.same_shape(first)) throw InvalidArgument("merge_maps: maps differ in grid shape or dimension");

  SomMap out(first.width(), first.height(), first.dim());
  std::uint64_t epochs = 0;
  for (const auto& m : maps) epochs += m.epoch();
  out.set_epoch(epochs);

  for (std::size_t j = 0; j < out.neuron_count(); ++j) {
    std::uint64_t total = 0;
    for (const auto& m : maps) total += m.hit_count(j);
    auto wj = out.weights(j);
    for (const auto& m : maps) {
      const double share = total == 0 ? 1.0 / static_cast<double>(maps.size())
                                      : static_cast<double>(m.hit_count(j)) / static_cast<double>(total);
      const auto src = m.weights(j);
      for (std::size_t k = 0; k < wj.size(); ++k) wj[k] += share * src[k];
      out.add_votes(j, Label::Benign, m.votes(j, Label::Benign));
      out.add_votes(j, Label::Malicious, m.votes(j, Label::Malicious));
    }
    for (double& w : wj) w = std::clamp(w, 0.0, 1.0);
  }
  if (out.total_hits() > 0) label_neurons(out);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: a versioned JSON document, neurons in row-major order.
// nlohmann emits shortest round-trip doubles, so weights survive exactly.

inline constexpr std::string_view kSomFormat = "mecshield-som";
inline constexpr int kSomFormatVersion = 1;

struct SavedSom {
  SomMap map;
  SomHyperParams params;
};

inline void to_json(nlohmann::json& j, const SomHyperParams& hp) {
  j = nlohmann::json{{"initial_learning_rate", hp.initial_learning_rate},
                     {"initial_radius", hp.initial_radius},
                     {"lr_decay_constant", hp.lr_decay_constant},
                     {"radius_decay_constant", hp.radius_decay_constant},
                     {"rng_seed", hp.rng_seed}};
}

inline void from_json(const nlohmann::json& j, SomHyperParams& hp) {
  hp.initial_learning_rate = j.at("initial_learning_rate").get<double>();
  hp.initial_radius = j.at("initial_radius").get<double>();
  hp.lr_decay_constant = j.at("lr_decay_constant").get<double>();
  hp.radius_decay_constant = j.at("radius_decay_constant").get<double>();
  hp.rng_seed = j.at("rng_seed").get<std::uint64_t>();
}

inline nlohmann::json som_to_json(const SomMap& map, const SomHyperParams& hp) {
  nlohmann::json neurons = nlohmann::json::array();
  for (std::size_t j = 0; j < map.neuron_count(); ++j) {
    const auto w = map.weights(j);
    neurons.push_back({{"weights", std::vector<double>(w.begin(), w.end())},
                       {"label", to_string(map.label(j))},
                       {"benign_hits", map.votes(j, Label::Benign)},
                       {"malicious_hits", map.votes(j, Label::Malicious)}});
  }
  return {{"format", kSomFormat},
          {"version", kSomFormatVersion},
          {"width", map.width()},
          {"height", map.height()},
          {"dim", map.dim()},
          {"epoch", map.epoch()},
          {"hyperparams", hp},
          {"neurons", std::move(neurons)}};
}

inline SavedSom som_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kSomFormat) throw DataError("not a SOM document");
    if (doc.at("version").get<int>() != kSomFormatVersion)
      throw DataError("unsupported SOM document version " + std::to_string(doc.at("version").get<int>()));
    SavedSom out{SomMap(doc.at("width").get<std::size_t>(), doc.at("height").get<std::size_t>(),
                        doc.at("dim").get<std::size_t>()),
                 doc.at("hyperparams").get<SomHyperParams>()};
    out.map.set_epoch(doc.at("epoch").get<std::uint64_t>());
    const auto& neurons = doc.at("neurons");
    if (neurons.size() != out.map.neuron_count()) throw DataError("neuron count does not match grid shape");
    for (std::size_t j = 0; j < neurons.size(); ++j) {
      const auto w = neurons[j].at("weights").get<std::vector<double>>();
      if (w.size() != out.map.dim()) throw DataError("neuron " + std::to_string(j) + " has wrong dimension");
      auto dst = out.map.weights(j);
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (!(w[k] >= 0.0 && w[k] <= 1.0)) throw DataError("neuron " + std::to_string(j) + " weight outside [0, 1]");
        dst[k] = w[k];
      }
      out.map.set_label(j, parse_neuron_label(neurons[j].at("label").get<std::string>()));
      out.map.add_votes(j, Label::Benign, neurons[j].at("benign_hits").get<std::uint64_t>());
      out.map.add_votes(j, Label::Malicious, neurons[j].at("malicious_hits").get<std::uint64_t>());
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SOM document: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("malformed SOM document: ") + e.what());
  }
}

inline void save_som(std::ostream& os, const SomMap& map, const SomHyperParams& hp) {
  os << som_to_json(map, hp).dump(1) << '\n';
}

inline SavedSom load_som(std::istream& is) {
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SOM document: ") + e.what());
  }
  return som_from_json(doc);
}

}  // namespace mecshield
