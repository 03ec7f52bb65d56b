// mecshield: train and evaluate SOM filters, run scheme comparisons, emit traffic.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mecshield/mecshield.hpp"

namespace fs = std::filesystem;
using namespace mecshield;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kRuntime = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> schemes;
  std::vector<std::string> data;
  std::string map;
  std::string mode = "source";
  std::optional<double> level;
};

RunConfig load_config(const Options& o) {
  RunConfig rc = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) rc.scenario.seed = *o.seed;
  if (!o.out.empty()) rc.output_dir = o.out;
  if (!o.schemes.empty()) {
    rc.schemes.clear();
    for (const auto& s : o.schemes) {
      try {
        rc.schemes.push_back(parse_scheme(s));
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("--scheme: ") + e.what());
      }
    }
  }
  return rc;
}

FeatureMode parse_mode(const std::string& s) {
  try {
    return parse_feature_mode(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("--mode: ") + e.what());
  }
}

std::vector<TrainingSample> load_all(const Options& o, FeatureMode mode, const NormalizationSpec& spec,
                                     std::size_t& dim) {
  std::vector<TrainingSample> all;
  dim = 0;
  for (const auto& path : o.data) {
    Dataset d = load_dataset(path, mode, spec);
    if (dim && d.dim != dim)
      throw InvalidArgument(path + " has dimension " + std::to_string(d.dim) + " but earlier data has dimension " +
                            std::to_string(dim));
    dim = d.dim;
    all.insert(all.end(), std::make_move_iterator(d.samples.begin()), std::make_move_iterator(d.samples.end()));
  }
  return all;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  os.close();
  if (!os) throw std::runtime_error("failed writing " + p.string());
}

int cmd_train(const Options& o) {
  const RunConfig rc = load_config(o);
  const FeatureMode mode = parse_mode(o.mode);
  std::size_t dim = 0;
  const auto samples = load_all(o, mode, rc.scenario.agent.normalization, dim);
  if (samples.empty()) throw DataError("training data is empty");

  const auto& g = rc.scenario.som;
  const auto hp = SomHyperParams::for_grid(g.width, g.height, samples.size(),
                                           derive_seed(rc.scenario.seed, "som-init", dim), g.learning_rate);
  SomMap map = init_map(g.width, g.height, dim, hp.rng_seed);
  for (const auto& s : samples) train_step(map, s, hp);
  label_neurons(map);

  nlohmann::ordered_json summary;
  summary["samples"] = samples.size();
  summary["dimension"] = dim;
  summary["grid"] = {{"width", g.width}, {"height", g.height}};
  summary["epoch"] = map.epoch();
  summary["total_hits"] = map.total_hits();
  std::size_t benign = 0, malicious = 0, dead = 0;
  auto& neurons = summary["neurons"] = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < map.neuron_count(); ++j) {
    if (map.label(j) == NeuronLabel::Benign) ++benign;
    if (map.label(j) == NeuronLabel::Malicious) ++malicious;
    if (map.hit_count(j) == 0) ++dead;
    neurons.push_back({{"index", j},
                       {"row", map.row(j)},
                       {"col", map.col(j)},
                       {"label", to_string(map.label(j))},
                       {"hits", map.hit_count(j)},
                       {"benign_hits", map.votes(j, Label::Benign)},
                       {"malicious_hits", map.votes(j, Label::Malicious)}});
  }
  summary["benign_neurons"] = benign;
  summary["malicious_neurons"] = malicious;
  summary["neurons_without_hits"] = dead;

  const fs::path dir = rc.output_dir;
  fs::create_directories(dir);
  std::ostringstream som;
  save_som(som, map, hp);
  write_text(dir / "som.json", som.str());
  write_text(dir / "training_summary.json", summary.dump(2) + "\n");
  std::cout << "trained " << g.width << "x" << g.height << " map on " << samples.size() << " vectors (dim " << dim
            << "), epoch " << map.epoch() << "\n"
            << "wrote " << (dir / "som.json").string() << "\n";
  return kOk;
}

int cmd_eval(const Options& o) {
  if (o.map.empty()) throw ConfigError("--map: required for eval");
  const RunConfig rc = load_config(o);
  std::ifstream in(o.map);
  if (!in) throw DataError("cannot open " + o.map);
  SavedSom saved;
  try {
    saved = load_som(in);
  } catch (const DataError& e) {
    throw DataError(o.map + ": " + e.what());
  }
  FeatureMode mode = mode_for_dim(saved.map.dim());
  if (!o.mode.empty() && o.mode != "auto") mode = parse_mode(o.mode);
  std::size_t dim = 0;
  const auto samples = load_all(o, mode, rc.scenario.agent.normalization, dim);
  if (samples.empty()) throw DataError("evaluation data is empty");
  if (dim != saved.map.dim())
    throw InvalidArgument("map has dimension " + std::to_string(saved.map.dim()) + " but the dataset has dimension " +
                          std::to_string(dim));
  const Confusion c = evaluate(saved.map, samples);
  auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  std::cout << "TP " << c.tp << "\nFP " << c.fp << "\nTN " << c.tn << "\nFN " << c.fn << "\nDR "
            << show(c.detection_rate()) << "\nACC " << show(c.accuracy()) << "\n";
  if (!o.out.empty()) {
    nlohmann::ordered_json j;
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    j["tn"] = c.tn;
    j["fn"] = c.fn;
    j["detection_rate"] = c.detection_rate() ? nlohmann::ordered_json(*c.detection_rate()) : nlohmann::ordered_json(nullptr);
    j["accuracy"] = c.accuracy() ? nlohmann::ordered_json(*c.accuracy()) : nlohmann::ordered_json(nullptr);
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "eval.json", j.dump(2) + "\n");
  }
  return kOk;
}

int cmd_run(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config: required for run");
  const RunConfig rc = load_config(o);
  const auto rows = run_and_write(rc, rc.output_dir);
  std::cout << "wrote " << rows.size() << " rows to " << (fs::path(rc.output_dir) / "metrics.csv").string() << "\n";
  return kOk;
}

int cmd_gen(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config: required for gen");
  const RunConfig rc = load_config(o);
  const double level = o.level.value_or(rc.attack_levels.front());
  const ScenarioTraffic traffic = generate_traffic(at_level(rc.scenario, level));
  const fs::path dir = rc.output_dir;
  fs::create_directories(dir);
  std::ofstream os(dir / "traffic.csv", std::ios::binary);
  write_flow_csv(os, traffic.flows);
  os.close();
  if (!os) throw std::runtime_error("failed writing traffic.csv");
  std::cout << "wrote " << traffic.flows.size() << " flows to " << (dir / "traffic.csv").string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge DDoS filtering simulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (JSON)");
    sub->add_option("--seed", o.seed, "override the run seed");
    sub->add_option("--out", o.out, "output directory");
  };

  auto* train = app.add_subcommand("train", "train a SOM on labeled data");
  common(train);
  train->add_option("--data", o.data, "flow or vector CSV files")->required();
  train->add_option("--mode", o.mode, "feature tuple for flow data: source or destination");

  auto* eval = app.add_subcommand("eval", "confusion matrix of a trained map");
  common(eval);
  eval->add_option("--map", o.map, "serialized map")->required();
  eval->add_option("--data", o.data, "flow or vector CSV files")->required();
  eval->add_option("--mode", o.mode, "feature tuple for flow data (default: from the map)");

  auto* run = app.add_subcommand("run", "run the scheme x attack-level matrix");
  common(run);
  run->add_option("--scheme", o.schemes, "restrict to these schemes");

  auto* gen = app.add_subcommand("gen", "write the scenario's flows as CSV");
  common(gen);
  gen->add_option("--level", o.level, "attack rate (default: first configured level)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (eval->parsed() && eval->count("--mode") == 0) o.mode = "auto";

  try {
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (run->parsed()) return cmd_run(o);
    if (gen->parsed()) return cmd_gen(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const InvalidArgument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NoLabelsError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
