#include "jtens/config.hpp"

#include <set>
#include <string>

#include "json.hpp"

#include "jtens/fileio.hpp"

namespace jtens {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

void reject_unknown_keys(const json& object, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    (void)value;
    if (known.find(key) == known.end())
      throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_field(const json& object, const char* key, T& into) {
  if (object.contains(key)) into = object.at(key).template get<T>();
}

void read_index(const json& object, const char* key, Eigen::Index& into) {
  if (object.contains(key)) into = static_cast<Eigen::Index>(object.at(key).get<long long>());
}

void read_index_list(const json& object, const char* key, std::vector<Eigen::Index>& into) {
  if (!object.contains(key)) return;
  into.clear();
  for (const auto& v : object.at(key)) into.push_back(static_cast<Eigen::Index>(v.get<long long>()));
}

DatasetConfig dataset_from(const json& object) {
  reject_unknown_keys(object,
                      {"source", "blob_classes", "blob_dim", "blob_separation", "sine_noise",
                       "train_count", "test_count", "idx_train_images", "idx_train_labels",
                       "idx_test_images", "idx_test_labels", "csv_train", "csv_test",
                       "label_column", "validation_count", "data_seed"},
                      "dataset");
  DatasetConfig out;
  read_field(object, "source", out.source);
  read_index(object, "blob_classes", out.blob_classes);
  read_index(object, "blob_dim", out.blob_dim);
  read_field(object, "blob_separation", out.blob_separation);
  read_field(object, "sine_noise", out.sine_noise);
  read_index(object, "train_count", out.train_count);
  read_index(object, "test_count", out.test_count);
  read_field(object, "idx_train_images", out.idx_train_images);
  read_field(object, "idx_train_labels", out.idx_train_labels);
  read_field(object, "idx_test_images", out.idx_test_images);
  read_field(object, "idx_test_labels", out.idx_test_labels);
  read_field(object, "csv_train", out.csv_train);
  read_field(object, "csv_test", out.csv_test);
  read_field(object, "label_column", out.label_column);
  read_index(object, "validation_count", out.validation_count);
  read_field(object, "data_seed", out.data_seed);
  return out;
}

DiagnosticsConfig diagnostics_from(const json& object) {
  reject_unknown_keys(object,
                      {"dominance_probe_epoch", "dominance_threshold", "robustness_repeats",
                       "keep_counts"},
                      "diagnostics");
  DiagnosticsConfig out;
  read_field(object, "dominance_probe_epoch", out.dominance_probe_epoch);
  read_field(object, "dominance_threshold", out.dominance_threshold);
  read_field(object, "robustness_repeats", out.robustness_repeats);
  read_index_list(object, "keep_counts", out.keep_counts);
  return out;
}

SgdConfig sgd_from(const json& object) {
  reject_unknown_keys(object, {"learning_rate", "momentum", "weight_decay", "batch_size"},
                      "sgd");
  SgdConfig out;
  read_field(object, "learning_rate", out.learning_rate);
  read_field(object, "momentum", out.momentum);
  read_field(object, "weight_decay", out.weight_decay);
  read_index(object, "batch_size", out.batch_size);
  return out;
}

ordered dataset_to(const DatasetConfig& d) {
  ordered out;
  out["source"] = d.source;
  out["blob_classes"] = d.blob_classes;
  out["blob_dim"] = d.blob_dim;
  out["blob_separation"] = d.blob_separation;
  out["sine_noise"] = d.sine_noise;
  out["train_count"] = d.train_count;
  out["test_count"] = d.test_count;
  out["idx_train_images"] = d.idx_train_images;
  out["idx_train_labels"] = d.idx_train_labels;
  out["idx_test_images"] = d.idx_test_images;
  out["idx_test_labels"] = d.idx_test_labels;
  out["csv_train"] = d.csv_train;
  out["csv_test"] = d.csv_test;
  out["label_column"] = d.label_column;
  out["validation_count"] = d.validation_count;
  out["data_seed"] = d.data_seed;
  return out;
}

ordered config_to_ordered(const ExperimentConfig& c) {
  ordered out;
  out["members"] = c.members;
  out["hidden_sizes"] = c.hidden_sizes;
  out["family"] = c.family;
  out["trainer"] = c.trainer;
  out["lambdas"] = c.lambdas;
  out["seeds"] = c.seeds;
  out["epochs"] = c.epochs;
  out["sgd"]["learning_rate"] = c.sgd.learning_rate;
  out["sgd"]["momentum"] = c.sgd.momentum;
  out["sgd"]["weight_decay"] = c.sgd.weight_decay;
  out["sgd"]["batch_size"] = c.sgd.batch_size;
  out["learning_rate_grid"] = c.learning_rate_grid;
  out["dataset"] = dataset_to(c.dataset);
  out["diagnostics"]["dominance_probe_epoch"] = c.diagnostics.dominance_probe_epoch;
  out["diagnostics"]["dominance_threshold"] = c.diagnostics.dominance_threshold;
  out["diagnostics"]["robustness_repeats"] = c.diagnostics.robustness_repeats;
  out["diagnostics"]["keep_counts"] = c.diagnostics.keep_counts;
  out["output_dir"] = c.output_dir;
  out["parallelism"] = c.parallelism;
  return out;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig config;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
    reject_unknown_keys(doc,
                        {"members", "hidden_sizes", "family", "trainer", "lambdas", "seeds",
                         "epochs", "sgd", "learning_rate_grid", "dataset", "diagnostics",
                         "output_dir", "parallelism"},
                        "the top level");
    read_index(doc, "members", config.members);
    read_index_list(doc, "hidden_sizes", config.hidden_sizes);
    read_field(doc, "family", config.family);
    read_field(doc, "trainer", config.trainer);
    read_field(doc, "lambdas", config.lambdas);
    read_field(doc, "seeds", config.seeds);
    read_field(doc, "epochs", config.epochs);
    if (doc.contains("sgd")) config.sgd = sgd_from(doc.at("sgd"));
    read_field(doc, "learning_rate_grid", config.learning_rate_grid);
    if (doc.contains("dataset")) config.dataset = dataset_from(doc.at("dataset"));
    if (doc.contains("diagnostics")) config.diagnostics = diagnostics_from(doc.at("diagnostics"));
    read_field(doc, "output_dir", config.output_dir);
    read_field(doc, "parallelism", config.parallelism);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_text_file(path));
}

std::string config_to_json(const ExperimentConfig& config) {
  return config_to_ordered(config).dump(2) + "\n";
}

std::string config_identity(const ExperimentConfig& config) {
  ordered doc = config_to_ordered(config);
  doc.erase("output_dir");
  doc.erase("parallelism");
  return doc.dump();
}

void validate(const ExperimentConfig& config) {
  if (config.members < 1) throw ConfigError("config: members must be at least 1");
  for (const Eigen::Index h : config.hidden_sizes)
    if (h < 1) throw ConfigError("config: hidden sizes must be positive");
  if (config.family != "categorical" && config.family != "gaussian")
    throw ConfigError("config: family must be 'categorical' or 'gaussian'");
  if (config.trainer != "joint" && config.trainer != "independent" &&
      config.trainer != "bagging")
    throw ConfigError("config: trainer must be 'joint', 'independent', or 'bagging'");
  if (config.lambdas.empty()) throw ConfigError("config: lambda list is empty");
  for (const double l : config.lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("config: lambdas must lie in [0, 1]");
  if (config.seeds.empty()) throw ConfigError("config: seed list is empty");
  if (config.epochs < 1) throw ConfigError("config: epochs must be at least 1");
  if (!(config.sgd.learning_rate > 0.0))
    throw ConfigError("config: learning rate must be positive");
  if (!(config.sgd.momentum >= 0.0 && config.sgd.momentum < 1.0))
    throw ConfigError("config: momentum must lie in [0, 1)");
  if (!(config.sgd.weight_decay >= 0.0))
    throw ConfigError("config: weight decay must be non-negative");
  if (config.sgd.batch_size < 1) throw ConfigError("config: batch size must be at least 1");
  for (const double lr : config.learning_rate_grid)
    if (!(lr > 0.0)) throw ConfigError("config: learning-rate grid entries must be positive");

  const DatasetConfig& d = config.dataset;
  if (d.source != "blobs" && d.source != "sine" && d.source != "idx" && d.source != "csv")
    throw ConfigError("config: dataset source must be 'blobs', 'sine', 'idx', or 'csv'");
  if (d.source == "blobs" && config.family != "categorical")
    throw ConfigError("config: blobs are a classification dataset");
  if (d.source == "idx" && config.family != "categorical")
    throw ConfigError("config: idx images are a classification dataset");
  if (d.source == "sine" && config.family != "gaussian")
    throw ConfigError("config: the noisy sine is a regression dataset");
  if (d.source == "idx" &&
      (d.idx_train_images.empty() || d.idx_train_labels.empty() || d.idx_test_images.empty() ||
       d.idx_test_labels.empty()))
    throw ConfigError("config: idx source needs all four file paths");
  if (d.source == "csv" && (d.csv_train.empty() || d.csv_test.empty()))
    throw ConfigError("config: csv source needs train and test paths");
  if ((d.source == "blobs" || d.source == "sine") && (d.train_count < 1 || d.test_count < 1))
    throw ConfigError("config: synthetic splits must be non-empty");
  if (d.validation_count < 0) throw ConfigError("config: validation count must be non-negative");

  const DiagnosticsConfig& g = config.diagnostics;
  if (g.dominance_probe_epoch < 1 || g.dominance_probe_epoch > config.epochs)
    throw ConfigError("config: dominance probe epoch must lie in [1, epochs]");
  if (!(g.dominance_threshold > 0.0 && g.dominance_threshold <= 1.0))
    throw ConfigError("config: dominance threshold must lie in (0, 1]");
  if (g.robustness_repeats < 1) throw ConfigError("config: robustness repeats must be positive");
  for (const Eigen::Index k : g.keep_counts)
    if (k < 1 || k > config.members)
      throw ConfigError("config: keep counts must lie in [1, members]");

  if (config.output_dir.empty()) throw ConfigError("config: output directory is empty");
  if (config.parallelism < 1) throw ConfigError("config: parallelism must be at least 1");
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace jtens
