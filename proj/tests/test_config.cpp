#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "jtens/config.hpp"

using namespace jtens;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("jtens_config_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

ExperimentConfig reparse(const ExperimentConfig& config) {
  return config_from_json(config_to_json(config));
}

}  // namespace

TEST_CASE("the default configuration is valid and round-trips canonically") {
  const ExperimentConfig defaults;
  CHECK_NOTHROW(validate(defaults));
  const std::string canon = config_to_json(defaults);
  CHECK(config_to_json(reparse(defaults)) == canon);
  CHECK(config_to_json(defaults) == canon);  // serialization is deterministic
  CHECK(canon.back() == '\n');
}

TEST_CASE("an empty JSON object means all defaults") {
  const ExperimentConfig parsed = config_from_json("{}");
  CHECK(config_to_json(parsed) == config_to_json(ExperimentConfig{}));
}

TEST_CASE("a partial document overrides only the keys it mentions") {
  const ExperimentConfig parsed = config_from_json(R"({
    "members": 8,
    "lambdas": [0.0, 1.0],
    "sgd": {"momentum": 0.9},
    "dataset": {"blob_classes": 5, "blob_dim": 3}
  })");
  CHECK(parsed.members == 8);
  REQUIRE(parsed.lambdas.size() == 2);
  CHECK(parsed.lambdas[1] == 1.0);
  CHECK(parsed.sgd.momentum == 0.9);
  CHECK(parsed.sgd.learning_rate == ExperimentConfig{}.sgd.learning_rate);
  CHECK(parsed.dataset.blob_classes == 5);
  CHECK(parsed.dataset.blob_dim == 3);
  CHECK(parsed.epochs == ExperimentConfig{}.epochs);
}

TEST_CASE("a nontrivial config survives the JSON round trip unchanged") {
  ExperimentConfig config;
  config.members = 6;
  config.hidden_sizes = {32, 16};
  config.family = "gaussian";
  config.trainer = "independent";
  config.lambdas = {0.0, 0.25, 1.0};
  config.seeds = {11, 12};
  config.epochs = 7;
  config.sgd.learning_rate = 0.0625;
  config.sgd.momentum = 0.5;
  config.sgd.weight_decay = 1e-4;
  config.sgd.batch_size = 33;
  config.learning_rate_grid = {0.1, 0.0625};
  config.dataset.source = "sine";
  config.dataset.sine_noise = 0.30000000000000004;
  config.dataset.train_count = 99;
  config.dataset.validation_count = 9;
  config.dataset.data_seed = 0xfeedbeef;
  config.diagnostics.dominance_probe_epoch = 2;
  config.diagnostics.keep_counts = {1, 3, 6};
  config.output_dir = "elsewhere";
  config.parallelism = 4;
  CHECK(config_to_json(reparse(config)) == config_to_json(config));
}

TEST_CASE("unknown keys are typos and are named in the error") {
  CHECK_THROWS_WITH_AS(config_from_json(R"({"member": 4})"), doctest::Contains("member"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json(R"({"dataset": {"blob_class": 3}})"),
                       doctest::Contains("blob_class"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json(R"({"sgd": {"lr": 0.1}})"), doctest::Contains("lr"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json(R"({"diagnostics": {"probe": 1}})"),
                       doctest::Contains("probe"), ConfigError);
}

TEST_CASE("malformed JSON is a configuration error, not a crash") {
  CHECK_THROWS_AS(config_from_json("{"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"members": "four"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("[]"), ConfigError);
}

TEST_CASE("validation catches out-of-range knobs one by one") {
  const auto rejects = [](auto&& tweak) {
    ExperimentConfig config;
    tweak(config);
    CHECK_THROWS_AS(validate(config), ConfigError);
  };
  rejects([](ExperimentConfig& c) { c.members = 0; });
  rejects([](ExperimentConfig& c) { c.hidden_sizes = {8, 0}; });
  rejects([](ExperimentConfig& c) { c.family = "bernoulli"; });
  rejects([](ExperimentConfig& c) { c.trainer = "boosting"; });
  rejects([](ExperimentConfig& c) { c.lambdas = {}; });
  rejects([](ExperimentConfig& c) { c.lambdas = {1.5}; });
  rejects([](ExperimentConfig& c) { c.lambdas = {-0.1}; });
  rejects([](ExperimentConfig& c) { c.seeds = {}; });
  rejects([](ExperimentConfig& c) { c.epochs = 0; });
  rejects([](ExperimentConfig& c) { c.sgd.learning_rate = 0.0; });
  rejects([](ExperimentConfig& c) { c.sgd.momentum = 1.0; });
  rejects([](ExperimentConfig& c) { c.sgd.momentum = -0.1; });
  rejects([](ExperimentConfig& c) { c.sgd.weight_decay = -1e-6; });
  rejects([](ExperimentConfig& c) { c.sgd.batch_size = 0; });
  rejects([](ExperimentConfig& c) { c.learning_rate_grid = {0.1, 0.0}; });
  rejects([](ExperimentConfig& c) { c.dataset.source = "parquet"; });
  rejects([](ExperimentConfig& c) { c.dataset.source = "sine"; });  // categorical family
  rejects([](ExperimentConfig& c) { c.family = "gaussian"; });      // blobs dataset
  rejects([](ExperimentConfig& c) { c.dataset.source = "idx"; });   // no paths given
  rejects([](ExperimentConfig& c) { c.dataset.source = "csv"; });   // no paths given
  rejects([](ExperimentConfig& c) { c.dataset.train_count = 0; });
  rejects([](ExperimentConfig& c) { c.dataset.validation_count = -1; });
  rejects([](ExperimentConfig& c) { c.diagnostics.dominance_probe_epoch = 0; });
  rejects([](ExperimentConfig& c) { c.diagnostics.dominance_probe_epoch = c.epochs + 1; });
  rejects([](ExperimentConfig& c) { c.diagnostics.dominance_threshold = 0.0; });
  rejects([](ExperimentConfig& c) { c.diagnostics.dominance_threshold = 1.5; });
  rejects([](ExperimentConfig& c) { c.diagnostics.robustness_repeats = 0; });
  rejects([](ExperimentConfig& c) { c.diagnostics.keep_counts = {0}; });
  rejects([](ExperimentConfig& c) { c.diagnostics.keep_counts = {c.members + 1}; });
  rejects([](ExperimentConfig& c) { c.output_dir = ""; });
  rejects([](ExperimentConfig& c) { c.parallelism = 0; });
}

TEST_CASE("valid cross-field combinations pass") {
  ExperimentConfig sine;
  sine.family = "gaussian";
  sine.dataset.source = "sine";
  CHECK_NOTHROW(validate(sine));

  ExperimentConfig idx;
  idx.dataset.source = "idx";
  idx.dataset.idx_train_images = "a";
  idx.dataset.idx_train_labels = "b";
  idx.dataset.idx_test_images = "c";
  idx.dataset.idx_test_labels = "d";
  CHECK_NOTHROW(validate(idx));

  ExperimentConfig csv;
  csv.dataset.source = "csv";
  csv.dataset.csv_train = "train.csv";
  csv.dataset.csv_test = "test.csv";
  CHECK_NOTHROW(validate(csv));
}

TEST_CASE("identity ignores where and how wide a sweep runs") {
  ExperimentConfig a;
  ExperimentConfig b;
  b.output_dir = "/somewhere/else";
  b.parallelism = 16;
  CHECK(config_identity(a) == config_identity(b));
  CHECK(config_to_json(a) != config_to_json(b));

  ExperimentConfig c;
  c.members = 5;
  CHECK(config_identity(a) != config_identity(c));
}

TEST_CASE("the sweep hash matches the published FNV-1a test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(fnv1a64(config_identity(ExperimentConfig{})) ==
        fnv1a64(config_identity(ExperimentConfig{})));
}

TEST_CASE("configs load from disk and missing files are data errors") {
  TempDir dir;
  const std::filesystem::path p = dir.path / "config.json";
  {
    std::ofstream out(p);
    out << R"({"members": 2, "epochs": 3})";
  }
  const ExperimentConfig config = load_config(p.string());
  CHECK(config.members == 2);
  CHECK(config.epochs == 3);
  CHECK_THROWS_AS(load_config((dir.path / "absent.json").string()), DataError);
}
