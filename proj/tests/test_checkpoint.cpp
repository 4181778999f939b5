#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "jtens/checkpoint.hpp"

using namespace jtens;

namespace {

Checkpoint sample_checkpoint(std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.seed = seed;
  ckpt.mlp = init_mlp(mlp_spec(3, {5}, 2), seed);
  // Give the optimizer state non-trivial content.
  MomentumState state;
  Gradients g = zero_gradients(ckpt.mlp);
  g[0].weights.setConstant(0.125);
  g[1].biases.setConstant(-0.25);
  SgdConfig cfg;
  cfg.momentum = 0.9;
  sgd_step(ckpt.mlp, g, state, cfg);
  ckpt.momentum = state;
  return ckpt;
}

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b) {
  if (a.seed != b.seed || a.mlp.layers.size() != b.mlp.layers.size()) return false;
  for (std::size_t l = 0; l < a.mlp.layers.size(); ++l) {
    if ((a.mlp.layers[l].weights.array() != b.mlp.layers[l].weights.array()).any()) return false;
    if ((a.mlp.layers[l].biases.array() != b.mlp.layers[l].biases.array()).any()) return false;
    if (a.mlp.spec[l].activation != b.mlp.spec[l].activation) return false;
  }
  if (a.momentum.velocity.size() != b.momentum.velocity.size()) return false;
  for (std::size_t l = 0; l < a.momentum.velocity.size(); ++l) {
    if ((a.momentum.velocity[l].weights.array() != b.momentum.velocity[l].weights.array()).any())
      return false;
    if ((a.momentum.velocity[l].biases.array() != b.momentum.velocity[l].biases.array()).any())
      return false;
  }
  return true;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("jtens_ckpt_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("a JSON round trip is bit-faithful, including awkward doubles") {
  Checkpoint ckpt = sample_checkpoint(17);
  // Values whose shortest decimal form would lose bits at low precision.
  ckpt.mlp.layers[0].weights(0, 0) = 0.1 + 0.2;          // 0.30000000000000004
  ckpt.mlp.layers[0].weights(0, 1) = 1.0 / 3.0;
  ckpt.mlp.layers[0].weights(0, 2) = -1.2345678901234567e-30;
  ckpt.mlp.layers[1].biases(0) = 5e-324;                 // smallest subnormal
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(ckpt));
  CHECK(bitwise_equal(ckpt, back));
}

TEST_CASE("save and load through a file") {
  TempDir dir;
  const std::string path = (dir.path / "model.json").string();
  const Checkpoint ckpt = sample_checkpoint(23);
  save_checkpoint(ckpt, path);
  CHECK(std::filesystem::exists(path));
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));  // atomic write cleans up
  const Checkpoint back = load_checkpoint(path);
  CHECK(bitwise_equal(ckpt, back));
}

TEST_CASE("ensemble checkpoints carry every member and the family tag") {
  TempDir dir;
  const std::string path = (dir.path / "ensemble.json").string();
  std::vector<Checkpoint> members{sample_checkpoint(1), sample_checkpoint(2),
                                  sample_checkpoint(3)};
  save_ensemble_checkpoint(members, "categorical:2", path);
  std::string tag;
  const auto back = load_ensemble_checkpoint(path, &tag);
  CHECK(tag == "categorical:2");
  REQUIRE(back.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(bitwise_equal(members[j], back[j]));
}

TEST_CASE("loading malformed or misshapen JSON raises DataError") {
  CHECK_THROWS_AS((void)checkpoint_from_json("not json at all"), DataError);
  CHECK_THROWS_AS((void)checkpoint_from_json("{}"), DataError);

  // A valid document whose weight array disagrees with the declared shape.
  const Checkpoint ckpt = sample_checkpoint(99);
  std::string text = checkpoint_to_json(ckpt);
  const auto pos = text.find("\"input_dim\":3");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 13, "\"input_dim\":4");
  CHECK_THROWS_AS((void)checkpoint_from_json(text), DataError);
}

TEST_CASE("loading a missing file raises DataError") {
  CHECK_THROWS_AS((void)load_checkpoint("/nonexistent/path/model.json"), DataError);
}

TEST_CASE("a reloaded network computes identical outputs") {
  const Checkpoint ckpt = sample_checkpoint(7);
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(ckpt));
  Eigen::MatrixXd x(2, 3);
  x << 0.3, -1.2, 0.8, 2.0, 0.0, -0.5;
  const Eigen::MatrixXd a = forward(ckpt.mlp, x);
  const Eigen::MatrixXd b = forward(back.mlp, x);
  CHECK((a.array() == b.array()).all());
}
