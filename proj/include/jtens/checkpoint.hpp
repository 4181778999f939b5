#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jtens/expfam.hpp"
#include "jtens/net.hpp"

// Checkpoints are single JSON documents: layer specs, flattened row-major
// weight arrays, biases, the init seed, and optimizer state. Floats are
// written with 17 significant digits so a reload is bit-faithful.

namespace jtens {

struct Checkpoint {
  Mlp mlp;
  MomentumState momentum;
  std::uint64_t seed = 0;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Ensemble checkpoint: one member entry per network plus the family tag.
std::string ensemble_checkpoint_to_json(const std::vector<Checkpoint>& members,
                                        const std::string& family_tag);
std::vector<Checkpoint> ensemble_checkpoint_from_json(const std::string& text,
                                                      std::string* family_tag);
void save_ensemble_checkpoint(const std::vector<Checkpoint>& members,
                              const std::string& family_tag, const std::string& path);
std::vector<Checkpoint> load_ensemble_checkpoint(const std::string& path,
                                                 std::string* family_tag);

// Tag format: "categorical:<K>" or "gaussian".
std::string family_tag(const DistributionFamily& family);
DistributionFamily family_from_tag(const std::string& tag);

}  // namespace jtens
