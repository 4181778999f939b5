#include "jtens/checkpoint.hpp"

#include <cstdio>
#include <filesystem>

#include "json.hpp"

#include "jtens/fileio.hpp"

namespace jtens {

namespace {

// %.17g round-trips any double exactly through decimal text.
void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void append_flat(std::string& out, const Eigen::MatrixXd& m) {
  out += '[';
  bool first = true;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!first) out += ',';
      append_double(out, m(r, c));
      first = false;
    }
  out += ']';
}

void append_layer(std::string& out, const LayerSpec& spec, const Layer& layer) {
  out += "{\"input_dim\":" + std::to_string(spec.input_dim);
  out += ",\"output_dim\":" + std::to_string(spec.output_dim);
  out += ",\"activation\":\"";
  out += spec.activation == Activation::ReLU ? "relu" : "identity";
  out += "\",\"weights\":";
  append_flat(out, layer.weights);
  out += ",\"biases\":";
  append_flat(out, layer.biases);
  out += '}';
}

void append_member(std::string& out, const Checkpoint& ckpt) {
  out += "{\"seed\":" + std::to_string(ckpt.seed) + ",\"layers\":[";
  for (std::size_t l = 0; l < ckpt.mlp.layers.size(); ++l) {
    if (l) out += ',';
    append_layer(out, ckpt.mlp.spec[l], ckpt.mlp.layers[l]);
  }
  out += "],\"momentum\":[";
  for (std::size_t l = 0; l < ckpt.momentum.velocity.size(); ++l) {
    if (l) out += ',';
    out += "{\"weights\":";
    append_flat(out, ckpt.momentum.velocity[l].weights);
    out += ",\"biases\":";
    append_flat(out, ckpt.momentum.velocity[l].biases);
    out += '}';
  }
  out += "]}";
}

Eigen::MatrixXd matrix_from_flat(const nlohmann::json& arr, Eigen::Index rows,
                                 Eigen::Index cols) {
  if (static_cast<Eigen::Index>(arr.size()) != rows * cols)
    throw DataError("checkpoint: flattened array length does not match layer shape");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr[i++].get<double>();
  return m;
}

Checkpoint member_from_json(const nlohmann::json& j) {
  Checkpoint ckpt;
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& jl : j.at("layers")) {
    LayerSpec spec;
    spec.input_dim = jl.at("input_dim").get<Eigen::Index>();
    spec.output_dim = jl.at("output_dim").get<Eigen::Index>();
    const std::string act = jl.at("activation").get<std::string>();
    if (act == "relu")
      spec.activation = Activation::ReLU;
    else if (act == "identity")
      spec.activation = Activation::Identity;
    else
      throw DataError("checkpoint: unknown activation '" + act + "'");
    Layer layer;
    layer.weights = matrix_from_flat(jl.at("weights"), spec.output_dim, spec.input_dim);
    layer.biases = matrix_from_flat(jl.at("biases"), spec.output_dim, 1);
    ckpt.mlp.spec.push_back(spec);
    ckpt.mlp.layers.push_back(std::move(layer));
  }
  if (j.contains("momentum")) {
    std::size_t l = 0;
    for (const auto& jv : j.at("momentum")) {
      if (l >= ckpt.mlp.layers.size()) throw DataError("checkpoint: extra momentum entries");
      Layer v;
      v.weights = matrix_from_flat(jv.at("weights"), ckpt.mlp.spec[l].output_dim,
                                   ckpt.mlp.spec[l].input_dim);
      v.biases = matrix_from_flat(jv.at("biases"), ckpt.mlp.spec[l].output_dim, 1);
      ckpt.momentum.velocity.push_back(std::move(v));
      ++l;
    }
  }
  return ckpt;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  std::string out;
  append_member(out, ckpt);
  out += '\n';
  return out;
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    return member_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_text_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_text_file(path));
}

std::string ensemble_checkpoint_to_json(const std::vector<Checkpoint>& members,
                                        const std::string& family_tag) {
  std::string out = "{\"family\":\"" + family_tag + "\",\"members\":[";
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (j) out += ',';
    append_member(out, members[j]);
  }
  out += "]}\n";
  return out;
}

std::vector<Checkpoint> ensemble_checkpoint_from_json(const std::string& text,
                                                      std::string* family_tag) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (family_tag) *family_tag = j.at("family").get<std::string>();
    std::vector<Checkpoint> members;
    for (const auto& jm : j.at("members")) members.push_back(member_from_json(jm));
    return members;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
}

void save_ensemble_checkpoint(const std::vector<Checkpoint>& members,
                              const std::string& family_tag, const std::string& path) {
  write_text_atomic(path, ensemble_checkpoint_to_json(members, family_tag));
}

std::vector<Checkpoint> load_ensemble_checkpoint(const std::string& path,
                                                 std::string* family_tag) {
  return ensemble_checkpoint_from_json(read_text_file(path), family_tag);
}

std::string family_tag(const DistributionFamily& family) {
  if (family.kind == FamilyKind::GaussianUnitVariance) return "gaussian";
  return "categorical:" + std::to_string(family.num_classes);
}

DistributionFamily family_from_tag(const std::string& tag) {
  if (tag == "gaussian") return DistributionFamily::gaussian_unit_variance();
  const std::string prefix = "categorical:";
  if (tag.rfind(prefix, 0) == 0) {
    try {
      return DistributionFamily::categorical(std::stoll(tag.substr(prefix.size())));
    } catch (const std::exception&) {
      // fall through to the shared diagnostic
    }
  }
  throw DataError("checkpoint: unrecognized family tag '" + tag + "'");
}

}  // namespace jtens
