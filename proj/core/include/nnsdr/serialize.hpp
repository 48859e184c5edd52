#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "nnsdr/baselines.hpp"
#include "nnsdr/mlp.hpp"
#include "nnsdr/nn_sdr.hpp"
#include "nnsdr/simgen.hpp"

namespace nnsdr::io {

using Json = nlohmann::json;

/// Matrices are stored as arrays of rows.
Json matrix_to_json(const Matrix &m);
Matrix matrix_from_json(const Json &j);
Json vector_to_json(const Vector &v);
Vector vector_from_json(const Json &j);

/// {"layers": [{"weights", "bias", "activation", "dropout"}, ...]}
Json mlp_to_json(const mlp::MlpParams &params);
mlp::MlpParams mlp_from_json(const Json &j);

Json train_config_to_json(const mlp::TrainConfig &c);
/// Keys absent from j keep their value in base.
mlp::TrainConfig train_config_from_json(const Json &j, mlp::TrainConfig base = {});
Json nn_config_to_json(const nn::NnSdrConfig &c);
nn::NnSdrConfig nn_config_from_json(const Json &j, nn::NnSdrConfig base = {});
Json kernel_config_to_json(const baselines::KernelConfig &c);
baselines::KernelConfig kernel_config_from_json(const Json &j, baselines::KernelConfig base = {});

std::string to_string(baselines::Preprocess p);
baselines::Preprocess preprocess_from_string(const std::string &name);

/// {"method": "nn", "B", "net", "config", "reduction", "standardizer",
/// "stage1": {"B", "eigenvalues", "loss"}, "loss"}. The stage-1 network
/// itself is not stored.
Json nn_model_to_json(const nn::NnSdrModel &model, const nn::NnSdrConfig &config);
nn::NnSdrModel nn_model_from_json(const Json &j);

/// Reduced-space smoother used for baseline predictions.
Json smoother_to_json(const baselines::ReducedSmoother &s);
baselines::ReducedSmoother smoother_from_json(const Json &j);

/// Ground truth written next to a simulated dataset.
struct Truth {
  sim::ModelId model = sim::ModelId::M6;
  Index k = 1;
  std::uint64_t seed = 0;
  StiefelMatrix b_true = StiefelMatrix::canonical(1, 1);
};

Json truth_to_json(const Truth &t);
Truth truth_from_json(const Json &j);

/// Sidecar path for a dataset file: "dir/name.csv" -> "dir/name.truth.json".
std::string sidecar_path(const std::string &dataset_path);

Json read_json_file(const std::string &path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::string &path, const Json &j);

} // namespace nnsdr::io
