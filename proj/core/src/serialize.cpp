#include "nnsdr/serialize.hpp"

#include <filesystem>
#include <fstream>

#include "nnsdr/errors.hpp"

namespace nnsdr::io {

namespace {

template <typename T> T get_or(const Json &j, const char *key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

const Json &require(const Json &j, const char *key) {
  auto it = j.find(key);
  if (it == j.end())
    throw ContractViolation(std::string("json: missing key \"") + key + "\"");
  return *it;
}

} // namespace

Json matrix_to_json(const Matrix &m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json &j) {
  if (!j.is_array())
    throw ContractViolation("json: matrix must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Json &row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ContractViolation("json: ragged matrix at row " + std::to_string(i));
    for (Index c = 0; c < cols; ++c)
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json vector_to_json(const Vector &v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i)
    a.push_back(v(i));
  return a;
}

Vector vector_from_json(const Json &j) {
  if (!j.is_array())
    throw ContractViolation("json: vector must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

Json mlp_to_json(const mlp::MlpParams &params) {
  Json layers = Json::array();
  for (const auto &layer : params.layers) {
    layers.push_back({{"weights", matrix_to_json(layer.weights)},
                      {"bias", vector_to_json(layer.bias)},
                      {"activation", mlp::to_string(layer.spec.activation)},
                      {"dropout", layer.spec.dropout_rate}});
  }
  return Json{{"layers", std::move(layers)}};
}

mlp::MlpParams mlp_from_json(const Json &j) {
  mlp::MlpParams params;
  for (const Json &lj : require(j, "layers")) {
    mlp::DenseLayer layer;
    layer.weights = matrix_from_json(require(lj, "weights"));
    layer.bias = vector_from_json(get_or<Json>(lj, "bias", Json::array()));
    layer.spec.in_dim = layer.weights.cols();
    layer.spec.out_dim = layer.weights.rows();
    layer.spec.activation = mlp::activation_from_string(require(lj, "activation").get<std::string>());
    layer.spec.dropout_rate = get_or(lj, "dropout", 0.0);
    layer.spec.has_bias = layer.bias.size() > 0;
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

Json train_config_to_json(const mlp::TrainConfig &c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"rmsprop_decay", c.rmsprop_decay},
          {"rmsprop_epsilon", c.rmsprop_epsilon},
          {"rng_seed", c.rng_seed}};
}

mlp::TrainConfig train_config_from_json(const Json &j, mlp::TrainConfig c) {
  c.epochs = get_or(j, "epochs", c.epochs);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
  c.rmsprop_decay = get_or(j, "rmsprop_decay", c.rmsprop_decay);
  c.rmsprop_epsilon = get_or(j, "rmsprop_epsilon", c.rmsprop_epsilon);
  c.rng_seed = get_or(j, "rng_seed", c.rng_seed);
  return c;
}

Json nn_config_to_json(const nn::NnSdrConfig &c) {
  return {{"k", c.k},
          {"hidden", c.hidden},
          {"dropout", c.dropout_rate},
          {"stage1", train_config_to_json(c.stage1)},
          {"stage2", train_config_to_json(c.stage2)},
          {"rng_seed", c.rng_seed},
          {"standardize", c.standardize}};
}

nn::NnSdrConfig nn_config_from_json(const Json &j, nn::NnSdrConfig c) {
  c.k = get_or(j, "k", c.k);
  c.hidden = get_or(j, "hidden", c.hidden);
  c.dropout_rate = get_or(j, "dropout", c.dropout_rate);
  if (auto it = j.find("stage1"); it != j.end())
    c.stage1 = train_config_from_json(*it, c.stage1);
  if (auto it = j.find("stage2"); it != j.end())
    c.stage2 = train_config_from_json(*it, c.stage2);
  c.rng_seed = get_or(j, "rng_seed", c.rng_seed);
  c.standardize = get_or(j, "standardize", c.standardize);
  return c;
}

std::string to_string(baselines::Preprocess p) {
  switch (p) {
  case baselines::Preprocess::none:
    return "none";
  case baselines::Preprocess::scale:
    return "scale";
  case baselines::Preprocess::whiten:
    return "whiten";
  }
  return "whiten";
}

baselines::Preprocess preprocess_from_string(const std::string &name) {
  if (name == "none")
    return baselines::Preprocess::none;
  if (name == "scale")
    return baselines::Preprocess::scale;
  if (name == "whiten")
    return baselines::Preprocess::whiten;
  throw ContractViolation("unknown preprocessing \"" + name + "\" (expected none, scale, whiten)");
}

Json kernel_config_to_json(const baselines::KernelConfig &c) {
  Json j{{"bandwidth_multiplier", c.bandwidth_multiplier},
         {"ridge", c.ridge},
         {"preprocess", to_string(c.preprocess)},
         {"opg_refinements", c.opg_refinements},
         {"opg_taper", c.opg_taper}};
  j["exponent_dim"] = c.exponent_dim ? Json(*c.exponent_dim) : Json(nullptr);
  return j;
}

baselines::KernelConfig kernel_config_from_json(const Json &j, baselines::KernelConfig c) {
  c.bandwidth_multiplier = get_or(j, "bandwidth_multiplier", c.bandwidth_multiplier);
  c.ridge = get_or(j, "ridge", c.ridge);
  c.opg_refinements = get_or(j, "opg_refinements", c.opg_refinements);
  c.opg_taper = get_or(j, "opg_taper", c.opg_taper);
  if (auto it = j.find("preprocess"); it != j.end())
    c.preprocess = preprocess_from_string(it->get<std::string>());
  if (auto it = j.find("exponent_dim"); it != j.end()) {
    if (it->is_null())
      c.exponent_dim.reset();
    else
      c.exponent_dim = it->get<Index>();
  }
  return c;
}

Json nn_model_to_json(const nn::NnSdrModel &model, const nn::NnSdrConfig &config) {
  return {{"method", "nn"},
          {"B", matrix_to_json(model.b_hat.value())},
          {"net", mlp_to_json(model.theta2)},
          {"config", nn_config_to_json(config)},
          {"reduction", matrix_to_json(model.reduction.value())},
          {"standardizer",
           {{"mean", vector_to_json(model.standardizer.mean)},
            {"scale", vector_to_json(model.standardizer.scale)}}},
          {"stage1",
           {{"B", matrix_to_json(model.stage1.b_hat.value())},
            {"eigenvalues", vector_to_json(model.stage1.eigenvalues)},
            {"loss", model.stage1.loss_history}}},
          {"loss", model.training_history}};
}

nn::NnSdrModel nn_model_from_json(const Json &j) {
  StiefelMatrix b_hat(matrix_from_json(require(j, "B")));
  StiefelMatrix reduction = j.contains("reduction")
                                ? StiefelMatrix(matrix_from_json(j["reduction"]))
                                : b_hat;
  Standardizer standardizer = Standardizer::identity(b_hat.rows());
  if (auto it = j.find("standardizer"); it != j.end()) {
    standardizer.mean = vector_from_json(require(*it, "mean"));
    standardizer.scale = vector_from_json(require(*it, "scale"));
  }
  nn::NnOpgFit stage1{mlp::MlpParams{}, Matrix(), b_hat, Vector(), {}, standardizer};
  if (auto it = j.find("stage1"); it != j.end()) {
    stage1.b_hat = StiefelMatrix(matrix_from_json(require(*it, "B")));
    stage1.eigenvalues = vector_from_json(get_or<Json>(*it, "eigenvalues", Json::array()));
    stage1.loss_history = get_or<std::vector<double>>(*it, "loss", {});
  }
  mlp::MlpParams net = mlp_from_json(require(j, "net"));
  if (net.in_dim() != reduction.cols())
    throw ContractViolation("nn model: network input width does not match the reduction");
  return nn::NnSdrModel{std::move(b_hat),
                        std::move(net),
                        std::move(stage1),
                        get_or<std::vector<double>>(j, "loss", {}),
                        std::move(standardizer),
                        std::move(reduction)};
}

Json smoother_to_json(const baselines::ReducedSmoother &s) {
  return {{"B", matrix_to_json(s.b_hat.value())},
          {"z", matrix_to_json(s.z)},
          {"y", vector_to_json(s.y)},
          {"z_scale", vector_to_json(s.z_scale)},
          {"h", s.h},
          {"ridge", s.ridge}};
}

baselines::ReducedSmoother smoother_from_json(const Json &j) {
  baselines::ReducedSmoother s{StiefelMatrix(matrix_from_json(require(j, "B"))),
                               matrix_from_json(require(j, "z")),
                               vector_from_json(require(j, "y")),
                               vector_from_json(require(j, "z_scale")),
                               require(j, "h").get<double>(),
                               get_or(j, "ridge", 0.0)};
  if (s.z.rows() != s.y.size() || s.z.cols() != s.b_hat.cols() ||
      s.z_scale.size() != s.b_hat.cols() || !(s.h > 0.0))
    throw ContractViolation("smoother: inconsistent stored support");
  return s;
}

Json truth_to_json(const Truth &t) {
  return {{"model", sim::to_string(t.model)},
          {"k", t.k},
          {"seed", t.seed},
          {"b_true", matrix_to_json(t.b_true.value())}};
}

Truth truth_from_json(const Json &j) {
  Truth t{sim::model_from_string(require(j, "model").get<std::string>()),
          require(j, "k").get<Index>(), get_or<std::uint64_t>(j, "seed", 0),
          StiefelMatrix(matrix_from_json(require(j, "b_true")))};
  if (t.b_true.cols() != t.k)
    throw ContractViolation("truth: b_true has " + std::to_string(t.b_true.cols()) +
                            " columns but k = " + std::to_string(t.k));
  return t;
}

std::string sidecar_path(const std::string &dataset_path) {
  std::filesystem::path p(dataset_path);
  p.replace_extension(".truth.json");
  return p.string();
}

Json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_json_file(const std::string &path, const Json &j) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

} // namespace nnsdr::io
