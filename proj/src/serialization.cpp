#include "myoadapt/serialization.hpp"

#include "myoadapt/error.hpp"

namespace myoadapt {

namespace {

void expect_format(const Json& j, const char* format) {
  if (!j.contains("format") || j.at("format") != format)
    throw DataError(std::string("expected a ") + format + " document");
}

Json source_ids(const SourceSet& sources) {
  Json ids = Json::array();
  for (const auto& s : sources) ids.push_back(s->id);
  return ids;
}

SourceSet resolve_sources(const Json& ids, const SourceSet& available) {
  SourceSet out;
  for (const auto& id : ids) {
    const auto name = id.get<std::string>();
    auto it = std::find_if(available.begin(), available.end(),
                           [&](const auto& s) { return s && s->id == name; });
    if (it == available.end()) throw DataError("unknown source model '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("matrix data length does not match its shape");
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[at++].get<double>();
  return m;
}

Json kernel_to_json(const KernelSpec& k) {
  return {{"kind", to_string(k.kind)}, {"gamma", k.gamma}};
}

KernelSpec kernel_from_json(const Json& j) {
  KernelSpec k{kernel_kind_from_string(j.at("kind").get<std::string>()), j.at("gamma").get<double>()};
  k.validate();
  return k;
}

Json model_to_json(const MulticlassModel& m) {
  return {{"format", "myoadapt.multiclass.v1"},
          {"id", m.id},
          {"kernel", kernel_to_json(m.kernel)},
          {"C", m.C},
          {"class_count", m.class_count},
          {"train_X", matrix_to_json(m.train_X)},
          {"alphas", matrix_to_json(m.alphas)},
          {"biases", matrix_to_json(m.biases)}};
}

MulticlassModel multiclass_from_json(const Json& j) {
  expect_format(j, "myoadapt.multiclass.v1");
  MulticlassModel m;
  m.id = j.at("id").get<std::string>();
  m.kernel = kernel_from_json(j.at("kernel"));
  m.C = j.at("C").get<double>();
  m.class_count = j.at("class_count").get<int>();
  m.train_X = matrix_from_json(j.at("train_X"));
  m.alphas = matrix_from_json(j.at("alphas"));
  m.biases = matrix_from_json(j.at("biases"));
  if (m.alphas.rows() != m.train_X.rows() || m.alphas.cols() != m.class_count ||
      m.biases.size() != m.class_count)
    throw DataError("multiclass model " + m.id + " has inconsistent shapes");
  return m;
}

Json model_to_json(const MultiAdaptModel& m) {
  return {{"format", "myoadapt.multi_adapt.v1"},
          {"kernel", kernel_to_json(m.kernel)},
          {"C", m.C},
          {"class_count", m.class_count},
          {"train_X", matrix_to_json(m.train_X)},
          {"alphas", matrix_to_json(m.alphas)},
          {"biases", matrix_to_json(m.biases)},
          {"beta", matrix_to_json(m.beta.values)},
          {"sources", source_ids(m.sources)}};
}

MultiAdaptModel multi_adapt_from_json(const Json& j, const SourceSet& available) {
  expect_format(j, "myoadapt.multi_adapt.v1");
  MultiAdaptModel m;
  m.kernel = kernel_from_json(j.at("kernel"));
  m.C = j.at("C").get<double>();
  m.class_count = j.at("class_count").get<int>();
  m.train_X = matrix_from_json(j.at("train_X"));
  m.alphas = matrix_from_json(j.at("alphas"));
  m.biases = matrix_from_json(j.at("biases"));
  m.beta.values = matrix_from_json(j.at("beta"));
  m.sources = resolve_sources(j.at("sources"), available);
  return m;
}

Json model_to_json(const MkalModel& m) {
  Json thetas = Json::array();
  for (const auto& t : m.source_theta) thetas.push_back(matrix_to_json(t));
  return {{"format", "myoadapt.mkal.v1"},
          {"config",
           {{"p", m.config.p},
            {"q", m.config.q()},
            {"epochs", m.config.epochs},
            {"eta0", m.config.eta0},
            {"seed", m.config.seed}}},
          {"target_kernel", kernel_to_json(m.target_kernel)},
          {"class_count", m.class_count},
          {"support_X", matrix_to_json(m.support_X)},
          {"support_coef", matrix_to_json(m.support_coef)},
          {"source_theta", std::move(thetas)},
          {"block_factors", matrix_to_json(m.block_factors)},
          {"steps", m.steps},
          {"updates", m.updates},
          {"sources", source_ids(m.sources)}};
}

MkalModel mkal_from_json(const Json& j, const SourceSet& available) {
  expect_format(j, "myoadapt.mkal.v1");
  MkalModel m;
  const auto& cfg = j.at("config");
  m.config.p = cfg.at("p").get<double>();
  m.config.epochs = cfg.at("epochs").get<int>();
  m.config.eta0 = cfg.at("eta0").get<double>();
  m.config.seed = cfg.at("seed").get<std::uint64_t>();
  m.target_kernel = kernel_from_json(j.at("target_kernel"));
  m.class_count = j.at("class_count").get<int>();
  m.support_X = matrix_from_json(j.at("support_X"));
  m.support_coef = matrix_from_json(j.at("support_coef"));
  for (const auto& t : j.at("source_theta")) m.source_theta.push_back(matrix_from_json(t));
  m.block_factors = matrix_from_json(j.at("block_factors"));
  m.steps = j.at("steps").get<long>();
  m.updates = j.at("updates").get<long>();
  m.sources = resolve_sources(j.at("sources"), available);
  if (m.source_theta.size() != m.sources.size() ||
      m.block_factors.size() != static_cast<Eigen::Index>(m.sources.size()) + 1)
    throw DataError("mkal model block count does not match its sources");
  return m;
}

Json model_to_json(const Hl2lModel& m) {
  return {{"format", "myoadapt.hl2l.v1"},
          {"fraction", m.fraction},
          {"first_layer", model_to_json(m.first_layer)},
          {"second_layer", model_to_json(m.second_layer)},
          {"sources", source_ids(m.sources)}};
}

Hl2lModel hl2l_from_json(const Json& j, const SourceSet& available) {
  expect_format(j, "myoadapt.hl2l.v1");
  Hl2lModel m;
  m.fraction = j.at("fraction").get<double>();
  m.first_layer = multiclass_from_json(j.at("first_layer"));
  m.second_layer = multiclass_from_json(j.at("second_layer"));
  m.sources = resolve_sources(j.at("sources"), available);
  return m;
}

}  // namespace myoadapt
