#include "gpnd/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "gpnd/errors.hpp"

namespace gpnd {

namespace {

using nlohmann::json;

json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from(const json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].get<double>();
  return v;
}

Matrix matrix_from(const json& a) {
  const Index rows = static_cast<Index>(a.size());
  const Index cols = rows > 0 ? static_cast<Index>(a[0].size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    }
  }
  return m;
}

json kernel_to_json(const KernelParams& kp) {
  return json{{"log_lengthscale", kp.log_lengthscale},
              {"log_signal_var", kp.log_signal_var},
              {"log_noise_var", kp.log_noise_var},
              {"mean_const", kp.mean_const}};
}

KernelParams kernel_from_json(const json& j) {
  KernelParams kp;
  kp.log_lengthscale = j.at("log_lengthscale").get<double>();
  kp.log_signal_var = j.at("log_signal_var").get<double>();
  kp.log_noise_var = j.at("log_noise_var").get<double>();
  kp.mean_const = j.at("mean_const").get<double>();
  return kp;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "gpnd-model";
  j["version"] = kModelFormatVersion;
  j["backend"] = model.backend_id();
  j["kernel"] = kernel_to_json(model.kernel());

  const Dataset& train = model.train_data();
  if (train.standardization) {
    const auto& st = *train.standardization;
    j["standardization"] = json{{"x_mean", to_json(st.x_mean)},
                                {"x_std", to_json(st.x_std)},
                                {"y_mean", st.y_mean},
                                {"y_std", st.y_std}};
  } else {
    j["standardization"] = nullptr;
  }

  if (std::string(model.backend_id()) == "exact") {
    j["train"] = json{{"X", to_json(train.X)},
                      {"y", to_json(train.y)},
                      {"feature_names", train.feature_names}};
  } else if (const auto* sm = dynamic_cast<const SvgpModel*>(&model)) {
    j["variational"] = json{{"Z", to_json(sm->variational().Z)},
                            {"m", to_json(sm->variational().m)},
                            {"L", to_json(sm->variational().L)}};
    j["train_inducing"] = sm->train_inducing();
  } else {
    throw InvalidInputError("save_model: unsupported backend");
  }

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IngestionError("save_model: cannot write " + tmp.string());
    out << j.dump(2) << "\n";
    if (!out.good()) throw IngestionError("save_model: write failed " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("load_model: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IngestionError("load_model: invalid JSON in " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "gpnd-model") {
    throw IngestionError("load_model: not a model file: " + path.string());
  }
  if (j.value("version", 0) != kModelFormatVersion) {
    throw IngestionError("load_model: unsupported model version in " + path.string());
  }

  const KernelParams kp = kernel_from_json(j.at("kernel"));

  std::optional<Standardization> st;
  if (!j.at("standardization").is_null()) {
    const json& s = j.at("standardization");
    Standardization v;
    v.x_mean = vector_from(s.at("x_mean"));
    v.x_std = vector_from(s.at("x_std"));
    v.y_mean = s.at("y_mean").get<double>();
    v.y_std = s.at("y_std").get<double>();
    st = std::move(v);
  }

  const std::string backend = j.at("backend").get<std::string>();
  if (backend == "exact") {
    Dataset train;
    train.X = matrix_from(j.at("train").at("X"));
    train.y = vector_from(j.at("train").at("y"));
    train.feature_names = j.at("train").at("feature_names").get<std::vector<std::string>>();
    train.standardization = st;
    return std::make_unique<ExactGpModel>(kp, std::move(train));
  }
  if (backend == "svgp") {
    VariationalParams var;
    var.Z = matrix_from(j.at("variational").at("Z"));
    var.m = vector_from(j.at("variational").at("m"));
    var.L = matrix_from(j.at("variational").at("L"));
    Dataset empty;
    empty.X.resize(0, var.Z.cols());
    empty.y.resize(0);
    empty.standardization = st;
    return std::make_unique<SvgpModel>(kp, std::move(var), std::move(empty),
                                       j.value("train_inducing", true));
  }
  throw IngestionError("load_model: unknown backend: " + backend);
}

}  // namespace gpnd
