#pragma once

// Trained model artifact: one of OLS / forest / SVR plus the metadata
// needed to reproduce it, serialized as versioned JSON.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/forest.hpp"
#include "rentyield/regression.hpp"
#include "rentyield/svr.hpp"
#include "rentyield/text.hpp"

namespace rentyield {

enum class ModelKind { Ols, Forest, Svr };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Ols: return "ols";
    case ModelKind::Forest: return "forest";
    case ModelKind::Svr: return "svr";
  }
  return "";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  const auto lower = text::to_lower(s);
  if (lower == "ols") return ModelKind::Ols;
  if (lower == "forest" || lower == "rf") return ModelKind::Forest;
  if (lower == "svr") return ModelKind::Svr;
  return std::nullopt;
}

inline constexpr int kModelFormatVersion = 1;

struct TrainedModel {
  ModelKind kind = ModelKind::Ols;
  ModelSpec spec = ModelSpec::Spec1;
  std::vector<std::string> feature_columns;  // without intercept
  std::uint64_t seed = 0;
  std::string dataset_hash;
  Json hyperparameters = Json::object();
  Json diagnostics = Json::object();
  std::variant<regression::OlsFit, forest::Forest, svr::SvrModel> payload;
};

// Predictions from a feature block laid out as spec_features(model.spec).
inline Eigen::VectorXd predict(const TrainedModel& m, const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.cols()) != m.feature_columns.size())
    fail(Errc::SpecMismatch, "model expects " + std::to_string(m.feature_columns.size()) + " features, got " +
                                 std::to_string(features.cols()));
  return std::visit(
      [&](const auto& p) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, regression::OlsFit>) {
          Eigen::MatrixXd X(features.rows(), features.cols() + 1);
          X.col(0).setOnes();
          X.rightCols(features.cols()) = features;
          return regression::ols_predict(p, X);
        } else if constexpr (std::is_same_v<T, forest::Forest>) {
          return forest::forest_predict(p, features);
        } else {
          return svr::svr_predict(p, features);
        }
      },
      m.payload);
}

namespace detail {

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Json ols_to_json(const regression::OlsFit& f) {
  return Json{{"columns", f.columns},
              {"coefficients", to_vector(f.coefficients)},
              {"standard_errors", to_vector(f.standard_errors)},
              {"t_stats", to_vector(f.t_stats)},
              {"r_squared", f.r_squared},
              {"adj_r_squared", f.adj_r_squared},
              {"n_observations", f.n_observations},
              {"residual_variance", f.residual_variance}};
}

inline regression::OlsFit ols_from_json(const Json& j, ModelSpec spec) {
  regression::OlsFit f;
  f.spec = spec;
  f.columns = j.at("columns").get<std::vector<std::string>>();
  f.coefficients = to_eigen(j.at("coefficients"));
  f.standard_errors = to_eigen(j.at("standard_errors"));
  f.t_stats = to_eigen(j.at("t_stats"));
  f.r_squared = j.at("r_squared").get<double>();
  f.adj_r_squared = j.at("adj_r_squared").get<double>();
  f.n_observations = j.at("n_observations").get<std::size_t>();
  f.residual_variance = j.at("residual_variance").get<double>();
  return f;
}

}  // namespace detail

inline Json to_json(const TrainedModel& m) {
  Json payload = std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, regression::OlsFit>) {
          return detail::ols_to_json(p);
        } else if constexpr (std::is_same_v<T, forest::Forest>) {
          return forest::to_json(p);
        } else {
          return svr::to_json(p);
        }
      },
      m.payload);
  return Json{{"format", "rentyield.model"},
              {"version", kModelFormatVersion},
              {"kind", to_string(m.kind)},
              {"spec", spec_number(m.spec)},
              {"feature_columns", m.feature_columns},
              {"seed", m.seed},
              {"dataset_hash", m.dataset_hash},
              {"hyperparameters", m.hyperparameters},
              {"diagnostics", m.diagnostics},
              {"payload", std::move(payload)}};
}

inline TrainedModel model_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "rentyield.model")
      fail(Errc::SchemaViolation, "not a rentyield model artifact");
    if (j.at("version").get<int>() != kModelFormatVersion)
      fail(Errc::SchemaViolation, "unsupported model format version " + j.at("version").dump());
    TrainedModel m;
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind) fail(Errc::SchemaViolation, "unknown model kind");
    m.kind = *kind;
    m.spec = spec_from_number(j.at("spec").get<int>());
    m.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    m.hyperparameters = j.at("hyperparameters");
    m.diagnostics = j.at("diagnostics");
    const auto& p = j.at("payload");
    switch (m.kind) {
      case ModelKind::Ols: m.payload = detail::ols_from_json(p, m.spec); break;
      case ModelKind::Forest: m.payload = forest::forest_from_json(p); break;
      case ModelKind::Svr: m.payload = svr::svr_from_json(p); break;
    }
    if (m.feature_columns != spec_features(m.spec)) fail(Errc::SchemaViolation, "feature columns do not match spec");
    return m;
  } catch (const Json::exception& e) {
    fail(Errc::SchemaViolation, std::string("malformed model artifact: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << to_json(m).dump() << '\n';
  if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail(Errc::SchemaViolation, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace rentyield
