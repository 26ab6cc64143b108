#pragma once

// Epsilon-insensitive support vector regression. The dual over the 2n
// variables (alpha, alpha*) is solved by sequential pairwise updates on
// the maximal-violating pair, with kernel rows held in an LRU cache.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <span>
#include <string>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"

namespace rentyield::svr {

// gamma falls back to 1/dim when the spec leaves it unset.
inline double kernel_eval(const KernelSpec& k, std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    fail(Errc::DimensionMismatch, "kernel arguments have dimensions " + std::to_string(u.size()) + " and " +
                                      std::to_string(v.size()));
  const double gamma = k.gamma.value_or(u.empty() ? 1.0 : 1.0 / static_cast<double>(u.size()));
  switch (k.type) {
    case KernelType::Linear: {
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
      return dot;
    }
    case KernelType::Polynomial: {
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
      return std::pow(gamma * dot + k.coef0, k.degree);
    }
    case KernelType::Radial: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) d2 += (u[i] - v[i]) * (u[i] - v[i]);
      return std::exp(-gamma * d2);
    }
    case KernelType::Sigmoid: {
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
      return std::tanh(gamma * dot + k.coef0);
    }
  }
  return 0.0;
}

inline double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return kernel_eval(k, std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                     std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

struct SvrModel {
  SvrConfig config;  // kernel gamma and epsilon resolved
  Eigen::MatrixXd support_vectors;  // one row per support vector, in model (possibly standardized) space
  Eigen::VectorXd dual_coef;        // alpha - alpha*, per support vector
  double bias = 0.0;
  std::size_t n_support = 0;
  std::size_t n_train = 0;
  long iterations = 0;
  bool converged = false;
  double kkt_gap = 0.0;
  double dual_objective = 0.0;  // maximization form, model space
  // Affine maps applied when config.standardize is set.
  Eigen::RowVectorXd x_mean;
  Eigen::RowVectorXd x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;

  std::size_t n_features() const { return static_cast<std::size_t>(x_mean.size()); }
};

// Optional per-fit diagnostics for invariant checks.
struct SvrTrace {
  std::vector<double> objective;  // dual objective (maximization form) after each update
  Eigen::VectorXd alpha;          // final alpha, length n
  Eigen::VectorXd alpha_star;     // final alpha*, length n
};

namespace detail {

class KernelRowCache {
 public:
  KernelRowCache(const Eigen::MatrixXd& X, const KernelSpec& k, std::size_t cache_mb)
      : kernel_(k), n_(static_cast<std::size_t>(X.rows())), p_(static_cast<std::size_t>(X.cols())), slot_of_(n_, -1) {
    data_.resize(n_ * p_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t c = 0; c < p_; ++c) data_[i * p_ + c] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    const std::size_t bytes_per_row = std::max<std::size_t>(1, n_ * sizeof(double));
    capacity_ = std::max<std::size_t>(2, cache_mb * 1024 * 1024 / bytes_per_row);
    capacity_ = std::min(capacity_, n_);
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = eval(i, i);
  }

  double diag(std::size_t i) const { return diag_[i]; }

  const std::vector<double>& row(std::size_t i) {
    if (slot_of_[i] >= 0) {
      lru_.splice(lru_.begin(), lru_, where_[static_cast<std::size_t>(slot_of_[i])]);
      return rows_[static_cast<std::size_t>(slot_of_[i])];
    }
    std::size_t slot;
    if (rows_.size() < capacity_) {
      slot = rows_.size();
      rows_.emplace_back(n_);
      owner_.push_back(i);
      lru_.push_front(slot);
      where_.push_back(lru_.begin());
    } else {
      slot = lru_.back();
      slot_of_[owner_[slot]] = -1;
      owner_[slot] = i;
      lru_.splice(lru_.begin(), lru_, where_[slot]);
    }
    slot_of_[i] = static_cast<long>(slot);
    auto& r = rows_[slot];
    for (std::size_t j = 0; j < n_; ++j) r[j] = eval(i, j);
    return r;
  }

 private:
  double eval(std::size_t i, std::size_t j) const {
    return kernel_eval(kernel_, std::span<const double>(data_.data() + i * p_, p_),
                       std::span<const double>(data_.data() + j * p_, p_));
  }

  KernelSpec kernel_;
  std::size_t n_;
  std::size_t p_;
  std::vector<double> data_;
  std::size_t capacity_;
  std::vector<double> diag_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::size_t> owner_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> where_;
  std::vector<long> slot_of_;
};

inline double population_std(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().mean());
}

}  // namespace detail

// Solves min 1/2 b'Qb + p'b s.t. y'b = 0, 0 <= b <= C over b = (alpha, alpha*),
// where Q_st = y'_s y'_t K(x_s, x_t), p = (eps - y, eps + y), y' = (+1, -1).
// Stops when the maximal KKT violation m - M drops below the tolerance.
inline SvrModel svr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, SvrConfig cfg,
                        SvrTrace* trace = nullptr) {
  cfg.validate();
  const auto l = static_cast<std::size_t>(X.rows());
  const auto p = X.cols();
  if (y.size() != X.rows()) fail(Errc::LengthMismatch, "X and y row counts differ");
  if (l == 0) fail(Errc::TooFewRows, "SVR needs at least one row");

  SvrModel model;
  model.n_train = l;
  if (!cfg.kernel.gamma) cfg.kernel.gamma = p > 0 ? 1.0 / static_cast<double>(p) : 1.0;
  if (!cfg.epsilon) cfg.epsilon = 0.1 * detail::population_std(y);

  Eigen::MatrixXd Z = X;
  Eigen::VectorXd t = y;
  model.x_mean = Eigen::RowVectorXd::Zero(p);
  model.x_scale = Eigen::RowVectorXd::Ones(p);
  double eps = *cfg.epsilon;
  if (cfg.standardize) {
    model.x_mean = X.colwise().mean();
    for (Eigen::Index c = 0; c < p; ++c) {
      const double sd = detail::population_std(X.col(c));
      model.x_scale(c) = sd > 0.0 ? sd : 1.0;
    }
    Z = (X.rowwise() - model.x_mean).array().rowwise() / model.x_scale.array();
    model.y_mean = y.mean();
    const double sd = detail::population_std(y);
    model.y_scale = sd > 0.0 ? sd : 1.0;
    t = (y.array() - model.y_mean) / model.y_scale;
    eps /= model.y_scale;
  }
  model.config = cfg;

  const double C = cfg.cost;
  const std::size_t m = 2 * l;
  std::vector<double> beta(m, 0.0), G(m), sign(m);
  for (std::size_t i = 0; i < l; ++i) {
    G[i] = eps - t(static_cast<Eigen::Index>(i));
    G[i + l] = eps + t(static_cast<Eigen::Index>(i));
    sign[i] = 1.0;
    sign[i + l] = -1.0;
  }
  const std::vector<double> linear = G;
  auto objective = [&] {
    // 1/2 b'Qb + p'b = 1/2 b'(G + p)
    double f = 0.0;
    for (std::size_t s = 0; s < m; ++s) f += beta[s] * (G[s] + linear[s]);
    return -0.5 * f;
  };

  detail::KernelRowCache cache(Z, cfg.kernel, cfg.cache_mb);
  auto in_up = [&](std::size_t s) { return sign[s] > 0 ? beta[s] < C : beta[s] > 0.0; };
  auto in_low = [&](std::size_t s) { return sign[s] > 0 ? beta[s] > 0.0 : beta[s] < C; };
  constexpr double tau = 1e-12;

  long iter = 0;
  double gap = 0.0;
  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = m, j = m;
    for (std::size_t s = 0; s < m; ++s) {
      const double v = -sign[s] * G[s];
      if (in_up(s) && v > gmax) {
        gmax = v;
        i = s;
      }
      if (in_low(s) && v < gmin) {
        gmin = v;
        j = s;
      }
    }
    gap = (i == m || j == m) ? 0.0 : gmax - gmin;
    if (gap < cfg.tolerance) {
      model.converged = true;
      break;
    }
    if (iter >= cfg.max_iterations) break;
    ++iter;

    const std::vector<double>& Ki = cache.row(i % l);
    const std::vector<double> Ki_copy = Ki;  // the next row() call may evict it
    const std::vector<double>& Kj = cache.row(j % l);
    const double Kii = cache.diag(i % l);
    const double Kjj = cache.diag(j % l);
    const double Kij = Ki_copy[j % l];
    const double old_i = beta[i];
    const double old_j = beta[j];

    // Q_ij = y'_i y'_j K_ij, so both branches share the curvature K_ii + K_jj - 2 K_ij.
    if (sign[i] != sign[j]) {
      double quad = Kii + Kjj - 2.0 * Kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = beta[i] - beta[j];
      beta[i] += delta;
      beta[j] += delta;
      if (diff > 0.0) {
        if (beta[j] < 0.0) {
          beta[j] = 0.0;
          beta[i] = diff;
        }
      } else if (beta[i] < 0.0) {
        beta[i] = 0.0;
        beta[j] = -diff;
      }
      if (diff > 0.0) {
        if (beta[i] > C) {
          beta[i] = C;
          beta[j] = C - diff;
        }
      } else if (beta[j] > C) {
        beta[j] = C;
        beta[i] = C + diff;
      }
    } else {
      double quad = Kii + Kjj - 2.0 * Kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = beta[i] + beta[j];
      beta[i] -= delta;
      beta[j] += delta;
      if (sum > C) {
        if (beta[i] > C) {
          beta[i] = C;
          beta[j] = sum - C;
        }
      } else if (beta[j] < 0.0) {
        beta[j] = 0.0;
        beta[i] = sum;
      }
      if (sum > C) {
        if (beta[j] > C) {
          beta[j] = C;
          beta[i] = sum - C;
        }
      } else if (beta[i] < 0.0) {
        beta[i] = 0.0;
        beta[j] = sum;
      }
    }

    const double di = beta[i] - old_i;
    const double dj = beta[j] - old_j;
    for (std::size_t s = 0; s < m; ++s) {
      const std::size_t k = s % l;
      G[s] += sign[s] * (sign[i] * Ki_copy[k] * di + sign[j] * Kj[k] * dj);
    }
    if (trace) trace->objective.push_back(objective());
  }
  model.iterations = iter;
  model.kkt_gap = gap;
  model.dual_objective = objective();

  // Bias from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const double yG = sign[s] * G[s];
    if (beta[s] >= C) {
      if (sign[s] < 0) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else if (beta[s] <= 0.0) {
      if (sign[s] > 0) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else {
      sum_free += yG;
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  model.bias = -rho;

  std::vector<Eigen::Index> sv;
  std::vector<double> coef;
  for (std::size_t k = 0; k < l; ++k) {
    const double c = beta[k] - beta[k + l];
    if (c != 0.0) {
      sv.push_back(static_cast<Eigen::Index>(k));
      coef.push_back(c);
    }
  }
  model.n_support = sv.size();
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), p);
  model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = Z.row(sv[s]);
    model.dual_coef(static_cast<Eigen::Index>(s)) = coef[s];
  }
  if (trace) {
    trace->alpha.resize(static_cast<Eigen::Index>(l));
    trace->alpha_star.resize(static_cast<Eigen::Index>(l));
    for (std::size_t k = 0; k < l; ++k) {
      trace->alpha(static_cast<Eigen::Index>(k)) = beta[k];
      trace->alpha_star(static_cast<Eigen::Index>(k)) = beta[k + l];
    }
  }
  return model;
}

// f(x) = sum_i coef_i k(sv_i, x) + b, mapped back to target units.
inline Eigen::VectorXd svr_predict(const SvrModel& model, const Eigen::MatrixXd& X_new) {
  if (static_cast<std::size_t>(X_new.cols()) != model.n_features())
    fail(Errc::DimensionMismatch, "expected " + std::to_string(model.n_features()) + " features, got " +
                                      std::to_string(X_new.cols()));
  const auto p = static_cast<std::size_t>(X_new.cols());
  // Row-major copy of the support vectors for contiguous kernel arguments.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> svs = model.support_vectors;
  Eigen::VectorXd out(X_new.rows());
  for (Eigen::Index r = 0; r < X_new.rows(); ++r) {
    const Eigen::RowVectorXd z = (X_new.row(r) - model.x_mean).array() / model.x_scale.array();
    const std::span<const double> zs(z.data(), p);
    double f = model.bias;
    for (Eigen::Index s = 0; s < svs.rows(); ++s)
      f += model.dual_coef(s) * kernel_eval(model.config.kernel, std::span<const double>(svs.row(s).data(), p), zs);
    out(r) = model.y_mean + model.y_scale * f;
  }
  return out;
}

inline Json to_json(const KernelSpec& k) {
  Json j{{"type", to_string(k.type)}, {"degree", k.degree}, {"coef0", k.coef0}};
  j["gamma"] = k.gamma ? Json(*k.gamma) : Json(nullptr);
  return j;
}

inline KernelSpec kernel_from_json(const Json& j) {
  KernelSpec k;
  const auto type = parse_kernel_type(j.at("type").get<std::string>());
  if (!type) fail(Errc::SchemaViolation, "unknown kernel type");
  k.type = *type;
  k.degree = j.at("degree").get<int>();
  k.coef0 = j.at("coef0").get<double>();
  if (!j.at("gamma").is_null()) k.gamma = j.at("gamma").get<double>();
  return k;
}

inline Json to_json(const SvrModel& m) {
  auto vec = [](const auto& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
    return out;
  };
  Json svs = Json::array();
  for (Eigen::Index s = 0; s < m.support_vectors.rows(); ++s) svs.push_back(vec(m.support_vectors.row(s)));
  return Json{{"kernel", to_json(m.config.kernel)},
              {"cost", m.config.cost},
              {"epsilon", *m.config.epsilon},
              {"tolerance", m.config.tolerance},
              {"max_iterations", m.config.max_iterations},
              {"standardize", m.config.standardize},
              {"bias", m.bias},
              {"n_support", m.n_support},
              {"n_train", m.n_train},
              {"iterations", m.iterations},
              {"converged", m.converged},
              {"kkt_gap", m.kkt_gap},
              {"dual_objective", m.dual_objective},
              {"x_mean", vec(m.x_mean)},
              {"x_scale", vec(m.x_scale)},
              {"y_mean", m.y_mean},
              {"y_scale", m.y_scale},
              {"dual_coef", vec(m.dual_coef)},
              {"support_vectors", std::move(svs)}};
}

inline SvrModel svr_from_json(const Json& j) {
  SvrModel m;
  m.config.kernel = kernel_from_json(j.at("kernel"));
  m.config.cost = j.at("cost").get<double>();
  m.config.epsilon = j.at("epsilon").get<double>();
  m.config.tolerance = j.at("tolerance").get<double>();
  m.config.max_iterations = j.at("max_iterations").get<long>();
  m.config.standardize = j.at("standardize").get<bool>();
  m.bias = j.at("bias").get<double>();
  m.n_support = j.at("n_support").get<std::size_t>();
  m.n_train = j.at("n_train").get<std::size_t>();
  m.iterations = j.at("iterations").get<long>();
  m.converged = j.at("converged").get<bool>();
  m.kkt_gap = j.at("kkt_gap").get<double>();
  m.dual_objective = j.at("dual_objective").get<double>();
  auto row = [](const Json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::RowVectorXd(Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  m.x_mean = row(j.at("x_mean"));
  m.x_scale = row(j.at("x_scale"));
  m.y_mean = j.at("y_mean").get<double>();
  m.y_scale = j.at("y_scale").get<double>();
  m.dual_coef = row(j.at("dual_coef")).transpose();
  const auto& svs = j.at("support_vectors");
  m.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), m.x_mean.size());
  for (std::size_t s = 0; s < svs.size(); ++s) m.support_vectors.row(static_cast<Eigen::Index>(s)) = row(svs[s]);
  if (m.dual_coef.size() != m.support_vectors.rows()) fail(Errc::SchemaViolation, "support vector count mismatch");
  return m;
}

}  // namespace rentyield::svr
