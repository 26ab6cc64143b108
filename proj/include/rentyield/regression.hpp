#pragma once

// Feature encoding per model specification and ordinary least squares with
// the usual inference statistics.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"

namespace rentyield::regression {

// Encoded design: X carries the intercept in column 0; rows are in
// canonical (id, operation) order.
struct EncodedData {
  ModelSpec spec = ModelSpec::Spec1;
  std::vector<std::string> columns;  // "intercept" followed by spec_features(spec)
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> ids;
  std::size_t dropped = 0;

  // Feature block without the intercept, as used by the forest and SVR.
  Eigen::MatrixXd features() const { return X.rightCols(X.cols() - 1); }
  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
};

// Names of the listing fields a spec needs but the listing lacks.
inline std::vector<std::string> missing_features(const Listing& l, ModelSpec spec) {
  std::vector<std::string> missing;
  if (!l.exterior) missing.emplace_back("exterior");
  if (!l.floor) missing.emplace_back("floor");
  if (spec_number(spec) >= 2 && !l.lift) missing.emplace_back("lift");
  if (spec_number(spec) >= 3 && !l.price_by_area) missing.emplace_back("priceByArea");
  if (spec_number(spec) >= 4 && !l.parking) missing.emplace_back("parking");
  return missing;
}

// Feature vector (no intercept) in spec_features order; nullopt when any
// required field is missing. The new-development flag takes precedence
// over the vendor status and is encoded as the NewDevelopment status level.
inline std::optional<std::vector<double>> encode_features(const Listing& l, ModelSpec spec) {
  if (!missing_features(l, spec).empty()) return std::nullopt;
  auto b = [](bool v) { return v ? 1.0 : 0.0; };
  std::vector<double> f{l.size, b(*l.exterior), static_cast<double>(*l.floor)};
  if (spec_number(spec) >= 2) f.push_back(b(*l.lift));
  if (spec_number(spec) >= 3) f.push_back(*l.price_by_area);
  if (spec_number(spec) >= 4) {
    const bool new_dev = l.status == Status::NewDevelopment || l.new_development.value_or(false);
    f.push_back(b(!new_dev && l.status == Status::Good));
    f.push_back(b(new_dev));
    f.push_back(b(!new_dev && l.status == Status::Renew));
    f.push_back(static_cast<double>(l.bathrooms) / l.size);
    f.push_back(b(l.property_type == PropertyType::Duplex));
    f.push_back(b(l.property_type == PropertyType::Flat));
    f.push_back(b(*l.parking));
    f.push_back(static_cast<double>(l.photos));
  }
  return f;
}

inline std::optional<FeatureRow> encode_row(const Listing& l, ModelSpec spec) {
  auto f = encode_features(l, spec);
  if (!f) return std::nullopt;
  return FeatureRow{std::move(*f), l.price};
}

// Listwise deletion: rows missing any spec-required field are dropped.
// Target is the listing price, so pass rent listings.
inline EncodedData encode(const std::vector<Listing>& listings, ModelSpec spec) {
  std::vector<const Listing*> order;
  order.reserve(listings.size());
  for (const auto& l : listings) order.push_back(&l);
  std::stable_sort(order.begin(), order.end(), [](const Listing* a, const Listing* b) {
    return std::tie(a->id, a->operation) < std::tie(b->id, b->operation);
  });

  EncodedData out;
  out.spec = spec;
  out.columns.emplace_back("intercept");
  for (auto& c : spec_features(spec)) out.columns.push_back(std::move(c));
  const auto k = static_cast<Eigen::Index>(out.columns.size());

  std::vector<FeatureRow> rows;
  for (const Listing* l : order) {
    if (auto row = encode_row(*l, spec)) {
      rows.push_back(std::move(*row));
      out.ids.push_back(l->id);
    } else {
      ++out.dropped;
    }
  }
  if (rows.empty()) fail(Errc::NoUsableRows, "no listing carries every feature of spec " + std::to_string(spec_number(spec)));
  out.X.resize(static_cast<Eigen::Index>(rows.size()), k);
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.X(r, 0) = 1.0;
    for (Eigen::Index c = 1; c < k; ++c) out.X(r, c) = rows[i].features[static_cast<std::size_t>(c - 1)];
    out.y(r) = rows[i].target;
  }
  return out;
}

struct OlsFit {
  std::optional<ModelSpec> spec;
  std::vector<std::string> columns;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd t_stats;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  std::size_t n_observations = 0;
  double residual_variance = 0.0;
};

// Two-sided normal critical values at 10%, 5% and 1%.
inline std::string significance_stars(double t) {
  const double a = std::abs(t);
  if (a >= 2.5758293035489) return "***";
  if (a >= 1.9599639845401) return "**";
  if (a >= 1.6448536269515) return "*";
  return "";
}

inline OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> columns = {},
                      std::optional<ModelSpec> spec = std::nullopt) {
  const auto n = X.rows();
  const auto k = X.cols();
  if (y.size() != n) fail(Errc::LengthMismatch, "X and y row counts differ");
  if (columns.empty()) {
    for (Eigen::Index c = 0; c < k; ++c) columns.push_back("x" + std::to_string(c));
  }
  if (static_cast<Eigen::Index>(columns.size()) != k) fail(Errc::SpecMismatch, "column names do not match X");
  if (k == 0 || n <= k)
    fail(Errc::TooFewRows, std::to_string(n) + " rows for " + std::to_string(k) + " coefficients");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k) {
    std::vector<std::string> collinear;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < k; ++i) collinear.push_back(columns[static_cast<std::size_t>(perm(i))]);
    std::sort(collinear.begin(), collinear.end());
    std::string msg = "design matrix rank " + std::to_string(qr.rank()) + " < " + std::to_string(k) + "; collinear:";
    for (const auto& c : collinear) msg += " " + c;
    fail(Errc::RankDeficient, msg, collinear);
  }

  OlsFit fit;
  fit.spec = spec;
  fit.columns = std::move(columns);
  fit.coefficients = qr.solve(y);
  fit.n_observations = static_cast<std::size_t>(n);

  const Eigen::VectorXd residuals = y - X * fit.coefficients;
  const double ssr = residuals.squaredNorm();
  const double sst = (y.array() - y.mean()).square().sum();
  fit.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  fit.adj_r_squared =
      1.0 - (1.0 - fit.r_squared) * static_cast<double>(n - 1) / static_cast<double>(n - k);
  fit.residual_variance = ssr / static_cast<double>(n - k);

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd unpermuted = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  fit.standard_errors.resize(k);
  for (Eigen::Index i = 0; i < k; ++i)
    fit.standard_errors(perm(i)) = std::sqrt(fit.residual_variance * unpermuted(i, i));
  fit.t_stats = fit.coefficients.array() / fit.standard_errors.array();
  return fit;
}

inline OlsFit ols_fit(const EncodedData& data) { return ols_fit(data.X, data.y, data.columns, data.spec); }

inline Eigen::VectorXd ols_predict(const OlsFit& fit, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != fit.coefficients.size())
    fail(Errc::SpecMismatch, "expected " + std::to_string(fit.coefficients.size()) + " columns, got " +
                                 std::to_string(X_new.cols()));
  return X_new * fit.coefficients;
}

namespace detail {

inline std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

}  // namespace detail

// Plain-text table, one column per fit: coefficient with stars, standard
// error in parentheses underneath, then observations and R-squared rows.
inline std::string format_table(const std::vector<OlsFit>& fits) {
  std::vector<std::string> terms;
  for (const auto& f : fits)
    for (const auto& c : f.columns)
      if (std::find(terms.begin(), terms.end(), c) == terms.end()) terms.push_back(c);

  constexpr std::size_t label_w = 24;
  constexpr std::size_t col_w = 16;
  std::string out;
  auto label = [&](const std::string& s) { out += s + std::string(label_w > s.size() ? label_w - s.size() : 1, ' '); };
  label("");
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto head = fits[i].spec ? "(" + std::to_string(spec_number(*fits[i].spec)) + ")" : "(" + std::to_string(i + 1) + ")";
    out += detail::pad(head, col_w);
  }
  out += '\n';
  for (const auto& term : terms) {
    std::string coef_line, se_line;
    for (const auto& f : fits) {
      auto it = std::find(f.columns.begin(), f.columns.end(), term);
      if (it == f.columns.end()) {
        coef_line += std::string(col_w, ' ');
        se_line += std::string(col_w, ' ');
        continue;
      }
      const auto j = static_cast<Eigen::Index>(it - f.columns.begin());
      coef_line += detail::pad(detail::fmt3(f.coefficients(j)) + significance_stars(f.t_stats(j)), col_w);
      se_line += detail::pad("(" + detail::fmt3(f.standard_errors(j)) + ")", col_w);
    }
    label(term);
    out += coef_line + '\n';
    label("");
    out += se_line + '\n';
  }
  label("Observations");
  for (const auto& f : fits) out += detail::pad(std::to_string(f.n_observations), col_w);
  out += '\n';
  label("R2");
  for (const auto& f : fits) out += detail::pad(detail::fmt3(f.r_squared), col_w);
  out += '\n';
  label("Adjusted R2");
  for (const auto& f : fits) out += detail::pad(detail::fmt3(f.adj_r_squared), col_w);
  out += "\nNote: *, **, *** significant at 10%, 5%, 1% (two-sided, normal reference)\n";
  return out;
}

inline std::string format_csv(const std::vector<OlsFit>& fits) {
  std::string out = "spec,term,estimate,std_error,t_stat,stars\n";
  char buf[256];
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    const auto spec = f.spec ? std::to_string(spec_number(*f.spec)) : std::to_string(i + 1);
    for (std::size_t j = 0; j < f.columns.size(); ++j) {
      const auto e = static_cast<Eigen::Index>(j);
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%s\n", spec.c_str(), f.columns[j].c_str(),
                    f.coefficients(e), f.standard_errors(e), f.t_stats(e), significance_stars(f.t_stats(e)).c_str());
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%s,observations,%zu,,,\n%s,r_squared,%.17g,,,\n%s,adj_r_squared,%.17g,,,\n",
                  spec.c_str(), f.n_observations, spec.c_str(), f.r_squared, spec.c_str(), f.adj_r_squared);
    out += buf;
  }
  return out;
}

}  // namespace rentyield::regression
