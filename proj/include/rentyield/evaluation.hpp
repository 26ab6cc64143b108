#pragma once

// Experiment harness: train/test splits, RMSE, Z-score outlier filtering,
// forest grid search, the multi-model suite and implied-yield ranking.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/finance.hpp"
#include "rentyield/forest.hpp"
#include "rentyield/model.hpp"
#include "rentyield/regression.hpp"
#include "rentyield/rng.hpp"
#include "rentyield/svr.hpp"

namespace rentyield::evaluation {

struct SplitPlan {
  double fraction = 0.7;
  std::uint64_t seed = 0;
  std::vector<bool> train;  // per row, in the caller's row order

  std::size_t n_train() const { return static_cast<std::size_t>(std::count(train.begin(), train.end(), true)); }
  std::size_t n_test() const { return train.size() - n_train(); }

  std::vector<Eigen::Index> indices(bool want_train) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train[i] == want_train) out.push_back(static_cast<Eigen::Index>(i));
    return out;
  }

  bool operator==(const SplitPlan&) const = default;
};

// floor(fraction * n) training rows, clamped so both sides are non-empty,
// chosen by a seeded shuffle of rows 0..n-1 (rows must already be in
// canonical order).
inline SplitPlan train_test_split(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) fail(Errc::InvalidArgument, "split fraction must lie in (0, 1)");
  if (n < 2) fail(Errc::TooFewRows, "a split needs at least 2 rows");
  auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  SplitPlan plan{fraction, seed, std::vector<bool>(n, false)};
  for (std::size_t k = 0; k < n_train; ++k) plan.train[order[k]] = true;
  return plan;
}

// Order-independent variant: rows are identified by id, sorted canonically
// before the shuffle, and the assignment is reported in the given order.
inline SplitPlan train_test_split(const std::vector<std::string>& ids, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  const SplitPlan canonical = train_test_split(ids.size(), fraction, seed);
  SplitPlan plan{fraction, seed, std::vector<bool>(ids.size(), false)};
  for (std::size_t k = 0; k < order.size(); ++k) plan.train[order[k]] = canonical.train[k];
  return plan;
}

inline double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
  if (predicted.size() != actual.size()) fail(Errc::LengthMismatch, "prediction and target lengths differ");
  if (predicted.size() == 0) fail(Errc::LengthMismatch, "rmse of empty vectors");
  return std::sqrt((predicted - actual).squaredNorm() / static_cast<double>(predicted.size()));
}

struct ZscoreResult {
  std::vector<Listing> kept;
  std::vector<Listing> removed;
  std::vector<std::string> zero_variance;  // columns skipped because they are constant
};

// Single pass over price and size: mean and population std from the input,
// then every row with |x - mean| / std > z in either column is removed.
inline ZscoreResult zscore_filter(const std::vector<Listing>& rows, double z) {
  if (!(z > 0.0)) fail(Errc::InvalidArgument, "z threshold must be > 0");
  ZscoreResult out;
  if (rows.empty()) return out;
  struct Column {
    const char* name;
    double (*get)(const Listing&);
    double mean = 0.0;
    double sd = 0.0;
  };
  std::array<Column, 2> cols{Column{"price", [](const Listing& l) { return l.price; }},
                             Column{"size", [](const Listing& l) { return l.size; }}};
  const auto n = static_cast<double>(rows.size());
  for (auto& c : cols) {
    for (const auto& l : rows) c.mean += c.get(l);
    c.mean /= n;
    for (const auto& l : rows) c.sd += (c.get(l) - c.mean) * (c.get(l) - c.mean);
    c.sd = std::sqrt(c.sd / n);
    if (c.sd == 0.0) out.zero_variance.emplace_back(c.name);
  }
  for (const auto& l : rows) {
    bool outlier = false;
    for (const auto& c : cols)
      if (c.sd > 0.0 && std::abs(c.get(l) - c.mean) / c.sd > z) outlier = true;
    (outlier ? out.removed : out.kept).push_back(l);
  }
  return out;
}

// Stable fingerprint of a listing set, independent of row order.
inline std::string dataset_fingerprint(const std::vector<Listing>& listings) {
  std::vector<std::string> lines;
  lines.reserve(listings.size());
  for (const auto& l : listings) lines.push_back(to_canonical_line(l));
  std::sort(lines.begin(), lines.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& line : lines) h = text::fnv1a64(line + "\n", h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct TrainOptions {
  ModelKind kind = ModelKind::Ols;
  ModelSpec spec = ModelSpec::Spec1;
  ForestConfig forest;
  SvrConfig svr;
  std::optional<double> zscore;  // outlier filter before the split
  double split_fraction = 0.7;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct EvalReport {
  ModelKind kind = ModelKind::Ols;
  ModelSpec spec = ModelSpec::Spec1;
  std::optional<KernelType> kernel;
  Json hyperparameters = Json::object();
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double rmse_test = std::numeric_limits<double>::infinity();
  std::optional<double> rmse_train;
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;
  std::string dataset_hash;
  std::optional<std::string> error;  // set for failed cells
  std::vector<std::string> test_ids;
  std::vector<double> test_actual;
  std::vector<double> test_predicted;

  bool ok() const { return !error.has_value(); }

  std::string label() const {
    std::string s(to_string(kind));
    if (kernel) s += "-" + std::string(to_string(*kernel));
    return s;
  }
};

struct TrainResult {
  TrainedModel model;
  EvalReport report;
};

namespace detail {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return out;
}

inline Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

inline std::vector<Listing> rent_only(const std::vector<Listing>& rows) {
  std::vector<Listing> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [](const Listing& l) { return l.operation == Operation::Rent; });
  return out;
}

inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Filter (optional) -> encode -> split -> fit on the training rows ->
// RMSE on the test rows. Only rent listings are used.
inline TrainResult train_and_evaluate(const std::vector<Listing>& listings, const TrainOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Listing> rents = detail::rent_only(listings);
  std::vector<Listing> rows = rents;
  if (opt.zscore && std::isfinite(*opt.zscore)) rows = zscore_filter(rents, *opt.zscore).kept;

  const auto data = regression::encode(rows, opt.spec);
  const auto plan = train_test_split(data.rows(), opt.split_fraction, opt.seed);
  const auto train_idx = plan.indices(true);
  const auto test_idx = plan.indices(false);
  const Eigen::MatrixXd features = data.features();
  const Eigen::MatrixXd X_train = detail::take_rows(features, train_idx);
  const Eigen::MatrixXd X_test = detail::take_rows(features, test_idx);
  const Eigen::VectorXd y_train = detail::take(data.y, train_idx);
  const Eigen::VectorXd y_test = detail::take(data.y, test_idx);

  TrainResult result;
  auto& m = result.model;
  m.kind = opt.kind;
  m.spec = opt.spec;
  m.feature_columns = spec_features(opt.spec);
  m.seed = opt.seed;
  m.dataset_hash = dataset_fingerprint(rents);
  Json hp = Json::object();
  hp["split_fraction"] = opt.split_fraction;
  hp["zscore"] = opt.zscore && std::isfinite(*opt.zscore) ? Json(*opt.zscore) : Json(nullptr);

  switch (opt.kind) {
    case ModelKind::Ols: {
      Eigen::MatrixXd X(X_train.rows(), X_train.cols() + 1);
      X.col(0).setOnes();
      X.rightCols(X_train.cols()) = X_train;
      auto fit = regression::ols_fit(X, y_train, data.columns, opt.spec);
      m.diagnostics["r_squared"] = fit.r_squared;
      m.diagnostics["adj_r_squared"] = fit.adj_r_squared;
      m.payload = std::move(fit);
      break;
    }
    case ModelKind::Forest: {
      ForestConfig cfg = opt.forest;
      cfg.seed = opt.seed;
      auto f = forest::forest_fit(X_train, y_train, cfg, opt.threads);
      hp["n_trees"] = f.config.n_trees;
      hp["mtry"] = *f.config.mtry;
      hp["min_leaf"] = f.config.min_leaf;
      hp["bootstrap"] = f.config.bootstrap;
      m.payload = std::move(f);
      break;
    }
    case ModelKind::Svr: {
      auto s = svr::svr_fit(X_train, y_train, opt.svr);
      hp["kernel"] = svr::to_json(s.config.kernel);
      hp["cost"] = s.config.cost;
      hp["epsilon"] = *s.config.epsilon;
      hp["tolerance"] = s.config.tolerance;
      hp["max_iterations"] = s.config.max_iterations;
      hp["standardize"] = s.config.standardize;
      m.diagnostics["n_support"] = s.n_support;
      m.diagnostics["iterations"] = s.iterations;
      m.diagnostics["converged"] = s.converged;
      m.payload = std::move(s);
      break;
    }
  }
  m.hyperparameters = hp;

  const Eigen::VectorXd pred_test = predict(m, X_test);
  const Eigen::VectorXd pred_train = predict(m, X_train);
  auto& r = result.report;
  r.kind = opt.kind;
  r.spec = opt.spec;
  if (opt.kind == ModelKind::Svr) r.kernel = opt.svr.kernel.type;
  r.hyperparameters = hp;
  r.n_train = train_idx.size();
  r.n_test = test_idx.size();
  r.rmse_test = rmse(pred_test, y_test);
  r.rmse_train = rmse(pred_train, y_train);
  r.seed = opt.seed;
  r.dataset_hash = m.dataset_hash;
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    r.test_ids.push_back(data.ids[static_cast<std::size_t>(test_idx[i])]);
    r.test_actual.push_back(y_test(static_cast<Eigen::Index>(i)));
    r.test_predicted.push_back(pred_test(static_cast<Eigen::Index>(i)));
  }
  m.diagnostics["n_train"] = r.n_train;
  m.diagnostics["n_test"] = r.n_test;
  m.diagnostics["rmse_test"] = r.rmse_test;
  m.diagnostics["rmse_train"] = *r.rmse_train;
  r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Runs train_and_evaluate, turning domain errors into a failed report.
inline EvalReport evaluate_cell(const std::vector<Listing>& listings, const TrainOptions& opt) {
  try {
    return train_and_evaluate(listings, opt).report;
  } catch (const Error& e) {
    EvalReport r;
    r.kind = opt.kind;
    r.spec = opt.spec;
    if (opt.kind == ModelKind::Svr) r.kernel = opt.svr.kernel.type;
    r.seed = opt.seed;
    r.error = e.what();
    return r;
  }
}

struct ForestGrid {
  std::vector<int> n_trees{10, 25, 50, 100, 125, 250, 500};
  std::vector<int> mtry{4, 5, 6, 7, 8, 9, 10};
  std::vector<double> zscore{0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0};
};

// Every cell is evaluated; reports are sorted by ascending test RMSE with
// failed cells last and ties broken by (n_trees, mtry, z), so the result
// does not depend on grid enumeration order.
inline std::vector<EvalReport> grid_search_forest(const std::vector<Listing>& listings, ModelSpec spec,
                                                  const ForestGrid& grid, std::uint64_t seed,
                                                  double split_fraction = 0.7, unsigned threads = 1) {
  if (grid.n_trees.empty() || grid.mtry.empty() || grid.zscore.empty())
    fail(Errc::InvalidArgument, "grid must have at least one value per axis");
  std::vector<TrainOptions> cells;
  for (int t : grid.n_trees)
    for (int m : grid.mtry)
      for (double z : grid.zscore) {
        TrainOptions o;
        o.kind = ModelKind::Forest;
        o.spec = spec;
        o.forest.n_trees = t;
        o.forest.mtry = m;
        o.zscore = z;
        o.split_fraction = split_fraction;
        o.seed = seed;
        cells.push_back(o);
      }
  std::vector<EvalReport> reports(cells.size());
  detail::parallel_for(cells.size(), threads, [&](std::size_t i) {
    reports[i] = evaluate_cell(listings, cells[i]);
    reports[i].hyperparameters["n_trees"] = cells[i].forest.n_trees;
    reports[i].hyperparameters["mtry"] = *cells[i].forest.mtry;
    reports[i].hyperparameters["zscore"] = *cells[i].zscore;
  });
  auto key = [](const EvalReport& r) {
    return std::make_tuple(!r.ok(), r.rmse_test, r.hyperparameters.value("n_trees", 0),
                           r.hyperparameters.value("mtry", 0), r.hyperparameters.value("zscore", 0.0));
  };
  std::sort(reports.begin(), reports.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  return reports;
}

struct SuiteConfig {
  bool ols = true;
  std::optional<ForestConfig> forest = ForestConfig{};
  std::optional<double> forest_zscore;
  std::vector<SvrConfig> svr = [] {
    std::vector<SvrConfig> v;
    for (auto k : {KernelType::Linear, KernelType::Polynomial, KernelType::Radial, KernelType::Sigmoid}) {
      SvrConfig c;
      c.kernel.type = k;
      v.push_back(c);
    }
    return v;
  }();
  std::vector<ModelSpec> specs{kAllSpecs.begin(), kAllSpecs.end()};
  double split_fraction = 0.7;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// One report per (spec, model[, kernel]); encoding and splitting happen per
// spec, so row sets differ across specs.
inline std::vector<EvalReport> run_model_suite(const std::vector<Listing>& listings, const SuiteConfig& cfg) {
  std::vector<TrainOptions> cells;
  for (auto spec : cfg.specs) {
    TrainOptions base;
    base.spec = spec;
    base.split_fraction = cfg.split_fraction;
    base.seed = cfg.seed;
    if (cfg.ols) {
      auto o = base;
      o.kind = ModelKind::Ols;
      cells.push_back(o);
    }
    if (cfg.forest) {
      auto o = base;
      o.kind = ModelKind::Forest;
      o.forest = *cfg.forest;
      o.zscore = cfg.forest_zscore;
      cells.push_back(o);
    }
    for (const auto& s : cfg.svr) {
      auto o = base;
      o.kind = ModelKind::Svr;
      o.svr = s;
      cells.push_back(o);
    }
  }
  std::vector<EvalReport> reports(cells.size());
  detail::parallel_for(cells.size(), cfg.threads, [&](std::size_t i) { reports[i] = evaluate_cell(listings, cells[i]); });
  return reports;
}

// Model rows by spec columns, test RMSE per cell.
inline std::string format_suite_table(const std::vector<EvalReport>& reports) {
  std::vector<std::string> labels;
  std::vector<ModelSpec> specs;
  for (const auto& r : reports) {
    if (std::find(labels.begin(), labels.end(), r.label()) == labels.end()) labels.push_back(r.label());
    if (std::find(specs.begin(), specs.end(), r.spec) == specs.end()) specs.push_back(r.spec);
  }
  std::sort(specs.begin(), specs.end());
  char buf[64];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-20s", "model");
  out += buf;
  for (auto s : specs) {
    std::snprintf(buf, sizeof buf, "%14s", ("spec " + std::to_string(spec_number(s))).c_str());
    out += buf;
  }
  out += '\n';
  for (const auto& label : labels) {
    std::snprintf(buf, sizeof buf, "%-20s", label.c_str());
    out += buf;
    for (auto s : specs) {
      auto it = std::find_if(reports.begin(), reports.end(), [&](const auto& r) { return r.label() == label && r.spec == s; });
      if (it == reports.end()) {
        std::snprintf(buf, sizeof buf, "%14s", "");
      } else if (!it->ok()) {
        std::snprintf(buf, sizeof buf, "%14s", "failed");
      } else {
        std::snprintf(buf, sizeof buf, "%14.3f", it->rmse_test);
      }
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline std::string reports_csv(const std::vector<EvalReport>& reports) {
  std::string out = "model,spec,hyperparameters,n_train,n_test,rmse_test,rmse_train,runtime_ms,seed,dataset_hash,error\n";
  char buf[128];
  for (const auto& r : reports) {
    std::string hp = r.hyperparameters.dump();
    std::string quoted = "\"";
    for (char c : hp) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    quoted += '"';
    out += r.label() + ',' + std::to_string(spec_number(r.spec)) + ',' + quoted + ',';
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,", r.n_train, r.n_test, r.rmse_test);
    out += buf;
    if (r.rmse_train) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.rmse_train);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.1f,%llu,", r.runtime_ms, static_cast<unsigned long long>(r.seed));
    out += buf;
    out += r.dataset_hash + ',';
    if (r.error) {
      std::string e = *r.error;
      std::replace(e.begin(), e.end(), ',', ';');
      std::replace(e.begin(), e.end(), '\n', ' ');
      out += e;
    }
    out += '\n';
  }
  return out;
}

// Predicted vs actual on the test rows of one cell.
inline std::string scatter_csv(const EvalReport& r) {
  std::string out = "id,actual,predicted\n";
  char buf[96];
  for (std::size_t i = 0; i < r.test_ids.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", r.test_actual[i], r.test_predicted[i]);
    out += r.test_ids[i] + buf;
  }
  return out;
}

struct RankedListing {
  std::string id;
  double price = 0.0;
  double predicted_rent = 0.0;
  double monthly_mortgage = 0.0;
  double implied_index = 0.0;
};

struct SkippedListing {
  std::string id;
  std::vector<std::string> missing;
};

struct Ranking {
  std::vector<RankedListing> entries;  // descending implied index, ties by id
  std::vector<SkippedListing> skipped;
};

// Predicted rent / monthly mortgage for each sale listing the model can
// score. Non-sale listings are ignored; listings missing a spec feature are
// skipped and reported.
inline Ranking implied_yield_ranking(const std::vector<Listing>& listings, const TrainedModel& model,
                                     const MortgageParams& params, std::optional<std::size_t> limit = std::nullopt) {
  params.validate();
  Ranking out;
  std::vector<const Listing*> scorable;
  std::vector<std::vector<double>> rows;
  for (const auto& l : listings) {
    if (l.operation != Operation::Sale) continue;
    auto f = regression::encode_features(l, model.spec);
    if (!f) {
      out.skipped.push_back({l.id, regression::missing_features(l, model.spec)});
      continue;
    }
    scorable.push_back(&l);
    rows.push_back(std::move(*f));
  }
  if (scorable.empty()) fail(Errc::NoScorableListings, "no sale listing carries the model's features");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.feature_columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  const Eigen::VectorXd rent = predict(model, X);
  for (std::size_t i = 0; i < scorable.size(); ++i) {
    RankedListing r;
    r.id = scorable[i]->id;
    r.price = scorable[i]->price;
    r.predicted_rent = rent(static_cast<Eigen::Index>(i));
    r.monthly_mortgage = finance::monthly_mortgage(r.price, params);
    r.implied_index = r.predicted_rent / r.monthly_mortgage;
    out.entries.push_back(std::move(r));
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const auto& a, const auto& b) {
    if (a.implied_index != b.implied_index) return a.implied_index > b.implied_index;
    return a.id < b.id;
  });
  if (limit && out.entries.size() > *limit) out.entries.resize(*limit);
  return out;
}

inline std::string ranking_csv(const Ranking& r) {
  std::string out = "rank,id,price,predicted_rent,monthly_mortgage,implied_index\n";
  char buf[160];
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    std::snprintf(buf, sizeof buf, ",%.2f,%.2f,%.2f,%.6f\n", e.price, e.predicted_rent, e.monthly_mortgage, e.implied_index);
    out += std::to_string(i + 1) + ',' + e.id + buf;
  }
  return out;
}

inline OrderedJson to_json(const Ranking& r) {
  OrderedJson entries = OrderedJson::array();
  for (const auto& e : r.entries)
    entries.push_back(OrderedJson{{"id", e.id},
                                  {"price", e.price},
                                  {"predicted_rent", e.predicted_rent},
                                  {"monthly_mortgage", e.monthly_mortgage},
                                  {"implied_index", e.implied_index}});
  OrderedJson skipped = OrderedJson::array();
  for (const auto& s : r.skipped) skipped.push_back(OrderedJson{{"id", s.id}, {"missing", s.missing}});
  return OrderedJson{{"entries", std::move(entries)}, {"skipped", std::move(skipped)}};
}

}  // namespace rentyield::evaluation
