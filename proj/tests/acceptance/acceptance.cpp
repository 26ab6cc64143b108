// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed below; each check compares the library with
// an independent route (oracle, brute force, second binary) where one exists.

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <sys/wait.h>

#include "helpers.hpp"
#include "oracles/index_oracle.hpp"
#include "oracles/ols_oracle.hpp"
#include "oracles/qp_oracle.hpp"
#include "oracles/tree_oracle.hpp"
#include "rentyield/cli.hpp"
#include "rentyield/evaluation.hpp"
#include "rentyield/finance.hpp"
#include "rentyield/ingest.hpp"
#include "rentyield/service.hpp"
#include "rentyield/synthetic.hpp"

using namespace rentyield;

namespace tol {
constexpr double kMortgageEuro = 1.0;
constexpr double kTotalCostEuro = 1.0;
constexpr double kFinalBalanceEuro = 0.01;
constexpr double kAmortizationSeconds = 5.0;
constexpr double kIndex = 0.001;
constexpr double kNeighborhoodAverage = 0.005;
constexpr double kIndexRelative = 1e-9;
constexpr double kOlsRelative = 1e-8;
constexpr double kOrthogonality = 1e-6;  // times ||y||
constexpr double kRSquared = 1e-10;
constexpr double kDualObjective = 1e-6;
constexpr double kSvrPrediction = 1e-4;
constexpr double kFeasibility = 1e-8;
constexpr double kSuiteSeconds = 120.0;
}  // namespace tol

namespace {

struct Check {
  bool ok = true;
  std::ostringstream note;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) note << "first failure: " << what << "; ";
    ok = ok && cond;
  }
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::filesystem::path golden_path() { return testutil::fixtures_dir() / "golden" / "dataset.jsonl"; }

// ---- mortgage ----

void mortgage(Check& c) {
  const MortgageTerms t{150800.0, MortgageParams{0.067, 0.30, 0.0016, 360}};
  const double m = finance::monthly_mortgage(t);
  const double total = finance::total_cost(t);
  c.require(std::abs(m - 423.0) <= tol::kMortgageEuro, "monthly payment");
  c.require(std::abs(total - 160903.0) <= tol::kTotalCostEuro, "total cost");
  // Second route: annuity via std::pow.
  c.require(rel_err(m, oracle::annuity(150800.0, 0.067, 0.30, 0.0016, 360)) < 1e-12, "annuity oracle");
  c.note << "M=" << m << " total=" << total;
}

// ---- amortization ----

void amortization(Check& c) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    MortgageParams p;
    p.monthly_rate = k % 20 == 0 ? 0.0 : rng.uniform(0.0, 0.01);
    p.months = 12 + static_cast<int>(rng.uniform_index(469));
    p.transaction_cost_rate = rng.uniform(0.0, 0.15);
    p.down_payment_fraction = rng.uniform(0.0, 0.9);
    const MortgageTerms t{rng.uniform(1e4, 3e6), p};
    const double payment = finance::monthly_mortgage(t);
    // Independent month-by-month loop.
    double balance = (1.0 + p.transaction_cost_rate - p.down_payment_fraction) * t.price;
    for (int month = 0; month < p.months; ++month) balance = balance * (1.0 + p.monthly_rate) - payment;
    worst = std::max(worst, std::abs(balance));
    // Library schedule driven by the same payment.
    const auto rows = finance::amortization_schedule(t, payment);
    worst = std::max(worst, std::abs(rows.back().closing));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.require(worst <= tol::kFinalBalanceEuro, "final balance");
  c.require(secs < tol::kAmortizationSeconds, "runtime");
  c.note << "max |balance|=" << worst << " EUR, " << secs << " s";
}

// ---- index arithmetic ----

void index_arithmetic(Check& c) {
  const auto cells = finance::compute_yield_index(ingest::load_dataset(golden_path()), MortgageParams{});
  const YieldCell* pros = nullptr;
  for (const auto& cell : cells)
    if (cell.neighborhood == "prosperidad" && cell.bucket == SizeBucket::B30_60) pros = &cell;
  c.require(pros && pros->index, "prosperidad cell present");
  if (!pros || !pros->index) return;
  c.require(std::abs(*pros->mean_rent - 1371.95) < 0.005, "mean rent");
  c.require(std::abs(*pros->mean_mortgage - 1581.86) < 0.005, "mean mortgage");
  c.require(std::abs(*pros->index - 0.867) <= tol::kIndex, "prosperidad index");
  c.require(std::abs(1371.95 / 1581.86 - 0.867) <= tol::kIndex, "hand ratio");

  std::map<std::string, double> avg;
  for (const auto& a : finance::neighborhood_average(cells))
    if (a.average) avg[a.neighborhood] = *a.average;
  c.require(std::abs(avg["acacias"] - 1.22) <= tol::kNeighborhoodAverage, "acacias average");
  c.require(std::abs(avg["adelfas"] - 1.07) <= tol::kNeighborhoodAverage, "adelfas average");

  // Averaging on bare bucket indices.
  auto bare = [](std::vector<double> xs) {
    std::vector<YieldCell> v;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      YieldCell y;
      y.neighborhood = "n";
      y.bucket = kAllBuckets[i];
      y.index = xs[i];
      v.push_back(y);
    }
    return *finance::neighborhood_average(v).front().average;
  };
  c.require(std::abs(bare({1.03, 1.08, 1.56}) - 1.22) <= tol::kNeighborhoodAverage, "bare acacias");
  c.require(std::abs(bare({1.06, 1.13, 1.02}) - 1.07) <= tol::kNeighborhoodAverage, "bare adelfas");
  c.note << "prosperidad=" << *pros->index << " acacias=" << avg["acacias"] << " adelfas=" << avg["adelfas"];
}

// ---- index properties ----

void index_properties(Check& c) {
  std::size_t cells_checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 7 + 1);
    const auto n = 50 + rng.uniform_index(951);
    auto ls = testutil::random_listings(1000 + seed, n);
    MortgageParams p{rng.uniform(0.0, 0.1), rng.uniform(0.0, 0.6), rng.uniform(0.0005, 0.006),
                     60 + static_cast<int>(rng.uniform_index(361))};
    const auto base = finance::compute_yield_index(ls, p);
    const auto brute = oracle::group_by_index(ls, p.transaction_cost_rate, p.down_payment_fraction, p.monthly_rate, p.months);
    c.require(base.size() == brute.size(), "cell count vs brute force");
    for (const auto& cell : base) {
      const auto it = brute.find({cell.neighborhood, static_cast<int>(cell.bucket)});
      c.require(it != brute.end(), "cell key vs brute force");
      if (it == brute.end()) continue;
      c.require(cell.index.has_value() == it->second.index.has_value(), "index presence");
      if (cell.index && it->second.index)
        c.require(rel_err(*cell.index, *it->second.index) <= tol::kIndexRelative, "brute force value");
      ++cells_checked;
    }

    const double a = rng.uniform(0.5, 3.0);
    auto rents = ls, sales = ls;
    for (auto& l : rents)
      if (l.operation == Operation::Rent) l.price *= a;
    for (auto& l : sales)
      if (l.operation == Operation::Sale) l.price *= a;
    const auto rscaled = finance::compute_yield_index(rents, p);
    const auto sscaled = finance::compute_yield_index(sales, p);
    MortgageParams higher_rate = p, higher_down = p;
    higher_rate.monthly_rate *= 1.5;
    higher_down.down_payment_fraction = std::min(0.95, p.down_payment_fraction + 0.1);
    const auto hr = finance::compute_yield_index(ls, higher_rate);
    const auto hd = finance::compute_yield_index(ls, higher_down);
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (!base[i].index) continue;
      c.require(rel_err(*rscaled[i].index, a * *base[i].index) <= tol::kIndexRelative, "rent scale equivariance");
      c.require(rel_err(*sscaled[i].index, *base[i].index / a) <= tol::kIndexRelative, "price scale equivariance");
      c.require(*hr[i].index < *base[i].index, "rate monotonicity");
      c.require(*hd[i].index > *base[i].index, "down-payment monotonicity");
    }
  }
  c.note << "100 datasets, " << cells_checked << " cells";
}

// ---- OLS ----

void ols(Check& c) {
  double worst_coef = 0.0, worst_orth = 0.0, worst_r2 = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed + 500);
    const auto k = static_cast<Eigen::Index>(2 + rng.uniform_index(7));
    const auto n = static_cast<Eigen::Index>(std::min<std::uint64_t>(50, static_cast<std::uint64_t>(k) + 5 + rng.uniform_index(40)));
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd beta(k), y(n);
    for (Eigen::Index j = 0; j < k; ++j) beta(j) = rng.uniform(-3.0, 3.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      for (Eigen::Index j = 1; j < k; ++j) X(i, j) = rng.normal();
    }
    y = X * beta;
    const Eigen::VectorXd clean = y;
    for (Eigen::Index i = 0; i < n; ++i) y(i) += rng.normal(0.0, 0.5);

    const auto fit = regression::ols_fit(X, y);
    const auto ref = oracle::normal_equations(testutil::to_rows(X), testutil::to_std(y));
    double scale = 0.0;
    for (double v : ref) scale = std::max(scale, std::abs(v));
    for (Eigen::Index j = 0; j < k; ++j)
      worst_coef = std::max(worst_coef, std::abs(fit.coefficients(j) - ref[static_cast<std::size_t>(j)]) / std::max(scale, 1.0));
    const Eigen::VectorXd e = y - X * fit.coefficients;
    worst_orth = std::max(worst_orth, (X.transpose() * e).cwiseAbs().maxCoeff() / y.norm());

    const auto exact = regression::ols_fit(X, clean);
    worst_r2 = std::max(worst_r2, std::abs(1.0 - exact.r_squared));
  }
  c.require(worst_coef <= tol::kOlsRelative, "coefficients vs normal equations");
  c.require(worst_orth < tol::kOrthogonality, "residual orthogonality");
  c.require(worst_r2 <= tol::kRSquared, "noiseless R2");
  c.note << "max coef rel err=" << worst_coef << " max |X'e|/|y|=" << worst_orth << " max |1-R2|=" << worst_r2;
}

// ---- forest ----

bool same_tree(const forest::Tree& tree, const oracle::TreeNode& root) {
  std::vector<oracle::FlatNode> flat;
  oracle::flatten(root, flat);
  if (tree.nodes.size() != flat.size()) return false;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.feature != flat[i].feature || n.n_samples != flat[i].n) return false;
    if (n.is_leaf() ? std::abs(n.prediction - flat[i].value) > 1e-9 * (1.0 + std::abs(flat[i].value))
                    : n.threshold != flat[i].value)
      return false;
  }
  return true;
}

void forest_check(Check& c) {
  std::size_t nodes = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 900);
    const auto n = static_cast<Eigen::Index>(4 + rng.uniform_index(9));
    const auto p = static_cast<Eigen::Index>(1 + rng.uniform_index(3));
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = static_cast<double>(rng.uniform_index(6));
      X(i, 0) += static_cast<double>(i) * 10.0;  // distinct rows
      y(i) = std::round(rng.normal(0.0, 5.0));
    }
    Rng tree_rng(seed);
    const auto tree = forest::tree_fit(X, y, static_cast<int>(p), 1, tree_rng);
    std::vector<std::size_t> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto ref = oracle::exhaustive_tree(testutil::to_rows(X), testutil::to_std(y), rows, 1);
    c.require(same_tree(tree, *ref), "tree vs exhaustive oracle");
    nodes += tree.nodes.size();

    ForestConfig cfg;
    cfg.n_trees = 3;
    cfg.mtry = static_cast<int>(p);
    cfg.bootstrap = false;
    const auto f = forest::forest_fit(X, y, cfg);
    c.require(evaluation::rmse(forest::forest_predict(f, X), y) == 0.0, "training RMSE 0");
  }

  const auto bench = synthetic::generate(synthetic::Config{800, 0, 20, 0.08, 0.0, 11});
  const auto data = regression::encode(bench, ModelSpec::Spec4);
  ForestConfig cfg;
  cfg.n_trees = 40;
  cfg.seed = 99;
  const auto f1 = forest::forest_fit(data.features(), data.y, cfg, 1);
  const auto f2 = forest::forest_fit(data.features(), data.y, cfg, 2);
  const auto f8 = forest::forest_fit(data.features(), data.y, cfg, 8);
  c.require(f1 == f2 && f1 == f8, "threads 1/2/8 identical");
  c.require(to_json(f1).dump() == to_json(f8).dump(), "serialized forests identical");
  c.note << "50 trees matched (" << nodes << " nodes); 40-tree forest identical across 1/2/8 threads";
}

// ---- SVR ----

Eigen::MatrixXd gram(const KernelSpec& k, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.rows(); ++j)
      K(i, j) = svr::kernel_eval(k, Eigen::VectorXd(X.row(i)), Eigen::VectorXd(X.row(j)));
  return K;
}

void svr_check(Check& c) {
  double worst_obj = 0.0, worst_pred = 0.0;
  std::size_t without_free = 0;
  for (int k = 0; k < 30; ++k) {
    Rng rng(static_cast<std::uint64_t>(k) + 3000);
    const auto n = static_cast<Eigen::Index>(3 + rng.uniform_index(13));
    const auto p = static_cast<Eigen::Index>(1 + rng.uniform_index(3));
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) s += (X(i, j) = rng.uniform(-2.0, 2.0));
      y(i) = std::sin(s) + 0.2 * rng.normal();
    }
    SvrConfig cfg;
    switch (k % 3) {
      case 0: cfg.kernel.type = KernelType::Linear; break;
      case 1:
        cfg.kernel = KernelSpec{KernelType::Polynomial, 2, 0.5, 1.0};
        break;
      default: cfg.kernel = KernelSpec{KernelType::Radial, 3, 0.8, 0.0};
    }
    cfg.cost = k % 2 ? 10.0 : 1.0;
    cfg.epsilon = 0.1;
    cfg.tolerance = 1e-10;
    svr::SvrTrace trace;
    const auto model = svr::svr_fit(X, y, cfg, &trace);
    const auto K = gram(cfg.kernel, X);
    const auto ref = oracle::solve_svr_dual(K, y, cfg.cost, 0.1);

    c.require(model.converged && model.kkt_gap < cfg.tolerance, "KKT gap at convergence");
    c.require(trace.alpha.minCoeff() >= 0.0 && trace.alpha_star.minCoeff() >= 0.0, "lower bounds");
    c.require(trace.alpha.maxCoeff() <= cfg.cost && trace.alpha_star.maxCoeff() <= cfg.cost, "upper bounds");
    c.require(std::abs((trace.alpha - trace.alpha_star).sum()) <= tol::kFeasibility, "equality constraint");
    for (std::size_t s = 1; s < trace.objective.size(); ++s)
      c.require(trace.objective[s] >= trace.objective[s - 1] - 1e-12 * std::abs(trace.objective[s - 1]), "monotone dual");

    const double obj_err = std::abs(-model.dual_objective - ref.objective);
    worst_obj = std::max(worst_obj, obj_err);
    const Eigen::VectorXd coef = ref.alpha - ref.alpha_star;
    const Eigen::VectorXd pred = svr::svr_predict(model, X);
    if (ref.has_free) {
      const Eigen::VectorXd ref_pred = K * coef + Eigen::VectorXd::Constant(n, ref.bias);
      worst_pred = std::max(worst_pred, (pred - ref_pred).cwiseAbs().maxCoeff());
    } else {
      // Bias is not pinned by the oracle; compare the kernel expansion.
      ++without_free;
      const Eigen::VectorXd ref_part = K * coef;
      const Eigen::VectorXd own_part = pred - Eigen::VectorXd::Constant(n, model.bias);
      worst_pred = std::max(worst_pred, (own_part - ref_part).cwiseAbs().maxCoeff());
    }
  }
  c.require(worst_obj <= tol::kDualObjective, "dual objective vs QP oracle");
  c.require(worst_pred <= tol::kSvrPrediction, "predictions vs QP oracle");

  Eigen::MatrixXd X(60, 1), Xt(25, 1);
  Eigen::VectorXd y(60), yt(25);
  for (int i = 0; i < 60; ++i) y(i) = 2.0 * (X(i, 0) = -3.0 + 6.0 * i / 59.0) + 1.0;
  for (int i = 0; i < 25; ++i) yt(i) = 2.0 * (Xt(i, 0) = -2.9 + 5.8 * i / 24.0) + 1.0;
  SvrConfig lin;
  lin.cost = 1000.0;
  lin.epsilon = 0.01;
  const double test_rmse = evaluation::rmse(svr::svr_predict(svr::svr_fit(X, y, lin), Xt), yt);
  c.require(test_rmse < 2.0 * 0.01, "noiseless linear RMSE < 2 eps");
  c.note << "max |dual obj diff|=" << worst_obj << " max |pred diff|=" << worst_pred << " (" << without_free
         << " fits without free SV) linear test RMSE=" << test_rmse;
}

// ---- synthetic benchmark ----

void benchmark(Check& c) {
  const auto start = std::chrono::steady_clock::now();
  synthetic::Config gen;
  gen.seed = 42;
  const auto rows = synthetic::generate(gen);

  // (a) in-sample OLS R2 per spec.
  std::array<double, 3> r2{};
  for (int s = 1; s <= 3; ++s) r2[static_cast<std::size_t>(s - 1)] = regression::ols_fit(regression::encode(rows, spec_from_number(s))).r_squared;
  c.require(r2[2] > r2[1] && r2[1] > r2[0], "(a) OLS R2 spec3 > spec2 > spec1");
  c.note << "(a) R2 " << r2[0] << " < " << r2[1] << " < " << r2[2] << "; ";

  // (b) every model: spec3 test RMSE below spec2.
  evaluation::SuiteConfig suite;
  suite.specs = {ModelSpec::Spec2, ModelSpec::Spec3};
  for (auto& s : suite.svr) s.standardize = true;
  suite.seed = 42;
  suite.threads = std::max(1u, std::thread::hardware_concurrency());
  const auto reports = evaluation::run_model_suite(rows, suite);
  std::map<std::string, std::map<int, double>> table;
  for (const auto& r : reports) {
    c.require(r.ok(), "(b) cell " + r.label() + " ran");
    table[r.label()][spec_number(r.spec)] = r.rmse_test;
  }
  c.note << "(b)";
  for (const auto& [label, by_spec] : table) {
    c.require(by_spec.at(3) < by_spec.at(2), "(b) " + label + " spec3 < spec2");
    c.note << " " << label << " " << by_spec.at(2) << "->" << by_spec.at(3);
  }
  c.note << "; ";

  // (c) z = 1.5 against no filter, 1% contamination.
  synthetic::Config dirty = gen;
  dirty.contamination = 0.01;
  const auto contaminated = synthetic::generate(dirty);
  evaluation::TrainOptions opt;
  opt.kind = ModelKind::Forest;
  opt.spec = ModelSpec::Spec3;
  opt.seed = 42;
  opt.threads = suite.threads;
  const double unfiltered = evaluation::train_and_evaluate(contaminated, opt).report.rmse_test;
  opt.zscore = 1.5;
  const double filtered = evaluation::train_and_evaluate(contaminated, opt).report.rmse_test;
  c.require(filtered < unfiltered, "(c) z-score filter improves forest RMSE");
  c.note << "(c) forest RMSE " << unfiltered << " -> " << filtered << " with z=1.5; ";

  // (d) best grid cell is no worse than any other.
  evaluation::ForestGrid grid{{10, 25}, {4, 8}, {1.5, 10.0}};
  const auto cells = evaluation::grid_search_forest(contaminated, ModelSpec::Spec4, grid, 42, 0.7, suite.threads);
  c.require(cells.size() == 8, "(d) full grid evaluated");
  for (const auto& r : cells) c.require(r.ok() && cells.front().rmse_test <= r.rmse_test, "(d) best cell minimal");
  c.note << "(d) best of " << cells.size() << " cells: trees=" << cells.front().hyperparameters["n_trees"]
         << " mtry=" << cells.front().hyperparameters["mtry"] << " z=" << cells.front().hyperparameters["zscore"]
         << " rmse=" << cells.front().rmse_test << "; ";

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.require(secs < tol::kSuiteSeconds, "suite runtime");
  c.note << secs << " s";
}

// ---- ingest ----

std::pair<int, std::string> run_binary(const std::string& args) {
  const std::string cmd = std::string(RENTYIELD_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

void ingest_check(Check& c) {
  testutil::TempDir dir;
  const auto golden = ingest::read_file(golden_path());

  // Library route.
  std::vector<Listing> all;
  for (auto op : {Operation::Rent, Operation::Sale}) {
    ingest::SearchQuery q;
    q.operation = op;
    const auto part = ingest::ingest_fixture_pages(q, ingest::FixtureSource{testutil::fixtures_dir() / "payloads"});
    all.insert(all.end(), part.begin(), part.end());
  }
  ingest::store_dataset(dir.file("lib.jsonl"), ingest::impute_price_by_area(ingest::dedupe(all).listings));
  c.require(ingest::read_file(dir.file("lib.jsonl")) == golden, "library route byte-for-byte");

  // Binary route.
  const auto [code, out] = run_binary("ingest --fixtures " + (testutil::fixtures_dir() / "payloads").string() +
                                      " --out " + dir.file("cli.jsonl"));
  c.require(code == 0, "cli ingest exit code");
  c.require(code == 0 && ingest::read_file(dir.file("cli.jsonl")) == golden, "cli route byte-for-byte");

  // Dedupe and persistence on random listings with injected duplicates.
  auto ls = testutil::random_listings(77, 1000);
  Rng rng(78);
  for (int i = 0; i < 150; ++i) {
    auto dup = ls[rng.uniform_index(ls.size())];
    dup.price += 1.0;
    ls.push_back(dup);
  }
  const auto once = ingest::dedupe(ls);
  const auto twice = ingest::dedupe(once.listings);
  c.require(twice.removed == 0 && twice.listings == once.listings, "dedupe idempotent");
  c.require(once.listings.size() == 1000, "dedupe keeps one per key");
  ingest::store_dataset(dir.file("rt.jsonl"), once.listings);
  c.require(ingest::load_dataset(dir.file("rt.jsonl")) == once.listings, "store/load round trip");
  c.note << "golden " << golden.size() << " bytes matched by library and binary; 1150 -> " << once.listings.size()
         << " after dedupe";
}

// ---- CLI / API coherence ----

void coherence(Check& c) {
  const auto dataset = ingest::load_dataset(golden_path());
  const auto state = service::make_state(dataset);
  httplib::Server server;
  service::install_routes(server, state);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  Rng rng(4242);
  std::size_t values = 0;
  for (int k = 0; k < 21; ++k) {
    char rate[32], tcost[32], down[32];
    std::snprintf(rate, sizeof rate, "%.6f", k == 20 ? 0.0 : rng.uniform(0.0, 0.008));
    std::snprintf(tcost, sizeof tcost, "%.4f", rng.uniform(0.0, 0.12));
    std::snprintf(down, sizeof down, "%.4f", rng.uniform(0.0, 0.6));
    const int term = 60 + static_cast<int>(rng.uniform_index(421));
    const std::string query = std::string("rate=") + rate + "&term=" + std::to_string(term) + "&tcost=" + tcost +
                              "&down=" + down;
    const std::string flags = std::string(" --rate ") + rate + " --term " + std::to_string(term) + " --tcost " + tcost +
                              " --down " + down;

    auto res = client.Get("/api/index?" + query);
    c.require(res && res->status == 200, "api status");
    if (!res || res->status != 200) continue;
    const auto api = Json::parse(res->body);
    service::Request req;
    req.path = "/api/index";
    req.params = {{"rate", rate}, {"term", std::to_string(term)}, {"tcost", tcost}, {"down", down}};
    const auto direct = service::dispatch(state, req);
    c.require(direct.status == 200 && Json::parse(direct.body) == api, "dispatch equals http");
    const auto [jcode, jout] = run_binary("index --format json --dataset " + golden_path().string() + flags);
    const auto [ccode, cout_] = run_binary("index --dataset " + golden_path().string() + flags);
    c.require(jcode == 0 && ccode == 0, "cli exit codes");
    if (jcode != 0 || ccode != 0) continue;
    const auto cli = Json::parse(jout);
    c.require(cli.size() == api.size(), "cell counts");
    std::istringstream csv(cout_);
    std::string line;
    std::getline(csv, line);
    for (std::size_t i = 0; i < std::min(cli.size(), api.size()); ++i) {
      c.require(cli[i]["neighborhood"] == api[i]["neighborhood"] && cli[i]["bucket"] == api[i]["bucket"], "cell keys");
      c.require(cli[i]["index"] == api[i]["index"], "json index values");
      c.require(cli[i]["n_rent"] == api[i]["n_rent"] && cli[i]["n_sale"] == api[i]["n_sale"], "counts");
      std::getline(csv, line);
      const std::string expected_index = api[i]["index"].is_null() ? "" : finance::format_index(api[i]["index"].get<double>());
      const std::string expected = api[i]["neighborhood"].get<std::string>() + "," + api[i]["bucket"].get<std::string>() +
                                   "," + expected_index + "," + std::to_string(api[i]["n_rent"].get<int>()) + "," +
                                   std::to_string(api[i]["n_sale"].get<int>());
      c.require(line == expected, "csv row vs api");
      if (k == 20 && !api[i]["index"].is_null())
        c.require(std::isfinite(api[i]["index"].get<double>()), "rate=0 finite");
      ++values;
    }
  }
  auto zero = client.Get("/api/index?rate=0");
  c.require(zero && zero->status == 200, "rate=0 status");
  if (zero) {
    std::size_t finite = 0;
    for (const auto& cell : Json::parse(zero->body))
      if (!cell["index"].is_null()) finite += std::isfinite(cell["index"].get<double>());
    c.require(finite > 0, "rate=0 finite values");
  }
  server.stop();
  th.join();
  c.note << "21 parameter sets (last with rate=0), " << values << " cells equal across dispatch, HTTP, CLI json and CLI csv";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"mortgage worked example", mortgage},
      {"amortization oracle", amortization},
      {"index arithmetic", index_arithmetic},
      {"index properties", index_properties},
      {"ols oracle", ols},
      {"forest oracle", forest_check},
      {"svr oracle", svr_check},
      {"synthetic benchmark", benchmark},
      {"ingest golden files", ingest_check},
      {"cli/api coherence", coherence},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.ok = false;
      c.note << "exception: " << e.what();
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << name << " | " << c.note.str() << std::endl;
    failures += c.ok ? 0 : 1;
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
