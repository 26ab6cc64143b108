#pragma once

// CART regression trees grown to pure leaves and a bagged random forest
// with per-node split-variable sampling.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "rentyield/domain.hpp"
#include "rentyield/error.hpp"
#include "rentyield/rng.hpp"

namespace rentyield::forest {

// Flat node; feature < 0 marks a leaf. Nodes are stored in pre-order
// (node, left subtree, right subtree). Rows with x[feature] <= threshold
// go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prediction = 0.0;  // node mean
  std::size_t n_samples = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  template <typename Row>
  double predict(const Row& x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].prediction;
  }

  bool operator==(const Tree&) const = default;
};

namespace detail {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int mtry, int min_leaf, Rng& rng)
      : X_(X), y_(y), mtry_(mtry), min_leaf_(min_leaf), rng_(rng), features_(static_cast<std::size_t>(X.cols())) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::vector<Eigen::Index> rows) {
    Tree tree;
    grow(tree, rows);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<Eigen::Index>& rows) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::size_t n = rows.size();
    double mean = 0.0;
    for (auto r : rows) mean += y_(r);
    mean /= static_cast<double>(n);
    tree.nodes[static_cast<std::size_t>(id)].prediction = mean;
    tree.nodes[static_cast<std::size_t>(id)].n_samples = n;

    const bool pure = std::all_of(rows.begin(), rows.end(), [&](auto r) { return y_(r) == y_(rows.front()); });
    if (pure || n <= static_cast<std::size_t>(min_leaf_)) return id;

    const Split split = best_split(rows, mean);
    if (split.feature < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (auto r : rows) (X_(r, split.feature) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(tree, left);
    const int r = grow(tree, right);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Candidate features drawn without replacement, then scanned in ascending
  // index order; thresholds are midpoints between consecutive distinct
  // values. A later candidate must beat the incumbent by a relative margin,
  // so near-ties go to the lowest (feature, threshold).
  Split best_split(const std::vector<Eigen::Index>& rows, double mean) {
    const auto p = static_cast<int>(features_.size());
    std::vector<int> candidates;
    if (mtry_ >= p) {
      candidates = features_;
    } else {
      std::vector<int> pool = features_;
      for (int k = 0; k < mtry_; ++k) {
        const auto j = k + static_cast<int>(rng_.uniform_index(static_cast<std::uint64_t>(p - k)));
        std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
      }
      candidates.assign(pool.begin(), pool.begin() + mtry_);
      std::sort(candidates.begin(), candidates.end());
    }

    const std::size_t n = rows.size();
    double sse_parent = 0.0;
    for (auto r : rows) sse_parent += (y_(r) - mean) * (y_(r) - mean);
    const double margin = 1e-12 * sse_parent;

    Split best;
    std::vector<std::pair<double, double>> xs(n);  // (x, centered y)
    for (int f : candidates) {
      for (std::size_t i = 0; i < n; ++i) xs[i] = {X_(rows[i], f), y_(rows[i]) - mean};
      std::stable_sort(xs.begin(), xs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (xs.front().first == xs.back().first) continue;

      double total = 0.0, total_sq = 0.0;
      for (const auto& [x, v] : xs) {
        total += v;
        total_sq += v * v;
      }
      double sum_l = 0.0, sq_l = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        sum_l += xs[i - 1].second;
        sq_l += xs[i - 1].second * xs[i - 1].second;
        if (!(xs[i - 1].first < xs[i].first)) continue;
        const auto nl = static_cast<double>(i);
        const auto nr = static_cast<double>(n - i);
        const double sum_r = total - sum_l;
        const double sse_l = sq_l - sum_l * sum_l / nl;
        const double sse_r = (total_sq - sq_l) - sum_r * sum_r / nr;
        const double gain = sse_parent - sse_l - sse_r;
        if (gain > best.gain + margin) {
          double thr = xs[i - 1].first + (xs[i].first - xs[i - 1].first) / 2.0;
          if (!(thr < xs[i].first)) thr = xs[i - 1].first;
          best = Split{f, thr, gain};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  int mtry_;
  int min_leaf_;
  Rng& rng_;
  std::vector<int> features_;
};

}  // namespace detail

// Grows one tree on `rows` (all rows when empty). Node splits maximize the
// reduction of the sum of squared deviations; growth stops at pure nodes,
// at nodes with at most min_leaf rows, or when no split improves.
inline Tree tree_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int mtry, int min_leaf, Rng& rng,
                     std::vector<Eigen::Index> rows = {}) {
  if (X.rows() != y.size()) fail(Errc::LengthMismatch, "X and y row counts differ");
  if (X.rows() == 0) fail(Errc::TooFewRows, "tree needs at least one row");
  if (mtry < 1 || mtry > X.cols()) fail(Errc::InvalidArgument, "mtry outside [1, p]");
  if (min_leaf < 1) fail(Errc::InvalidArgument, "min_leaf must be >= 1");
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(X.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  }
  return detail::TreeBuilder(X, y, mtry, min_leaf, rng).build(std::move(rows));
}

struct Forest {
  ForestConfig config;  // mtry resolved
  std::size_t n_features = 0;
  std::vector<Tree> trees;

  bool operator==(const Forest& o) const {
    return n_features == o.n_features && trees == o.trees && config.n_trees == o.config.n_trees &&
           config.mtry == o.config.mtry && config.min_leaf == o.config.min_leaf &&
           config.bootstrap == o.config.bootstrap && config.seed == o.config.seed;
  }
};

// Tree t draws its bootstrap sample and split candidates from
// Rng::stream(seed, t), so the result does not depend on `threads`.
inline Forest forest_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, ForestConfig cfg,
                         unsigned threads = 1) {
  if (X.rows() != y.size()) fail(Errc::LengthMismatch, "X and y row counts differ");
  if (X.rows() == 0) fail(Errc::TooFewRows, "forest needs at least one row");
  cfg.validate(static_cast<std::size_t>(X.cols()));
  cfg.mtry = cfg.resolved_mtry(static_cast<std::size_t>(X.cols()));

  Forest forest;
  forest.config = cfg;
  forest.n_features = static_cast<std::size_t>(X.cols());
  forest.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  const auto n = static_cast<std::uint64_t>(X.rows());

  auto fit_one = [&](std::size_t t) {
    Rng rng = Rng::stream(cfg.seed, t);
    std::vector<Eigen::Index> rows(n);
    if (cfg.bootstrap) {
      for (auto& r : rows) r = static_cast<Eigen::Index>(rng.uniform_index(n));
    } else {
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    }
    forest.trees[t] = tree_fit(X, y, *cfg.mtry, cfg.min_leaf, rng, std::move(rows));
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfg.n_trees)));
  if (threads == 1) {
    for (std::size_t t = 0; t < forest.trees.size(); ++t) fit_one(t);
    return forest;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t t = next++; t < forest.trees.size(); t = next++) fit_one(t);
    });
  }
  for (auto& th : pool) th.join();
  return forest;
}

inline Eigen::VectorXd forest_predict(const Forest& forest, const Eigen::MatrixXd& X_new) {
  if (static_cast<std::size_t>(X_new.cols()) != forest.n_features)
    fail(Errc::SpecMismatch, "expected " + std::to_string(forest.n_features) + " features, got " +
                                 std::to_string(X_new.cols()));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X_new.rows());
  for (Eigen::Index i = 0; i < X_new.rows(); ++i) {
    const auto row = X_new.row(i);
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += tree.predict(row);
    out(i) = sum / static_cast<double>(forest.trees.size());
  }
  return out;
}

inline Json to_json(const Forest& f) {
  Json trees = Json::array();
  for (const auto& t : f.trees) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.prediction, n.n_samples});
    trees.push_back(std::move(nodes));
  }
  return Json{{"n_trees", f.config.n_trees},
              {"mtry", *f.config.mtry},
              {"min_leaf", f.config.min_leaf},
              {"bootstrap", f.config.bootstrap},
              {"seed", f.config.seed},
              {"n_features", f.n_features},
              {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const Json& j) {
  Forest f;
  f.config.n_trees = j.at("n_trees").get<int>();
  f.config.mtry = j.at("mtry").get<int>();
  f.config.min_leaf = j.at("min_leaf").get<int>();
  f.config.bootstrap = j.at("bootstrap").get<bool>();
  f.config.seed = j.at("seed").get<std::uint64_t>();
  f.n_features = j.at("n_features").get<std::size_t>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    for (const auto& jn : jt) {
      TreeNode n;
      n.feature = jn.at(0).get<int>();
      n.threshold = jn.at(1).get<double>();
      n.left = jn.at(2).get<int>();
      n.right = jn.at(3).get<int>();
      n.prediction = jn.at(4).get<double>();
      n.n_samples = jn.at(5).get<std::size_t>();
      t.nodes.push_back(n);
    }
    f.trees.push_back(std::move(t));
  }
  if (static_cast<int>(f.trees.size()) != f.config.n_trees) fail(Errc::SchemaViolation, "tree count mismatch");
  return f;
}

}  // namespace rentyield::forest
