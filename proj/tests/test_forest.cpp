#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles/tree_oracle.hpp"
#include "rentyield/forest.hpp"

using namespace rentyield;
using namespace rentyield::forest;

namespace {

struct Data {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

// Coarse grids on some columns force ties between candidate splits.
Data make_data(std::uint64_t seed, Eigen::Index n, Eigen::Index p) {
  Rng rng(seed);
  Data d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j)
      d.X(i, j) = j % 2 ? static_cast<double>(rng.uniform_index(5)) : std::round(rng.uniform(0.0, 100.0) * 10.0) / 10.0;
    d.y(i) = 3.0 * d.X(i, 0) + 20.0 * d.X(i, p > 1 ? 1 : 0) + std::round(rng.normal(0.0, 10.0));
  }
  return d;
}

void expect_same_tree(const Tree& tree, const oracle::TreeNode& root) {
  std::vector<oracle::FlatNode> flat;
  oracle::flatten(root, flat);
  ASSERT_EQ(tree.nodes.size(), flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const auto& n = tree.nodes[i];
    ASSERT_EQ(n.feature, flat[i].feature) << "node " << i;
    ASSERT_EQ(n.n_samples, flat[i].n) << "node " << i;
    if (n.is_leaf())
      EXPECT_NEAR(n.prediction, flat[i].value, 1e-9 * (1.0 + std::abs(flat[i].value)));
    else
      EXPECT_EQ(n.threshold, flat[i].value);
  }
}

}  // namespace

TEST(Tree, MatchesExhaustiveOracle) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto d = make_data(seed, 60 + static_cast<Eigen::Index>(seed) * 5, 3);
    for (int min_leaf : {1, 5}) {
      Rng rng(seed);
      const auto tree = tree_fit(d.X, d.y, 3, min_leaf, rng);
      std::vector<std::size_t> rows(static_cast<std::size_t>(d.X.rows()));
      std::iota(rows.begin(), rows.end(), 0u);
      const auto root = oracle::exhaustive_tree(testutil::to_rows(d.X), testutil::to_std(d.y), rows,
                                                static_cast<std::size_t>(min_leaf));
      expect_same_tree(tree, *root);
    }
  }
}

TEST(Tree, BootstrapRowsMatchOracle) {
  const auto d = make_data(77, 80, 4);
  Rng draw(3);
  std::vector<Eigen::Index> rows;
  std::vector<std::size_t> orows;
  for (int i = 0; i < 80; ++i) {
    const auto r = draw.uniform_index(80);
    rows.push_back(static_cast<Eigen::Index>(r));
    orows.push_back(r);
  }
  Rng rng(1);
  const auto tree = tree_fit(d.X, d.y, 4, 1, rng, rows);
  expect_same_tree(tree, *oracle::exhaustive_tree(testutil::to_rows(d.X), testutil::to_std(d.y), orows, 1));
}

TEST(Tree, FullDepthInterpolatesDistinctInputs) {
  Rng gen(4);
  Eigen::MatrixXd X(100, 2);
  Eigen::VectorXd y(100);
  for (int i = 0; i < 100; ++i) {
    X(i, 0) = i;
    X(i, 1) = gen.uniform(0, 1);
    y(i) = gen.normal();
  }
  Rng rng(0);
  const auto tree = tree_fit(X, y, 2, 1, rng);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(tree.predict(X.row(i)), y(i));
}

TEST(Tree, RejectsBadArguments) {
  const auto d = make_data(1, 10, 2);
  Rng rng(0);
  EXPECT_THROW(tree_fit(d.X, d.y, 0, 1, rng), Error);
  EXPECT_THROW(tree_fit(d.X, d.y, 3, 1, rng), Error);
  EXPECT_THROW(tree_fit(d.X, d.y, 1, 0, rng), Error);
  EXPECT_THROW(tree_fit(d.X, d.y.head(5), 1, 1, rng), Error);
}

TEST(Forest, ThreadCountDoesNotChangeResult) {
  const auto d = make_data(9, 200, 5);
  ForestConfig cfg;
  cfg.n_trees = 24;
  cfg.seed = 123;
  const auto one = forest_fit(d.X, d.y, cfg, 1);
  EXPECT_EQ(one, forest_fit(d.X, d.y, cfg, 2));
  EXPECT_EQ(one, forest_fit(d.X, d.y, cfg, 8));
  EXPECT_EQ(*one.config.mtry, 2);
  cfg.seed = 124;
  EXPECT_FALSE(one == forest_fit(d.X, d.y, cfg, 1));
}

TEST(Forest, PrefixStableInTreeCount) {
  const auto d = make_data(10, 120, 4);
  ForestConfig small;
  small.n_trees = 5;
  small.seed = 8;
  ForestConfig big = small;
  big.n_trees = 15;
  const auto a = forest_fit(d.X, d.y, small);
  const auto b = forest_fit(d.X, d.y, big, 3);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(a.trees[t], b.trees[t]);
}

TEST(Forest, PredictionsStayInTargetRange) {
  const auto d = make_data(11, 150, 3);
  ForestConfig cfg;
  cfg.n_trees = 30;
  const auto f = forest_fit(d.X, d.y, cfg, 2);
  const auto probe = make_data(12, 300, 3);
  Eigen::MatrixXd wide = probe.X * 3.0 - Eigen::MatrixXd::Constant(300, 3, 50.0);
  const auto pred = forest_predict(f, wide);
  EXPECT_GE(pred.minCoeff(), d.y.minCoeff());
  EXPECT_LE(pred.maxCoeff(), d.y.maxCoeff());
}

TEST(Forest, WithoutBootstrapAllTreesSeeFullData) {
  const auto d = make_data(13, 90, 3);
  ForestConfig cfg;
  cfg.n_trees = 4;
  cfg.mtry = 3;
  cfg.bootstrap = false;
  const auto f = forest_fit(d.X, d.y, cfg);
  for (const auto& t : f.trees) {
    EXPECT_EQ(t.nodes.front().n_samples, 90u);
    EXPECT_EQ(t, f.trees.front());
  }
}

TEST(Forest, JsonRoundTripAndSpecMismatch) {
  const auto d = make_data(14, 80, 3);
  ForestConfig cfg;
  cfg.n_trees = 6;
  cfg.min_leaf = 3;
  const auto f = forest_fit(d.X, d.y, cfg);
  const auto back = forest_from_json(Json::parse(to_json(f).dump()));
  EXPECT_EQ(back, f);
  EXPECT_EQ(forest_predict(back, d.X), forest_predict(f, d.X));
  EXPECT_THROW(forest_predict(f, Eigen::MatrixXd::Zero(2, 4)), Error);
  try {
    forest_predict(f, Eigen::MatrixXd::Zero(2, 2));
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SpecMismatch);
  }
  auto bad = to_json(f);
  bad["n_trees"] = 7;
  EXPECT_THROW(forest_from_json(bad), Error);
}
