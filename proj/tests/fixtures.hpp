#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "approxtree/core_model.hpp"
#include "approxtree/teacher_forest.hpp"

namespace fixtures {

using namespace approxtree;

inline CovariateSchema unit_schema(std::size_t m) {
  std::vector<Column> cols;
  for (std::size_t j = 0; j < m; ++j) cols.push_back(Column::continuous("x" + std::to_string(j + 1), 0.0, 1.0));
  return CovariateSchema(std::move(cols));
}

/// Binary labels drawn from a logistic in `signal` (x1 > 0.5) on m uniform columns.
inline Dataset step_data(std::size_t n, std::size_t m, std::uint64_t seed, double lo = 0.1, double hi = 0.9) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n * m);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) v[i * m + j] = u(rng);
    y[i] = u(rng) < (v[i * m] > 0.5 ? hi : lo) ? 1 : 0;
  }
  return Dataset(unit_schema(m), std::move(v), std::move(y), 2);
}

/// One leaf with the given class probabilities.
inline CartTree leaf_tree(std::vector<double> probs) {
  const std::size_t k = probs.size();
  return CartTree({CartTree::Node{}}, std::move(probs), k);
}

/// Stump on `feature` at `threshold`: left leaf `left`, right leaf `right`.
inline CartTree stump(int feature, double threshold, std::vector<double> left, std::vector<double> right) {
  const std::size_t k = left.size();
  std::vector<CartTree::Node> nodes(3);
  nodes[0].feature = feature;
  nodes[0].threshold = threshold;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].leaf = 0;
  nodes[2].leaf = static_cast<std::uint32_t>(k);
  left.insert(left.end(), right.begin(), right.end());
  return CartTree(std::move(nodes), std::move(left), k);
}

/// Forest whose every tree is the same constant leaf.
inline ForestModel constant_forest(const Dataset& data, std::vector<double> probs, std::size_t trees = 10) {
  std::vector<CartTree> ts(trees, leaf_tree(probs));
  std::vector<std::vector<std::uint32_t>> subs(trees);
  const std::size_t k = std::max<std::size_t>(1, data.rows() / 5);
  for (std::size_t b = 0; b < trees; ++b) {
    for (std::size_t i = 0; i < k; ++i) subs[b].push_back(static_cast<std::uint32_t>((b + i) % data.rows()));
    std::sort(subs[b].begin(), subs[b].end());
  }
  ForestConfig cfg;
  cfg.num_trees = trees;
  cfg.subsample_size = k;
  return ForestModel(std::move(ts), std::move(subs), data.rows(), cfg, data.schema(), static_cast<int>(probs.size()));
}

/// Forest of stumps on x1 at 0.5 whose leaf values are `left` / `right`.
inline ForestModel stump_forest(const Dataset& data, double left_p1, double right_p1, std::size_t trees = 10) {
  std::vector<CartTree> ts(trees, stump(0, 0.5, {1 - left_p1, left_p1}, {1 - right_p1, right_p1}));
  std::vector<std::vector<std::uint32_t>> subs(trees);
  const std::size_t k = std::max<std::size_t>(1, data.rows() / 5);
  for (std::size_t b = 0; b < trees; ++b) {
    for (std::size_t i = 0; i < k; ++i) subs[b].push_back(static_cast<std::uint32_t>((b * 7 + i) % data.rows()));
    std::sort(subs[b].begin(), subs[b].end());
    subs[b].erase(std::unique(subs[b].begin(), subs[b].end()), subs[b].end());
  }
  ForestConfig cfg;
  cfg.num_trees = trees;
  cfg.subsample_size = k;
  return ForestModel(std::move(ts), std::move(subs), data.rows(), cfg, data.schema(), 2);
}

}  // namespace fixtures
