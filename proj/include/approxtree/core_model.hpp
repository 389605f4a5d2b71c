#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "approxtree/errors.hpp"

namespace approxtree {

enum class ColumnKind { Continuous, Categorical };

/// One covariate. Continuous columns carry their observed range; categorical
/// columns carry an ordered level list and are stored as level indices.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> levels;

  static Column continuous(std::string name, double min, double max);
  static Column categorical(std::string name, std::vector<std::string> levels);

  /// Width used to scale smoothing noise. Categorical columns report the
  /// index span of their levels.
  double range() const;

  bool operator==(const Column&) const = default;
};

class CovariateSchema {
 public:
  CovariateSchema() = default;
  explicit CovariateSchema(std::vector<Column> columns);

  std::size_t size() const noexcept { return columns_.size(); }
  const Column& column(std::size_t j) const { return columns_.at(j); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::optional<std::size_t> index_of(const std::string& name) const;

  bool operator==(const CovariateSchema&) const = default;

 private:
  std::vector<Column> columns_;
};

/// Row-major covariate matrix plus optional hard labels in {0..k-1}.
class Dataset {
 public:
  Dataset(CovariateSchema schema, std::vector<double> values, std::optional<std::vector<int>> labels,
          int num_classes, std::vector<std::string> class_names = {});

  const CovariateSchema& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return schema_.size(); }
  int num_classes() const noexcept { return num_classes_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols(), cols()}; }
  double at(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool has_labels() const noexcept { return labels_.has_value(); }
  const std::vector<int>& labels() const;

 private:
  CovariateSchema schema_;
  std::vector<double> values_;
  std::optional<std::vector<int>> labels_;
  int num_classes_;
  std::vector<std::string> class_names_;
  std::size_t rows_ = 0;
};

/// Throws SchemaViolation unless x has the schema's arity and every
/// categorical entry is a valid level index.
void check_point(const CovariateSchema& schema, std::span<const double> x);

class ClassDistribution {
 public:
  ClassDistribution() = default;
  explicit ClassDistribution(std::vector<double> probs);

  static ClassDistribution uniform(std::size_t k);
  static ClassDistribution indicator(std::size_t k, std::size_t c);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t j) const { return probs_[j]; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  /// Lowest index among the maxima.
  std::size_t argmax() const;

 private:
  std::vector<double> probs_;
};

/// G(x) = 1 iff x[covariate] > threshold. Categorical thresholds sit between
/// adjacent level indices, so the same rule covers ordered-level cuts.
struct SplitRule {
  std::size_t covariate = 0;
  double threshold = 0.0;

  bool goes_right(std::span<const double> x) const { return x[covariate] > threshold; }
  bool operator==(const SplitRule&) const = default;
};

/// Lexicographic (covariate, threshold) order, used to break Gini ties.
bool rule_less(const SplitRule& a, const SplitRule& b);

enum class Side { Left, Right };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;  // (lo, hi] after a right-side cut, [lo, hi] otherwise

  bool contains(double v) const { return (lo_open ? v > lo : v >= lo) && v <= hi; }
  bool operator==(const Interval&) const = default;
};

class Region {
 public:
  Region() = default;
  explicit Region(const CovariateSchema& schema);

  std::size_t size() const noexcept { return bounds_.size(); }
  const Interval& bound(std::size_t j) const { return bounds_.at(j); }
  bool categorical(std::size_t j) const { return categorical_.at(j); }

  bool contains(std::span<const double> x) const;
  bool contains(std::size_t j, double v) const { return bounds_[j].contains(v); }
  /// Admissible level indices of a categorical covariate.
  std::vector<std::size_t> levels(std::size_t j) const;

  Region refine(const SplitRule& rule, Side side) const;

  bool operator==(const Region&) const = default;

 private:
  std::vector<Interval> bounds_;
  std::vector<bool> categorical_;
};

Region refine_region(const Region& parent, const SplitRule& rule, Side side);

struct NodeAnnotation {
  std::size_t pseudo_samples_used = 0;
  double split_pvalue = 0.0;
  bool capped = false;
  std::optional<double> stop_pvalue;
  ClassDistribution class_estimate;
};

struct TreeNode {
  std::optional<SplitRule> rule;
  std::optional<std::pair<std::size_t, std::size_t>> children;
  Region region;
  NodeAnnotation stat;
  std::size_t depth = 1;  // root is layer 1

  bool is_leaf() const noexcept { return !children.has_value(); }
};

/// Arena-backed binary tree; node 0 is the root.
class ApproxTree {
 public:
  ApproxTree() = default;
  explicit ApproxTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  std::size_t size() const noexcept { return nodes_.size(); }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  TreeNode& node(std::size_t id) { return nodes_.at(id); }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  std::size_t add_node(TreeNode node);
  std::size_t depth() const;
  std::size_t leaf_for(std::span<const double> x) const;
  const ClassDistribution& predict(std::span<const double> x) const {
    return nodes_[leaf_for(x)].stat.class_estimate;
  }

 private:
  std::vector<TreeNode> nodes_;
};

inline constexpr int kDefaultFingerprintPrecision = 10;

/// Breadth-first serialization of the tree truncated to `depth` layers.
/// Equal strings mean equal structure.
std::string tree_fingerprint(const ApproxTree& tree, std::size_t depth,
                             int precision = kDefaultFingerprintPrecision);

}  // namespace approxtree
