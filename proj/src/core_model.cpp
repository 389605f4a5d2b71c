#include "approxtree/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <set>

namespace approxtree {

Column Column::continuous(std::string name, double min, double max) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::Continuous;
  c.min = min;
  c.max = max;
  return c;
}

Column Column::categorical(std::string name, std::vector<std::string> levels) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::Categorical;
  c.levels = std::move(levels);
  c.min = 0.0;
  c.max = c.levels.empty() ? 0.0 : static_cast<double>(c.levels.size() - 1);
  return c;
}

double Column::range() const { return max - min; }

CovariateSchema::CovariateSchema(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.name).second) {
      throw Error(ErrorKind::SchemaViolation, "duplicate column name '" + c.name + "'");
    }
    if (c.kind == ColumnKind::Continuous && !(c.min <= c.max)) {
      throw Error(ErrorKind::SchemaViolation, "column '" + c.name + "' has min > max");
    }
    if (c.kind == ColumnKind::Categorical && c.levels.size() < 2) {
      throw Error(ErrorKind::SchemaViolation, "categorical column '" + c.name + "' needs >= 2 levels");
    }
  }
}

std::optional<std::size_t> CovariateSchema::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return j;
  }
  return std::nullopt;
}

void check_point(const CovariateSchema& schema, std::span<const double> x) {
  if (x.size() != schema.size()) {
    throw Error(ErrorKind::SchemaViolation, "point has " + std::to_string(x.size()) + " covariates, schema has " +
                                                std::to_string(schema.size()));
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& c = schema.column(j);
    if (!std::isfinite(x[j])) {
      throw Error(ErrorKind::SchemaViolation, "non-finite value in column '" + c.name + "'");
    }
    if (c.kind == ColumnKind::Categorical) {
      double idx = x[j];
      if (idx != std::floor(idx) || idx < 0 || idx >= static_cast<double>(c.levels.size())) {
        throw Error(ErrorKind::SchemaViolation, "invalid level index in column '" + c.name + "'");
      }
    }
  }
}

Dataset::Dataset(CovariateSchema schema, std::vector<double> values, std::optional<std::vector<int>> labels,
                 int num_classes, std::vector<std::string> class_names)
    : schema_(std::move(schema)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      class_names_(std::move(class_names)) {
  if (num_classes_ < 2) throw Error(ErrorKind::SchemaViolation, "need at least 2 classes");
  if (schema_.size() == 0) throw Error(ErrorKind::SchemaViolation, "schema has no columns");
  if (values_.size() % schema_.size() != 0) {
    throw Error(ErrorKind::SchemaViolation, "value count is not a multiple of the column count");
  }
  rows_ = values_.size() / schema_.size();
  for (std::size_t i = 0; i < rows_; ++i) check_point(schema_, row(i));
  if (labels_) {
    if (labels_->size() != rows_) throw Error(ErrorKind::SchemaViolation, "label count differs from row count");
    for (int y : *labels_) {
      if (y < 0 || y >= num_classes_) throw Error(ErrorKind::SchemaViolation, "label out of range");
    }
  }
  if (class_names_.empty()) {
    for (int c = 0; c < num_classes_; ++c) class_names_.push_back(std::to_string(c));
  }
  if (class_names_.size() != static_cast<std::size_t>(num_classes_)) {
    throw Error(ErrorKind::SchemaViolation, "class name count differs from class count");
  }
}

const std::vector<int>& Dataset::labels() const {
  if (!labels_) throw Error(ErrorKind::InvalidArgument, "dataset has no labels");
  return *labels_;
}

ClassDistribution::ClassDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorKind::InvalidArgument, "empty class distribution");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= -1e-12 && p <= 1.0 + 1e-12)) {
      throw Error(ErrorKind::InvalidArgument, "class probability outside [0,1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "class probabilities do not sum to 1");
  }
  for (double& p : probs_) p = std::clamp(p, 0.0, 1.0);
}

ClassDistribution ClassDistribution::uniform(std::size_t k) {
  return ClassDistribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

ClassDistribution ClassDistribution::indicator(std::size_t k, std::size_t c) {
  std::vector<double> p(k, 0.0);
  p.at(c) = 1.0;
  return ClassDistribution(std::move(p));
}

std::size_t ClassDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

bool rule_less(const SplitRule& a, const SplitRule& b) {
  if (a.covariate != b.covariate) return a.covariate < b.covariate;
  return a.threshold < b.threshold;
}

Region::Region(const CovariateSchema& schema) {
  bounds_.reserve(schema.size());
  for (const auto& c : schema.columns()) {
    bounds_.push_back(Interval{c.min, c.max, false});
    categorical_.push_back(c.kind == ColumnKind::Categorical);
  }
}

bool Region::contains(std::span<const double> x) const {
  for (std::size_t j = 0; j < bounds_.size(); ++j) {
    if (!bounds_[j].contains(x[j])) return false;
  }
  return true;
}

std::vector<std::size_t> Region::levels(std::size_t j) const {
  std::vector<std::size_t> out;
  const auto& b = bounds_.at(j);
  for (double v = std::ceil(b.lo); v <= b.hi; v += 1.0) {
    if (b.contains(v)) out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

Region Region::refine(const SplitRule& rule, Side side) const {
  if (rule.covariate >= bounds_.size()) {
    throw Error(ErrorKind::InvalidArgument, "split covariate out of range");
  }
  const double c = rule.threshold;
  Region child = *this;
  Interval& b = child.bounds_[rule.covariate];
  const Interval& p = bounds_[rule.covariate];
  bool empty = false;
  if (categorical_[rule.covariate]) {
    const double left_hi = std::floor(c);
    const double right_lo = left_hi + 1.0;
    empty = left_hi < p.lo || right_lo > p.hi;
    if (side == Side::Left) {
      b.hi = left_hi;
    } else {
      b.lo = right_lo;
    }
  } else {
    const bool left_empty = p.lo_open ? c <= p.lo : c < p.lo;
    const bool right_empty = c >= p.hi;
    empty = left_empty || right_empty;
    if (side == Side::Left) {
      b.hi = c;
    } else {
      b.lo = c;
      b.lo_open = true;
    }
  }
  if (empty) {
    throw Error(ErrorKind::ThresholdOutsideRegion,
                "threshold " + std::to_string(c) + " does not cut covariate " + std::to_string(rule.covariate));
  }
  return child;
}

Region refine_region(const Region& parent, const SplitRule& rule, Side side) { return parent.refine(rule, side); }

std::size_t ApproxTree::add_node(TreeNode node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::size_t ApproxTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::size_t ApproxTree::leaf_for(std::span<const double> x) const {
  std::size_t id = 0;
  while (!nodes_[id].is_leaf()) {
    const auto& n = nodes_[id];
    id = n.rule->goes_right(x) ? n.children->second : n.children->first;
  }
  return id;
}

std::string tree_fingerprint(const ApproxTree& tree, std::size_t depth, int precision) {
  static constexpr const char* kLeaf = "L";
  if (tree.size() == 0 || tree.node(0).is_leaf() || depth <= 1) return kLeaf;

  std::string out;
  std::deque<std::pair<std::size_t, std::size_t>> queue{{0, 1}};
  char buf[64];
  while (!queue.empty()) {
    auto [id, layer] = queue.front();
    queue.pop_front();
    const auto& n = tree.node(id);
    if (!out.empty()) out += ';';
    if (n.is_leaf() || layer >= depth) {
      out += kLeaf;
      continue;
    }
    double t = n.rule->threshold;
    std::snprintf(buf, sizeof(buf), "%.*f", precision, t);
    std::string th(buf);
    if (th.find_first_not_of("-0.") == std::string::npos) th = th.substr(th[0] == '-' ? 1 : 0);
    out += std::to_string(n.rule->covariate) + '>' + th;
    queue.emplace_back(n.children->first, layer + 1);
    queue.emplace_back(n.children->second, layer + 1);
  }
  return out;
}

}  // namespace approxtree
