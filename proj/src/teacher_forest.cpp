#include "approxtree/teacher_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "approxtree/stats.hpp"
#include "approxtree/tree_io.hpp"

namespace approxtree {

CartTree::CartTree(std::vector<Node> nodes, std::vector<double> leaf_probs, std::size_t num_classes)
    : nodes_(std::move(nodes)), leaf_probs_(std::move(leaf_probs)), num_classes_(num_classes) {}

namespace {

class CartGrower {
 public:
  CartGrower(const Dataset& data, std::size_t mtry, std::size_t min_leaf, Rng& rng)
      : data_(data), labels_(data.labels()), k_(static_cast<std::size_t>(data.num_classes())),
        mtry_(mtry), min_leaf_(min_leaf), rng_(rng) {
    features_.resize(data.cols());
    std::iota(features_.begin(), features_.end(), 0);
  }

  CartTree grow(std::vector<std::uint32_t> samples) {
    nodes_.clear();
    leaf_probs_.clear();
    nodes_.emplace_back();
    struct Pending {
      std::uint32_t node;
      std::vector<std::uint32_t> samples;
    };
    std::vector<Pending> stack;
    stack.push_back({0, std::move(samples)});
    while (!stack.empty()) {
      Pending cur = std::move(stack.back());
      stack.pop_back();
      auto split = best_split(cur.samples);
      if (!split) {
        make_leaf(cur.node, cur.samples);
        continue;
      }
      std::vector<std::uint32_t> left, right;
      for (auto i : cur.samples) {
        (data_.at(i, split->covariate) > split->threshold ? right : left).push_back(i);
      }
      auto l = static_cast<std::uint32_t>(nodes_.size());
      nodes_.emplace_back();
      auto r = static_cast<std::uint32_t>(nodes_.size());
      nodes_.emplace_back();
      auto& n = nodes_[cur.node];
      n.feature = static_cast<int>(split->covariate);
      n.threshold = split->threshold;
      n.left = l;
      n.right = r;
      stack.push_back({r, std::move(right)});
      stack.push_back({l, std::move(left)});
    }
    return CartTree(std::move(nodes_), std::move(leaf_probs_), k_);
  }

 private:
  void make_leaf(std::uint32_t node, const std::vector<std::uint32_t>& samples) {
    nodes_[node].feature = -1;
    nodes_[node].leaf = static_cast<std::uint32_t>(leaf_probs_.size());
    std::vector<double> counts(k_, 0.0);
    for (auto i : samples) counts[static_cast<std::size_t>(labels_[i])] += 1.0;
    for (double c : counts) leaf_probs_.push_back(c / static_cast<double>(samples.size()));
  }

  std::optional<SplitRule> best_split(const std::vector<std::uint32_t>& samples) {
    const std::size_t n = samples.size();
    if (n < 2 * min_leaf_) return std::nullopt;
    std::vector<double> total(k_, 0.0);
    for (auto i : samples) total[static_cast<std::size_t>(labels_[i])] += 1.0;
    if (std::count_if(total.begin(), total.end(), [](double c) { return c > 0; }) <= 1) return std::nullopt;

    double parent_score = 0.0;
    for (double c : total) parent_score += c * c;
    parent_score /= static_cast<double>(n);

    // partial Fisher-Yates: the first mtry entries are the candidate covariates
    for (std::size_t f = 0; f < mtry_; ++f) {
      std::uniform_int_distribution<std::size_t> pick(f, features_.size() - 1);
      std::swap(features_[f], features_[pick(rng_)]);
    }

    std::optional<SplitRule> best;
    double best_score = parent_score + 1e-12;
    std::vector<std::pair<double, int>> column(n);
    std::vector<double> left(k_);
    for (std::size_t f = 0; f < mtry_; ++f) {
      const std::size_t j = features_[f];
      for (std::size_t s = 0; s < n; ++s) column[s] = {data_.at(samples[s], j), labels_[samples[s]]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0);
      double left_sq = 0.0;
      double right_sq = 0.0;
      for (double t : total) right_sq += t * t;
      std::vector<double> right = total;
      for (std::size_t s = 0; s + 1 < n; ++s) {
        const auto c = static_cast<std::size_t>(column[s].second);
        left_sq += 2.0 * left[c] + 1.0;
        left[c] += 1.0;
        right_sq -= 2.0 * right[c] - 1.0;
        right[c] -= 1.0;
        const std::size_t nl = s + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        if (column[s].first == column[s + 1].first) continue;
        const double score = left_sq / static_cast<double>(nl) + right_sq / static_cast<double>(nr);
        if (score > best_score) {
          best_score = score;
          double mid = 0.5 * (column[s].first + column[s + 1].first);
          if (!(mid < column[s + 1].first)) mid = column[s].first;
          best = SplitRule{j, mid};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const std::vector<int>& labels_;
  std::size_t k_;
  std::size_t mtry_;
  std::size_t min_leaf_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::vector<CartTree::Node> nodes_;
  std::vector<double> leaf_probs_;
};

}  // namespace

ForestModel::ForestModel(std::vector<CartTree> trees, std::vector<std::vector<std::uint32_t>> subsamples,
                         std::size_t sample_size, ForestConfig config, CovariateSchema schema, int num_classes)
    : trees_(std::move(trees)),
      subsamples_(std::move(subsamples)),
      sample_size_(sample_size),
      config_(config),
      schema_(std::move(schema)),
      num_classes_(num_classes) {
  if (trees_.empty() || trees_.size() != subsamples_.size()) {
    throw Error(ErrorKind::InvalidArgument, "forest needs one subsample per tree");
  }
  membership_.assign(trees_.size() * sample_size_, 0);
  for (std::size_t b = 0; b < subsamples_.size(); ++b) {
    for (auto i : subsamples_[b]) {
      if (i >= sample_size_) throw Error(ErrorKind::InvalidArgument, "subsample index out of range");
      membership_[b * sample_size_ + i] = 1;
    }
  }
}

ClassDistribution ForestModel::predict_proba(std::span<const double> x) const {
  check_point(schema_, x);
  std::vector<double> out(static_cast<std::size_t>(num_classes_));
  predict_proba_into(x, out);
  return ClassDistribution(std::move(out));
}

void ForestModel::predict_proba_into(std::span<const double> points, std::span<double> out) const {
  const std::size_t m = schema_.size();
  const auto k = static_cast<std::size_t>(num_classes_);
  const std::size_t count = points.size() / m;
  const double scale = 1.0 / static_cast<double>(trees_.size());
  for (std::size_t p = 0; p < count; ++p) {
    auto x = points.subspan(p * m, m);
    double* dst = out.data() + p * k;
    std::fill(dst, dst + k, 0.0);
    for (const auto& tree : trees_) {
      const double* leaf = tree.leaf_probs(x);
      for (std::size_t c = 0; c < k; ++c) dst[c] += leaf[c];
    }
    for (std::size_t c = 0; c < k; ++c) dst[c] *= scale;
  }
}

ForestModel fit_forest(const Dataset& data, ForestConfig cfg) {
  if (!data.has_labels()) throw Error(ErrorKind::InvalidArgument, "teacher training needs labels");
  const std::size_t n = data.rows();
  const std::size_t m = data.cols();
  if (cfg.subsample_size == 0) cfg.subsample_size = std::max<std::size_t>(1, n / 5);
  if (cfg.mtry == 0) cfg.mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
  if (n <= cfg.subsample_size) {
    throw Error(ErrorKind::DatasetTooSmall,
                "n=" + std::to_string(n) + " must exceed subsample size " + std::to_string(cfg.subsample_size));
  }
  if (cfg.num_trees == 0) throw Error(ErrorKind::InvalidArgument, "need at least one tree");
  if (cfg.mtry < 1 || cfg.mtry > m) throw Error(ErrorKind::InvalidArgument, "mtry must lie in [1, m]");
  if (cfg.min_leaf == 0) cfg.min_leaf = 1;

  std::vector<CartTree> trees;
  std::vector<std::vector<std::uint32_t>> subsamples;
  trees.reserve(cfg.num_trees);
  subsamples.reserve(cfg.num_trees);
  std::vector<std::uint32_t> pool(n);
  for (std::size_t b = 0; b < cfg.num_trees; ++b) {
    Rng rng = make_rng(cfg.seed, b);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t s = 0; s < cfg.subsample_size; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, n - 1);
      std::swap(pool[s], pool[pick(rng)]);
    }
    std::vector<std::uint32_t> sub(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.subsample_size));
    std::sort(sub.begin(), sub.end());
    CartGrower grower(data, cfg.mtry, cfg.min_leaf, rng);
    trees.push_back(grower.grow(sub));
    subsamples.push_back(std::move(sub));
  }
  return ForestModel(std::move(trees), std::move(subsamples), n, cfg, data.schema(), data.num_classes());
}

Eigen::MatrixXd per_tree_predictions(const ForestModel& model, const std::vector<std::vector<double>>& points,
                                     int channel) {
  const auto q = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(model.num_trees()), q);
  for (Eigen::Index j = 0; j < q; ++j) check_point(model.schema(), points[static_cast<std::size_t>(j)]);
  for (std::size_t b = 0; b < model.num_trees(); ++b) {
    const auto& tree = model.trees()[b];
    for (Eigen::Index j = 0; j < q; ++j) {
      out(static_cast<Eigen::Index>(b), j) = tree.leaf_probs(points[static_cast<std::size_t>(j)])[channel];
    }
  }
  return out;
}

Eigen::MatrixXd ij_sum(const ForestModel& model, const Eigen::MatrixXd& tree_preds) {
  const auto m = static_cast<double>(model.num_trees());
  const Eigen::Index q = tree_preds.cols();
  Eigen::MatrixXd centered = tree_preds.rowwise() - tree_preds.colwise().mean();
  // C_i = (1/m) sum_b (1{i in S_b} - mean_i)(T_b - F) = (1/m) sum_{b: i in S_b} (T_b - F),
  // since the centered predictions sum to zero over b.
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.sample_size()), q);
  for (std::size_t b = 0; b < model.num_trees(); ++b) {
    auto row = centered.row(static_cast<Eigen::Index>(b));
    for (auto i : model.subsample(b)) cov.row(static_cast<Eigen::Index>(i)) += row;
  }
  cov /= m;
  Eigen::MatrixXd out = cov.transpose() * cov;
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd estimate_zeta1(const ForestModel& model, const Eigen::MatrixXd& tree_preds) {
  const auto n = static_cast<double>(model.sample_size());
  const auto k = static_cast<double>(model.subsample_size());
  return (n / (k * k)) * ij_sum(model, tree_preds);
}

Eigen::MatrixXd estimate_zeta1(const ForestModel& model, const std::vector<std::vector<double>>& points,
                               int channel) {
  return estimate_zeta1(model, per_tree_predictions(model, points, channel));
}

Eigen::MatrixXd estimate_zetakk(const Eigen::MatrixXd& tree_preds) {
  Eigen::MatrixXd centered = tree_preds.rowwise() - tree_preds.colwise().mean();
  Eigen::MatrixXd out = centered.transpose() * centered / static_cast<double>(tree_preds.rows());
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd estimate_zetakk(const ForestModel& model, const std::vector<std::vector<double>>& points,
                                int channel) {
  return estimate_zetakk(per_tree_predictions(model, points, channel));
}

Eigen::MatrixXd combine_tau2(const Eigen::MatrixXd& zeta1, const Eigen::MatrixXd& zetakk, std::size_t subsample_size,
                             std::size_t sample_size, std::size_t num_trees) {
  const auto k = static_cast<double>(subsample_size);
  return (k * k / static_cast<double>(sample_size)) * zeta1 + zetakk / static_cast<double>(num_trees);
}

CovarianceEstimate forest_covariance(const ForestModel& model, const std::vector<std::vector<double>>& points,
                                     int channel) {
  if (channel < 0 || channel >= model.num_classes()) throw Error(ErrorKind::InvalidArgument, "channel out of range");
  Eigen::MatrixXd preds = per_tree_predictions(model, points, channel);
  CovarianceEstimate est;
  est.zeta1 = estimate_zeta1(model, preds);
  est.zetakk = estimate_zetakk(preds);
  est.tau2 = combine_tau2(est.zeta1, est.zetakk, model.subsample_size(), model.sample_size(), model.num_trees());
  est.mean = preds.colwise().mean().transpose();
  est.query_points = points;
  est.channel = channel;
  return est;
}

namespace {
constexpr const char* kForestFormat = "approxtree-forest";
constexpr int kForestVersion = 1;

}  // namespace

std::string forest_to_json(const ForestModel& model) {
  nlohmann::json j;
  j["format"] = kForestFormat;
  j["version"] = kForestVersion;
  j["num_classes"] = model.num_classes();
  j["sample_size"] = model.sample_size();
  const auto& cfg = model.config();
  j["config"] = {{"num_trees", cfg.num_trees}, {"subsample_size", cfg.subsample_size}, {"mtry", cfg.mtry},
                 {"min_leaf", cfg.min_leaf},   {"seed", cfg.seed}};
  j["schema"] = schema_to_json(model.schema());
  auto trees = nlohmann::json::array();
  for (std::size_t b = 0; b < model.num_trees(); ++b) {
    const auto& t = model.trees()[b];
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<std::uint32_t> left, right, leaf;
    for (const auto& n : t.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      leaf.push_back(n.leaf);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"leaf", leaf},
                     {"leaf_probs", t.leaf_probs()},
                     {"subsample", model.subsample(b)}});
  }
  j["trees"] = std::move(trees);
  return j.dump();
}

ForestModel forest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("forest file: ") + e.what());
  }
  if (j.value("format", "") != kForestFormat || j.value("version", 0) != kForestVersion) {
    throw Error(ErrorKind::ParseError, "not an approxtree forest (format/version mismatch)");
  }
  try {
    ForestConfig cfg;
    const auto& c = j.at("config");
    cfg.num_trees = c.at("num_trees");
    cfg.subsample_size = c.at("subsample_size");
    cfg.mtry = c.at("mtry");
    cfg.min_leaf = c.at("min_leaf");
    cfg.seed = c.at("seed");
    const int k = j.at("num_classes");
    std::vector<CartTree> trees;
    std::vector<std::vector<std::uint32_t>> subsamples;
    for (const auto& t : j.at("trees")) {
      auto feature = t.at("feature").get<std::vector<int>>();
      auto threshold = t.at("threshold").get<std::vector<double>>();
      auto left = t.at("left").get<std::vector<std::uint32_t>>();
      auto right = t.at("right").get<std::vector<std::uint32_t>>();
      auto leaf = t.at("leaf").get<std::vector<std::uint32_t>>();
      std::vector<CartTree::Node> nodes(feature.size());
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = {feature[i], threshold[i], left[i], right[i], leaf[i]};
      }
      trees.emplace_back(std::move(nodes), t.at("leaf_probs").get<std::vector<double>>(), static_cast<std::size_t>(k));
      subsamples.push_back(t.at("subsample").get<std::vector<std::uint32_t>>());
    }
    return ForestModel(std::move(trees), std::move(subsamples), j.at("sample_size"), cfg,
                       schema_from_json(j.at("schema")), k);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("forest file: ") + e.what());
  }
}

}  // namespace approxtree
