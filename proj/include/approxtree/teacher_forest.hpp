#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "approxtree/core_model.hpp"

namespace approxtree {

/// Zero-valued size fields select the defaults: subsample n/5, mtry ceil(sqrt(m)).
struct ForestConfig {
  std::size_t num_trees = 100;
  std::size_t subsample_size = 0;
  std::size_t mtry = 0;
  std::size_t min_leaf = 5;
  std::uint64_t seed = 1;
};

/// Probability tree grown by greedy Gini splitting on hard labels.
class CartTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t leaf = 0;  // offset into leaf_probs, leaves only
  };

  CartTree() = default;
  CartTree(std::vector<Node> nodes, std::vector<double> leaf_probs, std::size_t num_classes);

  /// Pointer to the k class probabilities of the leaf reached by x.
  const double* leaf_probs(std::span<const double> x) const {
    std::uint32_t id = 0;
    while (nodes_[id].feature >= 0) {
      const auto& n = nodes_[id];
      id = x[static_cast<std::size_t>(n.feature)] > n.threshold ? n.right : n.left;
    }
    return leaf_probs_.data() + nodes_[id].leaf;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& leaf_probs() const noexcept { return leaf_probs_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

 private:
  std::vector<Node> nodes_;
  std::vector<double> leaf_probs_;
  std::size_t num_classes_ = 0;
};

class ForestModel {
 public:
  ForestModel(std::vector<CartTree> trees, std::vector<std::vector<std::uint32_t>> subsamples,
              std::size_t sample_size, ForestConfig config, CovariateSchema schema, int num_classes);

  std::size_t num_trees() const noexcept { return trees_.size(); }
  std::size_t sample_size() const noexcept { return sample_size_; }
  std::size_t subsample_size() const noexcept { return config_.subsample_size; }
  int num_classes() const noexcept { return num_classes_; }
  const ForestConfig& config() const noexcept { return config_; }
  const CovariateSchema& schema() const noexcept { return schema_; }
  const std::vector<CartTree>& trees() const noexcept { return trees_; }

  /// Sorted training-row indices used by tree b.
  const std::vector<std::uint32_t>& subsample(std::size_t b) const { return subsamples_.at(b); }
  bool in_subsample(std::size_t b, std::size_t i) const { return membership_[b * sample_size_ + i] != 0; }
  /// num_trees x sample_size indicator matrix, row-major.
  const std::vector<std::uint8_t>& membership() const noexcept { return membership_; }

  ClassDistribution predict_proba(std::span<const double> x) const;
  /// Unchecked batch path: writes k probabilities for each row of `points`
  /// (row-major, schema arity) into `out`.
  void predict_proba_into(std::span<const double> points, std::span<double> out) const;

  /// Default scalar channel: class 1 for binary problems.
  int default_channel() const noexcept { return num_classes_ == 2 ? 1 : 0; }

 private:
  std::vector<CartTree> trees_;
  std::vector<std::vector<std::uint32_t>> subsamples_;
  std::vector<std::uint8_t> membership_;
  std::size_t sample_size_;
  ForestConfig config_;
  CovariateSchema schema_;
  int num_classes_;
};

ForestModel fit_forest(const Dataset& data, ForestConfig cfg);

/// Entry (b, j) is tree b's probability of class `channel` at points[j].
Eigen::MatrixXd per_tree_predictions(const ForestModel& model, const std::vector<std::vector<double>>& points,
                                     int channel);

/// Raw infinitesimal-jackknife sum  sum_i C^i C^iᵀ  with
/// C^i_k = cov_b(T_b(x_k), 1{i in S_b}) (1/m_n normalization). This is the
/// estimate of the (k_n^2/n) zeta_1 term itself.
Eigen::MatrixXd ij_sum(const ForestModel& model, const Eigen::MatrixXd& tree_preds);

/// zeta_1 on the scale used by tau^2: (n / k_n^2) * ij_sum.
Eigen::MatrixXd estimate_zeta1(const ForestModel& model, const Eigen::MatrixXd& tree_preds);
Eigen::MatrixXd estimate_zeta1(const ForestModel& model, const std::vector<std::vector<double>>& points,
                               int channel);

/// (1/m_n) sum_b (T_b(x_k) - F(x_k)) (T_b(x_l) - F(x_l)).
Eigen::MatrixXd estimate_zetakk(const Eigen::MatrixXd& tree_preds);
Eigen::MatrixXd estimate_zetakk(const ForestModel& model, const std::vector<std::vector<double>>& points,
                                int channel);

/// tau^2 = (k_n^2 / n) zeta_1 + (1 / m_n) zeta_kk, entrywise.
Eigen::MatrixXd combine_tau2(const Eigen::MatrixXd& zeta1, const Eigen::MatrixXd& zetakk, std::size_t subsample_size,
                             std::size_t sample_size, std::size_t num_trees);

struct CovarianceEstimate {
  Eigen::MatrixXd zeta1;
  Eigen::MatrixXd zetakk;
  Eigen::MatrixXd tau2;
  Eigen::VectorXd mean;  // forest prediction of the channel at each point
  std::vector<std::vector<double>> query_points;
  int channel = 1;
};

CovarianceEstimate forest_covariance(const ForestModel& model, const std::vector<std::vector<double>>& points,
                                     int channel);

/// Versioned JSON container, membership included.
std::string forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const std::string& text);

}  // namespace approxtree
