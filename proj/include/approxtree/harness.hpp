#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "approxtree/core_model.hpp"
#include "approxtree/teacher_forest.hpp"
#include "approxtree/tree_builder.hpp"

namespace approxtree {

/// Five uniform covariates, binary label with a piecewise-constant logit that
/// is almost tree-structured (x1 at 0.5 is the primary partition).
double sim_tree5_logit(std::span<const double> x);
double sim_tree5_probability(std::span<const double> x);
Dataset gen_sim_tree5(std::size_t n, std::uint64_t seed);

/// Two uniform covariates, response -1/+1 by X1 < 0.5 plus N(0,1) noise.
/// The label is the sign of the response (class 1 when >= 0).
struct StepData {
  Dataset data;
  std::vector<double> response;
};
StepData gen_sim_step2(std::size_t n, std::uint64_t seed);

struct DepthStructure {
  std::size_t distinct = 0;
  std::vector<std::size_t> histogram;  // occurrence counts, descending
  std::vector<std::string> fingerprints;  // aligned with histogram
};

struct StabilityReport {
  std::size_t replications = 0;
  std::map<std::size_t, DepthStructure> by_depth;

  std::size_t dominant(std::size_t depth) const { return by_depth.at(depth).histogram.front(); }
  nlohmann::json to_json() const;
  std::string to_table(const std::string& label) const;
};

/// Builds `replications` trees against one teacher with seeds
/// cfg.seed + r and counts distinct fingerprints at each depth.
StabilityReport stability_audit(const ForestModel& teacher, const Dataset& data, const BuildConfig& cfg,
                                std::size_t replications, const std::vector<std::size_t>& depths);
StabilityReport summarize_structures(const std::vector<ApproxTree>& trees, const std::vector<std::size_t>& depths);

struct AgreementReport {
  double class_agreement = 0.0;
  double l1_prob_distance = 0.0;
  std::size_t evaluation_n = 0;

  nlohmann::json to_json() const;
};

AgreementReport agreement(const ApproxTree& tree, const ForestModel& teacher,
                          const std::vector<std::vector<double>>& eval_points);

/// Threshold sweep of the tree's class-1 probability against the teacher's
/// hard predictions (binary only).
struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};
std::vector<RocPoint> roc_table(const ApproxTree& tree, const ForestModel& teacher,
                                const std::vector<std::vector<double>>& eval_points, std::size_t steps = 20);

/// Fresh evaluation points from the kernel-smoothed sampler on the full space.
std::vector<std::vector<double>> sampler_points(const Dataset& data, const ForestModel& teacher, std::size_t count,
                                                const SamplerConfig& cfg);

}  // namespace approxtree
