#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "approxtree/core_model.hpp"
#include "approxtree/node_test.hpp"
#include "approxtree/pseudo_sampler.hpp"
#include "approxtree/split_stabilizer.hpp"
#include "approxtree/teacher_forest.hpp"

namespace approxtree {

enum class StopGateMode { Off, Annotate, Enforce };

struct StopGate {
  StopGateMode mode = StopGateMode::Annotate;
  double threshold = 0.05;  // Enforce: stop when the node-test p-value is at least this
};

struct BuildConfig {
  std::size_t max_depth = 5;  // layers, root included
  double alpha = 0.1;
  std::size_t n_init = 1000;
  std::size_t max_pseudo = 500000;
  SelectionMode mode = SelectionMode::Adaptive;
  double one_shot_multiplier = 9.0;  // one-shot batch = multiplier x training rows
  std::size_t min_support = 10;      // training rows needed to attempt a split
  double max_growth = 10.0;
  SamplerConfig sampler;
  StopGate stop_gate;
  NodeTestConfig node_test;
  std::uint64_t seed = 1;

  void validate() const;
  StabilizerConfig stabilizer() const;
};

/// Midpoints of adjacent distinct in-region training values for every
/// covariate; categorical columns get a cut between each pair of adjacent
/// present levels. Throws NoValidSplit when every covariate is constant.
std::vector<CandidateSplit> enumerate_candidates(const Dataset& data, const Region& region);

/// One record per node, serialized as a JSON line.
struct NodeLog {
  std::size_t node = 0;
  std::size_t depth = 0;
  std::size_t support = 0;  // training rows in the region
  std::size_t candidates = 0;
  std::string outcome;  // "split", "max_depth", "min_support", "no_valid_split", "stop_gate", "thin_batch"
  std::vector<SelectionRound> rounds;
  std::optional<SplitRule> rule;
  double split_pvalue = 0.0;
  bool capped = false;
  std::size_t pseudo_samples_used = 0;
  std::optional<double> stop_pvalue;

  std::string to_json_line() const;
};

struct BuildResult {
  ApproxTree tree;
  std::vector<NodeLog> log;
};

BuildResult build_tree_logged(const Dataset& data, const ForestModel& teacher, const BuildConfig& cfg);
ApproxTree build_tree(const Dataset& data, const ForestModel& teacher, const BuildConfig& cfg);

/// Runs the node test on every node of an existing tree and stores the
/// averaged p-value in stop_pvalue.
void annotate_stop_pvalues(ApproxTree& tree, const Dataset& data, const ForestModel& teacher,
                           const SamplerConfig& sampler_cfg, const NodeTestConfig& cfg);

}  // namespace approxtree
