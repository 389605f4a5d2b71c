#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "approxtree/core_model.hpp"
#include "approxtree/pseudo_sampler.hpp"

namespace approxtree {

struct CandidateSplit {
  SplitRule rule;
  std::size_t source_count = 0;  // original training rows at the node
};

/// 1 - sum_j p_j^2.
double gini_of(std::span<const double> probs);
double gini_of(const ClassDistribution& dist);

struct SplitStats {
  std::size_t n_left = 0;
  std::size_t n_right = 0;
  std::vector<double> theta_left;   // mean soft label of the G=0 child
  std::vector<double> theta_right;  // mean soft label of the G=1 child
  double gini = 0.0;                // weighted child impurity; an empty child contributes 0
};

SplitStats split_stats(const SoftBatch& batch, const SplitRule& rule);
SplitStats split_stats(std::span<const SoftSample> batch, const SplitRule& rule);

/// Plug-in delta-method variance of sqrt(n)(g1 - g2): Θ̂ᵀ Σ̂ Θ̂ with Σ̂ the
/// 4k x 4k covariance of [Y 1{G1=0}; Y 1{G1=1}; Y 1{G2=0}; Y 1{G2=1}] and
/// Θ̂ the gradient of g1 - g2 in those block means. Because soft labels sum
/// to one the child mass is a function of the block means, so the gradient
/// on child q of split p is ∓(2 θ_{p,q} - |θ_{p,q}|²).
double pair_variance(const SoftBatch& batch, const SplitRule& rule1, const SplitRule& rule2);

struct PairEvidence {
  double delta_hat = 0.0;  // g_best - g_alt
  double var_hat = 0.0;    // Θ̂ᵀ Σ̂ Θ̂
  std::size_t n = 0;
  double p_value = 0.5;
};

PairEvidence compare_splits(const SoftBatch& batch, const SplitRule& best, const SplitRule& alt);

/// Probability that a fresh batch of the same size reverses the ranking:
/// Φ(delta_hat / sqrt(2 var_hat / n)).
double pair_pvalue(double delta_hat, double var_hat, std::size_t n);

/// Quantile-ratio update n' = ceil(n (z_{1-alpha} / z_{1-p})^2), with the
/// 2n fallback once p >= 0.5. Always > n; the caller applies the cap.
std::size_t next_sample_size(std::size_t n, double p_agg, double alpha);

/// Bonferroni-style bound min(1, sum p).
double fwer_aggregate(std::span<const double> pvals);

enum class SelectionMode { Adaptive, OneShot };

struct StabilizerConfig {
  double alpha = 0.1;
  std::size_t n_init = 1000;
  std::size_t max_pseudo = 500000;  // N_ps
  SelectionMode mode = SelectionMode::Adaptive;
  double max_growth = 10.0;  // per-round growth factor cap

  void validate() const;
};

struct SelectionRound {
  std::size_t n = 0;
  std::size_t survivors = 0;  // candidates alive at the start of the round
  std::size_t eliminated = 0;
  std::size_t best = 0;
  double aggregated_p = 0.0;
};

struct TestVerdict {
  std::size_t winner = 0;  // index into the candidate list
  double aggregated_p = 0.0;
  std::size_t n_used = 0;
  bool capped = false;
  std::vector<std::size_t> survivors;  // includes the winner
  std::vector<SelectionRound> rounds;
};

/// Core grow-and-test loop over a cumulative batch. In adaptive mode the
/// batch is topped up to n_init and grown through `sampler`; in one-shot mode
/// the batch is used as is and `sampler` may be null.
TestVerdict evaluate_candidates(std::span<const CandidateSplit> candidates, SoftBatch& batch, PseudoSampler* sampler,
                                const StabilizerConfig& cfg);

/// Draws a fresh batch in `region` and runs evaluate_candidates. One-shot
/// mode draws n_init points once. The final batch is returned through
/// `final_batch` when given.
TestVerdict select_split(std::span<const CandidateSplit> candidates, const Region& region, const Dataset& data,
                         const ForestModel& teacher, const SamplerConfig& sampler_cfg, const StabilizerConfig& cfg,
                         SoftBatch* final_batch = nullptr);

}  // namespace approxtree
