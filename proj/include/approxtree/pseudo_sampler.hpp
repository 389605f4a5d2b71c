#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "approxtree/core_model.hpp"
#include "approxtree/stats.hpp"
#include "approxtree/teacher_forest.hpp"

namespace approxtree {

struct SamplerConfig {
  double bandwidth_fraction = 1.0 / 50.0;  // Gaussian sd as a fraction of each column's range
  double jump_prob = 1.0 / 7.0;            // chance of moving a categorical value to a neighboring level
  std::uint64_t seed = 1;

  void validate() const;
};

struct SoftSample {
  std::vector<double> x;
  ClassDistribution y;
};

/// Pseudo-samples stored as two row-major matrices: covariates (n x m) and
/// teacher soft labels (n x k).
class SoftBatch {
 public:
  SoftBatch() = default;
  SoftBatch(std::size_t num_covariates, std::size_t num_classes) : m_(num_covariates), k_(num_classes) {}

  std::size_t size() const noexcept { return m_ == 0 ? 0 : x_.size() / m_; }
  bool empty() const noexcept { return size() == 0; }
  std::size_t num_covariates() const noexcept { return m_; }
  std::size_t num_classes() const noexcept { return k_; }

  std::span<const double> x(std::size_t i) const { return {x_.data() + i * m_, m_}; }
  std::span<const double> y(std::size_t i) const { return {y_.data() + i * k_, k_}; }
  double x(std::size_t i, std::size_t j) const { return x_[i * m_ + j]; }
  double y(std::size_t i, std::size_t c) const { return y_[i * k_ + c]; }
  const std::vector<double>& xs() const noexcept { return x_; }
  const std::vector<double>& ys() const noexcept { return y_; }

  void push_back(std::span<const double> x, std::span<const double> y);
  SoftSample sample(std::size_t i) const;
  /// Rows whose covariates fall inside `region`.
  SoftBatch filter(const Region& region) const;

 private:
  friend class PseudoSampler;
  std::size_t m_ = 0;
  std::size_t k_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Kernel-smoothed empirical covariate generator restricted to a region.
/// Draws pick an in-region training row uniformly, perturb continuous
/// coordinates with Gaussian noise and categorical ones by a neighbor jump,
/// and redraw any single coordinate that leaves the region.
class PseudoSampler {
 public:
  PseudoSampler(const Dataset& data, const Region& region, const ForestModel& teacher, const SamplerConfig& cfg);

  std::size_t support() const noexcept { return rows_.size(); }

  /// Covariates only, row-major count x m.
  std::vector<double> draw_covariates(std::size_t count);
  /// Appends `count` labeled samples to `batch`.
  void extend(SoftBatch& batch, std::size_t count);
  SoftBatch draw(std::size_t count);

 private:
  static constexpr int kMaxRejections = 1000;

  const Dataset& data_;
  Region region_;
  const ForestModel& teacher_;
  SamplerConfig cfg_;
  std::vector<std::size_t> rows_;
  std::vector<double> sd_;
  Rng rng_;
};

std::vector<SoftSample> draw_pseudo(const Dataset& data, const Region& region, const ForestModel& teacher,
                                    std::size_t count, const SamplerConfig& cfg);

}  // namespace approxtree
