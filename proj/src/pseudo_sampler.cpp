#include "approxtree/pseudo_sampler.hpp"

#include <cmath>

namespace approxtree {

void SamplerConfig::validate() const {
  if (!(bandwidth_fraction >= 0.0) || !std::isfinite(bandwidth_fraction)) {
    throw Error(ErrorKind::InvalidArgument, "bandwidth_fraction must be a finite non-negative number");
  }
  if (!(jump_prob >= 0.0 && jump_prob < 1.0)) throw Error(ErrorKind::InvalidArgument, "jump_prob must lie in [0,1)");
}

void SoftBatch::push_back(std::span<const double> x, std::span<const double> y) {
  x_.insert(x_.end(), x.begin(), x.end());
  y_.insert(y_.end(), y.begin(), y.end());
}

SoftSample SoftBatch::sample(std::size_t i) const {
  auto xi = x(i);
  auto yi = y(i);
  return {std::vector<double>(xi.begin(), xi.end()), ClassDistribution(std::vector<double>(yi.begin(), yi.end()))};
}

SoftBatch SoftBatch::filter(const Region& region) const {
  SoftBatch out(m_, k_);
  for (std::size_t i = 0; i < size(); ++i) {
    if (region.contains(x(i))) out.push_back(x(i), y(i));
  }
  return out;
}

PseudoSampler::PseudoSampler(const Dataset& data, const Region& region, const ForestModel& teacher,
                             const SamplerConfig& cfg)
    : data_(data), region_(region), teacher_(teacher), cfg_(cfg), rng_(make_rng(cfg.seed, 0x5eed)) {
  cfg_.validate();
  if (region_.size() != data.cols() || teacher.schema().size() != data.cols()) {
    throw Error(ErrorKind::SchemaViolation, "region, teacher and data disagree on covariate count");
  }
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (region_.contains(data.row(i))) rows_.push_back(i);
  }
  if (rows_.empty()) throw Error(ErrorKind::EmptyNodeSupport, "no training row lies inside the region");
  for (const auto& c : data.schema().columns()) sd_.push_back(cfg_.bandwidth_fraction * c.range());
}

std::vector<double> PseudoSampler::draw_covariates(std::size_t count) {
  const std::size_t m = data_.cols();
  std::vector<double> out(count * m);
  std::uniform_int_distribution<std::size_t> pick_row(0, rows_.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < count; ++s) {
    auto base = data_.row(rows_[pick_row(rng_)]);
    for (std::size_t j = 0; j < m; ++j) {
      const double v0 = base[j];
      double v = v0;
      int attempts = 0;
      do {
        if (attempts++ >= kMaxRejections) {
          throw Error(ErrorKind::RejectionOverflow,
                      "over " + std::to_string(kMaxRejections) + " rejections on covariate " + std::to_string(j));
        }
        if (region_.categorical(j)) {
          v = v0;
          if (cfg_.jump_prob > 0.0 && unit(rng_) < cfg_.jump_prob) {
            const double top = data_.schema().column(j).max;
            if (v0 <= 0.0) {
              v = v0 + 1.0;
            } else if (v0 >= top) {
              v = v0 - 1.0;
            } else {
              v = unit(rng_) < 0.5 ? v0 - 1.0 : v0 + 1.0;
            }
          }
        } else {
          v = sd_[j] > 0.0 ? v0 + sd_[j] * noise(rng_) : v0;
        }
      } while (!region_.contains(j, v));
      out[s * m + j] = v;
    }
  }
  return out;
}

void PseudoSampler::extend(SoftBatch& batch, std::size_t count) {
  if (batch.m_ == 0 && batch.k_ == 0) {
    batch = SoftBatch(data_.cols(), static_cast<std::size_t>(teacher_.num_classes()));
  }
  auto xs = draw_covariates(count);
  const std::size_t old = batch.y_.size();
  batch.y_.resize(old + count * batch.k_);
  teacher_.predict_proba_into(xs, std::span<double>(batch.y_).subspan(old));
  batch.x_.insert(batch.x_.end(), xs.begin(), xs.end());
}

SoftBatch PseudoSampler::draw(std::size_t count) {
  SoftBatch batch(data_.cols(), static_cast<std::size_t>(teacher_.num_classes()));
  extend(batch, count);
  return batch;
}

std::vector<SoftSample> draw_pseudo(const Dataset& data, const Region& region, const ForestModel& teacher,
                                    std::size_t count, const SamplerConfig& cfg) {
  if (count == 0) throw Error(ErrorKind::InvalidArgument, "count must be at least 1");
  PseudoSampler sampler(data, region, teacher, cfg);
  auto batch = sampler.draw(count);
  std::vector<SoftSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(batch.sample(i));
  return out;
}

}  // namespace approxtree
