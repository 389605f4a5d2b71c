#include "approxtree/split_stabilizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "approxtree/stats.hpp"

namespace approxtree {

namespace {

// Differences below these floors are rounding noise from summing the same
// partition in a different order.
constexpr double kDeltaFloor = 1e-12;
constexpr double kVarFloor = 1e-15;

template <typename YAt>
SplitStats stats_impl(std::size_t n, std::size_t k, YAt&& y_at, const std::vector<bool>& right) {
  SplitStats s;
  s.theta_left.assign(k, 0.0);
  s.theta_right.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& theta = right[i] ? s.theta_right : s.theta_left;
    (right[i] ? s.n_right : s.n_left)++;
    auto y = y_at(i);
    for (std::size_t c = 0; c < k; ++c) theta[c] += y[c];
  }
  double purity = 0.0;
  for (auto [count, theta] : {std::pair{s.n_left, &s.theta_left}, std::pair{s.n_right, &s.theta_right}}) {
    if (count == 0) continue;
    double sq = 0.0;
    for (double& t : *theta) {
      t /= static_cast<double>(count);
      sq += t * t;
    }
    purity += static_cast<double>(count) / static_cast<double>(n) * sq;
  }
  s.gini = 1.0 - purity;
  return s;
}

// Gradient of a child's Gini contribution wrt its block mean: 2θ - |θ|².
std::vector<double> child_gradient(const std::vector<double>& theta, std::size_t count) {
  std::vector<double> g(theta.size(), 0.0);
  if (count == 0) return g;
  double sq = 0.0;
  for (double t : theta) sq += t * t;
  for (std::size_t c = 0; c < theta.size(); ++c) g[c] = 2.0 * theta[c] - sq;
  return g;
}

}  // namespace

double gini_of(std::span<const double> probs) {
  double sq = 0.0;
  for (double p : probs) sq += p * p;
  return 1.0 - sq;
}

double gini_of(const ClassDistribution& dist) { return gini_of(std::span<const double>(dist.probs())); }

SplitStats split_stats(const SoftBatch& batch, const SplitRule& rule) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "split_stats needs a non-empty batch");
  std::vector<bool> right(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) right[i] = rule.goes_right(batch.x(i));
  return stats_impl(batch.size(), batch.num_classes(), [&](std::size_t i) { return batch.y(i); }, right);
}

SplitStats split_stats(std::span<const SoftSample> batch, const SplitRule& rule) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "split_stats needs a non-empty batch");
  std::vector<bool> right(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) right[i] = rule.goes_right(batch[i].x);
  return stats_impl(batch.size(), batch[0].y.size(),
                    [&](std::size_t i) { return std::span<const double>(batch[i].y.probs()); }, right);
}

double pair_variance(const SoftBatch& batch, const SplitRule& rule1, const SplitRule& rule2) {
  const std::size_t n = batch.size();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "pair_variance needs at least 2 samples");
  const auto k = static_cast<Eigen::Index>(batch.num_classes());
  const auto s1 = split_stats(batch, rule1);
  const auto s2 = split_stats(batch, rule2);

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 4 * k);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index block1 = rule1.goes_right(batch.x(i)) ? 1 : 0;
    const Eigen::Index block2 = rule2.goes_right(batch.x(i)) ? 3 : 2;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double y = batch.y(i, static_cast<std::size_t>(c));
      z(static_cast<Eigen::Index>(i), block1 * k + c) = y;
      z(static_cast<Eigen::Index>(i), block2 * k + c) = y;
    }
  }
  Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
  Eigen::MatrixXd sigma = centered.transpose() * centered / static_cast<double>(n);

  Eigen::VectorXd grad(4 * k);
  const std::vector<double>* thetas[4] = {&s1.theta_left, &s1.theta_right, &s2.theta_left, &s2.theta_right};
  const std::size_t counts[4] = {s1.n_left, s1.n_right, s2.n_left, s2.n_right};
  for (Eigen::Index b = 0; b < 4; ++b) {
    auto g = child_gradient(*thetas[b], counts[b]);
    const double sign = b < 2 ? -1.0 : 1.0;
    for (Eigen::Index c = 0; c < k; ++c) grad(b * k + c) = sign * g[static_cast<std::size_t>(c)];
  }
  return grad.dot(sigma * grad);
}

PairEvidence compare_splits(const SoftBatch& batch, const SplitRule& best, const SplitRule& alt) {
  PairEvidence ev;
  ev.n = batch.size();
  ev.delta_hat = split_stats(batch, best).gini - split_stats(batch, alt).gini;
  ev.var_hat = std::max(0.0, pair_variance(batch, best, alt));
  ev.p_value = pair_pvalue(std::min(ev.delta_hat, 0.0), ev.var_hat, ev.n);
  return ev;
}

double pair_pvalue(double delta_hat, double var_hat, std::size_t n) {
  if (var_hat < -1e-9) throw Error(ErrorKind::NegativeVariance, "variance estimate " + std::to_string(var_hat));
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "pair_pvalue needs n >= 1");
  var_hat = std::max(var_hat, 0.0);
  if (var_hat == 0.0) return delta_hat < 0.0 ? 0.0 : 0.5;
  const double sd = std::sqrt(2.0 * var_hat / static_cast<double>(n));
  return normal_cdf(delta_hat / sd);
}

std::size_t next_sample_size(std::size_t n, double p_agg, double alpha) {
  if (!(p_agg > 0.0 && p_agg < 1.0)) throw Error(ErrorKind::InvalidP, "aggregated p must lie in (0,1)");
  if (!(alpha > 0.0 && alpha < 0.5)) throw Error(ErrorKind::InvalidP, "alpha must lie in (0,0.5)");
  if (p_agg >= 0.5) return 2 * n;
  const double ratio = normal_quantile(1.0 - alpha) / normal_quantile(1.0 - p_agg);
  const double target = std::ceil(static_cast<double>(n) * ratio * ratio);
  return std::max(n + 1, static_cast<std::size_t>(target));
}

double fwer_aggregate(std::span<const double> pvals) {
  double total = 0.0;
  for (double p : pvals) total += p;
  return std::min(1.0, total);
}

void StabilizerConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0,0.5)");
  if (n_init < 2) throw Error(ErrorKind::InvalidArgument, "n_init must be at least 2");
  if (max_pseudo < n_init) throw Error(ErrorKind::InvalidArgument, "N_ps must be at least n_init");
  if (!(max_growth > 1.0)) throw Error(ErrorKind::InvalidArgument, "max_growth must exceed 1");
}

namespace {

/// One pass over a batch: Gini of every live candidate, then the pairwise
/// evidence of every live alternative against the current best.
class CandidateScanner {
 public:
  CandidateScanner(std::span<const CandidateSplit> candidates, const SoftBatch& batch)
      : cands_(candidates), batch_(batch), n_(batch.size()), k_(batch.num_classes()), totals_(k_, 0.0) {
    for (std::size_t i = 0; i < n_; ++i) {
      auto y = batch_.y(i);
      for (std::size_t c = 0; c < k_; ++c) totals_[c] += y[c];
    }
  }

  struct Result {
    std::size_t best = 0;
    std::vector<double> gini;  // indexed like `live`
    std::vector<PairEvidence> evidence;
  };

  Result run(const std::vector<std::size_t>& live) {
    Result res;
    group(live);
    res.gini.assign(live.size(), 0.0);
    std::vector<SplitStats> stats(live.size());
    for (auto& [cov, members] : by_covariate_) {
      const auto& order = sorted(cov);
      std::vector<double> left(k_, 0.0);
      std::size_t pos = 0;
      for (auto slot : members) {
        const double c = cands_[live[slot]].rule.threshold;
        while (pos < n_ && batch_.x(order[pos], cov) <= c) {
          auto y = batch_.y(order[pos]);
          for (std::size_t j = 0; j < k_; ++j) left[j] += y[j];
          ++pos;
        }
        stats[slot] = finish(left, pos);
        res.gini[slot] = stats[slot].gini;
      }
    }

    // min Gini, ties to the lexicographically smallest rule
    double gmin = *std::min_element(res.gini.begin(), res.gini.end());
    std::optional<std::size_t> best;
    for (std::size_t s = 0; s < live.size(); ++s) {
      if (res.gini[s] > gmin + kDeltaFloor) continue;
      if (!best || rule_less(cands_[live[s]].rule, cands_[live[*best]].rule)) best = s;
    }
    res.best = *best;

    const auto& bs = stats[res.best];
    const auto grad_l = child_gradient(bs.theta_left, bs.n_left);
    const auto grad_r = child_gradient(bs.theta_right, bs.n_right);
    const SplitRule best_rule = cands_[live[res.best]].rule;
    std::vector<double> u(n_);
    double sum_u = 0.0, sum_u2 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& g = best_rule.goes_right(batch_.x(i)) ? grad_r : grad_l;
      auto y = batch_.y(i);
      double v = 0.0;
      for (std::size_t j = 0; j < k_; ++j) v += g[j] * y[j];
      u[i] = v;
      sum_u += v;
      sum_u2 += v * v;
    }
    // totals over the whole batch
    std::vector<double> tot_y(k_, 0.0), tot_uy(k_, 0.0), tot_yy(k_ * k_, 0.0);
    accumulate_all(u, tot_y, tot_uy, tot_yy);

    res.evidence.assign(live.size(), PairEvidence{});
    const double nd = static_cast<double>(n_);
    for (auto& [cov, members] : by_covariate_) {
      const auto& order = sorted(cov);
      std::vector<double> ly(k_, 0.0), luy(k_, 0.0), lyy(k_ * k_, 0.0);
      std::vector<double> ry(k_), ruy(k_), ryy(k_ * k_);
      std::size_t pos = 0;
      for (auto slot : members) {
        const double c = cands_[live[slot]].rule.threshold;
        while (pos < n_ && batch_.x(order[pos], cov) <= c) {
          const std::size_t i = order[pos];
          auto y = batch_.y(i);
          for (std::size_t a = 0; a < k_; ++a) {
            ly[a] += y[a];
            luy[a] += u[i] * y[a];
            for (std::size_t b = 0; b < k_; ++b) lyy[a * k_ + b] += y[a] * y[b];
          }
          ++pos;
        }
        if (slot == res.best) continue;
        for (std::size_t a = 0; a < k_; ++a) {
          ry[a] = tot_y[a] - ly[a];
          ruy[a] = tot_uy[a] - luy[a];
        }
        for (std::size_t a = 0; a < k_ * k_; ++a) ryy[a] = tot_yy[a] - lyy[a];
        const auto& st = stats[slot];
        const auto bl = child_gradient(st.theta_left, st.n_left);
        const auto br = child_gradient(st.theta_right, st.n_right);
        double mean_w = -sum_u + dot(bl, ly) + dot(br, ry);
        double mean_w2 = sum_u2 - 2.0 * (dot(bl, luy) + dot(br, ruy)) + quad(bl, lyy) + quad(br, ryy);
        mean_w /= nd;
        mean_w2 /= nd;
        PairEvidence ev;
        ev.n = n_;
        ev.delta_hat = res.gini[res.best] - res.gini[slot];
        ev.var_hat = mean_w2 - mean_w * mean_w;
        if (std::abs(ev.delta_hat) < kDeltaFloor || ev.delta_hat > 0.0) ev.delta_hat = 0.0;
        if (ev.var_hat < kVarFloor) ev.var_hat = 0.0;
        ev.p_value = pair_pvalue(ev.delta_hat, ev.var_hat, n_);
        res.evidence[slot] = ev;
      }
    }
    return res;
  }

 private:
  void group(const std::vector<std::size_t>& live) {
    by_covariate_.clear();
    for (std::size_t s = 0; s < live.size(); ++s) by_covariate_[cands_[live[s]].rule.covariate].push_back(s);
    for (auto& [cov, members] : by_covariate_) {
      std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return cands_[live[a]].rule.threshold < cands_[live[b]].rule.threshold;
      });
    }
  }

  const std::vector<std::size_t>& sorted(std::size_t cov) {
    auto it = order_.find(cov);
    if (it != order_.end()) return it->second;
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return batch_.x(a, cov) < batch_.x(b, cov); });
    return order_.emplace(cov, std::move(order)).first->second;
  }

  SplitStats finish(const std::vector<double>& left, std::size_t n_left) const {
    SplitStats s;
    s.n_left = n_left;
    s.n_right = n_ - n_left;
    s.theta_left.assign(k_, 0.0);
    s.theta_right.assign(k_, 0.0);
    double purity = 0.0;
    if (s.n_left > 0) {
      double sq = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        s.theta_left[j] = left[j] / static_cast<double>(s.n_left);
        sq += s.theta_left[j] * s.theta_left[j];
      }
      purity += static_cast<double>(s.n_left) / static_cast<double>(n_) * sq;
    }
    if (s.n_right > 0) {
      double sq = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        s.theta_right[j] = (totals_[j] - left[j]) / static_cast<double>(s.n_right);
        sq += s.theta_right[j] * s.theta_right[j];
      }
      purity += static_cast<double>(s.n_right) / static_cast<double>(n_) * sq;
    }
    s.gini = 1.0 - purity;
    return s;
  }

  void accumulate_all(const std::vector<double>& u, std::vector<double>& ty, std::vector<double>& tuy,
                      std::vector<double>& tyy) const {
    for (std::size_t i = 0; i < n_; ++i) {
      auto y = batch_.y(i);
      for (std::size_t a = 0; a < k_; ++a) {
        ty[a] += y[a];
        tuy[a] += u[i] * y[a];
        for (std::size_t b = 0; b < k_; ++b) tyy[a * k_ + b] += y[a] * y[b];
      }
    }
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double quad(const std::vector<double>& v, const std::vector<double>& m) const {
    double s = 0.0;
    for (std::size_t a = 0; a < k_; ++a) {
      for (std::size_t b = 0; b < k_; ++b) s += v[a] * m[a * k_ + b] * v[b];
    }
    return s;
  }

  std::span<const CandidateSplit> cands_;
  const SoftBatch& batch_;
  std::size_t n_;
  std::size_t k_;
  std::map<std::size_t, std::vector<std::size_t>> by_covariate_;
  std::map<std::size_t, std::vector<std::size_t>> order_;
  std::vector<double> totals_;
};

}  // namespace

TestVerdict evaluate_candidates(std::span<const CandidateSplit> candidates, SoftBatch& batch, PseudoSampler* sampler,
                                const StabilizerConfig& cfg) {
  cfg.validate();
  if (candidates.empty()) throw Error(ErrorKind::NoCandidates, "no candidate splits");
  const bool adaptive = cfg.mode == SelectionMode::Adaptive;
  if (adaptive && !sampler) throw Error(ErrorKind::InvalidArgument, "adaptive selection needs a sampler");
  if (adaptive && batch.size() < cfg.n_init) sampler->extend(batch, cfg.n_init - batch.size());
  if (batch.size() < 2) throw Error(ErrorKind::InvalidArgument, "split selection needs at least 2 pseudo-samples");

  TestVerdict verdict;
  std::vector<std::size_t> live(candidates.size());
  std::iota(live.begin(), live.end(), 0);
  if (candidates.size() == 1) {
    verdict.winner = 0;
    verdict.aggregated_p = 0.0;
    verdict.n_used = batch.size();
    verdict.survivors = live;
    verdict.rounds.push_back({batch.size(), 1, 0, 0, 0.0});
    return verdict;
  }

  while (true) {
    CandidateScanner scanner(candidates, batch);
    auto res = scanner.run(live);
    const std::size_t alternatives = live.size() - 1;
    const double cutoff = cfg.alpha / static_cast<double>(alternatives);
    std::vector<std::size_t> next_live;
    std::vector<double> pvals;
    for (std::size_t s = 0; s < live.size(); ++s) {
      if (s == res.best) {
        next_live.push_back(live[s]);
        continue;
      }
      const double p = res.evidence[s].p_value;
      if (p <= cutoff) continue;
      next_live.push_back(live[s]);
      pvals.push_back(p);
    }
    const double p_agg = fwer_aggregate(pvals);
    SelectionRound round;
    round.n = batch.size();
    round.survivors = live.size();
    round.eliminated = live.size() - next_live.size();
    round.best = live[res.best];
    round.aggregated_p = p_agg;
    verdict.rounds.push_back(round);

    verdict.winner = live[res.best];
    verdict.aggregated_p = p_agg;
    verdict.n_used = batch.size();
    verdict.survivors = next_live;
    verdict.capped = false;
    live = std::move(next_live);

    if (p_agg <= cfg.alpha || live.size() == 1 || !adaptive) return verdict;
    if (batch.size() >= cfg.max_pseudo) {
      verdict.capped = true;
      return verdict;
    }
    const std::size_t n = batch.size();
    std::size_t target = p_agg >= 0.5 ? 2 * n : next_sample_size(n, p_agg, cfg.alpha);
    target = std::min(target, static_cast<std::size_t>(std::ceil(cfg.max_growth * static_cast<double>(n))));
    target = std::min(target, cfg.max_pseudo);
    sampler->extend(batch, target - n);
  }
}

TestVerdict select_split(std::span<const CandidateSplit> candidates, const Region& region, const Dataset& data,
                         const ForestModel& teacher, const SamplerConfig& sampler_cfg, const StabilizerConfig& cfg,
                         SoftBatch* final_batch) {
  if (candidates.empty()) throw Error(ErrorKind::NoCandidates, "no candidate splits");
  PseudoSampler sampler(data, region, teacher, sampler_cfg);
  SoftBatch batch = sampler.draw(cfg.n_init);
  auto verdict = evaluate_candidates(candidates, batch, &sampler, cfg);
  if (final_batch) *final_batch = std::move(batch);
  return verdict;
}

}  // namespace approxtree
