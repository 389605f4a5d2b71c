#include <doctest.h>

#include <cmath>
#include <random>

#include "approxtree/errors.hpp"
#include "approxtree/split_stabilizer.hpp"
#include "approxtree/stats.hpp"
#include "fixtures.hpp"

using namespace approxtree;

namespace {

SoftBatch batch_of(const std::vector<std::pair<double, std::vector<double>>>& rows) {
  SoftBatch b(1, rows.front().second.size());
  for (const auto& [x, y] : rows) {
    std::vector<double> xv{x};
    b.push_back(xv, y);
  }
  return b;
}

// Random k-class soft labels on m uniform covariates.
SoftBatch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SoftBatch b(m, k);
  std::vector<double> x(m), y(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : x) v = u(rng);
    double tot = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      y[c] = u(rng) * (1.0 + 3.0 * (x[0] > 0.5 ? c : k - 1 - c));
      tot += y[c];
    }
    for (double& v : y) v /= tot;
    b.push_back(x, y);
  }
  return b;
}

// Independent plug-in: sample variance of the per-point influence of g1 - g2,
// with the gradient obtained by central differences of the Gini functional.
double influence_oracle(const SoftBatch& b, const SplitRule& r1, const SplitRule& r2) {
  const std::size_t n = b.size(), k = b.num_classes();
  // block means S_q = mean(Y 1{point in block q})
  auto block_means = [&](const SplitRule& r) {
    std::vector<double> s(2 * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t q = r.goes_right(b.x(i)) ? 1 : 0;
      for (std::size_t c = 0; c < k; ++c) s[q * k + c] += b.y(i, c) / static_cast<double>(n);
    }
    return s;
  };
  // Gini as a function of the block means: 1 - sum_q |S_q|^2 / pi_q, pi_q = sum_j S_qj
  auto gini = [&](const std::vector<double>& s) {
    double g = 1.0;
    for (std::size_t q = 0; q < 2; ++q) {
      double pi = 0.0, sq = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        pi += s[q * k + c];
        sq += s[q * k + c] * s[q * k + c];
      }
      if (pi > 0.0) g -= sq / pi;
    }
    return g;
  };
  auto gradient = [&](std::vector<double> s) {
    std::vector<double> g(s.size());
    for (std::size_t a = 0; a < s.size(); ++a) {
      const double h = 1e-6, keep = s[a];
      s[a] = keep + h;
      const double up = gini(s);
      s[a] = keep - h;
      const double down = gini(s);
      s[a] = keep;
      g[a] = (up - down) / (2 * h);
    }
    return g;
  };
  const auto g1 = gradient(block_means(r1));
  const auto g2 = gradient(block_means(r2));
  std::vector<double> psi(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t q1 = r1.goes_right(b.x(i)) ? 1 : 0, q2 = r2.goes_right(b.x(i)) ? 1 : 0;
    double v = 0.0;
    for (std::size_t c = 0; c < k; ++c) v += g1[q1 * k + c] * b.y(i, c) - g2[q2 * k + c] * b.y(i, c);
    psi[i] = v;
    mean += v / static_cast<double>(n);
  }
  double var = 0.0;
  for (double v : psi) var += (v - mean) * (v - mean) / static_cast<double>(n);
  return var;
}

struct SignalNoise {
  Dataset data;
  ForestModel teacher;
};

SignalNoise signal_noise(std::uint64_t seed) {
  auto data = fixtures::step_data(400, 2, seed);
  auto teacher = fixtures::stump_forest(data, 0.15, 0.85);
  return {std::move(data), std::move(teacher)};
}

}  // namespace

TEST_CASE("gini_of examples") {
  CHECK(gini_of(ClassDistribution({1.0, 0.0})) == 0.0);
  CHECK(gini_of(ClassDistribution({0.5, 0.5})) == 0.5);
  CHECK(gini_of(ClassDistribution({0.2, 0.3, 0.5})) == doctest::Approx(0.62).epsilon(1e-12));
}

TEST_CASE("split_stats examples") {
  auto perfect = batch_of({{0.1, {1, 0}}, {0.2, {1, 0}}, {0.8, {0, 1}}, {0.9, {0, 1}}});
  CHECK(split_stats(perfect, SplitRule{0, 0.5}).gini == doctest::Approx(0.0));

  auto all_left = split_stats(perfect, SplitRule{0, 5.0});
  CHECK(all_left.n_right == 0u);
  CHECK(all_left.gini == doctest::Approx(0.5));

  auto four = batch_of({{0.1, {1, 0}}, {0.2, {1, 0}}, {0.5, {0, 1}}, {0.4, {1, 0}}});
  std::vector<SoftSample> samples;
  for (std::size_t i = 0; i < four.size(); ++i) samples.push_back(four.sample(i));
  auto s = split_stats(samples, SplitRule{0, 0.45});
  CHECK(s.n_left == 3u);
  CHECK(s.n_right == 1u);
  CHECK(s.gini == doctest::Approx(0.0));
  CHECK(s.theta_left[0] == doctest::Approx(1.0));
}

TEST_CASE("pair_variance: identical partitions give zero, and it matches an independent oracle") {
  std::mt19937_64 rng(5);
  auto b = random_batch(rng, 300, 2, 3);
  CHECK(std::abs(pair_variance(b, SplitRule{0, 0.5}, SplitRule{0, 0.5})) <= 1e-12);

  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::size_t cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 3);
    auto batch = random_batch(rng, 40 + static_cast<std::size_t>(trial % 60), 2, k);
    const SplitRule r1{static_cast<std::size_t>(rng() % 2), u(rng)};
    const SplitRule r2{static_cast<std::size_t>(rng() % 2), u(rng)};
    const double v = pair_variance(batch, r1, r2);
    REQUIRE(v >= -1e-12);
    if (trial % 10 == 0) {
      const double oracle = influence_oracle(batch, r1, r2);
      CHECK(std::abs(v - oracle) <= 1e-6 * std::max(1.0, oracle));
    }
    ++cases;
  }
  CHECK(cases >= 1000u);
}

TEST_CASE("pair_pvalue examples and monotonicity") {
  CHECK(pair_pvalue(0.0, 0.3, 100) == doctest::Approx(0.5));
  CHECK(pair_pvalue(-0.1, 0.0, 100) == 0.0);
  CHECK(pair_pvalue(0.0, 0.0, 100) == 0.5);
  const double var = 0.04;
  const std::size_t n = 500;
  CHECK(std::abs(pair_pvalue(-1.6449 * std::sqrt(2 * var / n), var, n) - 0.05) <= 1e-4);
  try {
    pair_pvalue(-0.1, -1e-6, 10);
    FAIL("expected NegativeVariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NegativeVariance);
  }
  CHECK(pair_pvalue(-0.1, -1e-12, 10) == 0.0);

  double prev = 1.0;
  for (double d = -0.001; d > -0.1; d *= 1.5) {
    const double p = pair_pvalue(d, 0.05, 1000);
    CHECK(p < prev);
    prev = p;
  }
  prev = 0.0;
  for (double v = 0.01; v < 10.0; v *= 1.5) {
    const double p = pair_pvalue(-0.02, v, 1000);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("next_sample_size examples") {
  CHECK(next_sample_size(1000, 0.05 + 1e-9, 0.05) == 1001u);
  const auto n = next_sample_size(1000, 0.3, 0.05);
  CHECK(n >= 9837u);
  CHECK(n <= 9839u);
  CHECK(next_sample_size(1000, 0.6, 0.05) == 2000u);
  CHECK(next_sample_size(1000, 0.5, 0.05) == 2000u);
  for (double bad : {0.0, 1.0, -0.2, 1.5}) {
    try {
      next_sample_size(1000, bad, 0.05);
      FAIL("expected InvalidP");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidP);
    }
  }
  std::size_t prev = 1000;
  for (double p = 0.06; p < 0.5; p += 0.02) {
    const auto next = next_sample_size(1000, p, 0.05);
    CHECK(next > prev);
    prev = next;
  }
}

TEST_CASE("fwer_aggregate examples") {
  std::vector<double> a{0.01, 0.02, 0.03};
  CHECK(fwer_aggregate(a) == doctest::Approx(0.06));
  CHECK(fwer_aggregate(std::vector<double>{}) == 0.0);
  std::vector<double> c{0.7, 0.8};
  CHECK(fwer_aggregate(c) == 1.0);
}

TEST_CASE("fast candidate scan agrees with the explicit pairwise route") {
  std::mt19937_64 rng(31);
  std::size_t compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto batch = random_batch(rng, 400, 2, 2 + static_cast<std::size_t>(trial % 2));
    const std::vector<CandidateSplit> cands{{SplitRule{0, 0.49}, 0}, {SplitRule{0, 0.51}, 0}};
    StabilizerConfig cfg;
    cfg.mode = SelectionMode::OneShot;
    cfg.n_init = batch.size();
    auto verdict = evaluate_candidates(cands, batch, nullptr, cfg);
    const auto& winner = cands[verdict.winner].rule;
    const auto& other = cands[1 - verdict.winner].rule;
    CHECK(split_stats(batch, winner).gini <= split_stats(batch, other).gini + 1e-12);
    if (verdict.survivors.size() == 2) {
      const auto ev = compare_splits(batch, winner, other);
      CHECK(verdict.aggregated_p == doctest::Approx(ev.p_value).epsilon(1e-8));
      ++compared;
    }
  }
  CHECK(compared > 10u);
}

TEST_CASE("select_split: one candidate") {
  auto sn = signal_noise(1);
  StabilizerConfig cfg;
  cfg.n_init = 300;
  const std::vector<CandidateSplit> one{{SplitRule{0, 0.5}, 400}};
  auto v = select_split(one, Region(sn.data.schema()), sn.data, sn.teacher, SamplerConfig{}, cfg);
  CHECK(v.winner == 0u);
  CHECK(v.aggregated_p == 0.0);
  CHECK(v.n_used == 300u);
  CHECK_THROWS_AS(select_split(std::vector<CandidateSplit>{}, Region(sn.data.schema()), sn.data, sn.teacher,
                               SamplerConfig{}, cfg),
                  Error);
}

TEST_CASE("select_split: pure signal beats pure noise without growth") {
  auto sn = signal_noise(2);
  StabilizerConfig cfg;
  cfg.n_init = 1000;
  const std::vector<CandidateSplit> cands{{SplitRule{1, 0.5}, 400}, {SplitRule{0, 0.5}, 400}};
  int wins = 0, grown = 0;
  for (std::uint64_t r = 0; r < 50; ++r) {
    SamplerConfig s;
    s.seed = 1000 + r;
    auto v = select_split(cands, Region(sn.data.schema()), sn.data, sn.teacher, s, cfg);
    wins += v.winner == 1 ? 1 : 0;
    grown += v.n_used > cfg.n_init ? 1 : 0;
  }
  CHECK(wins == 50);
  CHECK(grown == 0);
}

TEST_CASE("select_split: duplicated column is capped and tie-broken lexicographically") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng);
    v.push_back(x);
    v.push_back(x);
    y.push_back(x > 0.5);
  }
  Dataset data(fixtures::unit_schema(2), v, y, 2);
  auto teacher = fixtures::stump_forest(data, 0.3, 0.7);
  SamplerConfig s;
  s.bandwidth_fraction = 0.0;
  s.jump_prob = 0.0;
  StabilizerConfig cfg;
  cfg.n_init = 500;
  cfg.max_pseudo = 4000;
  const std::vector<CandidateSplit> cands{{SplitRule{1, 0.4}, 200}, {SplitRule{0, 0.4}, 200}};
  auto verdict = select_split(cands, Region(data.schema()), data, teacher, s, cfg);
  CHECK(verdict.capped);
  CHECK(verdict.n_used == 4000u);
  CHECK(verdict.winner == 1u);
  CHECK(verdict.survivors.size() == 2u);
}

TEST_CASE("one-shot equals the first adaptive round on the same batch") {
  auto sn = signal_noise(4);
  const std::vector<CandidateSplit> cands{{SplitRule{0, 0.45}, 0}, {SplitRule{0, 0.5}, 0}, {SplitRule{1, 0.3}, 0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SamplerConfig s;
    s.seed = seed;
    PseudoSampler sampler(sn.data, Region(sn.data.schema()), sn.teacher, s);
    SoftBatch base = sampler.draw(800);
    SoftBatch copy = base;
    StabilizerConfig cfg;
    cfg.n_init = 800;
    cfg.max_pseudo = 800;
    auto adaptive = evaluate_candidates(cands, base, &sampler, cfg);
    cfg.mode = SelectionMode::OneShot;
    auto one_shot = evaluate_candidates(cands, copy, nullptr, cfg);
    CHECK(adaptive.winner == one_shot.winner);
    CHECK(adaptive.n_used == 800u);
  }
}

TEST_CASE("eliminated candidates rarely become best on a larger batch") {
  auto sn = signal_noise(6);
  std::vector<CandidateSplit> cands;
  for (double t : {0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7}) cands.push_back({SplitRule{0, t}, 0});
  for (double t : {0.25, 0.5, 0.75}) cands.push_back({SplitRule{1, t}, 0});
  int trials = 0, sound = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SamplerConfig s;
    s.seed = 500 + seed;
    PseudoSampler sampler(sn.data, Region(sn.data.schema()), sn.teacher, s);
    SoftBatch small = sampler.draw(500);
    StabilizerConfig cfg;
    cfg.mode = SelectionMode::OneShot;
    cfg.n_init = 500;
    auto first = evaluate_candidates(cands, small, nullptr, cfg);
    std::vector<bool> eliminated(cands.size(), true);
    for (auto idx : first.survivors) eliminated[idx] = false;
    SoftBatch big = sampler.draw(5000);
    cfg.n_init = 5000;
    auto later = evaluate_candidates(cands, big, nullptr, cfg);
    ++trials;
    sound += eliminated[later.winner] ? 0 : 1;
  }
  CHECK(sound >= 95);
}

TEST_CASE("stabilizer config validation") {
  StabilizerConfig cfg;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.alpha = 0.1;
  cfg.max_pseudo = 10;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
