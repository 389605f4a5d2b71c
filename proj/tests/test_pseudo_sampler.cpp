#include <doctest.h>

#include <cmath>
#include <set>

#include "approxtree/errors.hpp"
#include "approxtree/pseudo_sampler.hpp"
#include "fixtures.hpp"

using namespace approxtree;

namespace {

Dataset mixed_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CovariateSchema schema({Column::continuous("x", 0.0, 1.0), Column::categorical("c", {"a", "b", "c", "d"})});
  std::vector<double> v;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(u(rng));
    v.push_back(static_cast<double>(rng() % 4));
    y.push_back(v[2 * i] > 0.5 ? 1 : 0);
  }
  return Dataset(schema, v, y, 2);
}

}  // namespace

TEST_CASE("zero noise copies in-region training rows") {
  auto data = mixed_data(50, 1);
  auto teacher = fixtures::stump_forest(data, 0.2, 0.8);
  Region region = Region(data.schema()).refine(SplitRule{0, 0.5}, Side::Right);
  SamplerConfig cfg;
  cfg.bandwidth_fraction = 0.0;
  cfg.jump_prob = 0.0;
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (region.contains(data.row(i))) rows.emplace(data.row(i).begin(), data.row(i).end());
  }
  for (const auto& s : draw_pseudo(data, region, teacher, 500, cfg)) CHECK(rows.count(s.x) == 1);
}

TEST_CASE("draws respect the region and carry exact teacher labels") {
  auto data = mixed_data(400, 2);
  auto teacher = fixtures::stump_forest(data, 0.2, 0.8);
  Region region = Region(data.schema()).refine(SplitRule{0, 0.3}, Side::Left).refine(SplitRule{1, 1.5}, Side::Right);
  SamplerConfig cfg;
  cfg.bandwidth_fraction = 0.1;
  cfg.jump_prob = 0.5;
  PseudoSampler sampler(data, region, teacher, cfg);
  auto batch = sampler.draw(100000);
  REQUIRE(batch.size() == 100000u);
  std::size_t outside = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) outside += region.contains(batch.x(i)) ? 0 : 1;
  CHECK(outside == 0u);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto p = teacher.predict_proba(batch.x(i));
    CHECK(batch.y(i, 0) == p[0]);
    CHECK(batch.y(i, 1) == p[1]);
  }
}

TEST_CASE("continuous mean matches the training mean") {
  auto data = mixed_data(2000, 3);
  auto teacher = fixtures::stump_forest(data, 0.2, 0.8);
  SamplerConfig cfg;
  PseudoSampler sampler(data, Region(data.schema()), teacher, cfg);
  const std::size_t n = 100000;
  auto xs = sampler.draw_covariates(n);
  double mean = 0.0, sq = 0.0, train = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += xs[2 * i];
    sq += xs[2 * i] * xs[2 * i];
  }
  mean /= n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  for (std::size_t i = 0; i < data.rows(); ++i) train += data.at(i, 0);
  train /= static_cast<double>(data.rows());
  CHECK(std::abs(mean - train) <= 3.0 * se);
}

TEST_CASE("categorical jumps go to adjacent levels at the configured rate") {
  CovariateSchema schema({Column::categorical("c", {"a", "b", "c", "d"})});
  Dataset data(schema, {0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0}, std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1}, 2);
  auto teacher = fixtures::constant_forest(data, {0.5, 0.5});
  SamplerConfig cfg;
  cfg.jump_prob = 0.3;
  PseudoSampler sampler(data, Region(schema), teacher, cfg);
  auto xs = sampler.draw_covariates(40000);
  std::array<int, 4> counts{};
  for (double v : xs) counts[static_cast<std::size_t>(v)]++;
  // from level 0 the only neighbor is 1; from level 2 it is 1 or 3 evenly
  CHECK(counts[0] / 40000.0 == doctest::Approx(0.35).epsilon(0.05));
  CHECK(counts[1] / 40000.0 == doctest::Approx(0.15 + 0.075).epsilon(0.05));
  CHECK(counts[3] / 40000.0 == doctest::Approx(0.075).epsilon(0.08));
}

TEST_CASE("sampler is seed deterministic") {
  auto data = mixed_data(100, 4);
  auto teacher = fixtures::stump_forest(data, 0.2, 0.8);
  SamplerConfig cfg;
  cfg.seed = 77;
  Region region(data.schema());
  CHECK(PseudoSampler(data, region, teacher, cfg).draw_covariates(300) ==
        PseudoSampler(data, region, teacher, cfg).draw_covariates(300));
  cfg.seed = 78;
  auto other = PseudoSampler(data, region, teacher, cfg).draw_covariates(300);
  cfg.seed = 77;
  CHECK(other != PseudoSampler(data, region, teacher, cfg).draw_covariates(300));
}

TEST_CASE("sampler errors") {
  auto data = mixed_data(100, 5);
  auto teacher = fixtures::stump_forest(data, 0.2, 0.8);
  SamplerConfig cfg;
  Region empty = Region(data.schema()).refine(SplitRule{0, 0.999999}, Side::Right);
  bool any = false;
  for (std::size_t i = 0; i < data.rows(); ++i) any |= empty.contains(data.row(i));
  REQUIRE_FALSE(any);
  try {
    PseudoSampler(data, empty, teacher, cfg);
    FAIL("expected EmptyNodeSupport");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyNodeSupport);
  }

  const double x0 = data.at(0, 0);
  Region sliver = Region(data.schema())
                      .refine(SplitRule{0, x0 - 1e-12}, Side::Right)
                      .refine(SplitRule{0, x0}, Side::Left);
  try {
    PseudoSampler(data, sliver, teacher, cfg).draw_covariates(10);
    FAIL("expected RejectionOverflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RejectionOverflow);
  }

  SamplerConfig bad;
  bad.jump_prob = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.jump_prob = 0.1;
  bad.bandwidth_fraction = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("soft batch filter keeps rows inside a region") {
  SoftBatch b(1, 2);
  for (double x : {0.1, 0.4, 0.6, 0.9}) {
    std::vector<double> xv{x}, yv{0.5, 0.5};
    b.push_back(xv, yv);
  }
  Region r = Region(fixtures::unit_schema(1)).refine(SplitRule{0, 0.5}, Side::Left);
  auto f = b.filter(r);
  REQUIRE(f.size() == 2u);
  CHECK(f.x(1, 0) == 0.4);
}
