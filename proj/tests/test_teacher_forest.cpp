#include <doctest.h>

#include <cmath>

#include "approxtree/errors.hpp"
#include "approxtree/harness.hpp"
#include "approxtree/teacher_forest.hpp"
#include "fixtures.hpp"

using namespace approxtree;

namespace {

// C^i_k = (1/m) sum_b (T_b(x_k) - mean_b T)(1{i in S_b} - mean_b 1{i in S_b}).
Eigen::MatrixXd zeta1_oracle(const ForestModel& model, const std::vector<std::vector<double>>& pts, int channel) {
  const std::size_t m = model.num_trees(), n = model.sample_size(), q = pts.size();
  std::vector<std::vector<double>> t(m, std::vector<double>(q));
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t k = 0; k < q; ++k) t[b][k] = model.trees()[b].leaf_probs(pts[k])[channel];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < n; ++i) {
    double in_mean = 0.0;
    for (std::size_t b = 0; b < m; ++b) in_mean += model.in_subsample(b, i) ? 1.0 : 0.0;
    in_mean /= static_cast<double>(m);
    std::vector<double> c(q, 0.0);
    for (std::size_t k = 0; k < q; ++k) {
      double t_mean = 0.0;
      for (std::size_t b = 0; b < m; ++b) t_mean += t[b][k];
      t_mean /= static_cast<double>(m);
      for (std::size_t b = 0; b < m; ++b) c[k] += (t[b][k] - t_mean) * ((model.in_subsample(b, i) ? 1.0 : 0.0) - in_mean);
      c[k] /= static_cast<double>(m);
    }
    for (std::size_t k = 0; k < q; ++k)
      for (std::size_t l = 0; l < q; ++l) out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += c[k] * c[l];
  }
  return out;
}

double min_eigen(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  return eig.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("single-class data gives pure single-leaf trees") {
  std::vector<double> v(60);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) / 60.0;
  Dataset data(fixtures::unit_schema(2), v, std::vector<int>(30, 0), 2);
  ForestConfig cfg;
  cfg.num_trees = 5;
  auto model = fit_forest(data, cfg);
  for (const auto& t : model.trees()) {
    CHECK(t.size() == 1u);
    CHECK(t.leaf_probs()[0] == 1.0);
  }
}

TEST_CASE("fit_forest validates sizes and is deterministic") {
  auto data = fixtures::step_data(50, 3, 4);
  ForestConfig cfg;
  cfg.subsample_size = 50;
  try {
    fit_forest(data, cfg);
    FAIL("expected DatasetTooSmall");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DatasetTooSmall);
  }
  cfg.subsample_size = 20;
  cfg.num_trees = 30;
  auto a = fit_forest(data, cfg);
  auto b = fit_forest(data, cfg);
  CHECK(a.membership() == b.membership());
  for (std::size_t t = 0; t < a.num_trees(); ++t) CHECK(a.subsample(t).size() == 20u);
  cfg.seed = 2;
  CHECK(fit_forest(data, cfg).membership() != a.membership());
}

TEST_CASE("predict_proba averages trees") {
  auto data = fixtures::step_data(20, 1, 1);
  ForestConfig cfg;
  cfg.num_trees = 2;
  cfg.subsample_size = 4;
  ForestModel model({fixtures::leaf_tree({1.0, 0.0}), fixtures::leaf_tree({0.0, 1.0})}, {{0, 1, 2, 3}, {4, 5, 6, 7}}, 20, cfg,
                    data.schema(), 2);
  std::vector<double> x{0.3};
  auto p = model.predict_proba(x);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  std::vector<double> bad{0.3, 0.2};
  CHECK_THROWS_AS(model.predict_proba(bad), Error);

  auto agree = fixtures::constant_forest(data, {0.0, 1.0});
  CHECK(agree.predict_proba(x)[1] == 1.0);
}

TEST_CASE("per_tree_predictions shapes and consistency with predict_proba") {
  auto data = fixtures::step_data(200, 3, 5);
  ForestConfig cfg;
  cfg.num_trees = 40;
  auto model = fit_forest(data, cfg);
  CHECK(per_tree_predictions(model, {}, 1).cols() == 0);
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < 25; ++i) pts.emplace_back(data.row(i).begin(), data.row(i).end());
  auto preds = per_tree_predictions(model, pts, 1);
  CHECK(preds.rows() == 40);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto p = model.predict_proba(pts[k]);
    CHECK(std::abs(preds.col(static_cast<Eigen::Index>(k)).mean() - p[1]) <= 1e-12);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  auto same = fixtures::constant_forest(data, {0.3, 0.7});
  auto flat = per_tree_predictions(same, pts, 1);
  CHECK((flat.array() == 0.7).all());
}

TEST_CASE("IJ sum matches the definitional double loop") {
  auto data = fixtures::step_data(30, 2, 8);
  ForestConfig cfg;
  cfg.num_trees = 50;
  cfg.subsample_size = 10;
  cfg.min_leaf = 2;
  auto model = fit_forest(data, cfg);
  std::vector<std::vector<double>> pts{{0.2, 0.7}, {0.8, 0.1}};
  const auto oracle = zeta1_oracle(model, pts, 1);
  const auto preds = per_tree_predictions(model, pts, 1);
  CHECK((ij_sum(model, preds) - oracle).cwiseAbs().maxCoeff() <= 1e-12);
  const double scale = 30.0 / 100.0;
  CHECK((estimate_zeta1(model, pts, 1) - scale * oracle).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(oracle.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("zeta estimates on degenerate forests") {
  auto data = fixtures::step_data(40, 2, 3);
  auto model = fixtures::constant_forest(data, {0.4, 0.6});
  std::vector<std::vector<double>> pts{{0.1, 0.1}, {0.9, 0.9}, {0.5, 0.2}};
  CHECK(estimate_zeta1(model, pts, 1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(estimate_zetakk(model, pts, 1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(forest_covariance(model, pts, 1).tau2.cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd two(2, 1);
  two << 0.0, 1.0;
  CHECK(estimate_zetakk(two)(0, 0) == doctest::Approx(0.25));

  Eigen::MatrixXd z1 = Eigen::MatrixXd::Identity(2, 2), zk = Eigen::MatrixXd::Zero(2, 2);
  CHECK(combine_tau2(z1, zk, 30, 30, 10)(0, 0) == doctest::Approx(30.0));
  CHECK(combine_tau2(z1, z1, 10, 100, 4)(1, 1) == doctest::Approx(1.0 + 0.25));
}

TEST_CASE("covariance estimates are symmetric PSD and reproducible") {
  auto data = fixtures::step_data(150, 3, 21);
  ForestConfig cfg;
  cfg.num_trees = 60;
  cfg.seed = 9;
  auto model = fit_forest(data, cfg);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::vector<double>> pts(8, std::vector<double>(3));
    for (auto& p : pts)
      for (double& v : p) v = u(rng);
    auto est = forest_covariance(model, pts, 1);
    CHECK((est.zeta1 - est.zeta1.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(min_eigen(est.zeta1) >= -1e-10);
    CHECK(min_eigen(est.zetakk) >= -1e-10);
    auto again = forest_covariance(fit_forest(data, cfg), pts, 1);
    CHECK((again.tau2 - est.tau2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ensemble term shrinks like 1/m") {
  auto data = fixtures::step_data(300, 3, 17);
  std::vector<std::vector<double>> pts{{0.45, 0.5, 0.5}, {0.55, 0.5, 0.5}, {0.2, 0.8, 0.3}};
  ForestConfig cfg;
  cfg.num_trees = 100;
  auto small = forest_covariance(fit_forest(data, cfg), pts, 1);
  cfg.num_trees = 1000;
  auto big = forest_covariance(fit_forest(data, cfg), pts, 1);
  const double ratio = (small.zetakk.trace() / 100.0) / (big.zetakk.trace() / 1000.0);
  CHECK(ratio > 7.0);
  CHECK(ratio < 14.0);
}

TEST_CASE("forest accuracy is close to the Bayes classifier on the five-covariate design") {
  auto train = gen_sim_tree5(1000, 1);
  auto test = gen_sim_tree5(5000, 2);
  ForestConfig cfg;
  auto model = fit_forest(train, cfg);
  std::size_t forest_hits = 0, bayes_hits = 0;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const int y = test.labels()[i];
    forest_hits += static_cast<int>(model.predict_proba(test.row(i)).argmax()) == y;
    bayes_hits += (sim_tree5_probability(test.row(i)) > 0.5 ? 1 : 0) == y;
  }
  const double forest_acc = static_cast<double>(forest_hits) / 5000.0;
  const double bayes_acc = static_cast<double>(bayes_hits) / 5000.0;
  MESSAGE("forest " << forest_acc << " bayes " << bayes_acc);
  CHECK(forest_acc >= bayes_acc - 0.06);
}

TEST_CASE("forest JSON round trip") {
  auto data = fixtures::step_data(80, 2, 6);
  ForestConfig cfg;
  cfg.num_trees = 7;
  auto model = fit_forest(data, cfg);
  auto back = forest_from_json(forest_to_json(model));
  CHECK(back.membership() == model.membership());
  CHECK(back.schema() == model.schema());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    CHECK(back.predict_proba(data.row(i)).probs() == model.predict_proba(data.row(i)).probs());
  }
  CHECK_THROWS_AS(forest_from_json("{\"format\":\"other\"}"), Error);
  CHECK_THROWS_AS(forest_from_json("not json"), Error);
}
