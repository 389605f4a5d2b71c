#include "approxtree/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "approxtree/pseudo_sampler.hpp"
#include "approxtree/stats.hpp"

namespace approxtree {

double sim_tree5_logit(std::span<const double> x) {
  if (x[0] > 0.5) {
    if (x[1] > 0.7) return 2.0;
    if (x[1] > 0.2) return -3.0;
    return -4.0;
  }
  if (x[4] > 0.5) return 2.0;
  const double s = x[2] + x[3] * x[3];
  if (s >= 1.4) return 3.0;
  if (s >= 0.5) return 2.0;
  return -2.0;
}

double sim_tree5_probability(std::span<const double> x) { return 1.0 / (1.0 + std::exp(-sim_tree5_logit(x))); }

namespace {
CovariateSchema unit_schema(std::size_t m) {
  std::vector<Column> cols;
  for (std::size_t j = 0; j < m; ++j) cols.push_back(Column::continuous("x" + std::to_string(j + 1), 0.0, 1.0));
  return CovariateSchema(std::move(cols));
}
}  // namespace

Dataset gen_sim_tree5(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x7ee5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> values(n * 5);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(values.data() + i * 5, 5);
    for (double& v : x) v = unit(rng);
    labels[i] = unit(rng) < sim_tree5_probability(x) ? 1 : 0;
  }
  return Dataset(unit_schema(5), std::move(values), std::move(labels), 2, {"0", "1"});
}

StepData gen_sim_step2(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x57e9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> values(n * 2);
  std::vector<int> labels(n);
  std::vector<double> response(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[2 * i] = unit(rng);
    values[2 * i + 1] = unit(rng);
    response[i] = (values[2 * i] < 0.5 ? -1.0 : 1.0) + noise(rng);
    labels[i] = response[i] >= 0.0 ? 1 : 0;
  }
  return {Dataset(unit_schema(2), std::move(values), std::move(labels), 2, {"neg", "pos"}), std::move(response)};
}

StabilityReport summarize_structures(const std::vector<ApproxTree>& trees, const std::vector<std::size_t>& depths) {
  StabilityReport report;
  report.replications = trees.size();
  for (auto depth : depths) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : trees) counts[tree_fingerprint(t, depth)]++;
    std::vector<std::pair<std::size_t, std::string>> sorted;
    for (auto& [fp, c] : counts) sorted.emplace_back(c, fp);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    DepthStructure ds;
    ds.distinct = sorted.size();
    for (auto& [c, fp] : sorted) {
      ds.histogram.push_back(c);
      ds.fingerprints.push_back(fp);
    }
    report.by_depth[depth] = std::move(ds);
  }
  return report;
}

StabilityReport stability_audit(const ForestModel& teacher, const Dataset& data, const BuildConfig& cfg,
                                std::size_t replications, const std::vector<std::size_t>& depths) {
  if (replications < 2) throw Error(ErrorKind::InvalidArgument, "stability audit needs at least 2 replications");
  std::vector<ApproxTree> trees;
  trees.reserve(replications);
  for (std::size_t r = 0; r < replications; ++r) {
    BuildConfig c = cfg;
    c.seed = cfg.seed + r;
    c.sampler.seed = cfg.sampler.seed + r;
    trees.push_back(build_tree(data, teacher, c));
  }
  return summarize_structures(trees, depths);
}

nlohmann::json StabilityReport::to_json() const {
  nlohmann::json j{{"replications", replications}};
  auto depths = nlohmann::json::object();
  for (const auto& [d, ds] : by_depth) {
    depths[std::to_string(d)] = {{"distinct", ds.distinct}, {"histogram", ds.histogram}, {"fingerprints", ds.fingerprints}};
  }
  j["depths"] = std::move(depths);
  return j;
}

std::string StabilityReport::to_table(const std::string& label) const {
  std::ostringstream os;
  const std::size_t w = std::max<std::size_t>(label.size(), 6) + 2;
  os << std::left << std::setw(static_cast<int>(w)) << "method" << std::setw(7) << "depth" << std::setw(9) << "#Struct"
     << "Top 3 Cnt\n";
  for (const auto& [d, ds] : by_depth) {
    os << std::setw(static_cast<int>(w)) << label << std::setw(7) << d << std::setw(9) << ds.distinct;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ds.histogram.size()); ++i) {
      os << (i ? ", " : "") << ds.histogram[i];
    }
    os << '\n';
  }
  return os.str();
}

AgreementReport agreement(const ApproxTree& tree, const ForestModel& teacher,
                          const std::vector<std::vector<double>>& eval_points) {
  AgreementReport rep;
  rep.evaluation_n = eval_points.size();
  if (eval_points.empty()) return rep;
  std::size_t agree = 0;
  double l1 = 0.0;
  for (const auto& x : eval_points) {
    const auto teach = teacher.predict_proba(x);
    const auto& student = tree.predict(x);
    agree += teach.argmax() == student.argmax() ? 1 : 0;
    for (std::size_t c = 0; c < teach.size(); ++c) l1 += std::abs(teach[c] - student[c]);
  }
  rep.class_agreement = static_cast<double>(agree) / static_cast<double>(eval_points.size());
  rep.l1_prob_distance = l1 / static_cast<double>(eval_points.size());
  return rep;
}

nlohmann::json AgreementReport::to_json() const {
  return {{"class_agreement", class_agreement}, {"l1_prob_distance", l1_prob_distance}, {"evaluation_n", evaluation_n}};
}

std::vector<RocPoint> roc_table(const ApproxTree& tree, const ForestModel& teacher,
                                const std::vector<std::vector<double>>& eval_points, std::size_t steps) {
  if (teacher.num_classes() != 2) throw Error(ErrorKind::InvalidArgument, "ROC table needs a binary teacher");
  std::vector<int> truth;
  std::vector<double> score;
  for (const auto& x : eval_points) {
    truth.push_back(static_cast<int>(teacher.predict_proba(x).argmax()));
    score.push_back(tree.predict(x)[1]);
  }
  const auto pos = static_cast<double>(std::count(truth.begin(), truth.end(), 1));
  const auto neg = static_cast<double>(truth.size()) - pos;
  std::vector<RocPoint> out;
  for (std::size_t s = 0; s <= steps; ++s) {
    RocPoint pt;
    pt.threshold = static_cast<double>(s) / static_cast<double>(steps);
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (score[i] >= pt.threshold) (truth[i] == 1 ? tp : fp) += 1.0;
    }
    pt.tpr = pos > 0 ? tp / pos : 0.0;
    pt.fpr = neg > 0 ? fp / neg : 0.0;
    out.push_back(pt);
  }
  return out;
}

std::vector<std::vector<double>> sampler_points(const Dataset& data, const ForestModel& teacher, std::size_t count,
                                                const SamplerConfig& cfg) {
  PseudoSampler sampler(data, Region(data.schema()), teacher, cfg);
  auto xs = sampler.draw_covariates(count);
  const std::size_t m = data.cols();
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.emplace_back(xs.begin() + static_cast<std::ptrdiff_t>(i * m), xs.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
  }
  return out;
}

}  // namespace approxtree
