#include "approxtree/tree_builder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "approxtree/stats.hpp"

namespace approxtree {

void BuildConfig::validate() const {
  if (max_depth < 1) throw Error(ErrorKind::InvalidArgument, "max_depth must be at least 1");
  if (!(one_shot_multiplier > 0.0)) throw Error(ErrorKind::InvalidArgument, "one_shot_multiplier must be positive");
  if (stop_gate.mode == StopGateMode::Enforce && !(stop_gate.threshold > 0.0 && stop_gate.threshold < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "stop gate threshold must lie in (0,1)");
  }
  sampler.validate();
  node_test.validate();
  stabilizer().validate();
}

StabilizerConfig BuildConfig::stabilizer() const {
  StabilizerConfig s;
  s.alpha = alpha;
  s.n_init = n_init;
  s.max_pseudo = max_pseudo;
  s.mode = mode;
  s.max_growth = max_growth;
  return s;
}

std::vector<CandidateSplit> enumerate_candidates(const Dataset& data, const Region& region) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (region.contains(data.row(i))) rows.push_back(i);
  }
  std::vector<CandidateSplit> out;
  std::vector<double> values;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    values.clear();
    for (auto i : rows) values.push_back(data.at(i, j));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      const double mid = 0.5 * (values[v] + values[v + 1]);
      if (!(mid > values[v] && mid < values[v + 1])) continue;
      out.push_back(CandidateSplit{SplitRule{j, mid}, rows.size()});
    }
  }
  if (out.empty()) throw Error(ErrorKind::NoValidSplit, "every covariate is constant on the region");
  return out;
}

std::string NodeLog::to_json_line() const {
  nlohmann::json j{{"node", node},
                   {"depth", depth},
                   {"support", support},
                   {"candidates", candidates},
                   {"outcome", outcome},
                   {"split_pvalue", split_pvalue},
                   {"capped", capped},
                   {"pseudo_samples_used", pseudo_samples_used}};
  auto rs = nlohmann::json::array();
  for (const auto& r : rounds) {
    rs.push_back({{"n", r.n},
                  {"survivors", r.survivors},
                  {"eliminated", r.eliminated},
                  {"best", r.best},
                  {"aggregated_p", r.aggregated_p}});
  }
  j["rounds"] = std::move(rs);
  j["rule"] = rule ? nlohmann::json{{"covariate", rule->covariate}, {"threshold", rule->threshold}} : nlohmann::json();
  j["stop_pvalue"] = stop_pvalue ? nlohmann::json(*stop_pvalue) : nlohmann::json();
  return j.dump();
}

namespace {

ClassDistribution batch_mean(const SoftBatch& batch) {
  std::vector<double> mean(batch.num_classes(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto y = batch.y(i);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += y[c];
  }
  double total = 0.0;
  for (double v : mean) total += v;
  for (double& v : mean) v /= total;
  return ClassDistribution(std::move(mean));
}

std::size_t count_support(const Dataset& data, const Region& region) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) n += region.contains(data.row(i)) ? 1 : 0;
  return n;
}

class Builder {
 public:
  Builder(const Dataset& data, const ForestModel& teacher, const BuildConfig& cfg)
      : data_(data), teacher_(teacher), cfg_(cfg) {}

  BuildResult run() {
    TreeNode root;
    root.region = Region(data_.schema());
    root.depth = 1;
    tree_.add_node(std::move(root));
    if (cfg_.mode == SelectionMode::OneShot) {
      PseudoSampler sampler(data_, tree_.node(0).region, teacher_, node_sampler(0));
      const auto count = static_cast<std::size_t>(std::ceil(cfg_.one_shot_multiplier * static_cast<double>(data_.rows())));
      SoftBatch batch = sampler.draw(count);
      grow(0, &batch, std::nullopt);
    } else {
      grow(0, nullptr, std::nullopt);
    }
    return {std::move(tree_), std::move(log_)};
  }

 private:
  SamplerConfig node_sampler(std::size_t id) const {
    SamplerConfig s = cfg_.sampler;
    s.seed = derive_seed(cfg_.seed, 2 * id + 1);
    return s;
  }

  NodeTestConfig node_test_config(std::size_t id) const {
    NodeTestConfig t = cfg_.node_test;
    t.seed = derive_seed(cfg_.node_test.seed, 2 * id + 2);
    return t;
  }

  void grow(std::size_t id, const SoftBatch* inherited, std::optional<ClassDistribution> parent_estimate) {
    const Region region = tree_.node(id).region;
    const std::size_t depth = tree_.node(id).depth;
    NodeLog entry;
    entry.node = id;
    entry.depth = depth;
    entry.support = count_support(data_, region);

    if (cfg_.stop_gate.mode != StopGateMode::Off) {
      auto report = test_node(teacher_, data_, region, cfg_.sampler, node_test_config(id));
      entry.stop_pvalue = report.averaged_p;
      tree_.node(id).stat.stop_pvalue = report.averaged_p;
    }

    std::vector<CandidateSplit> candidates;
    if (depth >= cfg_.max_depth) {
      entry.outcome = "max_depth";
    } else if (entry.support < std::max<std::size_t>(cfg_.min_support, 2)) {
      entry.outcome = "min_support";
    } else {
      try {
        candidates = enumerate_candidates(data_, region);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoValidSplit) throw;
        entry.outcome = "no_valid_split";
      }
      if (entry.outcome.empty() && cfg_.stop_gate.mode == StopGateMode::Enforce &&
          *entry.stop_pvalue >= cfg_.stop_gate.threshold) {
        entry.outcome = "stop_gate";
      }
    }
    entry.candidates = candidates.size();

    const bool adaptive = cfg_.mode == SelectionMode::Adaptive;
    std::optional<PseudoSampler> sampler;
    SoftBatch batch;
    if (adaptive) {
      sampler.emplace(data_, region, teacher_, node_sampler(id));
    } else {
      batch = *inherited;
      if (entry.outcome.empty() && batch.size() < 2) entry.outcome = "thin_batch";
    }

    auto& stat = tree_.node(id).stat;
    if (!entry.outcome.empty()) {
      if (adaptive) batch = sampler->draw(cfg_.n_init);
      stat.pseudo_samples_used = batch.size();
      stat.class_estimate = batch.empty() ? parent_estimate.value_or(ClassDistribution::uniform(
                                                static_cast<std::size_t>(teacher_.num_classes())))
                                          : batch_mean(batch);
      entry.pseudo_samples_used = stat.pseudo_samples_used;
      log_.push_back(std::move(entry));
      return;
    }

    auto verdict = evaluate_candidates(candidates, batch, adaptive ? &*sampler : nullptr, cfg_.stabilizer());
    const SplitRule rule = candidates[verdict.winner].rule;
    {
      auto& node = tree_.node(id);
      node.rule = rule;
      node.stat.pseudo_samples_used = verdict.n_used;
      node.stat.split_pvalue = verdict.aggregated_p;
      node.stat.capped = verdict.capped;
      node.stat.class_estimate = batch_mean(batch);
    }
    entry.outcome = "split";
    entry.rule = rule;
    entry.rounds = verdict.rounds;
    entry.split_pvalue = verdict.aggregated_p;
    entry.capped = verdict.capped;
    entry.pseudo_samples_used = verdict.n_used;
    log_.push_back(std::move(entry));

    TreeNode left, right;
    left.region = region.refine(rule, Side::Left);
    right.region = region.refine(rule, Side::Right);
    left.depth = right.depth = depth + 1;
    const std::size_t l = tree_.add_node(std::move(left));
    const std::size_t r = tree_.add_node(std::move(right));
    tree_.node(id).children = std::make_pair(l, r);
    const ClassDistribution estimate = tree_.node(id).stat.class_estimate;

    if (adaptive) {
      sampler.reset();
      batch = SoftBatch();
      grow(l, nullptr, estimate);
      grow(r, nullptr, estimate);
    } else {
      SoftBatch left_batch = batch.filter(tree_.node(l).region);
      SoftBatch right_batch = batch.filter(tree_.node(r).region);
      batch = SoftBatch();
      grow(l, &left_batch, estimate);
      grow(r, &right_batch, estimate);
    }
  }

  const Dataset& data_;
  const ForestModel& teacher_;
  const BuildConfig& cfg_;
  ApproxTree tree_;
  std::vector<NodeLog> log_;
};

}  // namespace

BuildResult build_tree_logged(const Dataset& data, const ForestModel& teacher, const BuildConfig& cfg) {
  cfg.validate();
  if (!(teacher.schema() == data.schema())) {
    throw Error(ErrorKind::SchemaViolation, "teacher and data schemas differ");
  }
  return Builder(data, teacher, cfg).run();
}

ApproxTree build_tree(const Dataset& data, const ForestModel& teacher, const BuildConfig& cfg) {
  return build_tree_logged(data, teacher, cfg).tree;
}

void annotate_stop_pvalues(ApproxTree& tree, const Dataset& data, const ForestModel& teacher,
                           const SamplerConfig& sampler_cfg, const NodeTestConfig& cfg) {
  for (std::size_t id = 0; id < tree.size(); ++id) {
    NodeTestConfig t = cfg;
    t.seed = derive_seed(cfg.seed, 2 * id + 2);
    tree.node(id).stat.stop_pvalue = test_node(teacher, data, tree.node(id).region, sampler_cfg, t).averaged_p;
  }
}

}  // namespace approxtree
