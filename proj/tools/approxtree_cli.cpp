#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "approxtree/dataset_io.hpp"
#include "approxtree/errors.hpp"
#include "approxtree/harness.hpp"
#include "approxtree/teacher_forest.hpp"
#include "approxtree/tree_builder.hpp"
#include "approxtree/tree_io.hpp"

namespace fs = std::filesystem;
using namespace approxtree;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  std::string out_dir = ".";
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << text;
}

json load_config(const Globals& g) {
  if (g.config.empty()) return json::object();
  try {
    return json::parse(slurp(g.config));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
}

template <class T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

// Config keys: "forest": {num_trees, subsample_size, mtry, min_leaf},
// "build": {max_depth, alpha, n_init, max_pseudo, mode, one_shot_multiplier,
// min_support, max_growth, stop_gate, stop_threshold},
// "sampler": {bandwidth_fraction, jump_prob},
// "node_test": {points_per_set, sets, df_mode}.
ForestConfig forest_config(const json& cfg, std::uint64_t seed) {
  ForestConfig f;
  f.seed = seed;
  if (cfg.contains("forest")) {
    const auto& j = cfg["forest"];
    take(j, "num_trees", f.num_trees);
    take(j, "subsample_size", f.subsample_size);
    take(j, "mtry", f.mtry);
    take(j, "min_leaf", f.min_leaf);
  }
  return f;
}

SelectionMode parse_mode(const std::string& s) {
  if (s == "adaptive") return SelectionMode::Adaptive;
  if (s == "one_shot" || s == "base") return SelectionMode::OneShot;
  throw Error(ErrorKind::InvalidArgument, "unknown mode " + s);
}

StopGateMode parse_gate(const std::string& s) {
  if (s == "off") return StopGateMode::Off;
  if (s == "annotate") return StopGateMode::Annotate;
  if (s == "enforce") return StopGateMode::Enforce;
  throw Error(ErrorKind::InvalidArgument, "unknown stop gate " + s);
}

DfMode parse_df(const std::string& s) {
  if (s == "rank") return DfMode::RankAdjusted;
  if (s == "full") return DfMode::FullDimension;
  throw Error(ErrorKind::InvalidArgument, "unknown df mode " + s);
}

SamplerConfig sampler_config(const json& cfg, std::uint64_t seed) {
  SamplerConfig s;
  s.seed = seed;
  if (cfg.contains("sampler")) {
    take(cfg["sampler"], "bandwidth_fraction", s.bandwidth_fraction);
    take(cfg["sampler"], "jump_prob", s.jump_prob);
  }
  return s;
}

NodeTestConfig node_test_config(const json& cfg, std::uint64_t seed) {
  NodeTestConfig t;
  t.seed = seed;
  if (cfg.contains("node_test")) {
    const auto& j = cfg["node_test"];
    take(j, "points_per_set", t.points_per_set);
    take(j, "sets", t.sets);
    if (j.contains("df_mode")) t.df_mode = parse_df(j["df_mode"].get<std::string>());
  }
  return t;
}

BuildConfig build_config(const json& cfg, std::uint64_t seed) {
  BuildConfig b;
  b.seed = seed;
  b.sampler = sampler_config(cfg, seed);
  b.node_test = node_test_config(cfg, seed);
  if (cfg.contains("build")) {
    const auto& j = cfg["build"];
    take(j, "max_depth", b.max_depth);
    take(j, "alpha", b.alpha);
    take(j, "n_init", b.n_init);
    take(j, "max_pseudo", b.max_pseudo);
    take(j, "one_shot_multiplier", b.one_shot_multiplier);
    take(j, "min_support", b.min_support);
    take(j, "max_growth", b.max_growth);
    take(j, "stop_threshold", b.stop_gate.threshold);
    if (j.contains("mode")) b.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("stop_gate")) b.stop_gate.mode = parse_gate(j["stop_gate"].get<std::string>());
  }
  return b;
}

struct DataArgs {
  std::string csv;
  std::string schema;
  std::string generator;
  std::size_t n = 1000;
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.csv, "Training CSV");
  cmd->add_option("--schema", d.schema, "Sidecar schema for the CSV");
  cmd->add_option("--generator", d.generator, "Use a built-in generator instead: sim_tree5 or step2");
  cmd->add_option("--n", d.n, "Rows for --generator");
}

Dataset resolve_data(const DataArgs& d, std::uint64_t seed) {
  if (!d.generator.empty()) {
    if (d.generator == "sim_tree5") return gen_sim_tree5(d.n, seed);
    if (d.generator == "step2") return gen_sim_step2(d.n, seed).data;
    throw Error(ErrorKind::InvalidArgument, "unknown generator " + d.generator);
  }
  if (d.csv.empty() || d.schema.empty()) throw Error(ErrorKind::InvalidArgument, "need --data and --schema, or --generator");
  return load_dataset(d.csv, d.schema);
}

std::vector<std::vector<double>> eval_points(const std::string& source, const Dataset& data, const ForestModel& teacher,
                                             std::size_t count, const json& cfg, std::uint64_t seed) {
  if (source == "sim_tree5") {
    const Dataset fresh = gen_sim_tree5(count, derive_seed(seed, 0xe7a1));
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < fresh.rows(); ++i) pts.emplace_back(fresh.row(i).begin(), fresh.row(i).end());
    return pts;
  }
  if (source != "sampler") throw Error(ErrorKind::InvalidArgument, "unknown evaluation source " + source);
  return sampler_points(data, teacher, count, sampler_config(cfg, derive_seed(seed, 0xe7a1)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distil a random-forest teacher into a stabilized approximation tree"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed");
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--out-dir", g.out_dir, "Output directory");

  // simgen
  auto* simgen = app.add_subcommand("simgen", "Write a simulated dataset as CSV plus schema");
  std::string sim_name = "sim_tree5";
  std::size_t sim_n = 1000;
  std::string sim_stem = "data";
  simgen->add_option("generator", sim_name, "sim_tree5 or step2")->required();
  simgen->add_option("--n", sim_n, "Rows");
  simgen->add_option("--stem", sim_stem, "Output file stem");

  // fit-teacher
  auto* fit = app.add_subcommand("fit-teacher", "Fit the random-forest teacher");
  DataArgs fit_data;
  add_data_options(fit, fit_data);
  std::optional<std::size_t> trees, subsample, mtry, min_leaf;
  std::string forest_name = "forest.json";
  fit->add_option("--trees", trees);
  fit->add_option("--subsample", subsample);
  fit->add_option("--mtry", mtry);
  fit->add_option("--min-leaf", min_leaf);
  fit->add_option("--output", forest_name, "Forest file name inside --out-dir");

  // distill
  auto* distill = app.add_subcommand("distill", "Build an approximation tree from a forest");
  DataArgs dist_data;
  add_data_options(distill, dist_data);
  std::string forest_in;
  std::optional<std::size_t> max_depth, n_init, max_pseudo;
  std::optional<double> alpha;
  std::string mode_str, gate_str;
  distill->add_option("--forest", forest_in)->required();
  distill->add_option("--max-depth", max_depth);
  distill->add_option("--alpha", alpha);
  distill->add_option("--n-init", n_init);
  distill->add_option("--max-pseudo", max_pseudo);
  distill->add_option("--mode", mode_str, "adaptive or one_shot");
  distill->add_option("--stop-gate", gate_str, "off, annotate or enforce");

  // node-test
  auto* ntest = app.add_subcommand("node-test", "Annotate a tree with node-test p-values");
  DataArgs nt_data;
  add_data_options(ntest, nt_data);
  std::string nt_forest, nt_tree;
  ntest->add_option("--forest", nt_forest)->required();
  ntest->add_option("--tree", nt_tree)->required();

  // stability
  auto* stab = app.add_subcommand("stability", "Rebuild trees against one teacher and count structures");
  DataArgs st_data;
  add_data_options(stab, st_data);
  std::string st_forest;
  std::size_t reps = 20;
  std::vector<std::size_t> depths{2, 3, 4};
  std::string st_mode;
  std::optional<std::size_t> st_max_pseudo, st_max_depth;
  stab->add_option("--forest", st_forest)->required();
  stab->add_option("--replications", reps);
  stab->add_option("--depths", depths);
  stab->add_option("--mode", st_mode, "adaptive or one_shot");
  stab->add_option("--max-pseudo", st_max_pseudo);
  stab->add_option("--max-depth", st_max_depth);

  // agree
  auto* agree = app.add_subcommand("agree", "Compare a tree against its teacher");
  DataArgs ag_data;
  add_data_options(agree, ag_data);
  std::string ag_forest, ag_tree, ag_source = "sampler";
  std::size_t ag_points = 10000;
  bool ag_roc = false;
  agree->add_option("--forest", ag_forest)->required();
  agree->add_option("--tree", ag_tree)->required();
  agree->add_option("--points", ag_points);
  agree->add_option("--eval-source", ag_source, "sampler or sim_tree5");
  agree->add_flag("--roc", ag_roc, "Also write a threshold/TPR/FPR table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const json cfg = load_config(g);

    if (*simgen) {
      Dataset data = [&] {
        if (sim_name == "sim_tree5") return gen_sim_tree5(sim_n, g.seed);
        if (sim_name == "step2") return gen_sim_step2(sim_n, g.seed).data;
        throw Error(ErrorKind::InvalidArgument, "unknown generator " + sim_name);
      }();
      std::vector<std::pair<std::string, std::vector<double>>> extra;
      if (sim_name == "step2") extra.emplace_back("response", gen_sim_step2(sim_n, g.seed).response);
      std::ofstream csv(out_path(g, sim_stem + ".csv"));
      write_csv_dataset(csv, data, "y", extra);
      std::ofstream schema(out_path(g, sim_stem + ".schema"));
      write_schema_spec(schema, data, "y");
      std::cout << "wrote " << data.rows() << " rows to " << out_path(g, sim_stem + ".csv").string() << '\n';
    } else if (*fit) {
      const Dataset data = resolve_data(fit_data, g.seed);
      ForestConfig fc = forest_config(cfg, g.seed);
      if (trees) fc.num_trees = *trees;
      if (subsample) fc.subsample_size = *subsample;
      if (mtry) fc.mtry = *mtry;
      if (min_leaf) fc.min_leaf = *min_leaf;
      const ForestModel model = fit_forest(data, fc);
      write_text(out_path(g, forest_name), forest_to_json(model));
      std::cout << "fitted " << model.num_trees() << " trees\n";
    } else if (*distill) {
      const Dataset data = resolve_data(dist_data, g.seed);
      const ForestModel teacher = forest_from_json(slurp(forest_in));
      BuildConfig bc = build_config(cfg, g.seed);
      if (max_depth) bc.max_depth = *max_depth;
      if (alpha) bc.alpha = *alpha;
      if (n_init) bc.n_init = *n_init;
      if (max_pseudo) bc.max_pseudo = *max_pseudo;
      if (!mode_str.empty()) bc.mode = parse_mode(mode_str);
      if (!gate_str.empty()) bc.stop_gate.mode = parse_gate(gate_str);
      const BuildResult result = build_tree_logged(data, teacher, bc);
      write_text(out_path(g, "tree.json"), tree_to_json(result.tree, data.schema(), data.class_names()).dump(2));
      write_text(out_path(g, "tree.dot"), tree_to_dot(result.tree, data.schema(), data.class_names()));
      std::ostringstream log;
      for (const auto& entry : result.log) log << entry.to_json_line() << '\n';
      write_text(out_path(g, "build_log.jsonl"), log.str());
      std::cout << "tree with " << result.tree.size() << " nodes, depth " << result.tree.depth() << '\n';
    } else if (*ntest) {
      const Dataset data = resolve_data(nt_data, g.seed);
      const ForestModel teacher = forest_from_json(slurp(nt_forest));
      LoadedTree loaded = tree_from_json(slurp(nt_tree));
      if (!(loaded.schema == data.schema())) throw Error(ErrorKind::SchemaViolation, "tree and data schemas differ");
      annotate_stop_pvalues(loaded.tree, data, teacher, sampler_config(cfg, g.seed), node_test_config(cfg, g.seed));
      write_text(out_path(g, "tree_annotated.json"), tree_to_json(loaded.tree, loaded.schema, loaded.class_names).dump(2));
      for (std::size_t id = 0; id < loaded.tree.size(); ++id) {
        std::cout << "node " << id << " averaged_p " << *loaded.tree.node(id).stat.stop_pvalue << '\n';
      }
    } else if (*stab) {
      const Dataset data = resolve_data(st_data, g.seed);
      const ForestModel teacher = forest_from_json(slurp(st_forest));
      BuildConfig bc = build_config(cfg, g.seed);
      bc.stop_gate.mode = StopGateMode::Off;
      if (!st_mode.empty()) bc.mode = parse_mode(st_mode);
      if (st_max_pseudo) bc.max_pseudo = *st_max_pseudo;
      if (st_max_depth) bc.max_depth = *st_max_depth;
      const StabilityReport report = stability_audit(teacher, data, bc, reps, depths);
      write_text(out_path(g, "stability.json"), report.to_json().dump(2));
      const std::string table = report.to_table(bc.mode == SelectionMode::Adaptive ? "adaptive" : "base");
      write_text(out_path(g, "stability.txt"), table);
      std::cout << table;
    } else if (*agree) {
      const Dataset data = resolve_data(ag_data, g.seed);
      const ForestModel teacher = forest_from_json(slurp(ag_forest));
      const LoadedTree loaded = tree_from_json(slurp(ag_tree));
      const auto pts = eval_points(ag_source, data, teacher, ag_points, cfg, g.seed);
      const AgreementReport report = agreement(loaded.tree, teacher, pts);
      write_text(out_path(g, "agreement.json"), report.to_json().dump(2));
      std::cout << "class_agreement " << report.class_agreement << "\nl1_prob_distance " << report.l1_prob_distance
                << "\nevaluation_n " << report.evaluation_n << '\n';
      if (ag_roc) {
        std::ostringstream os;
        os << "threshold,tpr,fpr\n";
        for (const auto& pt : roc_table(loaded.tree, teacher, pts)) os << pt.threshold << ',' << pt.tpr << ',' << pt.fpr << '\n';
        write_text(out_path(g, "roc.csv"), os.str());
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
