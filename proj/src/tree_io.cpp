#include "approxtree/tree_io.hpp"

#include <cstdio>
#include <sstream>

namespace approxtree {

namespace {
constexpr const char* kTreeFormat = "approxtree-tree";
constexpr int kTreeVersion = 1;

std::string format_number(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

std::string describe_rule(const SplitRule& rule, const CovariateSchema& schema) {
  const auto& col = schema.column(rule.covariate);
  if (col.kind == ColumnKind::Categorical) {
    auto cut = static_cast<std::size_t>(rule.threshold);
    if (cut + 1 < col.levels.size()) return col.name + " > " + col.levels[cut];
  }
  return col.name + " > " + format_number(rule.threshold);
}
}  // namespace

nlohmann::json schema_to_json(const CovariateSchema& schema) {
  auto cols = nlohmann::json::array();
  for (const auto& c : schema.columns()) {
    nlohmann::json col{{"name", c.name}};
    if (c.kind == ColumnKind::Continuous) {
      col["kind"] = "continuous";
      col["min"] = c.min;
      col["max"] = c.max;
    } else {
      col["kind"] = "categorical";
      col["levels"] = c.levels;
    }
    cols.push_back(std::move(col));
  }
  return cols;
}

CovariateSchema schema_from_json(const nlohmann::json& columns) {
  std::vector<Column> out;
  for (const auto& col : columns) {
    if (col.at("kind") == "continuous") {
      out.push_back(Column::continuous(col.at("name"), col.at("min"), col.at("max")));
    } else {
      out.push_back(Column::categorical(col.at("name"), col.at("levels").get<std::vector<std::string>>()));
    }
  }
  return CovariateSchema(std::move(out));
}

nlohmann::json tree_to_json(const ApproxTree& tree, const CovariateSchema& schema,
                            const std::vector<std::string>& class_names) {
  nlohmann::json doc;
  doc["format"] = kTreeFormat;
  doc["version"] = kTreeVersion;
  doc["schema"] = schema_to_json(schema);
  doc["class_names"] = class_names;
  auto nodes = nlohmann::json::array();
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const auto& n = tree.node(id);
    nlohmann::json node{{"id", id}, {"depth", n.depth}};
    if (n.rule) {
      node["rule"] = {{"covariate", n.rule->covariate},
                      {"name", schema.column(n.rule->covariate).name},
                      {"threshold", n.rule->threshold}};
      node["children"] = {n.children->first, n.children->second};
    } else {
      node["rule"] = nullptr;
      node["children"] = nullptr;
    }
    auto region = nlohmann::json::array();
    for (std::size_t j = 0; j < n.region.size(); ++j) {
      const auto& b = n.region.bound(j);
      region.push_back({{"lo", b.lo}, {"hi", b.hi}, {"lo_open", b.lo_open}});
    }
    node["region"] = std::move(region);
    node["pseudo_samples_used"] = n.stat.pseudo_samples_used;
    node["split_pvalue"] = n.stat.split_pvalue;
    node["capped"] = n.stat.capped;
    if (n.stat.stop_pvalue) node["stop_pvalue"] = *n.stat.stop_pvalue;
    node["class_estimate"] = n.stat.class_estimate.probs();
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);
  return doc;
}

LoadedTree tree_from_json(const std::string& text) {
  try {
    auto doc = nlohmann::json::parse(text);
    if (doc.value("format", "") != kTreeFormat || doc.value("version", 0) != kTreeVersion) {
      throw Error(ErrorKind::ParseError, "not an approxtree tree (format/version mismatch)");
    }
    LoadedTree out;
    out.schema = schema_from_json(doc.at("schema"));
    out.class_names = doc.at("class_names").get<std::vector<std::string>>();
    const Region root(out.schema);
    std::vector<TreeNode> nodes;
    for (const auto& node : doc.at("nodes")) {
      TreeNode n;
      n.depth = node.at("depth");
      if (!node.at("rule").is_null()) {
        n.rule = SplitRule{node.at("rule").at("covariate"), node.at("rule").at("threshold")};
        auto ch = node.at("children");
        n.children = std::make_pair(ch.at(0).get<std::size_t>(), ch.at(1).get<std::size_t>());
      }
      // regions are rebuilt from the rules below; the stored copy is informational
      n.region = root;
      n.stat.pseudo_samples_used = node.at("pseudo_samples_used");
      n.stat.split_pvalue = node.at("split_pvalue");
      n.stat.capped = node.value("capped", false);
      if (node.contains("stop_pvalue")) n.stat.stop_pvalue = node.at("stop_pvalue").get<double>();
      n.stat.class_estimate = ClassDistribution(node.at("class_estimate").get<std::vector<double>>());
      nodes.push_back(std::move(n));
    }
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      if (!nodes[id].children) continue;
      auto [l, r] = *nodes[id].children;
      if (l >= nodes.size() || r >= nodes.size() || l <= id || r <= id) {
        throw Error(ErrorKind::ParseError, "tree child index out of order");
      }
      nodes[l].region = nodes[id].region.refine(*nodes[id].rule, Side::Left);
      nodes[r].region = nodes[id].region.refine(*nodes[id].rule, Side::Right);
    }
    out.tree = ApproxTree(std::move(nodes));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("tree file: ") + e.what());
  }
}

std::string tree_to_dot(const ApproxTree& tree, const CovariateSchema& schema,
                        const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "digraph approxtree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const auto& n = tree.node(id);
    std::string label;
    if (n.rule) {
      label = describe_rule(*n.rule, schema) + "\\nn_ps=" + std::to_string(n.stat.pseudo_samples_used) +
              "  p_split=" + format_number(n.stat.split_pvalue, 3);
      if (n.stat.capped) label += " (capped)";
    } else {
      const auto c = n.stat.class_estimate.argmax();
      label = (c < class_names.size() ? class_names[c] : std::to_string(c)) + "\\n[";
      for (std::size_t j = 0; j < n.stat.class_estimate.size(); ++j) {
        if (j) label += ", ";
        label += format_number(n.stat.class_estimate[j], 3);
      }
      label += "]";
    }
    if (n.stat.stop_pvalue) label += "\\np_stop=" + format_number(*n.stat.stop_pvalue, 3);
    os << "  n" << id << " [label=\"" << label << "\"" << (n.rule ? "" : ", style=rounded") << "];\n";
    if (n.children) {
      os << "  n" << id << " -> n" << n.children->first << " [label=\"no\"];\n";
      os << "  n" << id << " -> n" << n.children->second << " [label=\"yes\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace approxtree
