#pragma once

#include <string>

#include <json.hpp>

#include "approxtree/core_model.hpp"

namespace approxtree {

nlohmann::json schema_to_json(const CovariateSchema& schema);
CovariateSchema schema_from_json(const nlohmann::json& columns);

/// Tree document:
///   {"format": "approxtree-tree", "version": 1,
///    "schema": [...columns...], "class_names": [...],
///    "nodes": [{"id", "depth", "rule": {"covariate", "name", "threshold"} | null,
///               "children": [left, right] | null,
///               "region": [{"lo", "hi", "lo_open"}...],
///               "pseudo_samples_used", "split_pvalue", "capped",
///               "stop_pvalue" (optional), "class_estimate": [...]}]}
/// Node 0 is the root; children index into "nodes".
nlohmann::json tree_to_json(const ApproxTree& tree, const CovariateSchema& schema,
                            const std::vector<std::string>& class_names);

struct LoadedTree {
  ApproxTree tree;
  CovariateSchema schema;
  std::vector<std::string> class_names;
};
LoadedTree tree_from_json(const std::string& text);

/// Graphviz rendering; internal nodes show the rule and annotations, leaves
/// show the class estimate.
std::string tree_to_dot(const ApproxTree& tree, const CovariateSchema& schema,
                        const std::vector<std::string>& class_names);

}  // namespace approxtree
