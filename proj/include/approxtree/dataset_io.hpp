#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "approxtree/core_model.hpp"

namespace approxtree {

/// Sidecar schema file, one `key=value` per line, `#` comments:
///
///   label=y                       # label column (optional for unlabeled data)
///   classes=0,1                   # optional explicit class order
///   x1=continuous                 # range taken from the data
///   x2=continuous:0,10            # explicit range
///   x3=categorical                # levels in order of first appearance
///   x4=categorical:low,mid,high   # explicit level order
///
/// CSV columns not mentioned in the schema are ignored.
struct SchemaSpec {
  struct Entry {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::optional<std::pair<double, double>> range;
    std::vector<std::string> levels;
  };
  std::vector<Entry> columns;
  std::optional<std::string> label;
  std::vector<std::string> classes;
};

SchemaSpec parse_schema_spec(std::istream& in);
SchemaSpec load_schema_spec(const std::string& path);

Dataset read_csv_dataset(std::istream& csv, const SchemaSpec& spec);
Dataset load_dataset(const std::string& csv_path, const std::string& schema_path);

/// Writes covariates (categorical as level names) plus the label column when
/// present, and the matching sidecar schema.
void write_csv_dataset(std::ostream& csv, const Dataset& data, const std::string& label_name = "y",
                       const std::vector<std::pair<std::string, std::vector<double>>>& extra_columns = {});
void write_schema_spec(std::ostream& out, const Dataset& data, const std::string& label_name = "y");

}  // namespace approxtree
