#include "approxtree/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace approxtree {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

SchemaSpec parse_schema_spec(std::istream& in) {
  SchemaSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ParseError, "schema line " + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "label") {
      spec.label = value;
      continue;
    }
    if (key == "classes") {
      spec.classes = split(value, ',');
      continue;
    }
    SchemaSpec::Entry entry;
    entry.name = key;
    std::string kind = value;
    std::string args;
    if (auto colon = value.find(':'); colon != std::string::npos) {
      kind = trim(value.substr(0, colon));
      args = trim(value.substr(colon + 1));
    }
    if (kind == "continuous") {
      entry.kind = ColumnKind::Continuous;
      if (!args.empty()) {
        auto parts = split(args, ',');
        auto lo = parts.size() == 2 ? to_number(parts[0]) : std::nullopt;
        auto hi = parts.size() == 2 ? to_number(parts[1]) : std::nullopt;
        if (!lo || !hi) throw Error(ErrorKind::ParseError, "schema line " + std::to_string(lineno) + ": bad range");
        entry.range = std::make_pair(*lo, *hi);
      }
    } else if (kind == "categorical") {
      entry.kind = ColumnKind::Categorical;
      if (!args.empty()) entry.levels = split(args, ',');
    } else {
      throw Error(ErrorKind::ParseError,
                  "schema line " + std::to_string(lineno) + ": unknown column kind '" + kind + "'");
    }
    spec.columns.push_back(std::move(entry));
  }
  return spec;
}

SchemaSpec load_schema_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open schema file " + path);
  return parse_schema_spec(in);
}

Dataset read_csv_dataset(std::istream& csv, const SchemaSpec& spec) {
  std::string line;
  if (!std::getline(csv, line)) throw Error(ErrorKind::ParseError, "empty CSV");
  auto header = split(line, ',');
  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::ParseError, "CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> positions;
  for (const auto& e : spec.columns) positions.push_back(find_col(e.name));
  std::optional<std::size_t> label_pos;
  if (spec.label) label_pos = find_col(*spec.label);

  std::vector<std::vector<std::string>> cells;
  std::size_t lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto row = split(line, ',');
    if (row.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "CSV line " + std::to_string(lineno) + " has " +
                                             std::to_string(row.size()) + " fields, header has " +
                                             std::to_string(header.size()));
    }
    cells.push_back(std::move(row));
  }
  const std::size_t n = cells.size();
  const std::size_t m = spec.columns.size();

  std::vector<Column> columns;
  std::vector<double> values(n * m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& e = spec.columns[j];
    const auto pos = positions[j];
    if (e.kind == ColumnKind::Continuous) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i = 0; i < n; ++i) {
        auto v = to_number(cells[i][pos]);
        if (!v) throw Error(ErrorKind::ParseError, "non-numeric value '" + cells[i][pos] + "' in " + e.name);
        values[i * m + j] = *v;
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
      if (e.range) {
        lo = std::min(lo, e.range->first);
        hi = std::max(hi, e.range->second);
      }
      if (n == 0 && !e.range) lo = hi = 0.0;
      columns.push_back(Column::continuous(e.name, lo, hi));
    } else {
      std::vector<std::string> levels = e.levels;
      const bool fixed = !levels.empty();
      for (std::size_t i = 0; i < n; ++i) {
        const auto& v = cells[i][pos];
        auto it = std::find(levels.begin(), levels.end(), v);
        if (it == levels.end()) {
          if (fixed) throw Error(ErrorKind::SchemaViolation, "unknown level '" + v + "' in " + e.name);
          levels.push_back(v);
          it = levels.end() - 1;
        }
        values[i * m + j] = static_cast<double>(it - levels.begin());
      }
      columns.push_back(Column::categorical(e.name, std::move(levels)));
    }
  }

  std::optional<std::vector<int>> labels;
  std::vector<std::string> classes = spec.classes;
  if (label_pos) {
    if (classes.empty()) {
      for (const auto& row : cells) {
        if (std::find(classes.begin(), classes.end(), row[*label_pos]) == classes.end()) {
          classes.push_back(row[*label_pos]);
        }
      }
      const bool numeric = std::all_of(classes.begin(), classes.end(), [](const auto& c) { return to_number(c); });
      if (numeric) {
        std::sort(classes.begin(), classes.end(),
                  [](const auto& a, const auto& b) { return *to_number(a) < *to_number(b); });
      } else {
        std::sort(classes.begin(), classes.end());
      }
    }
    labels.emplace();
    for (const auto& row : cells) {
      auto it = std::find(classes.begin(), classes.end(), row[*label_pos]);
      if (it == classes.end()) throw Error(ErrorKind::SchemaViolation, "unknown class '" + row[*label_pos] + "'");
      labels->push_back(static_cast<int>(it - classes.begin()));
    }
    if (classes.size() < 2) classes.push_back("other");
  } else if (classes.empty()) {
    classes = {"0", "1"};
  }
  const int k = static_cast<int>(classes.size());
  return Dataset(CovariateSchema(std::move(columns)), std::move(values), std::move(labels), k, std::move(classes));
}

Dataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
  auto spec = load_schema_spec(schema_path);
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open CSV " + csv_path);
  return read_csv_dataset(in, spec);
}

void write_csv_dataset(std::ostream& csv, const Dataset& data, const std::string& label_name,
                       const std::vector<std::pair<std::string, std::vector<double>>>& extra_columns) {
  const auto& schema = data.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) csv << (j ? "," : "") << schema.column(j).name;
  for (const auto& [name, _] : extra_columns) csv << ',' << name;
  if (data.has_labels()) csv << ',' << label_name;
  csv << '\n';
  csv.precision(17);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) csv << ',';
      const auto& c = schema.column(j);
      if (c.kind == ColumnKind::Categorical) {
        csv << c.levels[static_cast<std::size_t>(data.at(i, j))];
      } else {
        csv << data.at(i, j);
      }
    }
    for (const auto& [_, col] : extra_columns) csv << ',' << col.at(i);
    if (data.has_labels()) csv << ',' << data.class_names()[static_cast<std::size_t>(data.labels()[i])];
    csv << '\n';
  }
}

void write_schema_spec(std::ostream& out, const Dataset& data, const std::string& label_name) {
  out.precision(17);
  if (data.has_labels()) out << "label=" << label_name << '\n';
  out << "classes=";
  for (std::size_t c = 0; c < data.class_names().size(); ++c) out << (c ? "," : "") << data.class_names()[c];
  out << '\n';
  for (const auto& c : data.schema().columns()) {
    if (c.kind == ColumnKind::Continuous) {
      out << c.name << "=continuous:" << c.min << ',' << c.max << '\n';
    } else {
      out << c.name << "=categorical:";
      for (std::size_t l = 0; l < c.levels.size(); ++l) out << (l ? "," : "") << c.levels[l];
      out << '\n';
    }
  }
}

}  // namespace approxtree
