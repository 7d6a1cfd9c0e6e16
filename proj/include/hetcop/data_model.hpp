#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "hetcop/error.hpp"

namespace hetcop {

enum class VariableTag { continuous, count, ordinal, binary };

inline std::string to_string(VariableTag tag) {
  switch (tag) {
    case VariableTag::continuous: return "continuous";
    case VariableTag::count: return "count";
    case VariableTag::ordinal: return "ordinal";
    case VariableTag::binary: return "binary";
  }
  return "unknown";
}

inline VariableTag parse_variable_tag(std::string_view s) {
  if (s == "continuous" || s == "gaussian") return VariableTag::continuous;
  if (s == "count" || s == "poisson") return VariableTag::count;
  if (s == "ordinal") return VariableTag::ordinal;
  if (s == "binary" || s == "binomial") return VariableTag::binary;
  throw ValidationError("unknown variable kind '" + std::string(s) + "'");
}

// Marginal kind of one variable. `levels` is the category count d_j and is
// only carried by ordinal and binary variables.
struct VariableKind {
  VariableTag tag = VariableTag::continuous;
  std::optional<int> levels;

  static VariableKind continuous() { return {VariableTag::continuous, std::nullopt}; }
  static VariableKind count() { return {VariableTag::count, std::nullopt}; }
  static VariableKind binary() { return {VariableTag::binary, 2}; }
  static VariableKind ordinal(int levels) {
    VariableKind k{VariableTag::ordinal, levels};
    k.validate();
    return k;
  }

  bool is_discrete() const { return tag != VariableTag::continuous; }
  bool is_categorical() const { return tag == VariableTag::ordinal || tag == VariableTag::binary; }

  void validate() const {
    switch (tag) {
      case VariableTag::binary:
        require(levels.value_or(2) == 2, "binary variable must have exactly 2 levels");
        break;
      case VariableTag::ordinal:
        require(!levels || *levels >= 2, "ordinal variable needs at least 2 levels");
        break;
      default:
        require(!levels, to_string(tag) + " variable cannot carry levels");
    }
  }

  bool operator==(const VariableKind&) const = default;
};

using Schema = std::map<std::string, VariableKind>;

inline VariableKind kind_from_json(const nlohmann::json& j) {
  VariableKind kind;
  if (j.is_string()) {
    kind.tag = parse_variable_tag(j.get<std::string>());
  } else {
    require(j.is_object() && j.contains("kind"), "schema entry needs a \"kind\" field");
    kind.tag = parse_variable_tag(j.at("kind").get<std::string>());
    if (j.contains("levels") && !j.at("levels").is_null()) kind.levels = j.at("levels").get<int>();
  }
  if (kind.tag == VariableTag::binary && !kind.levels) kind.levels = 2;
  kind.validate();
  return kind;
}

inline nlohmann::json kind_to_json(const VariableKind& kind) {
  nlohmann::json j = {{"kind", to_string(kind.tag)}};
  if (kind.levels) j["levels"] = *kind.levels;
  return j;
}

inline Schema parse_schema(const nlohmann::json& j) {
  require(j.is_object(), "schema must be a JSON object mapping column name to kind");
  Schema schema;
  for (const auto& [name, entry] : j.items()) {
    try {
      schema[name] = kind_from_json(entry);
    } catch (const ValidationError& e) {
      throw ValidationError("schema column '" + name + "': " + e.what());
    }
  }
  return schema;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("schema '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_schema(j);
}

// K groups of observations over p shared variables. Cells are stored as
// doubles with NaN marking a missing value; discrete kinds hold integers.
struct MixedDataset {
  std::vector<std::string> variables;
  std::vector<VariableKind> kinds;
  std::vector<std::string> group_labels;
  std::vector<Eigen::MatrixXd> groups;

  std::size_t num_groups() const { return groups.size(); }
  std::size_t num_variables() const { return kinds.size(); }
  std::size_t group_size(std::size_t k) const { return static_cast<std::size_t>(groups[k].rows()); }
  std::size_t total_rows() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += static_cast<std::size_t>(g.rows());
    return n;
  }
  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> n;
    for (const auto& g : groups) n.push_back(static_cast<std::size_t>(g.rows()));
    return n;
  }

  std::size_t variable_index(const std::string& name) const {
    const auto it = std::find(variables.begin(), variables.end(), name);
    if (it == variables.end()) throw ValidationError("unknown variable '" + name + "'");
    return static_cast<std::size_t>(it - variables.begin());
  }

  void validate() const;
};

inline bool is_missing(double v) { return std::isnan(v); }

inline bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

inline void MixedDataset::validate() const {
  const std::size_t p = kinds.size();
  require(!groups.empty(), "dataset has no groups");
  require(p >= 1, "dataset has no variables");
  require(variables.size() == p, "variable names and kinds differ in length");
  require(group_labels.size() == groups.size(), "group labels and groups differ in length");
  for (std::size_t k = 0; k < groups.size(); ++k) {
    require(groups[k].rows() >= 1, "group '" + group_labels[k] + "' has zero rows");
    require(static_cast<std::size_t>(groups[k].cols()) == p,
            "group '" + group_labels[k] + "' has the wrong number of columns");
  }
  for (std::size_t j = 0; j < p; ++j) {
    const VariableKind& kind = kinds[j];
    kind.validate();
    require(!kind.is_categorical() || kind.levels.has_value(),
            "variable '" + variables[j] + "' is categorical but has no level count");
    bool varies = false;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      std::optional<double> first;
      for (Eigen::Index i = 0; i < groups[k].rows(); ++i) {
        const double v = groups[k](i, static_cast<Eigen::Index>(j));
        if (is_missing(v)) continue;
        require(std::isfinite(v), "variable '" + variables[j] + "' has a non-finite value");
        if (kind.is_discrete()) {
          require(is_integral(v), "variable '" + variables[j] + "' is " + to_string(kind.tag) +
                                      " but holds non-integer value " + std::to_string(v));
          require(v >= 0.0, "variable '" + variables[j] + "': value out of declared range (" +
                                std::to_string(v) + " < 0)");
          if (kind.is_categorical())
            require(v <= *kind.levels - 1, "variable '" + variables[j] +
                                               "': value out of declared range (" +
                                               std::to_string(static_cast<long long>(v)) +
                                               " not in {0,...," + std::to_string(*kind.levels - 1) + "})");
        }
        if (!first) first = v;
        else if (*first != v) varies = true;
      }
    }
    require(varies, "variable '" + variables[j] + "' is constant in every group");
  }
}

// Kind of a single column from its observed values (NaN = missing).
// {0,1} -> binary; contiguous nonnegative integers starting at 0 or 1 with at
// most 10 distinct values -> ordinal; other nonnegative integers -> count;
// anything else -> continuous.
inline VariableKind infer_variable_kind(const std::vector<double>& column) {
  std::set<double> distinct;
  bool integral = true;
  for (double v : column) {
    if (is_missing(v)) continue;
    distinct.insert(v);
    if (!is_integral(v)) integral = false;
  }
  require(!distinct.empty(), "cannot infer the kind of an empty column");
  if (!integral || *distinct.begin() < 0.0) return VariableKind::continuous();
  const double lo = *distinct.begin();
  const double hi = *distinct.rbegin();
  if (lo >= 0.0 && hi <= 1.0) return VariableKind::binary();
  const bool contiguous = hi - lo + 1.0 == static_cast<double>(distinct.size());
  if (contiguous && lo <= 1.0 && distinct.size() <= 10)
    return VariableKind::ordinal(static_cast<int>(hi) + 1);
  return VariableKind::count();
}

inline std::vector<VariableKind> infer_variable_kinds(const std::vector<std::vector<double>>& columns) {
  std::vector<VariableKind> kinds;
  kinds.reserve(columns.size());
  for (const auto& c : columns) kinds.push_back(infer_variable_kind(c));
  return kinds;
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Splits one delimited line; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quote in line: " + line);
  out.push_back(field);
  for (auto& f : out) f = std::string(trim(f));
  return out;
}

inline bool is_missing_marker(std::string_view s) {
  s = trim(s);
  if (s.empty()) return true;
  const std::string l = lower(s);
  return l == "na" || l == "nan";
}

inline double parse_cell(const std::string& s, std::size_t line_no, const std::string& column) {
  if (is_missing_marker(s)) return std::numeric_limits<double>::quiet_NaN();
  std::string_view v = trim(s);
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ValidationError("parse failure at line " + std::to_string(line_no) + ", column '" + column +
                          "': '" + s + "' is not numeric");
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Reads delimited text (comma or tab, detected from the header) into groups
// keyed by `group_column` in first-appearance order. Columns not named in the
// schema get inferred kinds; every schema column must exist in the file.
inline MixedDataset load_dataset(const std::string& path, const Schema& schema,
                                 const std::string& group_column) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  std::string header_line;
  if (!std::getline(in, header_line)) throw ValidationError("data file '" + path + "' is empty");
  if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) header_line.erase(0, 3);
  const char delim = std::count(header_line.begin(), header_line.end(), '\t') >
                             std::count(header_line.begin(), header_line.end(), ',')
                         ? '\t'
                         : ',';
  const std::vector<std::string> header = detail::split_line(header_line, delim);

  std::size_t group_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == group_column) group_col = c;
  if (group_col == header.size()) throw ValidationError("unknown column '" + group_column + "' (group column)");
  for (const auto& [name, kind] : schema)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw ValidationError("unknown column '" + name + "' declared in schema");

  std::vector<std::size_t> var_cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != group_col) var_cols.push_back(c);
  require(!var_cols.empty(), "data file has no variable columns");

  std::vector<std::string> labels;
  std::unordered_map<std::string, std::size_t> label_index;
  std::vector<std::vector<std::vector<double>>> rows;  // group -> row -> values
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_line(line, delim);
    if (fields.size() != header.size())
      throw ValidationError("parse failure at line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    const std::string& label = fields[group_col];
    if (detail::is_missing_marker(label))
      throw ValidationError("missing group label at line " + std::to_string(line_no));
    auto [it, inserted] = label_index.try_emplace(label, labels.size());
    if (inserted) {
      labels.push_back(label);
      rows.emplace_back();
    }
    std::vector<double> values;
    values.reserve(var_cols.size());
    for (std::size_t c : var_cols) values.push_back(detail::parse_cell(fields[c], line_no, header[c]));
    rows[it->second].push_back(std::move(values));
  }
  require(!labels.empty(), "data file '" + path + "' has no data rows");

  MixedDataset ds;
  ds.group_labels = labels;
  for (std::size_t c : var_cols) ds.variables.push_back(header[c]);
  const std::size_t p = var_cols.size();
  for (const auto& g : rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < p; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[i][j];
    ds.groups.push_back(std::move(m));
  }
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> pooled;
    for (const auto& g : ds.groups)
      for (Eigen::Index i = 0; i < g.rows(); ++i) pooled.push_back(g(i, static_cast<Eigen::Index>(j)));
    VariableKind kind;
    if (const auto it = schema.find(ds.variables[j]); it != schema.end()) {
      kind = it->second;
    } else {
      try {
        kind = infer_variable_kind(pooled);
      } catch (const ValidationError&) {
        throw ValidationError("variable '" + ds.variables[j] + "' has no observed values");
      }
    }
    if (kind.tag == VariableTag::ordinal && !kind.levels) {
      double hi = 0.0;
      for (double v : pooled)
        if (!is_missing(v)) hi = std::max(hi, v);
      kind.levels = std::max(2, static_cast<int>(hi) + 1);
    }
    ds.kinds.push_back(kind);
  }
  ds.validate();
  return ds;
}

inline void write_dataset(const MixedDataset& ds, std::ostream& out, const std::string& group_column = "group") {
  out << group_column;
  for (const auto& v : ds.variables) out << ',' << v;
  out << '\n';
  for (std::size_t k = 0; k < ds.num_groups(); ++k) {
    const auto& g = ds.groups[k];
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      out << ds.group_labels[k];
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        const double v = g(i, j);
        out << ',';
        if (is_missing(v))
          out << "NA";
        else if (ds.kinds[static_cast<std::size_t>(j)].is_discrete())
          out << static_cast<long long>(v);
        else
          out << detail::format_double(v);
      }
      out << '\n';
    }
  }
}

inline void write_dataset(const MixedDataset& ds, const std::string& path, const std::string& group_column = "group") {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_dataset(ds, out, group_column);
}

inline nlohmann::json schema_to_json(const MixedDataset& ds) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t v = 0; v < ds.num_variables(); ++v) j[ds.variables[v]] = kind_to_json(ds.kinds[v]);
  return j;
}

}  // namespace hetcop
