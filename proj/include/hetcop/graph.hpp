#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/data_model.hpp"
#include "hetcop/error.hpp"
#include "hetcop/fused_glasso.hpp"

namespace hetcop {

struct Edge {
  std::string source;
  std::string target;
  double pcor = 0.0;
};

struct GroupGraph {
  std::string label;
  std::vector<std::string> vertices;
  std::vector<Edge> edges;
};

struct EdgeGraph {
  std::vector<GroupGraph> groups;
};

inline double partial_correlation(const Eigen::MatrixXd& theta, Eigen::Index i, Eigen::Index j) {
  const double r = -theta(i, j) / std::sqrt(theta(i, i) * theta(j, j));
  return std::clamp(r, -1.0, 1.0);
}

inline EdgeGraph partial_correlations(const std::vector<Eigen::MatrixXd>& thetas,
                                      const std::vector<std::string>& variables,
                                      const std::vector<std::string>& group_labels,
                                      double threshold = kZeroThreshold) {
  require(thetas.size() == group_labels.size(), "one label per precision matrix is required");
  EdgeGraph g;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    const auto& t = thetas[k];
    require(t.rows() == static_cast<Eigen::Index>(variables.size()) && t.cols() == t.rows(),
            "precision matrix does not match the variable list");
    for (Eigen::Index j = 0; j < t.rows(); ++j)
      if (!(t(j, j) > 0.0)) throw NumericalError("precision matrix has a nonpositive diagonal");
    GroupGraph gg;
    gg.label = group_labels[k];
    gg.vertices = variables;
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = i + 1; j < t.cols(); ++j)
        if (std::fabs(t(i, j)) >= threshold)
          gg.edges.push_back({variables[static_cast<std::size_t>(i)], variables[static_cast<std::size_t>(j)],
                              partial_correlation(t, i, j)});
    g.groups.push_back(std::move(gg));
  }
  return g;
}

inline EdgeGraph partial_correlations(const PrecisionSet& ps, const std::vector<std::string>& variables,
                                      const std::vector<std::string>& group_labels) {
  return partial_correlations(ps.matrices, variables, group_labels, ps.zero_threshold);
}

// Restricts every group to the target and its neighbours. With
// `union_over_groups`, a variable adjacent to the target in any group is kept
// in all groups.
inline EdgeGraph neighborhood_subgraph(const EdgeGraph& graph, const std::string& target, bool union_over_groups) {
  bool found = false;
  for (const auto& gg : graph.groups)
    found = found || std::find(gg.vertices.begin(), gg.vertices.end(), target) != gg.vertices.end();
  if (!found) throw ValidationError("unknown variable '" + target + "'");

  const auto neighbours = [&](const GroupGraph& gg) {
    std::set<std::string> keep{target};
    for (const auto& e : gg.edges) {
      if (e.source == target) keep.insert(e.target);
      if (e.target == target) keep.insert(e.source);
    }
    return keep;
  };
  std::set<std::string> shared;
  if (union_over_groups)
    for (const auto& gg : graph.groups) shared.merge(neighbours(gg));

  EdgeGraph out;
  for (const auto& gg : graph.groups) {
    const std::set<std::string> keep = union_over_groups ? shared : neighbours(gg);
    GroupGraph sub;
    sub.label = gg.label;
    for (const auto& v : gg.vertices)
      if (keep.count(v)) sub.vertices.push_back(v);
    for (const auto& e : gg.edges)
      if (keep.count(e.source) && keep.count(e.target)) sub.edges.push_back(e);
    out.groups.push_back(std::move(sub));
  }
  return out;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

inline void write_edges_csv(const EdgeGraph& g, std::ostream& out) {
  out << "group,source,target,partial_correlation\n";
  for (const auto& gg : g.groups)
    for (const auto& e : gg.edges)
      out << detail::csv_field(gg.label) << ',' << detail::csv_field(e.source) << ','
          << detail::csv_field(e.target) << ',' << detail::format_double(e.pcor) << '\n';
}

// One undirected <graph> per group; node ids are prefixed with the group index
// so they stay unique across the document.
inline void write_graphml(const EdgeGraph& g, std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\"\n"
         "         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\"\n"
         "         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
         "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n"
         "  <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n"
         "  <key id=\"pcor\" for=\"edge\" attr.name=\"pcor\" attr.type=\"double\"/>\n";
  for (std::size_t k = 0; k < g.groups.size(); ++k) {
    const auto& gg = g.groups[k];
    const std::string prefix = "g" + std::to_string(k) + ":";
    out << "  <graph id=\"" << detail::xml_escape(gg.label) << "\" edgedefault=\"undirected\">\n";
    for (const auto& v : gg.vertices)
      out << "    <node id=\"" << detail::xml_escape(prefix + v) << "\"><data key=\"name\">" << detail::xml_escape(v)
          << "</data></node>\n";
    for (const auto& e : gg.edges)
      out << "    <edge source=\"" << detail::xml_escape(prefix + e.source) << "\" target=\""
          << detail::xml_escape(prefix + e.target) << "\"><data key=\"pcor\">" << detail::format_double(e.pcor)
          << "</data></edge>\n";
    out << "  </graph>\n";
  }
  out << "</graphml>\n";
}

}  // namespace hetcop
