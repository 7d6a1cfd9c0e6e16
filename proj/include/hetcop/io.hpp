#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "hetcop/bootstrap.hpp"
#include "hetcop/data_model.hpp"
#include "hetcop/em.hpp"
#include "hetcop/graph.hpp"
#include "hetcop/error.hpp"
#include "hetcop/simgen.hpp"

namespace hetcop {

// Matrices are stored row-major with explicit dimensions.
inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    require(rows >= 0 && cols >= 0 && static_cast<Eigen::Index>(data.size()) == rows * cols,
            "matrix data length does not match its dimensions");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = data[static_cast<std::size_t>(i * cols + jj)];
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed matrix: ") + e.what());
  }
}

inline nlohmann::json fit_to_json(const FitResult& fit) {
  nlohmann::json j;
  j["method"] = to_string(fit.method);
  j["lambda1"] = fit.lambda1;
  j["lambda2"] = fit.lambda2;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations();
  j["trace"] = fit.trace;
  j["variables"] = fit.variables;
  j["groups"] = fit.group_labels;
  j["group_sizes"] = fit.corr_at_convergence.sizes;
  j["zero_threshold"] = fit.theta_set.zero_threshold;
  j["edge_counts"] = fit.theta_set.nu;
  j["precision"] = nlohmann::json::array();
  for (const auto& m : fit.theta_set.matrices) j["precision"].push_back(matrix_to_json(m));
  j["correlation"] = nlohmann::json::array();
  for (const auto& m : fit.corr_at_convergence.matrices) j["correlation"].push_back(matrix_to_json(m));
  return j;
}

inline FitResult fit_from_json(const nlohmann::json& j) {
  try {
    FitResult fit;
    fit.method = parse_estep_method(j.at("method").get<std::string>());
    fit.lambda1 = j.at("lambda1").get<double>();
    fit.lambda2 = j.at("lambda2").get<double>();
    fit.converged = j.at("converged").get<bool>();
    fit.trace = j.at("trace").get<std::vector<double>>();
    fit.variables = j.at("variables").get<std::vector<std::string>>();
    fit.group_labels = j.at("groups").get<std::vector<std::string>>();
    fit.theta_set.lambda1 = fit.lambda1;
    fit.theta_set.lambda2 = fit.lambda2;
    fit.theta_set.zero_threshold = j.value("zero_threshold", kZeroThreshold);
    for (const auto& m : j.at("precision")) fit.theta_set.matrices.push_back(matrix_from_json(m));
    if (j.contains("correlation"))
      for (const auto& m : j.at("correlation")) fit.corr_at_convergence.matrices.push_back(matrix_from_json(m));
    fit.corr_at_convergence.sizes = j.value("group_sizes", std::vector<std::size_t>{});
    fit.corr_at_convergence.method = fit.method;
    require(fit.theta_set.matrices.size() == fit.group_labels.size(), "fit has one precision matrix per group");
    for (const auto& m : fit.theta_set.matrices)
      require(m.rows() == static_cast<Eigen::Index>(fit.variables.size()) && m.cols() == m.rows(),
              "precision matrix does not match the variable list");
    refresh_edge_counts(fit.theta_set);
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed fit file: ") + e.what());
  }
}

inline FitResult load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open fit file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("fit file '" + path + "' is not valid JSON: " + e.what());
  }
  return fit_from_json(j);
}

inline nlohmann::json edges_to_json(const EdgeList& e) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [i, j] : e) out.push_back({i, j});
  return out;
}

inline nlohmann::json truth_to_json(const NetworkTruth& truth, const std::vector<std::string>& variables) {
  nlohmann::json j;
  j["kind"] = to_string(truth.spec.kind);
  j["p"] = truth.spec.p;
  j["K"] = truth.spec.K;
  j["rho"] = truth.spec.rho;
  j["edge_prob"] = truth.spec.edge_prob;
  j["epsilon"] = truth.spec.epsilon;
  j["seed"] = truth.spec.seed;
  j["variables"] = variables;
  j["kinds"] = nlohmann::json::array();
  for (const auto& k : truth.kinds) j["kinds"].push_back(kind_to_json(k));
  j["shared"] = matrix_to_json(truth.shared);
  j["shared_edges"] = edges_to_json(truth.shared_edges);
  j["theta"] = nlohmann::json::array();
  j["sigma"] = nlohmann::json::array();
  j["edges"] = nlohmann::json::array();
  for (std::size_t k = 0; k < truth.num_groups(); ++k) {
    j["theta"].push_back(matrix_to_json(truth.theta[k]));
    j["sigma"].push_back(matrix_to_json(truth.sigma[k]));
    j["edges"].push_back(edges_to_json(truth.edges[k]));
  }
  return j;
}

inline nlohmann::json stability_to_json(const StabilityReport& rep) {
  nlohmann::json j;
  j["B"] = rep.B;
  j["successful"] = rep.successful;
  j["acceptance_ratio"] = rep.acceptance_ratio;
  j["discovery_rate"] = rep.discovery_rate;
  j["reference_computed"] = rep.reference_computed;
  if (rep.reference_computed) {
    j["reference_lambda1"] = rep.reference_lambda1;
    j["reference_lambda2"] = rep.reference_lambda2;
  }
  j["groups"] = nlohmann::json::array();
  for (std::size_t k = 0; k < rep.group_labels.size(); ++k)
    j["groups"].push_back({{"group", rep.group_labels[k]},
                           {"reference_edges", rep.reference_edges[k].size()},
                           {"discovery_rate", rep.group_discovery_rate[k]}});
  j["failures"] = nlohmann::json::array();
  for (const auto& [b, msg] : rep.failures) j["failures"].push_back({{"replicate", b}, {"error", msg}});
  return j;
}

// Every pair that appeared at least once or belongs to the reference fit.
inline void write_frequencies_csv(const StabilityReport& rep, std::ostream& out) {
  out << "group,source,target,frequency,in_reference\n";
  for (std::size_t k = 0; k < rep.group_labels.size(); ++k) {
    const auto& f = rep.frequency[k];
    Eigen::MatrixXi ref = Eigen::MatrixXi::Zero(f.rows(), f.cols());
    for (const auto& [i, j] : rep.reference_edges[k]) ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1;
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index j = i + 1; j < f.cols(); ++j)
        if (f(i, j) > 0.0 || ref(i, j))
          out << detail::csv_field(rep.group_labels[k]) << ',' << detail::csv_field(rep.variables[static_cast<std::size_t>(i)])
              << ',' << detail::csv_field(rep.variables[static_cast<std::size_t>(j)]) << ','
              << detail::format_double(f(i, j)) << ',' << ref(i, j) << '\n';
  }
}

inline void write_score_table_csv(const std::vector<ScoreRow>& table, const std::string& criterion,
                                  std::ostream& out) {
  out << "lambda1,lambda2,criterion,score,aic,ebic,edges,iterations,converged,error\n";
  for (const auto& r : table)
    out << detail::format_double(r.lambda1) << ',' << detail::format_double(r.lambda2) << ',' << criterion << ','
        << detail::format_double(r.score) << ',' << detail::format_double(r.aic) << ','
        << detail::format_double(r.ebic) << ',' << r.edges << ',' << r.iterations << ','
        << (r.converged ? 1 : 0) << ',' << detail::csv_field(r.error) << '\n';
}

}  // namespace hetcop
