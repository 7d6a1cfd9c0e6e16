#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/data_model.hpp"
#include "hetcop/error.hpp"
#include "hetcop/estep.hpp"
#include "hetcop/fused_glasso.hpp"
#include "hetcop/marginals.hpp"
#include "hetcop/parallel.hpp"

namespace hetcop {

struct EmOptions {
  int max_iter = 50;
  double tol = 1e-4;
  // Seed of the Gibbs E-step. The same random stream is reused in every EM
  // iteration, which keeps the iteration map deterministic.
  std::uint64_t seed = 0;
  int n_samples = 1000;
  int burn_in = 100;
  std::size_t workers = 1;
  TruncationOptions truncation;
  FglOptions fgl;
};

// Everything about a dataset that does not depend on the penalties: the
// truncation boxes and the first E-step, which always runs at Sigma = I.
struct EmProblem {
  std::vector<std::string> variables;
  std::vector<std::string> group_labels;
  TruncationSet truncation;
  EStepMethod method = EStepMethod::approx;
  CorrelationSet first_estep;

  std::size_t num_groups() const { return truncation.num_groups(); }
  Eigen::Index dim() const { return truncation.num_variables(); }
};

inline CorrelationSet run_estep(const TruncationSet& trunc, const std::vector<Eigen::MatrixXd>& sigma,
                                EStepMethod method, const EmOptions& opts) {
  if (method == EStepMethod::gibbs) {
    GibbsOptions g;
    g.n_samples = opts.n_samples;
    g.burn_in = opts.burn_in;
    g.seed = opts.seed;
    g.workers = opts.workers;
    return estep_gibbs(trunc, sigma, g);
  }
  return estep_approx(trunc, sigma, opts.workers);
}

inline EmProblem make_em_problem(const MixedDataset& ds, EStepMethod method, const EmOptions& opts = {}) {
  ds.validate();
  EmProblem prob;
  prob.variables = ds.variables;
  prob.group_labels = ds.group_labels;
  prob.method = method;
  prob.truncation = truncation_intervals(ds, build_marginals(ds), opts.truncation);
  const auto p = static_cast<Eigen::Index>(ds.num_variables());
  const std::vector<Eigen::MatrixXd> identity(ds.num_groups(), Eigen::MatrixXd::Identity(p, p));
  prob.first_estep = run_estep(prob.truncation, identity, method, opts);
  return prob;
}

struct FitResult {
  PrecisionSet theta_set;
  // The E-step correlations that produced the final precision matrices.
  CorrelationSet corr_at_convergence;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  EStepMethod method = EStepMethod::approx;
  std::vector<double> trace;
  bool converged = false;
  std::vector<std::string> variables;
  std::vector<std::string> group_labels;

  int iterations() const { return static_cast<int>(trace.size()); }
};

inline double relative_change(const std::vector<Eigen::MatrixXd>& next, const std::vector<Eigen::MatrixXd>& prev) {
  double worst = 0.0;
  for (std::size_t k = 0; k < next.size(); ++k) {
    const double denom = prev[k].norm();
    worst = std::max(worst, (next[k] - prev[k]).norm() / (denom > 0.0 ? denom : 1.0));
  }
  return worst;
}

inline FitResult em_fit(const EmProblem& prob, double lambda1, double lambda2, const EmOptions& opts = {},
                        const AdmmState* warm_start = nullptr) {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "penalties must be nonnegative");
  require(opts.max_iter >= 1, "max_iter must be at least 1");
  require(opts.tol > 0.0, "tol must be positive");
  const std::size_t K = prob.num_groups();
  const Eigen::Index p = prob.dim();

  FitResult fit;
  fit.lambda1 = lambda1;
  fit.lambda2 = lambda2;
  fit.method = prob.method;
  fit.variables = prob.variables;
  fit.group_labels = prob.group_labels;

  std::vector<Eigen::MatrixXd> previous(K, Eigen::MatrixXd::Identity(p, p));
  std::vector<Eigen::MatrixXd> sigma = previous;
  AdmmState state;
  const AdmmState* warm = warm_start;
  for (int it = 1; it <= opts.max_iter; ++it) {
    CorrelationSet corr = it == 1 ? prob.first_estep : run_estep(prob.truncation, sigma, prob.method, opts);
    FglOptions fgl = opts.fgl;
    fgl.warm_start = warm;
    PrecisionSet ps = fgl_solve(corr, lambda1, lambda2, fgl);
    const double change = relative_change(ps.matrices, previous);
    if (!std::isfinite(change)) throw NumericalError("EM produced a non-finite parameter change");
    fit.trace.push_back(change);
    previous = ps.matrices;
    state = ps.state;
    warm = &state;
    fit.theta_set = std::move(ps);
    fit.corr_at_convergence = std::move(corr);
    if (change < opts.tol) {
      fit.converged = true;
      break;
    }
    if (it < opts.max_iter)
      for (std::size_t k = 0; k < K; ++k) {
        Eigen::LLT<Eigen::MatrixXd> llt(previous[k]);
        if (llt.info() != Eigen::Success) throw NumericalError("precision estimate is not positive definite");
        sigma[k] = rescale_to_correlation(llt.solve(Eigen::MatrixXd::Identity(p, p)));
      }
  }
  return fit;
}

inline FitResult em_fit(const MixedDataset& ds, double lambda1, double lambda2, EStepMethod method,
                        const EmOptions& opts = {}) {
  return em_fit(make_em_problem(ds, method, opts), lambda1, lambda2, opts);
}

namespace detail {

// sum_k [n_k tr(S_k Theta_k) - n_k log det Theta_k] with the per-group edge counts.
inline double deviance(const FitResult& fit) {
  const auto& thetas = fit.theta_set.matrices;
  const auto& corr = fit.corr_at_convergence;
  require(!thetas.empty() && thetas.size() == corr.num_groups(), "fit has no correlation at convergence");
  double d = 0.0;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    const double n = corr.sizes.size() == thetas.size() ? static_cast<double>(corr.sizes[k]) : 1.0;
    d += n * ((corr.matrices[k].cwiseProduct(thetas[k])).sum() - log_det_pd(thetas[k]));
  }
  return d;
}

inline std::vector<std::size_t> edge_counts(const FitResult& fit) {
  std::vector<std::size_t> nu;
  for (const auto& m : fit.theta_set.matrices) nu.push_back(count_edges(m, fit.theta_set.zero_threshold));
  return nu;
}

}  // namespace detail

inline double aic(const FitResult& fit) {
  double score = detail::deviance(fit);
  for (std::size_t nu : detail::edge_counts(fit)) score += 2.0 * static_cast<double>(nu);
  return score;
}

inline double ebic(const FitResult& fit, double gamma) {
  require(gamma >= 0.0 && gamma <= 1.0, "EBIC gamma must lie in [0, 1]");
  const auto nu = detail::edge_counts(fit);
  const auto& sizes = fit.corr_at_convergence.sizes;
  const double log_p = std::log(static_cast<double>(fit.theta_set.dim()));
  double score = detail::deviance(fit);
  for (std::size_t k = 0; k < nu.size(); ++k) {
    const double n = sizes.size() == nu.size() ? static_cast<double>(sizes[k]) : 1.0;
    score += (std::log(n) + 4.0 * gamma * log_p) * static_cast<double>(nu[k]);
  }
  return score;
}

struct Criterion {
  enum class Kind { aic, ebic };
  Kind kind = Kind::ebic;
  double gamma = 0.5;

  double operator()(const FitResult& fit) const { return kind == Kind::aic ? aic(fit) : ebic(fit, gamma); }
  std::string name() const { return kind == Kind::aic ? "aic" : "ebic"; }
};

inline Criterion parse_criterion(const std::string& s, double gamma = 0.5) {
  if (s == "aic") return {Criterion::Kind::aic, gamma};
  if (s == "ebic") return {Criterion::Kind::ebic, gamma};
  if (s == "bic") return {Criterion::Kind::ebic, 0.0};
  throw ValidationError("unknown criterion '" + s + "' (expected aic, ebic or bic)");
}

inline std::vector<double> default_lambda1_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(std::pow(10.0, -2.0 + 0.2 * i));
  return g;
}

inline std::vector<double> default_lambda2_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(0.1 * i);
  return g;
}

// Fits lambda1 values from largest to smallest at one lambda2, each fit warm
// started from the previous one. `visit` sees every successful fit; failures are
// reported through `on_error` and the path continues.
inline void fit_path(const EmProblem& prob, std::vector<double> lambda1_grid, double lambda2, const EmOptions& opts,
                     const std::function<void(FitResult&)>& visit,
                     const std::function<void(double, const std::exception&)>& on_error = {}) {
  std::sort(lambda1_grid.begin(), lambda1_grid.end(), std::greater<>());
  std::optional<AdmmState> warm;
  for (double l1 : lambda1_grid) {
    try {
      FitResult fit = em_fit(prob, l1, lambda2, opts, warm ? &*warm : nullptr);
      warm = fit.theta_set.state;
      visit(fit);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      warm.reset();
      if (on_error) on_error(l1, e);
    }
  }
}

struct ScoreRow {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double score = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double ebic = std::numeric_limits<double>::quiet_NaN();
  std::size_t edges = 0;
  int iterations = 0;
  bool converged = false;
  bool ok = false;
  std::string error;
};

struct GridSelection {
  FitResult best;
  std::vector<ScoreRow> table;
};

// Exhaustive search over lambda1 x lambda2. Lower criterion wins; exact ties go
// to the larger lambda1, then the larger lambda2.
inline GridSelection grid_select(const EmProblem& prob, const std::vector<double>& lambda1_grid,
                                 const std::vector<double>& lambda2_grid, const Criterion& criterion,
                                 const EmOptions& opts = {}) {
  require(!lambda1_grid.empty() && !lambda2_grid.empty(), "penalty grids must be nonempty");
  for (double l : lambda1_grid) require(l >= 0.0 && std::isfinite(l), "lambda1 grid values must be nonnegative");
  for (double l : lambda2_grid) require(l >= 0.0 && std::isfinite(l), "lambda2 grid values must be nonnegative");

  struct Chain {
    std::vector<ScoreRow> rows;
    std::optional<FitResult> best;
    double best_score = 0.0;
  };
  const auto better = [](double s, double l1, double l2, double bs, double bl1, double bl2) {
    if (s != bs) return s < bs;
    if (l1 != bl1) return l1 > bl1;
    return l2 > bl2;
  };

  std::vector<Chain> chains(lambda2_grid.size());
  EmOptions inner = opts;
  inner.workers = 1;
  inner.fgl.workers = 1;
  parallel_for(
      lambda2_grid.size(),
      [&](std::size_t c) {
        Chain& chain = chains[c];
        const double l2 = lambda2_grid[c];
        fit_path(
            prob, lambda1_grid, l2, inner,
            [&](FitResult& fit) {
              ScoreRow row;
              row.lambda1 = fit.lambda1;
              row.lambda2 = l2;
              row.iterations = fit.iterations();
              row.converged = fit.converged;
              for (std::size_t nu : detail::edge_counts(fit)) row.edges += nu;
              try {
                row.aic = aic(fit);
                row.ebic = ebic(fit, criterion.kind == Criterion::Kind::ebic ? criterion.gamma : 0.5);
                row.score = criterion.kind == Criterion::Kind::aic ? row.aic : row.ebic;
                row.ok = true;
              } catch (const std::exception& e) {
                row.error = e.what();
              }
              if (row.ok && (!chain.best || better(row.score, row.lambda1, l2, chain.best_score,
                                                   chain.best->lambda1, chain.best->lambda2))) {
                chain.best = std::move(fit);
                chain.best_score = row.score;
              }
              chain.rows.push_back(std::move(row));
            },
            [&](double l1, const std::exception& e) {
              ScoreRow row;
              row.lambda1 = l1;
              row.lambda2 = l2;
              row.error = e.what();
              chain.rows.push_back(std::move(row));
            });
      },
      opts.workers);

  GridSelection sel;
  std::optional<double> best_score;
  for (auto& chain : chains) {
    for (auto& row : chain.rows) sel.table.push_back(std::move(row));
    if (chain.best && (!best_score || better(chain.best_score, chain.best->lambda1, chain.best->lambda2, *best_score,
                                             sel.best.lambda1, sel.best.lambda2))) {
      best_score = chain.best_score;
      sel.best = std::move(*chain.best);
    }
  }
  if (!best_score) throw NumericalError("every fit on the penalty grid failed");
  std::sort(sel.table.begin(), sel.table.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return a.lambda2 != b.lambda2 ? a.lambda2 < b.lambda2 : a.lambda1 < b.lambda1;
  });
  return sel;
}

inline GridSelection grid_select(const MixedDataset& ds, const std::vector<double>& lambda1_grid,
                                 const std::vector<double>& lambda2_grid, const Criterion& criterion,
                                 EStepMethod method, const EmOptions& opts = {}) {
  return grid_select(make_em_problem(ds, method, opts), lambda1_grid, lambda2_grid, criterion, opts);
}

}  // namespace hetcop
