#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/error.hpp"
#include "hetcop/estep.hpp"
#include "hetcop/parallel.hpp"

namespace hetcop {

inline constexpr double kZeroThreshold = 1e-6;

// Scaled ADMM iterate; returned with every solve so a later solve on a nearby
// problem (next EM iteration, next grid point) can start from it.
struct AdmmState {
  std::vector<Eigen::MatrixXd> theta;
  std::vector<Eigen::MatrixXd> z;
  std::vector<Eigen::MatrixXd> u;
  double rho = 1.0;

  bool matches(std::size_t k, Eigen::Index p) const {
    return theta.size() == k && z.size() == k && u.size() == k && (k == 0 || theta.front().rows() == p);
  }
};

struct AdmmReport {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho = 1.0;
  bool converged = false;
  // Consensus iterate was not PD, so the (dense) log-det iterate was returned.
  bool used_dense_iterate = false;
};

struct FglOptions {
  double rho = 1.0;
  bool adaptive_rho = true;
  double tol = 1e-5;
  int max_iter = 500;
  double zero_threshold = kZeroThreshold;
  // With lambda2 == 0 the problem separates by group; solve the groups independently.
  bool decouple_when_unfused = true;
  const AdmmState* warm_start = nullptr;
  std::size_t workers = 1;
};

// K precision matrices with their penalties and per-group edge counts nu_k.
struct PrecisionSet {
  std::vector<Eigen::MatrixXd> matrices;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double zero_threshold = kZeroThreshold;
  std::vector<std::size_t> nu;
  AdmmReport report;
  AdmmState state;

  std::size_t num_groups() const { return matrices.size(); }
  Eigen::Index dim() const { return matrices.empty() ? 0 : matrices.front().rows(); }
};

inline std::size_t count_edges(const Eigen::MatrixXd& theta, double threshold = kZeroThreshold) {
  std::size_t nu = 0;
  for (Eigen::Index j = 1; j < theta.cols(); ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (std::fabs(theta(i, j)) >= threshold) ++nu;
  return nu;
}

inline void refresh_edge_counts(PrecisionSet& ps) {
  ps.nu.clear();
  for (const auto& m : ps.matrices) ps.nu.push_back(count_edges(m, ps.zero_threshold));
}

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// In-place proximal operator of
//   l1 * sum_k |z_k| + l2 * sum_{k<k'} |z_k - z_k'|
// under 1/2 ||z - y||^2. The fusion part is solved exactly (ordering of y is
// preserved, so it reduces to isotonic regression of y_(r) - l2 (2r - K - 1));
// the l1 part is then a soft threshold of the fused solution.
inline void fused_prox(std::span<double> y, double l1, double l2) {
  const std::size_t K = y.size();
  if (l2 > 0.0 && K == 2) {
    const double d = y[0] - y[1];
    if (std::fabs(d) <= 2.0 * l2) {
      y[0] = y[1] = 0.5 * (y[0] + y[1]);
    } else {
      const double s = d > 0.0 ? l2 : -l2;
      y[0] -= s;
      y[1] += s;
    }
  } else if (l2 > 0.0 && K > 2) {
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    std::vector<double> block_sum;
    std::vector<std::size_t> block_len;
    for (std::size_t r = 0; r < K; ++r) {
      block_sum.push_back(y[order[r]] - l2 * (2.0 * static_cast<double>(r + 1) - static_cast<double>(K) - 1.0));
      block_len.push_back(1);
      while (block_sum.size() > 1) {
        const std::size_t t = block_sum.size() - 1;
        if (block_sum[t - 1] * static_cast<double>(block_len[t]) <= block_sum[t] * static_cast<double>(block_len[t - 1]))
          break;
        block_sum[t - 1] += block_sum[t];
        block_len[t - 1] += block_len[t];
        block_sum.pop_back();
        block_len.pop_back();
      }
    }
    std::size_t r = 0;
    for (std::size_t b = 0; b < block_sum.size(); ++b) {
      const double v = block_sum[b] / static_cast<double>(block_len[b]);
      for (std::size_t i = 0; i < block_len[b]; ++i) y[order[r++]] = v;
    }
  }
  if (l1 > 0.0)
    for (double& v : y) v = soft_threshold(v, l1);
}

namespace detail {

inline double log_det_pd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite (log det undefined)");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline std::vector<double> likelihood_weights(const std::vector<std::size_t>& sizes, std::size_t k) {
  std::vector<double> w(k, 1.0);
  if (sizes.size() != k) return w;
  const double mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) w[i] = static_cast<double>(sizes[i]) / mean;
  return w;
}

inline void check_correlations(const std::vector<Eigen::MatrixXd>& r) {
  require(!r.empty(), "at least one correlation matrix is required");
  const Eigen::Index p = r.front().rows();
  require(p >= 1, "empty correlation matrix");
  for (const auto& m : r) {
    require(m.rows() == p && m.cols() == p, "correlation matrices must share one square dimension");
    require(m.allFinite(), "correlation matrix has non-finite entries");
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9, "correlation matrix is not symmetric");
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (min_eig < -1e-8) throw NumericalError("input matrix is not positive semidefinite");
  }
}

// Minimizes sum_k w_k [tr(R_k Theta_k) - log det Theta_k]
//   + lambda1 sum_k sum_{i != j} |theta_ij^k| + lambda2 sum_{k<k'} sum_{i,j} |theta_ij^k - theta_ij^k'|
// by ADMM on the split Theta = Z.
inline PrecisionSet admm_solve(const std::vector<Eigen::MatrixXd>& r, const std::vector<double>& w, double lambda1,
                               double lambda2, const FglOptions& opts) {
  const std::size_t K = r.size();
  const Eigen::Index p = r.front().rows();
  AdmmState st;
  if (opts.warm_start && opts.warm_start->matches(K, p)) {
    st = *opts.warm_start;
  } else {
    st.rho = opts.rho;
    for (std::size_t k = 0; k < K; ++k) {
      Eigen::MatrixXd init = Eigen::MatrixXd::Zero(p, p);
      for (Eigen::Index j = 0; j < p; ++j) init(j, j) = 1.0 / std::max(r[k](j, j), 1e-8);
      st.theta.push_back(init);
      st.z.push_back(init);
      st.u.push_back(Eigen::MatrixXd::Zero(p, p));
    }
  }

  AdmmReport rep;
  std::vector<Eigen::MatrixXd> z_old(K);
  std::vector<double> y(K);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double rho = st.rho;
    parallel_for(
        K,
        [&](std::size_t k) {
          const Eigen::MatrixXd a = w[k] * r[k] - rho * (st.z[k] - st.u[k]);
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
          const Eigen::VectorXd d = eig.eigenvalues();
          Eigen::VectorXd t(p);
          for (Eigen::Index i = 0; i < p; ++i)
            t(i) = (-d(i) + std::sqrt(d(i) * d(i) + 4.0 * rho * w[k])) / (2.0 * rho);
          st.theta[k].noalias() = eig.eigenvectors() * t.asDiagonal() * eig.eigenvectors().transpose();
        },
        opts.workers);

    for (std::size_t k = 0; k < K; ++k) z_old[k] = st.z[k];
    const double t1 = lambda1 / rho;
    const double t2 = lambda2 / rho;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        for (std::size_t k = 0; k < K; ++k)
          y[k] = 0.5 * (st.theta[k](i, j) + st.theta[k](j, i)) + 0.5 * (st.u[k](i, j) + st.u[k](j, i));
        fused_prox(y, i == j ? 0.0 : t1, t2);
        for (std::size_t k = 0; k < K; ++k) st.z[k](i, j) = st.z[k](j, i) = y[k];
      }
    }

    double prim = 0.0, dual = 0.0, theta_norm = 0.0, z_norm = 0.0, u_norm = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      st.u[k] += st.theta[k] - st.z[k];
      prim += (st.theta[k] - st.z[k]).squaredNorm();
      dual += (st.z[k] - z_old[k]).squaredNorm();
      theta_norm += st.theta[k].squaredNorm();
      z_norm += st.z[k].squaredNorm();
      u_norm += st.u[k].squaredNorm();
    }
    rep.primal_residual = std::sqrt(prim) / std::max({1.0, std::sqrt(theta_norm), std::sqrt(z_norm)});
    rep.dual_residual = rho * std::sqrt(dual) / std::max(1.0, rho * std::sqrt(u_norm));
    rep.iterations = it;
    if (std::max(rep.primal_residual, rep.dual_residual) < opts.tol) {
      rep.converged = true;
      break;
    }
    if (opts.adaptive_rho) {
      if (rep.primal_residual > 10.0 * rep.dual_residual) {
        st.rho *= 2.0;
        for (auto& u : st.u) u *= 0.5;
      } else if (rep.dual_residual > 10.0 * rep.primal_residual) {
        st.rho *= 0.5;
        for (auto& u : st.u) u *= 2.0;
      }
    }
  }
  rep.rho = st.rho;

  PrecisionSet out;
  out.lambda1 = lambda1;
  out.lambda2 = lambda2;
  out.zero_threshold = opts.zero_threshold;
  for (std::size_t k = 0; k < K; ++k) {
    Eigen::MatrixXd zk = st.z[k];
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i < j; ++i)
        if (std::fabs(zk(i, j)) < opts.zero_threshold) zk(i, j) = zk(j, i) = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(zk);
    if (llt.info() == Eigen::Success) {
      out.matrices.push_back(std::move(zk));
    } else {
      Eigen::MatrixXd xk = 0.5 * (st.theta[k] + st.theta[k].transpose());
      out.matrices.push_back(std::move(xk));
      rep.used_dense_iterate = true;
    }
  }
  out.report = rep;
  out.state = std::move(st);
  refresh_edge_counts(out);
  return out;
}

}  // namespace detail

// Penalized M-step over K groups (fused graphical lasso). The likelihood of
// group k is weighted by n_k / mean(n), so lambda1 and lambda2 act on the
// per-observation scale: lambda1 >= max |r_ij| empties the graph.
inline PrecisionSet fgl_solve(const CorrelationSet& corr, double lambda1, double lambda2, const FglOptions& opts = {}) {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "penalties must be nonnegative");
  require(std::isfinite(lambda1) && std::isfinite(lambda2), "penalties must be finite");
  detail::check_correlations(corr.matrices);
  const std::size_t K = corr.num_groups();
  const Eigen::Index p = corr.dim();
  const std::vector<double> w = detail::likelihood_weights(corr.sizes, K);

  if (lambda1 == 0.0 && lambda2 == 0.0) {
    PrecisionSet out;
    out.zero_threshold = opts.zero_threshold;
    bool all_pd = true;
    for (const auto& m : corr.matrices) {
      Eigen::LLT<Eigen::MatrixXd> llt(m);
      if (llt.info() != Eigen::Success) {
        all_pd = false;
        break;
      }
      Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
      out.matrices.push_back(0.5 * (inv + inv.transpose()));
    }
    if (all_pd) {
      out.report.converged = true;
      out.state.theta = out.state.z = out.matrices;
      out.state.u.assign(K, Eigen::MatrixXd::Zero(p, p));
      out.state.rho = opts.rho;
      refresh_edge_counts(out);
      return out;
    }
  }

  // Theta_k = diag(1/r_ii) satisfies the optimality conditions when every
  // weighted off-diagonal |r_ij| is within lambda1 and the diagonals agree
  // across groups, so large penalties give an exact empty graph.
  if (lambda1 > 0.0) {
    bool empty = true;
    for (std::size_t k = 0; k < K && empty; ++k) {
      const auto& r = corr.matrices[k];
      empty = r.diagonal() == corr.matrices.front().diagonal() && (r.diagonal().array() > 0.0).all();
      for (Eigen::Index j = 1; j < p && empty; ++j)
        for (Eigen::Index i = 0; i < j && empty; ++i) empty = w[k] * std::fabs(r(i, j)) <= lambda1;
    }
    if (empty) {
      PrecisionSet out;
      out.lambda1 = lambda1;
      out.lambda2 = lambda2;
      out.zero_threshold = opts.zero_threshold;
      for (const auto& r : corr.matrices)
        out.matrices.push_back(Eigen::MatrixXd(r.diagonal().cwiseInverse().asDiagonal()));
      out.report.converged = true;
      out.state.theta = out.state.z = out.matrices;
      out.state.u.assign(K, Eigen::MatrixXd::Zero(p, p));
      out.state.rho = opts.rho;
      refresh_edge_counts(out);
      return out;
    }
  }

  if (K > 1 && lambda2 == 0.0 && opts.decouple_when_unfused) {
    PrecisionSet out;
    out.lambda1 = lambda1;
    out.zero_threshold = opts.zero_threshold;
    out.report.converged = true;
    for (std::size_t k = 0; k < K; ++k) {
      FglOptions sub = opts;
      AdmmState warm;
      if (opts.warm_start && opts.warm_start->matches(K, p)) {
        warm.theta = {opts.warm_start->theta[k]};
        warm.z = {opts.warm_start->z[k]};
        warm.u = {opts.warm_start->u[k]};
        warm.rho = opts.warm_start->rho;
        sub.warm_start = &warm;
      } else {
        sub.warm_start = nullptr;
      }
      PrecisionSet one = detail::admm_solve({corr.matrices[k]}, {w[k]}, lambda1, 0.0, sub);
      out.matrices.push_back(one.matrices.front());
      out.state.theta.push_back(one.state.theta.front());
      out.state.z.push_back(one.state.z.front());
      out.state.u.push_back(one.state.u.front());
      out.state.rho = one.state.rho;
      out.report.iterations = std::max(out.report.iterations, one.report.iterations);
      out.report.primal_residual = std::max(out.report.primal_residual, one.report.primal_residual);
      out.report.dual_residual = std::max(out.report.dual_residual, one.report.dual_residual);
      out.report.converged = out.report.converged && one.report.converged;
      out.report.used_dense_iterate = out.report.used_dense_iterate || one.report.used_dense_iterate;
      out.report.rho = one.report.rho;
    }
    refresh_edge_counts(out);
    return out;
  }

  return detail::admm_solve(corr.matrices, w, lambda1, lambda2, opts);
}

// Separate graphical lasso for one correlation matrix (the K = 1 case).
inline Eigen::MatrixXd glasso_single(const Eigen::MatrixXd& r, double lambda1, const FglOptions& opts = {}) {
  CorrelationSet one;
  one.matrices = {r};
  return fgl_solve(one, lambda1, 0.0, opts).matrices.front();
}

// The penalized log-likelihood being maximized:
//   sum_k (n_k/2)[log det Theta_k - tr(Theta_k R_k)]
//   - (nbar/2)[lambda1 sum_k sum_{i!=j} |theta_ij^k| + lambda2 sum_{k<k'} sum_{i,j} |theta_ij^k - theta_ij^k'|]
// with nbar the mean group size (group sizes default to 1 when absent).
inline double objective_value(const std::vector<Eigen::MatrixXd>& theta, const CorrelationSet& corr, double lambda1,
                              double lambda2) {
  const std::size_t K = theta.size();
  require(K == corr.num_groups() && K >= 1, "precision and correlation sets differ in group count");
  std::vector<double> n(K, 1.0);
  if (corr.sizes.size() == K)
    for (std::size_t k = 0; k < K; ++k) n[k] = static_cast<double>(corr.sizes[k]);
  const double nbar = std::accumulate(n.begin(), n.end(), 0.0) / static_cast<double>(K);
  double value = 0.0;
  double l1 = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    require(theta[k].rows() == corr.matrices[k].rows() && theta[k].cols() == corr.matrices[k].cols(),
            "dimension mismatch between precision and correlation matrices");
    value += 0.5 * n[k] * (detail::log_det_pd(theta[k]) - (theta[k].cwiseProduct(corr.matrices[k])).sum());
    l1 += theta[k].cwiseAbs().sum() - theta[k].diagonal().cwiseAbs().sum();
  }
  double fuse = 0.0;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t k2 = k + 1; k2 < K; ++k2) fuse += (theta[k] - theta[k2]).cwiseAbs().sum();
  return value - 0.5 * nbar * (lambda1 * l1 + lambda2 * fuse);
}

inline double objective_value(const PrecisionSet& ps, const CorrelationSet& corr) {
  return objective_value(ps.matrices, corr, ps.lambda1, ps.lambda2);
}

}  // namespace hetcop
