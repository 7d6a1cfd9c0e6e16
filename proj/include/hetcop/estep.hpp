#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/error.hpp"
#include "hetcop/marginals.hpp"
#include "hetcop/parallel.hpp"
#include "hetcop/rng.hpp"
#include "hetcop/truncnorm.hpp"

namespace hetcop {

enum class EStepMethod { gibbs, approx };

inline std::string to_string(EStepMethod m) { return m == EStepMethod::gibbs ? "gibbs" : "approx"; }

inline EStepMethod parse_estep_method(const std::string& s) {
  if (s == "gibbs") return EStepMethod::gibbs;
  if (s == "approx" || s == "approximate") return EStepMethod::approx;
  throw ValidationError("unknown E-step method '" + s + "' (expected gibbs or approx)");
}

// The K latent correlation matrices produced by one E-step.
struct CorrelationSet {
  std::vector<Eigen::MatrixXd> matrices;
  std::vector<std::size_t> sizes;
  EStepMethod method = EStepMethod::approx;

  std::size_t num_groups() const { return matrices.size(); }
  Eigen::Index dim() const { return matrices.empty() ? 0 : matrices.front().rows(); }
};

// D^-1/2 M D^-1/2.
inline Eigen::MatrixXd rescale_to_correlation(const Eigen::MatrixXd& m) {
  require(m.rows() == m.cols(), "rescale_to_correlation needs a square matrix");
  const Eigen::Index p = m.rows();
  Eigen::VectorXd inv_sd(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(m(j, j) > 0.0)) throw NumericalError("nonpositive diagonal entry in rescale_to_correlation");
    inv_sd(j) = 1.0 / std::sqrt(m(j, j));
  }
  Eigen::MatrixXd out = inv_sd.asDiagonal() * m * inv_sd.asDiagonal();
  out = 0.5 * (out + out.transpose()).eval();
  out.diagonal().setOnes();
  return out;
}

// Clips eigenvalues below 1e-8 and rescales, only when the matrix is not PD.
inline Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(1e-8);
  const Eigen::MatrixXd fixed = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  return rescale_to_correlation(fixed);
}

struct GibbsOptions {
  int n_samples = 1000;
  int burn_in = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

namespace detail {

// Observations are reduced in fixed-size chunks so that the floating-point
// summation order does not depend on the worker count.
inline constexpr Eigen::Index kChunk = 16;

// Sum over one chunk of E(Z_i Z_i^T) = A^T A + G + diag(extra), where rows of A
// carry first moments (or pinned values), G accumulates sampled second
// moments and `extra` carries per-cell variances.
struct ChunkMoments {
  Eigen::MatrixXd a;
  Eigen::MatrixXd g;
  Eigen::VectorXd extra;
  bool has_g = false;

  ChunkMoments(Eigen::Index rows, Eigen::Index p) : a(Eigen::MatrixXd::Zero(rows, p)), extra(Eigen::VectorXd::Zero(p)) {}

  Eigen::MatrixXd total() const {
    Eigen::MatrixXd s = a.transpose() * a;
    if (has_g) s += g;
    s.diagonal() += extra;
    return s;
  }
};

inline void check_estep_inputs(const TruncationSet& trunc, const std::vector<Eigen::MatrixXd>& sigma_set) {
  require(trunc.num_groups() >= 1, "truncation set is empty");
  require(sigma_set.size() == trunc.num_groups(), "one correlation matrix per group is required");
  const Eigen::Index p = trunc.num_variables();
  for (std::size_t k = 0; k < sigma_set.size(); ++k) {
    require(sigma_set[k].rows() == p && sigma_set[k].cols() == p, "correlation matrix dimension mismatch");
    require(trunc.upper[k].rows() == trunc.lower[k].rows() && trunc.upper[k].cols() == p,
            "truncation bounds dimension mismatch");
    require(trunc.group_size(k) >= 1, "empty group in truncation set");
  }
}

template <class ObsFn>
Eigen::MatrixXd reduce_group(Eigen::Index n, Eigen::Index p, std::size_t workers, ObsFn&& per_obs) {
  const std::size_t chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  std::vector<Eigen::MatrixXd> partial(chunks);
  parallel_for(
      chunks,
      [&](std::size_t c) {
        const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
        const Eigen::Index end = std::min(n, begin + kChunk);
        ChunkMoments acc(end - begin, p);
        for (Eigen::Index i = begin; i < end; ++i) per_obs(i, i - begin, acc);
        partial[c] = acc.total();
      },
      workers);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p);
  for (const auto& m : partial) sum += m;
  return sum;
}

inline Eigen::MatrixXd finalize_group(const Eigen::MatrixXd& sum, Eigen::Index n) {
  Eigen::MatrixXd r = sum / static_cast<double>(n);
  r = 0.5 * (r + r.transpose()).eval();
  return repair_psd(rescale_to_correlation(r));
}

}  // namespace detail

// Monte Carlo E-step: each observation's conditional second moment is the
// average outer product of a Gibbs chain on its truncation box. Rows with every
// coordinate pinned are exact and skip sampling.
inline CorrelationSet estep_gibbs(const TruncationSet& trunc, const std::vector<Eigen::MatrixXd>& sigma_set,
                                  const GibbsOptions& opts = {}) {
  detail::check_estep_inputs(trunc, sigma_set);
  require(opts.n_samples >= 1 && opts.burn_in >= 0, "invalid Gibbs sampler controls");
  const Eigen::Index p = trunc.num_variables();
  CorrelationSet out;
  out.method = EStepMethod::gibbs;
  for (std::size_t k = 0; k < trunc.num_groups(); ++k) {
    const TmvnGibbsSampler sampler(sigma_set[k]);
    const auto& lo = trunc.lower[k];
    const auto& hi = trunc.upper[k];
    const Eigen::Index n = lo.rows();
    const double inv_n = 1.0 / opts.n_samples;
    Eigen::MatrixXd sum = detail::reduce_group(n, p, opts.workers, [&](Eigen::Index i, Eigen::Index row,
                                                                        detail::ChunkMoments& acc) {
      const Eigen::VectorXd l = lo.row(i).transpose();
      const Eigen::VectorXd u = hi.row(i).transpose();
      if ((l.array() == u.array()).all()) {
        acc.a.row(row) = l.transpose();
        return;
      }
      Rng rng(derive_seed(opts.seed, k, static_cast<std::uint64_t>(i)));
      Eigen::MatrixXd draws;
      sampler.sample(l, u, opts.n_samples, opts.burn_in, rng, draws);
      if (!acc.has_g) {
        acc.g = Eigen::MatrixXd::Zero(p, p);
        acc.has_g = true;
      }
      acc.g.noalias() += inv_n * (draws.transpose() * draws);
    });
    out.matrices.push_back(detail::finalize_group(sum, n));
    out.sizes.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

// Mean-field E-step: per-cell moments start from the univariate truncated
// standard normal, then one Gauss-Seidel pass replaces each cell by the moments
// of its conditional truncated normal given the current moments of the others.
// Cross moments are products of first moments.
inline CorrelationSet estep_approx(const TruncationSet& trunc, const std::vector<Eigen::MatrixXd>& sigma_set,
                                   std::size_t workers = 1) {
  detail::check_estep_inputs(trunc, sigma_set);
  const Eigen::Index p = trunc.num_variables();
  CorrelationSet out;
  out.method = EStepMethod::approx;
  for (std::size_t k = 0; k < trunc.num_groups(); ++k) {
    const ConditionalStructure cond(sigma_set[k]);
    const auto& lo = trunc.lower[k];
    const auto& hi = trunc.upper[k];
    const Eigen::Index n = lo.rows();
    Eigen::MatrixXd sum = detail::reduce_group(n, p, workers, [&](Eigen::Index i, Eigen::Index row,
                                                                  detail::ChunkMoments& acc) {
      Eigen::VectorXd m1(p);
      Eigen::VectorXd var(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        if (lo(i, j) == hi(i, j)) {
          m1(j) = lo(i, j);
          var(j) = 0.0;
        } else {
          const TNMoments t = tn_moments({0.0, 1.0, lo(i, j), hi(i, j)});
          m1(j) = t.m1;
          var(j) = t.m2 - t.m1 * t.m1;
        }
      }
      for (Eigen::Index j = 0; j < p; ++j) {
        if (lo(i, j) == hi(i, j)) continue;
        const auto beta = cond.coef.col(j);
        const double mu = beta.dot(m1);
        // E(mu^2) - E(mu)^2 under the mean-field (independent) approximation.
        const double mu_var = beta.cwiseAbs2().dot(var);
        const TNMoments t = tn_moments({mu, cond.sd(j), lo(i, j), hi(i, j)});
        m1(j) = t.m1;
        var(j) = std::max(t.m2 - t.m1 * t.m1, 0.0) + mu_var;
      }
      acc.a.row(row) = m1.transpose();
      acc.extra += var;
    });
    out.matrices.push_back(detail::finalize_group(sum, n));
    out.sizes.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace hetcop
