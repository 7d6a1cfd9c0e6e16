#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/data_model.hpp"
#include "hetcop/error.hpp"
#include "hetcop/normal.hpp"
#include "hetcop/rng.hpp"

namespace hetcop {

enum class NetworkKind { cluster, scalefree, random };

inline std::string to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::cluster: return "cluster";
    case NetworkKind::scalefree: return "scalefree";
    case NetworkKind::random: return "random";
  }
  return "random";
}

inline NetworkKind parse_network_kind(const std::string& s) {
  if (s == "cluster") return NetworkKind::cluster;
  if (s == "scalefree" || s == "scale-free") return NetworkKind::scalefree;
  if (s == "random") return NetworkKind::random;
  throw ValidationError("unknown network kind '" + s + "' (expected cluster, scalefree or random)");
}

struct NetworkSpec {
  NetworkKind kind = NetworkKind::random;
  int p = 50;
  int K = 3;
  double rho = 0.25;
  double edge_prob = 0.05;
  int n_clusters = 3;
  double within_prob = 0.3;
  double between_prob = 0.01;
  double value_low = 0.5;
  double value_high = 1.0;
  double epsilon = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    require(p >= 2, "p must be at least 2");
    require(K >= 1, "K must be at least 1");
    require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
    require(edge_prob > 0.0 && edge_prob < 1.0, "edge probability must lie in (0, 1)");
    require(n_clusters >= 1 && n_clusters <= p, "cluster count must lie in [1, p]");
    require(within_prob >= 0.0 && within_prob <= 1.0 && between_prob >= 0.0 && between_prob <= 1.0,
            "cluster edge probabilities must lie in [0, 1]");
    require(value_low > 0.0 && value_low <= value_high, "nonzero value range must satisfy 0 < low <= high");
    require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
  }
};

struct MarginalSpec {
  double gamma_b = 0.1;
  double gamma_o = 0.5;
  double gamma_p = 0.2;
  double gamma_g = 0.2;
  double binomial_prob = 0.5;
  double poisson_rate = 10.0;
  int ordinal_levels = 6;
  std::uint64_t seed = 0;

  void validate() const {
    require(gamma_b >= 0.0 && gamma_o >= 0.0 && gamma_p >= 0.0 && gamma_g >= 0.0,
            "marginal proportions must be nonnegative");
    require(std::fabs(gamma_b + gamma_o + gamma_p + gamma_g - 1.0) <= 1e-9, "marginal proportions must sum to 1");
    require(binomial_prob > 0.0 && binomial_prob < 1.0, "binomial probability must lie in (0, 1)");
    require(poisson_rate > 0.0 && std::isfinite(poisson_rate), "poisson rate must be positive");
    require(ordinal_levels >= 2, "ordinal variables need at least 2 levels");
  }
};

using EdgeList = std::vector<std::pair<int, int>>;

struct NetworkTruth {
  NetworkSpec spec;
  // Off-diagonal pattern and values shared by all groups, before perturbation.
  Eigen::MatrixXd shared;
  std::vector<Eigen::MatrixXd> theta;
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<EdgeList> edges;
  EdgeList shared_edges;
  // Filled by sample_mixed_data.
  std::vector<VariableKind> kinds;

  std::size_t num_groups() const { return theta.size(); }
  Eigen::Index dim() const { return theta.empty() ? 0 : theta.front().rows(); }
};

inline EdgeList support_of(const Eigen::MatrixXd& m) {
  EdgeList e;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      if (m(i, j) != 0.0) e.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return e;
}

namespace detail {

inline double edge_value(Rng& rng, double low, double high) {
  const double mag = low + (high - low) * rng.uniform();
  return rng.uniform() < 0.5 ? -mag : mag;
}

inline Eigen::MatrixXi base_graph(const NetworkSpec& spec, Rng& rng) {
  const int p = spec.p;
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(p, p);
  switch (spec.kind) {
    case NetworkKind::random:
      for (int i = 1; i < p; ++i)
        for (int j = 0; j < i; ++j)
          if (rng.uniform() < spec.edge_prob) adj(i, j) = 1;
      break;
    case NetworkKind::cluster:
      for (int i = 1; i < p; ++i)
        for (int j = 0; j < i; ++j) {
          const bool same = (i * spec.n_clusters) / p == (j * spec.n_clusters) / p;
          if (rng.uniform() < (same ? spec.within_prob : spec.between_prob)) adj(i, j) = 1;
        }
      break;
    case NetworkKind::scalefree: {
      // Preferential attachment, one edge per arriving node: sampling uniformly
      // from the endpoint list picks a node with probability proportional to degree.
      std::vector<int> ends{0, 1};
      adj(1, 0) = 1;
      for (int t = 2; t < p; ++t) {
        const int target = ends[rng.below(ends.size())];
        adj(t, target) = 1;
        ends.push_back(t);
        ends.push_back(target);
      }
      break;
    }
  }
  return adj;
}

// Steps 3-7 for one group: diagonal set to |lambda_min| + eps, then the
// covariance is rescaled to a correlation and inverted back. The final precision
// equals D^{1/2} Theta D^{1/2} with D = diag(Theta^{-1}), so exact zeros survive.
inline bool finish_precision(const Eigen::MatrixXd& offdiag, double epsilon, Eigen::MatrixXd& theta,
                             Eigen::MatrixXd& sigma) {
  const Eigen::Index p = offdiag.rows();
  Eigen::MatrixXd t = offdiag;
  t.diagonal().setZero();
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t, Eigen::EigenvaluesOnly).eigenvalues()(0);
  t.diagonal().setConstant(std::fabs(lmin) + epsilon);
  Eigen::LLT<Eigen::MatrixXd> llt(t);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  if (!cov.allFinite() || !(cov.diagonal().array() > 0.0).all()) return false;
  const Eigen::VectorXd d = cov.diagonal().cwiseSqrt();
  theta = d.asDiagonal() * t * d.asDiagonal();
  theta = 0.5 * (theta + theta.transpose()).eval();
  const Eigen::VectorXd inv_d = d.cwiseInverse();
  sigma = inv_d.asDiagonal() * cov * inv_d.asDiagonal();
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  sigma.diagonal().setOnes();
  return Eigen::LLT<Eigen::MatrixXd>(theta).info() == Eigen::Success &&
         Eigen::LLT<Eigen::MatrixXd>(sigma).info() == Eigen::Success;
}

}  // namespace detail

inline NetworkTruth generate_truth(const NetworkSpec& spec) {
  spec.validate();
  const int p = spec.p;
  NetworkTruth truth;
  truth.spec = spec;

  Rng rng(derive_seed(spec.seed, 0));
  const Eigen::MatrixXi adj = detail::base_graph(spec, rng);
  Eigen::MatrixXd shared = Eigen::MatrixXd::Zero(p, p);
  for (int i = 1; i < p; ++i)
    for (int j = 0; j < i; ++j)
      if (adj(i, j)) shared(i, j) = shared(j, i) = detail::edge_value(rng, spec.value_low, spec.value_high);
  truth.shared = shared;
  truth.shared_edges = support_of(shared);
  const std::size_t m = truth.shared_edges.size();

  for (int k = 0; k < spec.K; ++k) {
    Rng grng(derive_seed(spec.seed, 1, static_cast<std::uint64_t>(k)));
    Eigen::MatrixXd t = shared;
    std::vector<std::pair<int, int>> zeros;
    for (int i = 1; i < p; ++i)
      for (int j = 0; j < i; ++j)
        if (t(i, j) == 0.0) zeros.emplace_back(i, j);
    const auto extra = std::min(zeros.size(), static_cast<std::size_t>(std::floor(spec.rho * static_cast<double>(m))));
    for (std::size_t r = 0; r < extra; ++r) {
      const std::size_t pick = r + grng.below(zeros.size() - r);
      std::swap(zeros[r], zeros[pick]);
      const auto [i, j] = zeros[r];
      t(i, j) = t(j, i) = detail::edge_value(grng, spec.value_low, spec.value_high);
    }

    Eigen::MatrixXd theta, sigma;
    double eps = spec.epsilon;
    bool ok = false;
    for (int attempt = 0; attempt <= 5 && !ok; ++attempt, eps *= 10.0) ok = detail::finish_precision(t, eps, theta, sigma);
    if (!ok) throw NumericalError("could not make group " + std::to_string(k) + " precision matrix positive definite");
    truth.edges.push_back(support_of(theta));
    truth.theta.push_back(std::move(theta));
    truth.sigma.push_back(std::move(sigma));
  }
  return truth;
}

// Column kinds by floor allocation of the proportions; Gaussian takes the
// remainder. Columns are assigned to kinds in a seeded random order.
inline std::vector<VariableKind> assign_kinds(int p, const MarginalSpec& marg) {
  marg.validate();
  const auto count = [&](double g) { return static_cast<int>(std::floor(g * p + 1e-9)); };
  const int nb = count(marg.gamma_b), no = count(marg.gamma_o), np = count(marg.gamma_p);
  std::vector<VariableKind> slots;
  for (int i = 0; i < nb; ++i) slots.push_back(VariableKind::binary());
  for (int i = 0; i < no; ++i) slots.push_back(VariableKind::ordinal(marg.ordinal_levels));
  for (int i = 0; i < np; ++i) slots.push_back(VariableKind::count());
  while (static_cast<int>(slots.size()) < p) slots.push_back(VariableKind::continuous());
  Rng rng(derive_seed(marg.seed, 3));
  for (std::size_t i = slots.size() - 1; i > 0; --i) std::swap(slots[i], slots[rng.below(i + 1)]);
  return slots;
}

namespace detail {

inline double poisson_quantile(double u, double rate) {
  double pmf = std::exp(-rate);
  double cdf = pmf;
  double x = 0.0;
  const double cap = rate + 60.0 * std::sqrt(rate) + 60.0;
  while (cdf < u && x < cap) {
    x += 1.0;
    pmf *= rate / x;
    cdf += pmf;
  }
  return x;
}

inline double observe(double z, const VariableKind& kind, const MarginalSpec& marg) {
  const double u = normal_cdf(z);
  switch (kind.tag) {
    case VariableTag::continuous: return z;
    case VariableTag::binary: return u > 1.0 - marg.binomial_prob ? 1.0 : 0.0;
    case VariableTag::ordinal: {
      const int levels = kind.levels.value_or(marg.ordinal_levels);
      return std::min(std::floor(u * levels), static_cast<double>(levels - 1));
    }
    case VariableTag::count: return poisson_quantile(u, marg.poisson_rate);
  }
  return z;
}

}  // namespace detail

// Latent rows ~ N(0, Sigma_k) pushed through each column's marginal quantile
// function. Returns the observed dataset; `latent` (if given) receives the draws.
inline MixedDataset sample_mixed_data(NetworkTruth& truth, const std::vector<int>& n_per_group,
                                      const MarginalSpec& marg, std::vector<Eigen::MatrixXd>* latent = nullptr) {
  require(n_per_group.size() == truth.num_groups(), "one sample size per group is required");
  for (int n : n_per_group) require(n >= 1, "group sample sizes must be at least 1");
  const auto p = truth.dim();
  truth.kinds = assign_kinds(static_cast<int>(p), marg);

  MixedDataset ds;
  for (Eigen::Index j = 0; j < p; ++j) ds.variables.push_back("V" + std::to_string(j + 1));
  ds.kinds = truth.kinds;
  if (latent) latent->clear();
  for (std::size_t k = 0; k < truth.num_groups(); ++k) {
    ds.group_labels.push_back("g" + std::to_string(k + 1));
    Eigen::LLT<Eigen::MatrixXd> llt(truth.sigma[k]);
    if (llt.info() != Eigen::Success) throw NumericalError("true correlation matrix is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    Rng rng(derive_seed(marg.seed, 2, k));
    const int n = n_per_group[k];
    Eigen::MatrixXd e(n, p);
    for (int i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) e(i, j) = rng.normal();
    const Eigen::MatrixXd z = e * L.transpose();
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) x(i, j) = detail::observe(z(i, j), truth.kinds[static_cast<std::size_t>(j)], marg);
    ds.groups.push_back(std::move(x));
    if (latent) latent->push_back(z);
  }
  return ds;
}

}  // namespace hetcop
