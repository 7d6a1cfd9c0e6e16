#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/error.hpp"
#include "hetcop/normal.hpp"
#include "hetcop/rng.hpp"

namespace hetcop {

// Parent N(mu0, sigma0^2) truncated to [a, b]; a and b may be infinite.
struct TNParams {
  double mu0 = 0.0;
  double sigma0 = 1.0;
  double a = -kInf;
  double b = kInf;
};

struct TNMoments {
  double m1 = 0.0;  // E(X | a <= X <= b)
  double m2 = 0.0;  // E(X^2 | a <= X <= b)

  double variance() const { return m2 - m1 * m1; }
};

namespace detail {

// For the standard normal truncated to [alpha, beta]:
//   lambda = (phi(alpha) - phi(beta)) / Z,  kappa = (alpha phi(alpha) - beta phi(beta)) / Z,
// with Z = Phi(beta) - Phi(alpha). Then E X = lambda and E X^2 = 1 + kappa.
struct TruncRatios {
  double lambda;
  double kappa;
};

inline TruncRatios point_mass(double alpha, double beta) {
  const double c = std::isfinite(alpha) && std::isfinite(beta) ? 0.5 * (alpha + beta)
                   : std::isfinite(alpha)                      ? alpha
                                                               : beta;
  return {c, c * c - 1.0};
}

// Both bounds in the upper half-line; all ratios formed on the log scale so
// that far-tail intervals (where Phi differences underflow) stay finite.
inline TruncRatios upper_tail_ratios(double alpha, double beta) {
  const double log_qa = normal_log_upper(alpha);
  const double log_qb = normal_log_upper(beta);
  const double d = log_qb - log_qa;
  if (!(d < 0.0)) return point_mass(alpha, beta);
  const double log_z = log_qa + std::log(-std::expm1(d));
  const double wa = std::exp(normal_log_pdf(alpha) - log_z);
  if (std::isinf(beta)) return {wa, alpha * wa};
  // phi(beta) / phi(alpha) = exp((alpha - beta)(alpha + beta) / 2)
  const double e = 0.5 * (alpha - beta) * (alpha + beta);
  const double ratio = std::exp(e);
  return {-wa * std::expm1(e), wa * (alpha - beta * ratio)};
}

inline TruncRatios standard_ratios(double alpha, double beta) {
  if (alpha >= 0.0) return upper_tail_ratios(alpha, beta);
  if (beta <= 0.0) {
    const TruncRatios r = upper_tail_ratios(-beta, -alpha);
    return {-r.lambda, r.kappa};
  }
  const double z = normal_cdf(beta) - normal_cdf(alpha);
  const double pa = normal_pdf(alpha);
  const double pb = normal_pdf(beta);
  const double xa = std::isinf(alpha) ? 0.0 : alpha * pa;
  const double xb = std::isinf(beta) ? 0.0 : beta * pb;
  return {(pa - pb) / z, (xa - xb) / z};
}

// Inverse-cdf draw from the standard normal restricted to [alpha, beta] with alpha >= 0.
inline double upper_tail_draw(double alpha, double beta, double u) {
  double x;
  if (alpha < 30.0) {
    const double qa = normal_upper(alpha);
    const double qb = normal_upper(beta);
    x = -normal_quantile(qb + u * (qa - qb));
  } else {
    // log-scale inversion of Q; Newton on log Q(x) = target, which is concave.
    const double log_qa = normal_log_upper(alpha);
    const double log_qb = normal_log_upper(beta);
    const double target = log_qa + std::log(u + (1.0 - u) * std::exp(log_qb - log_qa));
    x = std::sqrt(alpha * alpha + 2.0 * (log_qa - target));
    for (int it = 0; it < 50; ++it) {
      const double lq = normal_log_upper(x);
      const double slope = -std::exp(normal_log_pdf(x) - lq);
      const double step = (lq - target) / slope;
      x -= step;
      if (std::fabs(step) <= 1e-14 * x) break;
    }
  }
  return std::clamp(x, alpha, beta);
}

}  // namespace detail

// Closed-form first and second moments of a doubly truncated normal.
// Far-tail and near-degenerate intervals take a log-scale path and never throw.
inline TNMoments tn_moments(const TNParams& p) {
  require(p.sigma0 > 0.0 && std::isfinite(p.sigma0), "truncated normal needs sigma0 > 0");
  require(p.a < p.b, "truncated normal needs a < b");
  const double s = p.sigma0;
  const double alpha = (p.a - p.mu0) / s;
  const double beta = (p.b - p.mu0) / s;
  const detail::TruncRatios r = detail::standard_ratios(alpha, beta);
  double m1 = p.mu0 + s * r.lambda;
  double m2 = p.mu0 * p.mu0 + s * s + 2.0 * p.mu0 * s * r.lambda + s * s * r.kappa;
  double var = s * s * (1.0 + r.kappa - r.lambda * r.lambda);
  const bool inside = m1 > p.a && m1 < p.b;
  if (!std::isfinite(m1) || !std::isfinite(m2) || !(var > 0.0) || !inside) {
    // Interval too narrow for the closed form to resolve: treat it as uniform.
    m1 = std::isfinite(p.a) && std::isfinite(p.b) ? 0.5 * (p.a + p.b) : std::clamp(m1, p.a, p.b);
    var = std::isfinite(p.b - p.a) ? std::min(s * s, (p.b - p.a) * (p.b - p.a) / 12.0) : s * s;
    m2 = m1 * m1 + var;
  } else if (var > s * s) {
    m2 = m1 * m1 + s * s;
  }
  return {m1, m2};
}

// One draw from N(mu0, sigma0^2) truncated to [a, b].
inline double sample_truncated_normal(const TNParams& p, Rng& rng) {
  const double u = rng.uniform();
  const double alpha = (p.a - p.mu0) / p.sigma0;
  const double beta = (p.b - p.mu0) / p.sigma0;
  double z;
  if (alpha >= 0.0) {
    z = detail::upper_tail_draw(alpha, beta, u);
  } else if (beta <= 0.0) {
    z = -detail::upper_tail_draw(-beta, -alpha, u);
  } else if (std::isinf(alpha) && std::isinf(beta)) {
    z = normal_quantile(u);
  } else {
    const double pa = normal_cdf(alpha);
    const double pb = normal_cdf(beta);
    z = std::clamp(normal_quantile(pa + u * (pb - pa)), alpha, beta);
  }
  return std::clamp(p.mu0 + p.sigma0 * z, p.a, p.b);
}

// Full conditionals of N(0, Sigma): Z_j | Z_-j ~ N(coef.col(j) . z, sd(j)^2).
// Obtained from the precision matrix: coef(l, j) = -Theta(l, j) / Theta(j, j),
// sd(j)^2 = 1 / Theta(j, j), which equals Sigma_j,-j Sigma_-j,-j^-1 and its Schur complement.
struct ConditionalStructure {
  Eigen::MatrixXd coef;
  Eigen::VectorXd sd;

  explicit ConditionalStructure(const Eigen::MatrixXd& sigma) {
    const Eigen::Index p = sigma.rows();
    require(sigma.cols() == p && p >= 1, "correlation matrix must be square");
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-9, "correlation matrix is not symmetric");
    for (Eigen::Index j = 0; j < p; ++j)
      require(std::fabs(sigma(j, j) - 1.0) <= 1e-8, "correlation matrix must have unit diagonal");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("correlation matrix is not positive definite");
    const Eigen::MatrixXd theta = llt.solve(Eigen::MatrixXd::Identity(p, p));
    coef.resize(p, p);
    sd.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double tjj = theta(j, j);
      if (!(tjj > 0.0)) throw NumericalError("correlation matrix is not positive definite");
      coef.col(j) = -theta.col(j) / tjj;
      coef(j, j) = 0.0;
      sd(j) = 1.0 / std::sqrt(tjj);
    }
  }

  Eigen::Index dim() const { return coef.rows(); }
};

inline void check_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, Eigen::Index p) {
  require(lower.size() == p && upper.size() == p, "bound vectors do not match the dimension");
  for (Eigen::Index j = 0; j < p; ++j) {
    require(!std::isnan(lower(j)) && !std::isnan(upper(j)), "bounds must not be NaN");
    require(lower(j) <= upper(j), "inconsistent bounds: lower > upper at coordinate " + std::to_string(j));
    require(lower(j) < kInf && upper(j) > -kInf, "pinned coordinates must be finite");
  }
}

// Systematic-scan Gibbs sampler for N(0, Sigma) restricted to a box. Pinned
// coordinates (lower == upper) are held at their value and never resampled.
class TmvnGibbsSampler {
 public:
  explicit TmvnGibbsSampler(const Eigen::MatrixXd& sigma) : cond_(sigma) {}
  explicit TmvnGibbsSampler(ConditionalStructure cond) : cond_(std::move(cond)) {}

  const ConditionalStructure& conditionals() const { return cond_; }

  // Writes n_samples retained draws into `out` (n_samples x p).
  void sample(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int n_samples, int burn_in, Rng& rng,
              Eigen::MatrixXd& out) const {
    const Eigen::Index p = cond_.dim();
    check_bounds(lower, upper, p);
    require(n_samples >= 1, "n_samples must be positive");
    require(burn_in >= 0, "burn_in must be nonnegative");
    Eigen::VectorXd z(p);
    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (lower(j) == upper(j)) {
        z(j) = lower(j);
      } else {
        free.push_back(j);
        z(j) = tn_moments({0.0, 1.0, lower(j), upper(j)}).m1;
      }
    }
    out.resize(n_samples, p);
    for (int sweep = 0; sweep < burn_in + n_samples; ++sweep) {
      for (Eigen::Index j : free) {
        const double mu = cond_.coef.col(j).dot(z);
        z(j) = sample_truncated_normal({mu, cond_.sd(j), lower(j), upper(j)}, rng);
      }
      if (sweep >= burn_in) out.row(sweep - burn_in) = z.transpose();
    }
  }

 private:
  ConditionalStructure cond_;
};

inline Eigen::MatrixXd tmvn_gibbs(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& lower,
                                  const Eigen::VectorXd& upper, int n_samples, int burn_in, std::uint64_t seed) {
  TmvnGibbsSampler sampler(sigma);
  Rng rng(seed);
  Eigen::MatrixXd out;
  sampler.sample(lower, upper, n_samples, burn_in, rng, out);
  return out;
}

}  // namespace hetcop
