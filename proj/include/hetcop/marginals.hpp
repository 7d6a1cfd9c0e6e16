#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/data_model.hpp"
#include "hetcop/error.hpp"
#include "hetcop/normal.hpp"

namespace hetcop {

// F(x) = #{values <= x} / (m + 1) over the m non-missing values.
inline double empirical_cdf(std::span<const double> column, double x) {
  std::size_t m = 0;
  std::size_t below = 0;
  for (double v : column) {
    if (is_missing(v)) continue;
    ++m;
    if (v <= x) ++below;
  }
  require(m > 0, "empirical cdf of an all-missing column");
  return static_cast<double>(below) / static_cast<double>(m + 1);
}

// Step-function form of the empirical cdf of one variable within one group.
class StepCdf {
 public:
  StepCdf() = default;

  explicit StepCdf(std::span<const double> column) {
    std::vector<double> values;
    for (double v : column)
      if (!is_missing(v)) values.push_back(v);
    require(!values.empty(), "empirical cdf of an all-missing column");
    std::sort(values.begin(), values.end());
    observed_ = values.size();
    const double denom = static_cast<double>(observed_ + 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
      support_.push_back(values[i]);
      cumulative_.push_back(static_cast<double>(i + 1) / denom);
    }
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(support_.begin(), support_.end(), x);
    if (it == support_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - support_.begin()) - 1];
  }

  // F at the largest support point strictly below x (0 when x is at or below the minimum).
  double below(double x) const {
    const auto it = std::lower_bound(support_.begin(), support_.end(), x);
    if (it == support_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - support_.begin()) - 1];
  }

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  std::size_t observed() const { return observed_; }

 private:
  std::vector<double> support_;
  std::vector<double> cumulative_;
  std::size_t observed_ = 0;
};

// Per group, per variable empirical marginals.
struct MarginalTable {
  std::vector<std::vector<StepCdf>> cdfs;  // [group][variable]

  const StepCdf& at(std::size_t k, std::size_t j) const { return cdfs[k][j]; }
};

inline MarginalTable build_marginals(const MixedDataset& ds) {
  MarginalTable table;
  table.cdfs.resize(ds.num_groups());
  for (std::size_t k = 0; k < ds.num_groups(); ++k) {
    const auto& g = ds.groups[k];
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const Eigen::VectorXd col = g.col(j);
      bool any = false;
      for (Eigen::Index i = 0; i < col.size(); ++i) any = any || !is_missing(col(i));
      // A column missing throughout one group contributes only (-inf, inf) cells there.
      table.cdfs[k].push_back(any ? StepCdf(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())))
                                  : StepCdf());
    }
  }
  return table;
}

// Latent-scale bounds for every cell, per group. Continuous cells are pinned
// (lower == upper); missing cells are (-inf, inf).
struct TruncationSet {
  std::vector<Eigen::MatrixXd> lower;
  std::vector<Eigen::MatrixXd> upper;

  std::size_t num_groups() const { return lower.size(); }
  Eigen::Index num_variables() const { return lower.empty() ? 0 : lower.front().cols(); }
  Eigen::Index group_size(std::size_t k) const { return lower[k].rows(); }
};

struct TruncationOptions {
  // Top category of a discrete variable extends to +inf instead of Phi^-1(m/(m+1)).
  bool open_tails = false;
};

inline TruncationSet truncation_intervals(const MixedDataset& ds, const MarginalTable& marginals,
                                          const TruncationOptions& opts = {}) {
  require(marginals.cdfs.size() == ds.num_groups(), "marginal table does not match the dataset");
  TruncationSet ts;
  for (std::size_t k = 0; k < ds.num_groups(); ++k) {
    const auto& g = ds.groups[k];
    Eigen::MatrixXd lo(g.rows(), g.cols());
    Eigen::MatrixXd hi(g.rows(), g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const bool discrete = ds.kinds[static_cast<std::size_t>(j)].is_discrete();
      const StepCdf& F = marginals.at(k, static_cast<std::size_t>(j));
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double x = g(i, j);
        if (is_missing(x)) {
          lo(i, j) = -kInf;
          hi(i, j) = kInf;
        } else if (!discrete) {
          lo(i, j) = hi(i, j) = normal_quantile(F(x));
        } else {
          lo(i, j) = normal_quantile(F.below(x));
          const bool top = opts.open_tails && x >= F.support().back();
          hi(i, j) = top ? kInf : normal_quantile(F(x));
        }
      }
    }
    ts.lower.push_back(std::move(lo));
    ts.upper.push_back(std::move(hi));
  }
  return ts;
}

inline TruncationSet truncation_intervals(const MixedDataset& ds, const TruncationOptions& opts = {}) {
  return truncation_intervals(ds, build_marginals(ds), opts);
}

}  // namespace hetcop
