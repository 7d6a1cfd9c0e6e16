#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/data_model.hpp"
#include "hetcop/em.hpp"
#include "hetcop/error.hpp"
#include "hetcop/parallel.hpp"
#include "hetcop/rng.hpp"

namespace hetcop {

struct BootstrapOptions {
  int B = 200;
  double acceptance_ratio = 0.9;
  std::uint64_t seed = 0;
  // Permute rows within each group instead of resampling them with replacement.
  bool literal_permutation = false;
  std::vector<double> lambda1_grid = default_lambda1_grid();
  std::vector<double> lambda2_grid = default_lambda2_grid();
  Criterion criterion;
  EStepMethod method = EStepMethod::approx;
  EmOptions em;
  std::size_t workers = 1;
};

struct StabilityReport {
  int B = 0;
  int successful = 0;
  double acceptance_ratio = 0.9;
  std::vector<std::string> variables;
  std::vector<std::string> group_labels;
  // frequency[k](i, j): share of successful replicates whose group-k graph has edge i-j.
  std::vector<Eigen::MatrixXd> frequency;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> reference_edges;
  std::vector<double> group_discovery_rate;
  double discovery_rate = 1.0;
  bool reference_computed = false;
  double reference_lambda1 = 0.0;
  double reference_lambda2 = 0.0;
  std::vector<std::pair<int, std::string>> failures;
};

inline MixedDataset resample_rows(const MixedDataset& ds, std::uint64_t seed, bool literal_permutation) {
  MixedDataset out = ds;
  for (std::size_t k = 0; k < ds.num_groups(); ++k) {
    const Eigen::Index n = ds.groups[k].rows();
    Rng rng(derive_seed(seed, k));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    if (literal_permutation) {
      for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
      for (Eigen::Index i = n - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
    } else {
      for (auto& v : idx) v = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    for (Eigen::Index i = 0; i < n; ++i) out.groups[k].row(i) = ds.groups[k].row(idx[static_cast<std::size_t>(i)]);
  }
  return out;
}

inline std::vector<std::vector<std::pair<std::size_t, std::size_t>>> support_edges(
    const PrecisionSet& ps) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edges;
  for (const auto& m : ps.matrices) {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m.cols(); ++j)
        if (std::fabs(m(i, j)) >= ps.zero_threshold)
          e.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    edges.push_back(std::move(e));
  }
  return edges;
}

// Refits the grid on B perturbed copies of the data and reports how often each
// edge reappears. Discovery rate is the share of the reference fit's edges whose
// frequency reaches the acceptance ratio (1 when the reference has no edges).
inline StabilityReport bootstrap_stability(const MixedDataset& ds, const BootstrapOptions& opts,
                                           const PrecisionSet* reference = nullptr) {
  require(opts.B >= 1, "bootstrap replicate count B must be at least 1");
  require(opts.acceptance_ratio >= 0.0 && opts.acceptance_ratio <= 1.0, "acceptance ratio must lie in [0, 1]");
  ds.validate();
  const std::size_t K = ds.num_groups();
  const auto p = static_cast<Eigen::Index>(ds.num_variables());

  StabilityReport rep;
  rep.B = opts.B;
  rep.acceptance_ratio = opts.acceptance_ratio;
  rep.variables = ds.variables;
  rep.group_labels = ds.group_labels;

  EmOptions em = opts.em;
  em.workers = 1;
  em.fgl.workers = 1;

  PrecisionSet ref;
  if (reference) {
    require(reference->num_groups() == K && reference->dim() == p, "reference fit does not match the dataset");
    ref = *reference;
  } else {
    EmOptions ref_em = opts.em;
    ref_em.workers = opts.workers;
    const GridSelection sel = grid_select(ds, opts.lambda1_grid, opts.lambda2_grid, opts.criterion, opts.method, ref_em);
    ref = sel.best.theta_set;
    rep.reference_computed = true;
    rep.reference_lambda1 = sel.best.lambda1;
    rep.reference_lambda2 = sel.best.lambda2;
  }
  rep.reference_edges = support_edges(ref);

  std::vector<std::optional<std::vector<Eigen::MatrixXd>>> hits(static_cast<std::size_t>(opts.B));
  std::vector<std::string> errors(static_cast<std::size_t>(opts.B));
  parallel_for(
      static_cast<std::size_t>(opts.B),
      [&](std::size_t b) {
        try {
          const MixedDataset sample = resample_rows(ds, derive_seed(opts.seed, 0, b), opts.literal_permutation);
          EmOptions local = em;
          local.seed = derive_seed(opts.seed, 1, b);
          const GridSelection sel =
              grid_select(sample, opts.lambda1_grid, opts.lambda2_grid, opts.criterion, opts.method, local);
          std::vector<Eigen::MatrixXd> h;
          for (const auto& m : sel.best.theta_set.matrices)
            h.push_back((m.array().abs() >= sel.best.theta_set.zero_threshold).cast<double>().matrix());
          hits[b] = std::move(h);
        } catch (const std::exception& e) {
          errors[b] = e.what();
        }
      },
      opts.workers);

  rep.frequency.assign(K, Eigen::MatrixXd::Zero(p, p));
  for (std::size_t b = 0; b < hits.size(); ++b) {
    if (!hits[b]) {
      rep.failures.emplace_back(static_cast<int>(b), errors[b]);
      continue;
    }
    ++rep.successful;
    for (std::size_t k = 0; k < K; ++k) rep.frequency[k] += (*hits[b])[k];
  }
  if (rep.successful == 0) throw NumericalError("every bootstrap replicate failed");
  for (auto& f : rep.frequency) {
    f /= static_cast<double>(rep.successful);
    f.diagonal().setZero();
  }

  std::size_t total = 0, found = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t hit = 0;
    for (const auto& [i, j] : rep.reference_edges[k])
      if (rep.frequency[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= opts.acceptance_ratio) ++hit;
    const std::size_t m = rep.reference_edges[k].size();
    rep.group_discovery_rate.push_back(m == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(m));
    total += m;
    found += hit;
  }
  rep.discovery_rate = total == 0 ? 1.0 : static_cast<double>(found) / static_cast<double>(total);
  return rep;
}

}  // namespace hetcop
