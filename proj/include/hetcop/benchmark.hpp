#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/em.hpp"
#include "hetcop/evalmetrics.hpp"
#include "hetcop/fused_glasso.hpp"
#include "hetcop/parallel.hpp"
#include "hetcop/simgen.hpp"

namespace hetcop {

struct BenchmarkSetting {
  NetworkKind kind = NetworkKind::random;
  int p = 50;
  int n = 100;
  int K = 3;
  double rho = 0.25;
  double edge_prob = 0.05;
};

// Which point of each lambda1 path the FL/EL columns report.
enum class LossSelection { path_minimum, ebic, aic };

inline std::string to_string(LossSelection s) {
  switch (s) {
    case LossSelection::path_minimum: return "min";
    case LossSelection::ebic: return "ebic";
    case LossSelection::aic: return "aic";
  }
  return "min";
}

inline LossSelection parse_loss_selection(const std::string& s) {
  if (s == "min") return LossSelection::path_minimum;
  if (s == "ebic") return LossSelection::ebic;
  if (s == "aic") return LossSelection::aic;
  throw ValidationError("unknown loss selection '" + s + "' (expected min, ebic or aic)");
}

// Input to the raw-data baselines: unnormalised sample covariance, or Pearson correlation.
enum class BaselineScale { covariance, correlation };

struct BenchmarkOptions {
  int replicates = 5;
  std::vector<std::string> methods = {"gibbs", "approx", "fgl", "glasso"};
  std::vector<double> lambda1_grid = default_roc_lambda1_grid();
  std::vector<double> lambda2_values = {0.0, 0.1, 1.0};
  double gamma = 0.5;
  LossSelection loss_selection = LossSelection::path_minimum;
  BaselineScale baseline_scale = BaselineScale::covariance;
  EmOptions em;
  MarginalSpec marginals;
  bool log10_counts = false;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

inline bool is_copula_method(const std::string& m) { return m == "gibbs" || m == "approx"; }

inline void check_benchmark_methods(const std::vector<std::string>& methods) {
  require(!methods.empty(), "at least one method is required");
  for (const auto& m : methods)
    require(is_copula_method(m) || m == "fgl" || m == "glasso",
            "unknown method '" + m + "' (expected gibbs, approx, fgl or glasso)");
}

struct CurveMetrics {
  RocCurve curve;
  double auc = std::numeric_limits<double>::quiet_NaN();
  // lambda1 behind the reported FL (EL may come from another point under path_minimum).
  double selected_lambda1 = std::numeric_limits<double>::quiet_NaN();
  double fl = std::numeric_limits<double>::quiet_NaN();
  double el = std::numeric_limits<double>::quiet_NaN();
  int failed_points = 0;
};

struct ReplicateResult {
  std::string method;
  int replicate = 0;
  std::vector<CurveMetrics> curves;
  double auc = std::numeric_limits<double>::quiet_NaN();
  double auc_bc = std::numeric_limits<double>::quiet_NaN();
  double fl = std::numeric_limits<double>::quiet_NaN();
  double fl_bc = std::numeric_limits<double>::quiet_NaN();
  double el = std::numeric_limits<double>::quiet_NaN();
  double el_bc = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
};

struct SummaryRow {
  std::string method;
  int replicates = 0;
  int failed = 0;
  double auc = 0, auc_bc = 0, fl = 0, fl_bc = 0, el = 0, el_bc = 0;
};

struct BenchmarkResult {
  BenchmarkSetting setting;
  std::vector<ReplicateResult> replicates;
  std::vector<SummaryRow> summary;

  int failures() const {
    int f = 0;
    for (const auto& r : replicates) f += (r.ok ? 0 : 1);
    for (const auto& r : replicates)
      for (const auto& c : r.curves) f += c.failed_points;
    return f;
  }

  const ReplicateResult* find(const std::string& method, int replicate) const {
    for (const auto& r : replicates)
      if (r.method == method && r.replicate == replicate) return &r;
    return nullptr;
  }

  const SummaryRow* row(const std::string& method) const {
    for (const auto& r : summary)
      if (r.method == method) return &r;
    return nullptr;
  }
};

// Sample covariance (divisor n) or Pearson correlation of the raw columns, per
// group. Under correlation, constant columns get zero correlation with the rest.
inline CorrelationSet raw_second_moments(const MixedDataset& ds, BaselineScale scale, bool log10_counts = false) {
  CorrelationSet out;
  for (std::size_t k = 0; k < ds.num_groups(); ++k) {
    Eigen::MatrixXd x = ds.groups[k];
    require(!x.array().isNaN().any(), "raw-data baselines need complete data");
    if (log10_counts)
      for (std::size_t j = 0; j < ds.num_variables(); ++j)
        if (ds.kinds[j].tag == VariableTag::count)
          x.col(static_cast<Eigen::Index>(j)) = (x.col(static_cast<Eigen::Index>(j)).array() + 1.0).log10().matrix();
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    Eigen::MatrixXd c = x.transpose() * x / static_cast<double>(x.rows());
    c = 0.5 * (c + c.transpose()).eval();
    if (scale == BaselineScale::covariance) {
      out.matrices.push_back(std::move(c));
      out.sizes.push_back(static_cast<std::size_t>(ds.groups[k].rows()));
      continue;
    }
    const Eigen::Index p = c.rows();
    Eigen::VectorXd inv_sd(p);
    for (Eigen::Index j = 0; j < p; ++j) inv_sd(j) = c(j, j) > 0.0 ? 1.0 / std::sqrt(c(j, j)) : 0.0;
    c = inv_sd.asDiagonal() * c * inv_sd.asDiagonal();
    c = 0.5 * (c + c.transpose()).eval();
    c.diagonal().setOnes();
    out.matrices.push_back(std::move(c));
    out.sizes.push_back(static_cast<std::size_t>(ds.groups[k].rows()));
  }
  return out;
}

namespace detail {

struct PathPoint {
  double lambda1 = 0.0;
  Rates rates;
  double ebic = 0.0;
  double aic = 0.0;
  double fl = 0.0;
  double el = 0.0;
};

inline void summarize_curve(CurveMetrics& cm, const std::vector<PathPoint>& pts, LossSelection sel) {
  for (const auto& pt : pts) cm.curve.points.push_back({pt.lambda1, pt.rates.fpr, pt.rates.tpr});
  std::sort(cm.curve.points.begin(), cm.curve.points.end(),
            [](const RocPoint& a, const RocPoint& b) { return a.lambda1 < b.lambda1; });
  if (pts.empty()) return;
  try {
    cm.auc = auc(cm.curve);
  } catch (const std::exception&) {
    ++cm.failed_points;
  }
  const auto pick = [&](auto key) {
    const PathPoint* best = nullptr;
    for (const auto& pt : pts)
      if (!best || key(pt) < key(*best) || (key(pt) == key(*best) && pt.lambda1 > best->lambda1)) best = &pt;
    return best;
  };
  if (sel == LossSelection::path_minimum) {
    const PathPoint* f = pick([](const PathPoint& p) { return p.fl; });
    cm.selected_lambda1 = f->lambda1;
    cm.fl = f->fl;
    cm.el = pick([](const PathPoint& p) { return p.el; })->el;
    return;
  }
  const PathPoint* best = sel == LossSelection::ebic ? pick([](const PathPoint& p) { return p.ebic; })
                                                     : pick([](const PathPoint& p) { return p.aic; });
  cm.selected_lambda1 = best->lambda1;
  cm.fl = best->fl;
  cm.el = best->el;
}

inline PathPoint score_point(const NetworkTruth& truth, FitResult& fit, double gamma) {
  PathPoint pt;
  pt.lambda1 = fit.lambda1;
  pt.rates = fpr_tpr(truth, fit.theta_set);
  pt.ebic = ebic(fit, gamma);
  pt.aic = aic(fit);
  pt.fl = frobenius_loss(truth.theta, fit.theta_set.matrices);
  pt.el = entropy_loss(truth.theta, fit.theta_set.matrices);
  return pt;
}

inline void finish_replicate(ReplicateResult& r) {
  double a = 0, f = 0, e = 0;
  int n = 0;
  r.auc_bc = -std::numeric_limits<double>::infinity();
  r.fl_bc = r.el_bc = std::numeric_limits<double>::infinity();
  for (const auto& c : r.curves) {
    if (std::isnan(c.auc) || std::isnan(c.fl) || std::isnan(c.el)) continue;
    a += c.auc;
    f += c.fl;
    e += c.el;
    ++n;
    r.auc_bc = std::max(r.auc_bc, c.auc);
    r.fl_bc = std::min(r.fl_bc, c.fl);
    r.el_bc = std::min(r.el_bc, c.el);
  }
  r.ok = n == static_cast<int>(r.curves.size()) && n > 0;
  if (n == 0) {
    r.auc_bc = r.fl_bc = r.el_bc = std::numeric_limits<double>::quiet_NaN();
    if (r.error.empty()) r.error = "no usable ROC curve";
    return;
  }
  r.auc = a / n;
  r.fl = f / n;
  r.el = e / n;
}

}  // namespace detail

// Scores one method on one simulated replicate: an ROC curve per lambda2 (only
// lambda2 = 0 for glasso), AUC per curve, and FL/EL at the point of the lambda1
// path picked by `loss_selection`. Plain values average over the curves; "bc" keeps the best one.
inline ReplicateResult score_method(const std::string& method, const MixedDataset& ds, const NetworkTruth& truth,
                                    const BenchmarkOptions& opts, int replicate) {
  ReplicateResult res;
  res.method = method;
  res.replicate = replicate;
  EmOptions em = opts.em;
  em.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(replicate), 2);
  const std::vector<double> l2_values = method == "glasso" ? std::vector<double>{0.0} : opts.lambda2_values;
  try {
    std::optional<EmProblem> prob;
    CorrelationSet raw;
    if (is_copula_method(method))
      prob = make_em_problem(ds, parse_estep_method(method), em);
    else
      raw = raw_second_moments(ds, opts.baseline_scale, opts.log10_counts);

    for (double l2 : l2_values) {
      CurveMetrics cm;
      cm.curve.method = method;
      cm.curve.lambda2 = l2;
      cm.curve.replicate = replicate;
      std::vector<detail::PathPoint> pts;
      if (prob) {
        fit_path(
            *prob, opts.lambda1_grid, l2, em,
            [&](FitResult& fit) { pts.push_back(detail::score_point(truth, fit, opts.gamma)); },
            [&](double, const std::exception&) { ++cm.failed_points; });
      } else {
        std::vector<double> grid = opts.lambda1_grid;
        std::sort(grid.begin(), grid.end(), std::greater<>());
        std::optional<AdmmState> warm;
        for (double l1 : grid) {
          try {
            FglOptions fo = em.fgl;
            fo.warm_start = warm ? &*warm : nullptr;
            FitResult fit;
            fit.theta_set = fgl_solve(raw, l1, l2, fo);
            fit.corr_at_convergence = raw;
            fit.lambda1 = l1;
            fit.lambda2 = l2;
            warm = fit.theta_set.state;
            pts.push_back(detail::score_point(truth, fit, opts.gamma));
          } catch (const std::exception&) {
            warm.reset();
            ++cm.failed_points;
          }
        }
      }
      detail::summarize_curve(cm, pts, opts.loss_selection);
      res.curves.push_back(std::move(cm));
    }
    detail::finish_replicate(res);
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

inline NetworkSpec replicate_spec(const BenchmarkSetting& s, std::uint64_t seed, int replicate) {
  NetworkSpec spec;
  spec.kind = s.kind;
  spec.p = s.p;
  spec.K = s.K;
  spec.rho = s.rho;
  spec.edge_prob = s.edge_prob;
  spec.seed = derive_seed(seed, static_cast<std::uint64_t>(replicate), 0);
  return spec;
}

inline BenchmarkResult run_benchmark(const BenchmarkSetting& setting, const BenchmarkOptions& opts) {
  require(opts.replicates >= 1, "replicate count must be at least 1");
  require(setting.n >= 1, "group sample size must be at least 1");
  check_benchmark_methods(opts.methods);
  for (double l : opts.lambda1_grid) require(l >= 0.0, "lambda1 values must be nonnegative");
  for (double l : opts.lambda2_values) require(l >= 0.0, "lambda2 values must be nonnegative");
  replicate_spec(setting, opts.seed, 0).validate();

  BenchmarkResult out;
  out.setting = setting;
  const std::size_t M = opts.methods.size();
  std::vector<ReplicateResult> cells(static_cast<std::size_t>(opts.replicates) * M);
  BenchmarkOptions inner = opts;
  inner.em.workers = 1;
  inner.em.fgl.workers = 1;
  parallel_for(
      static_cast<std::size_t>(opts.replicates),
      [&](std::size_t r) {
        const int rep = static_cast<int>(r);
        try {
          NetworkTruth truth = generate_truth(replicate_spec(setting, opts.seed, rep));
          MarginalSpec marg = opts.marginals;
          marg.seed = derive_seed(opts.seed, r, 1);
          const MixedDataset ds = sample_mixed_data(truth, std::vector<int>(static_cast<std::size_t>(setting.K), setting.n), marg);
          for (std::size_t m = 0; m < M; ++m) cells[r * M + m] = score_method(opts.methods[m], ds, truth, inner, rep);
        } catch (const std::exception& e) {
          for (std::size_t m = 0; m < M; ++m) {
            cells[r * M + m].method = opts.methods[m];
            cells[r * M + m].replicate = rep;
            cells[r * M + m].error = e.what();
          }
        }
      },
      opts.workers);
  out.replicates = std::move(cells);

  for (const auto& method : opts.methods) {
    SummaryRow row;
    row.method = method;
    for (const auto& r : out.replicates) {
      if (r.method != method) continue;
      if (!r.ok) {
        ++row.failed;
        continue;
      }
      ++row.replicates;
      row.auc += r.auc;
      row.auc_bc += r.auc_bc;
      row.fl += r.fl;
      row.fl_bc += r.fl_bc;
      row.el += r.el;
      row.el_bc += r.el_bc;
    }
    const double n = row.replicates > 0 ? row.replicates : std::numeric_limits<double>::quiet_NaN();
    row.auc /= n;
    row.auc_bc /= n;
    row.fl /= n;
    row.fl_bc /= n;
    row.el /= n;
    row.el_bc /= n;
    out.summary.push_back(row);
  }
  return out;
}

inline void write_summary_csv(const std::vector<BenchmarkResult>& results, std::ostream& out) {
  out << "network_kind,p,n,rho,method,replicates,failed,auc,auc_bc,fl,fl_bc,el,el_bc\n";
  for (const auto& res : results)
    for (const auto& row : res.summary)
      out << to_string(res.setting.kind) << ',' << res.setting.p << ',' << res.setting.n << ','
          << detail::format_double(res.setting.rho) << ',' << row.method << ',' << row.replicates << ','
          << row.failed << ',' << detail::format_double(row.auc) << ',' << detail::format_double(row.auc_bc) << ','
          << detail::format_double(row.fl) << ',' << detail::format_double(row.fl_bc) << ','
          << detail::format_double(row.el) << ',' << detail::format_double(row.el_bc) << '\n';
}

inline void write_curves_csv(const std::vector<BenchmarkResult>& results, std::ostream& out) {
  out << "network_kind,p,n,rho,replicate,method,lambda2,lambda1,fpr,tpr\n";
  for (const auto& res : results)
    for (const auto& r : res.replicates)
      for (const auto& c : r.curves)
        for (const auto& pt : c.curve.points)
          out << to_string(res.setting.kind) << ',' << res.setting.p << ',' << res.setting.n << ','
              << detail::format_double(res.setting.rho) << ',' << r.replicate << ',' << r.method << ','
              << detail::format_double(c.curve.lambda2) << ',' << detail::format_double(pt.lambda1)
              << ',' << detail::format_double(pt.fpr) << ',' << detail::format_double(pt.tpr) << '\n';
}

}  // namespace hetcop
