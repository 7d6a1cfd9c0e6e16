#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hetcop/em.hpp"
#include "hetcop/error.hpp"
#include "hetcop/fused_glasso.hpp"
#include "hetcop/simgen.hpp"

namespace hetcop {

struct Rates {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Group-averaged false and true positive rates over pairs i < j. A true edge is
// a nonzero entry of the truth; an estimated edge is |theta_hat| above threshold.
inline Rates fpr_tpr(const std::vector<Eigen::MatrixXd>& truth, const std::vector<Eigen::MatrixXd>& est,
                     double threshold = kZeroThreshold) {
  require(!truth.empty() && truth.size() == est.size(), "truth and estimate must have the same number of groups");
  Rates r;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto& t = truth[k];
    const auto& e = est[k];
    require(t.rows() == e.rows() && t.cols() == e.cols() && t.rows() == t.cols(), "dimension mismatch in group " + std::to_string(k));
    double fp = 0, tp = 0, edges = 0, non_edges = 0;
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = i + 1; j < t.cols(); ++j) {
        const bool is_true = t(i, j) != 0.0;
        const bool is_est = std::fabs(e(i, j)) >= threshold;
        if (is_true) {
          ++edges;
          if (is_est) ++tp;
        } else {
          ++non_edges;
          if (is_est) ++fp;
        }
      }
    if (edges == 0) throw ValidationError("group " + std::to_string(k) + " has no true edges (TPR undefined)");
    if (non_edges == 0) throw ValidationError("group " + std::to_string(k) + " has no true non-edges (FPR undefined)");
    r.fpr += fp / non_edges;
    r.tpr += tp / edges;
  }
  r.fpr /= static_cast<double>(truth.size());
  r.tpr /= static_cast<double>(truth.size());
  return r;
}

inline Rates fpr_tpr(const NetworkTruth& truth, const PrecisionSet& est) {
  return fpr_tpr(truth.theta, est.matrices, est.zero_threshold);
}

struct RocPoint {
  double lambda1 = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::string method;
  double lambda2 = 0.0;
  int replicate = 0;
  std::vector<RocPoint> points;
};

// Trapezoidal area under the curve after adding the (0,0) and (1,1) anchors;
// points sharing an fpr value are collapsed to their largest tpr.
inline double auc(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::pair<double, double>> distinct = pts;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(distinct.size() >= 2, "AUC needs at least 2 distinct points");
  for (const auto& [f, t] : distinct)
    require(f >= 0.0 && f <= 1.0 && t >= 0.0 && t <= 1.0, "ROC rates must lie in [0, 1]");

  std::vector<std::pair<double, double>> all = distinct;
  all.emplace_back(0.0, 0.0);
  all.emplace_back(1.0, 1.0);
  std::sort(all.begin(), all.end());
  std::vector<std::pair<double, double>> curve;
  for (const auto& pt : all) {
    if (!curve.empty() && curve.back().first == pt.first)
      curve.back().second = std::max(curve.back().second, pt.second);
    else
      curve.push_back(pt);
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].first - curve[i - 1].first) * 0.5 * (curve[i].second + curve[i - 1].second);
  return area;
}

inline double auc(const RocCurve& curve) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : curve.points) pts.emplace_back(p.fpr, p.tpr);
  return auc(pts);
}

inline double frobenius_loss(const std::vector<Eigen::MatrixXd>& truth, const std::vector<Eigen::MatrixXd>& est) {
  require(!truth.empty() && truth.size() == est.size(), "truth and estimate must have the same number of groups");
  double total = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    require(truth[k].rows() == est[k].rows() && truth[k].cols() == est[k].cols(), "dimension mismatch");
    const double denom = truth[k].squaredNorm();
    if (!(denom > 0.0)) throw NumericalError("true precision matrix is zero");
    total += (truth[k] - est[k]).squaredNorm() / denom;
  }
  return total / static_cast<double>(truth.size());
}

inline double entropy_loss(const std::vector<Eigen::MatrixXd>& truth, const std::vector<Eigen::MatrixXd>& est) {
  require(!truth.empty() && truth.size() == est.size(), "truth and estimate must have the same number of groups");
  double total = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const Eigen::Index p = truth[k].rows();
    require(est[k].rows() == p && est[k].cols() == p && truth[k].cols() == p, "dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(truth[k]);
    if (llt.info() != Eigen::Success) throw NumericalError("true precision matrix is singular or indefinite");
    const double tr = llt.solve(est[k]).trace();
    const double log_det_truth = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    total += tr - (detail::log_det_pd(est[k]) - log_det_truth) - static_cast<double>(p);
  }
  return total / static_cast<double>(truth.size());
}

inline std::vector<double> default_roc_lambda1_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(0.05 * i);
  return g;
}

// One ROC curve per lambda2; every point is a full EM fit. Failed points are
// left out of the curve and listed in `failures`.
inline std::vector<RocCurve> roc_sweep(const EmProblem& prob, const NetworkTruth& truth,
                                       const std::vector<double>& lambda1_grid,
                                       const std::vector<double>& lambda2_values, const EmOptions& opts = {},
                                       std::vector<std::pair<double, double>>* failures = nullptr) {
  require(!lambda1_grid.empty() && !lambda2_values.empty(), "ROC grids must be nonempty");
  std::vector<RocCurve> curves;
  for (double l2 : lambda2_values) {
    RocCurve curve;
    curve.method = to_string(prob.method);
    curve.lambda2 = l2;
    fit_path(
        prob, lambda1_grid, l2, opts,
        [&](FitResult& fit) {
          const Rates r = fpr_tpr(truth, fit.theta_set);
          curve.points.push_back({fit.lambda1, r.fpr, r.tpr});
        },
        [&](double l1, const std::exception&) {
          if (failures) failures->emplace_back(l1, l2);
        });
    std::sort(curve.points.begin(), curve.points.end(),
              [](const RocPoint& a, const RocPoint& b) { return a.lambda1 < b.lambda1; });
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace hetcop
