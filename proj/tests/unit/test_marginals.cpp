#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hetcop/marginals.hpp"
#include "oracles.hpp"

using namespace hetcop;
using Catch::Matchers::WithinAbs;

namespace {

MixedDataset one_column(std::vector<double> values, VariableKind kind) {
  MixedDataset ds;
  ds.variables = {"x"};
  ds.kinds = {kind};
  ds.group_labels = {"g"};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  ds.groups = {m};
  return ds;
}

}  // namespace

TEST_CASE("empirical cdf uses the n+1 denominator") {
  const std::vector<double> col = {1, 2, 2};
  CHECK(empirical_cdf(col, 2) == 0.75);
  CHECK(empirical_cdf(col, 0) == 0.0);
  const std::vector<double> single = {5};
  CHECK(empirical_cdf(single, 5) == 0.5);
}

TEST_CASE("step cdf stays inside (0,1) and is nondecreasing") {
  const std::vector<double> col = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
  const StepCdf F(col);
  double prev = 0.0;
  for (double v : F.support()) {
    CHECK(F(v) > 0.0);
    CHECK(F(v) < 1.0);
    CHECK(F(v) >= prev);
    prev = F(v);
  }
}

TEST_CASE("binary intervals match the quantile oracle") {
  const MixedDataset ds = one_column({0, 1, 1, 0}, VariableKind::binary());
  const TruncationSet t = truncation_intervals(ds);
  const double q04 = oracle::quantile(0.4), q08 = oracle::quantile(0.8);
  CHECK(std::isinf(t.lower[0](0, 0)));
  CHECK(t.lower[0](0, 0) < 0);
  CHECK_THAT(t.upper[0](0, 0), WithinAbs(q04, 1e-9));
  CHECK_THAT(t.lower[0](1, 0), WithinAbs(q04, 1e-9));
  CHECK_THAT(t.upper[0](1, 0), WithinAbs(q08, 1e-9));
  CHECK_THAT(q04, WithinAbs(-0.2533, 1e-4));
  CHECK_THAT(q08, WithinAbs(0.8416, 1e-4));
}

TEST_CASE("open tails extend the top category to infinity") {
  const MixedDataset ds = one_column({0, 1, 1, 0}, VariableKind::binary());
  TruncationOptions opts;
  opts.open_tails = true;
  const TruncationSet t = truncation_intervals(ds, opts);
  CHECK(std::isinf(t.upper[0](1, 0)));
}

TEST_CASE("missing cells are unbounded") {
  const MixedDataset ds = one_column({0, NAN, 1, 2}, VariableKind::ordinal(3));
  const TruncationSet t = truncation_intervals(ds);
  CHECK(t.lower[0](1, 0) == -oracle::inf);
  CHECK(t.upper[0](1, 0) == oracle::inf);
}

TEST_CASE("continuous cells are pinned and rank invariant") {
  const std::vector<double> x = {0.3, -1.2, 2.2, 0.9, 0.0, -0.4};
  std::vector<double> y;
  for (double v : x) y.push_back(std::exp(3.0 * v) + 7.0);
  const TruncationSet a = truncation_intervals(one_column(x, VariableKind::continuous()));
  const TruncationSet b = truncation_intervals(one_column(y, VariableKind::continuous()));
  CHECK(a.lower[0] == a.upper[0]);
  CHECK(a.lower[0] == b.lower[0]);
  CHECK(a.upper[0] == b.upper[0]);
}

TEST_CASE("discrete intervals tile the line and carry the empirical mass") {
  const std::vector<double> col = {0, 2, 1, 1, 3, 0, 2, 2, 1, 3, 3, 3, 0};
  const MixedDataset ds = one_column(col, VariableKind::ordinal(4));
  const TruncationSet t = truncation_intervals(ds);
  const double m = static_cast<double>(col.size());
  std::vector<double> lo(4), hi(4), freq(4, 0.0);
  for (std::size_t i = 0; i < col.size(); ++i) {
    const int c = static_cast<int>(col[i]);
    lo[c] = t.lower[0](static_cast<Eigen::Index>(i), 0);
    hi[c] = t.upper[0](static_cast<Eigen::Index>(i), 0);
    freq[c] += 1.0;
  }
  for (int c = 0; c < 3; ++c) CHECK(hi[c] == lo[c + 1]);
  for (int c = 0; c < 4; ++c) {
    CHECK(lo[c] < hi[c]);
    CHECK_THAT(normal_cdf(hi[c]) - normal_cdf(lo[c]), WithinAbs(freq[c] / (m + 1.0), 1e-12));
  }
}

TEST_CASE("larger discrete values never get lower intervals") {
  const std::vector<double> col = {4, 0, 7, 7, 2, 0, 11, 4};
  const MixedDataset ds = one_column(col, VariableKind::count());
  const TruncationSet t = truncation_intervals(ds);
  for (std::size_t i = 0; i < col.size(); ++i)
    for (std::size_t j = 0; j < col.size(); ++j)
      if (col[i] < col[j]) CHECK(t.upper[0](static_cast<Eigen::Index>(i), 0) <= t.lower[0](static_cast<Eigen::Index>(j), 0));
}
