#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cotfaith/error.hpp"
#include "cotfaith/metrics.hpp"

namespace cotfaith {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct RegressionFit {
  Scalar slope{};
  Scalar intercept{};
  Scalar r_squared{};
  Scalar ss_res{};
  Scalar ss_tot{};
  std::size_t n_points = 0;
  bool weighted = false;
  std::string provenance;

  Scalar predict(Scalar x) const { return intercept + slope * x; }
};

namespace detail {

template <typename DerivedX, typename DerivedY>
void check_points(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) throw DataFault("fit_linear: x and y differ in length");
  if (x.size() < 2) throw DegenerateFit("fit_linear: at least 2 points are required");
}

}  // namespace detail

/// Weighted least-squares line through (x, y). Weights must be positive.
/// R^2 = 1 - SS_res / SS_tot; when every y is equal, R^2 is 1 for an exact
/// fit and 0 otherwise.
template <typename DerivedX, typename DerivedY, typename DerivedW>
RegressionFit<typename DerivedX::Scalar> fit_linear_weighted(const Eigen::MatrixBase<DerivedX>& x,
                                                             const Eigen::MatrixBase<DerivedY>& y,
                                                             const Eigen::MatrixBase<DerivedW>& w) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_points(x, y);
  if (w.size() != x.size()) throw DataFault("fit_linear: weights differ in length");
  if ((w.array() <= Scalar(0)).any()) throw DataFault("fit_linear: weights must be positive");

  const Scalar wsum = w.sum();
  const Scalar mx = w.cwiseProduct(x).sum() / wsum;
  const Scalar my = w.cwiseProduct(y).sum() / wsum;
  const Vector<Scalar> dx = x.array() - mx;
  const Vector<Scalar> dy = y.array() - my;
  const Scalar sxx = (w.array() * dx.array().square()).sum();
  if (sxx == Scalar(0) || (x.array() == x(0)).all()) {
    throw DegenerateFit("fit_linear: all x values are identical");
  }
  const Scalar sxy = (w.array() * dx.array() * dy.array()).sum();

  RegressionFit<Scalar> fit;
  fit.n_points = static_cast<std::size_t>(x.size());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const Vector<Scalar> residual = y.array() - (fit.intercept + fit.slope * x.array());
  fit.ss_res = (w.array() * residual.array().square()).sum();
  fit.ss_tot = (w.array() * dy.array().square()).sum();
  if (fit.ss_tot == Scalar(0)) {
    fit.r_squared = fit.ss_res == Scalar(0) ? Scalar(1) : Scalar(0);
  } else {
    fit.r_squared = std::clamp(Scalar(1) - fit.ss_res / fit.ss_tot, Scalar(0), Scalar(1));
  }
  return fit;
}

/// Ordinary (unweighted) least squares.
template <typename DerivedX, typename DerivedY>
RegressionFit<typename DerivedX::Scalar> fit_linear(const Eigen::MatrixBase<DerivedX>& x,
                                                    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_points(x, y);
  auto fit = fit_linear_weighted(x, y, Vector<Scalar>::Ones(x.size()));
  fit.weighted = false;
  return fit;
}

template <typename Scalar>
RegressionFit<Scalar> fit_linear(std::span<const std::pair<Scalar, Scalar>> points) {
  Vector<Scalar> x(static_cast<Eigen::Index>(points.size()));
  Vector<Scalar> y(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    x(static_cast<Eigen::Index>(i)) = points[i].first;
    y(static_cast<Eigen::Index>(i)) = points[i].second;
  }
  return fit_linear(x, y);
}

/// Pearson correlation coefficient.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson_r(const Eigen::MatrixBase<DerivedX>& x,
                                    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_points(x, y);
  const Vector<Scalar> dx = x.array() - x.mean();
  const Vector<Scalar> dy = y.array() - y.mean();
  return dx.dot(dy) / std::sqrt(dx.squaredNorm() * dy.squaredNorm());
}

enum class MetricField {
  accuracy_nocot,
  accuracy_cot,
  unfaithfulness,
  normalization_term,
  unfaithfulness_normalized,
  letter_consistency,
  answer_consistency,
};

std::string_view to_string(MetricField f);
MetricField metric_field_from_string(std::string_view text);
/// Selected value as a fraction (ratio for normalized unfaithfulness).
std::optional<double> select_metric(const MetricSummary& s, MetricField f);

struct ScalingPoint {
  std::uint64_t parameter_count = 0;
  double value = 0.0;
  std::string benchmark;
};

struct ScalingLevel {
  std::uint64_t parameter_count = 0;
  double log10_parameters = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation across benchmarks
  std::size_t n = 0;
};

struct ScalingSeries {
  std::string family;
  MetricField metric = MetricField::unfaithfulness;
  std::vector<ScalingPoint> points;  // sorted by (parameter_count, benchmark)
  std::vector<ScalingLevel> levels;  // ascending parameter_count
};

/// Groups one family's summaries by model size. Summaries whose selected
/// metric is absent are left out. Throws AmbiguityError on a repeated
/// (size, benchmark) pair.
ScalingSeries scaling_series(std::span<const MetricSummary> summaries, MetricField metric);

}  // namespace cotfaith
