#include "widthlab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace widthlab {
namespace {

// sup{ eps >= 0 : mu{|x| >= eps} >= eps } evaluated exactly: sort magnitudes
// descending; on the step where the top i entries qualify the best feasible
// eps is min(a_(i), W_i), so the norm is the max of those over i.
double ky_fan_sorted(std::vector<std::pair<double, double>>& mag_weight) {
  std::sort(mag_weight.begin(), mag_weight.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double cumulative = 0.0;
  double best = 0.0;
  for (const auto& [mag, w] : mag_weight) {
    cumulative += w;
    best = std::max(best, std::min(mag, cumulative));
  }
  return best;
}

template <typename Entries>
double norm_impl(const Entries& entries, const Eigen::VectorXd& weights,
                 const MetricSpec& m) {
  m.validate();
  const Eigen::Index n = entries.size();
  if (weights.size() != n)
    throw std::invalid_argument("norm: weights/entries size mismatch");
  if (n == 0) return 0.0;

  switch (m.kind) {
    case MetricKind::Linf: {
      double best = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        best = std::max(best, std::abs(entries[i]));
      return best;
    }
    case MetricKind::Lp:
    case MetricKind::LpCounting: {
      double scale = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        scale = std::max(scale, std::abs(entries[i]));
      if (scale == 0.0) return 0.0;
      long double acc = 0.0L;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double r = std::abs(entries[i]) / scale;
        if (r == 0.0) continue;
        const long double term = std::pow(static_cast<long double>(r),
                                          static_cast<long double>(m.p));
        acc += (m.kind == MetricKind::Lp) ? term * weights[i] : term;
      }
      return scale * static_cast<double>(
                         std::pow(acc, 1.0L / static_cast<long double>(m.p)));
    }
    case MetricKind::KyFanL0: {
      std::vector<std::pair<double, double>> mw;
      mw.reserve(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mag = std::abs(entries[i]);
        mw.emplace_back(mag <= m.zero_threshold ? 0.0 : mag, weights[i]);
      }
      return ky_fan_sorted(mw);
    }
    case MetricKind::Hamming: {
      long double acc = 0.0L;
      for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(entries[i]) > m.zero_threshold) acc += weights[i];
      return static_cast<double>(acc);
    }
  }
  throw std::logic_error("norm: unreachable");
}

template <typename Matrix>
double matrix_distance_impl(const Matrix& a, const Matrix& b, const MetricSpec& m) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix_distance: shape mismatch");
  const Eigen::Index total = a.size();
  if (total == 0) return 0.0;
  Eigen::VectorXd weights =
      Eigen::VectorXd::Constant(total, 1.0 / static_cast<double>(total));
  using Scalar = typename Matrix::Scalar;
  Eigen::Vector<Scalar, Eigen::Dynamic> diff(total);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) diff[k++] = a(i, j) - b(i, j);
  return norm(diff, weights, m);
}

}  // namespace

MetricSpec MetricSpec::lp(double p) { return MetricSpec{MetricKind::Lp, p, 0.0}; }
MetricSpec MetricSpec::lp_counting(double p) {
  return MetricSpec{MetricKind::LpCounting, p, 0.0};
}
MetricSpec MetricSpec::linf() {
  return MetricSpec{MetricKind::Linf, std::numeric_limits<double>::infinity(), 0.0};
}
MetricSpec MetricSpec::ky_fan_l0(double zero_threshold) {
  return MetricSpec{MetricKind::KyFanL0, 0.0, zero_threshold};
}
MetricSpec MetricSpec::hamming(double zero_threshold) {
  return MetricSpec{MetricKind::Hamming, 0.0, zero_threshold};
}

void MetricSpec::validate() const {
  if (kind == MetricKind::Lp || kind == MetricKind::LpCounting) {
    if (!(p > 0.0) || !std::isfinite(p))
      throw std::invalid_argument("MetricSpec: Lp exponent must be finite and > 0");
  }
  if (zero_threshold < 0.0 || !std::isfinite(zero_threshold))
    throw std::invalid_argument("MetricSpec: zero_threshold must be >= 0");
}

std::string MetricSpec::describe() const {
  switch (kind) {
    case MetricKind::Lp: return "L" + std::to_string(p) + "(mu)";
    case MetricKind::LpCounting: return "l" + std::to_string(p);
    case MetricKind::Linf: return "linf";
    case MetricKind::KyFanL0: return "KyFanL0";
    case MetricKind::Hamming: return "Hamming";
  }
  return "?";
}

bool MetricSpec::is_norm() const {
  switch (kind) {
    case MetricKind::Lp:
    case MetricKind::LpCounting: return p >= 1.0;
    case MetricKind::Linf: return true;
    case MetricKind::KyFanL0: return false;
    case MetricKind::Hamming: return false;
  }
  return false;
}

WeightedVector WeightedVector::uniform(Eigen::VectorXd entries) {
  const Eigen::Index n = entries.size();
  WeightedVector v{std::move(entries),
                   Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0)};
  return v;
}

WeightedVector WeightedVector::with_weights(Eigen::VectorXd entries,
                                            Eigen::VectorXd weights) {
  WeightedVector v{std::move(entries), std::move(weights)};
  v.validate();
  return v;
}

void WeightedVector::validate() const {
  if (entries.size() != weights.size())
    throw std::invalid_argument("WeightedVector: size mismatch");
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0))
      throw std::invalid_argument("WeightedVector: weights must be positive");
    total += weights[i];
  }
  if (weights.size() > 0 && std::abs(static_cast<double>(total) - 1.0) > 1e-9)
    throw std::invalid_argument("WeightedVector: weights must sum to 1");
}

double norm(const WeightedVector& x, const MetricSpec& m) {
  return norm_impl(x.entries, x.weights, m);
}

double norm(const Eigen::VectorXd& entries, const Eigen::VectorXd& weights,
            const MetricSpec& m) {
  return norm_impl(entries, weights, m);
}

double norm(const Eigen::VectorXcd& entries, const Eigen::VectorXd& weights,
            const MetricSpec& m) {
  return norm_impl(entries, weights, m);
}

double matrix_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const MetricSpec& m) {
  return matrix_distance_impl(a, b, m);
}

double matrix_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                       const MetricSpec& m) {
  return matrix_distance_impl(a, b, m);
}

double l0_width_conversion_bound(double eps, ConversionDirection) {
  if (eps < 0.0 || !std::isfinite(eps))
    throw std::invalid_argument("l0_width_conversion_bound: eps must be >= 0");
  // Chain from the equivalence proof: delta = sqrt(eps), gamma = sqrt(2 delta),
  // bound = 2 gamma. Identical exponent-4 chain in both directions; the result
  // never exceeds the trivial bound 1.
  const double gamma = std::sqrt(2.0 * std::sqrt(eps));
  return std::min(1.0, 2.0 * gamma);
}

}  // namespace widthlab
