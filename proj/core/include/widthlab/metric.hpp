#pragma once

#include <Eigen/Core>
#include <complex>
#include <string>

namespace widthlab {

// Lp         : normalized L_p^N view, ||x||^p = sum_i w_i |x_i|^p (p > 0)
// LpCounting : plain ell_p, weights ignored
// Linf       : max_i |x_i|, weights ignored
// KyFanL0    : sup{ eps >= 0 : mu{ |x| >= eps } >= eps }
// Hamming    : mu{ |x| > zero_threshold }
enum class MetricKind { Lp, LpCounting, Linf, KyFanL0, Hamming };

struct MetricSpec {
  MetricKind kind = MetricKind::Lp;
  double p = 2.0;
  // Entries with |x| <= zero_threshold count as zero under Hamming and break
  // ties under KyFanL0. Defaults to exact zero; float pipelines set ~1e-12.
  double zero_threshold = 0.0;

  static MetricSpec lp(double p);
  static MetricSpec lp_counting(double p);
  static MetricSpec linf();
  static MetricSpec ky_fan_l0(double zero_threshold = 0.0);
  static MetricSpec hamming(double zero_threshold = 0.0);

  // Throws std::invalid_argument on nonsense (p <= 0, negative threshold).
  void validate() const;
  std::string describe() const;
  // Triangle inequality holds (Lp with p >= 1, Linf, Hamming). KyFanL0 and
  // p < 1 are quasi-metrics.
  bool is_norm() const;
};

// Point masses over a finite sample set. Weights are positive and sum to one.
struct WeightedVector {
  Eigen::VectorXd entries;
  Eigen::VectorXd weights;

  static WeightedVector uniform(Eigen::VectorXd entries);
  static WeightedVector with_weights(Eigen::VectorXd entries, Eigen::VectorXd weights);
  void validate() const;
};

double norm(const WeightedVector& x, const MetricSpec& m);
double norm(const Eigen::VectorXd& entries, const Eigen::VectorXd& weights,
            const MetricSpec& m);
// Complex data is measured through the modulus.
double norm(const Eigen::VectorXcd& entries, const Eigen::VectorXd& weights,
            const MetricSpec& m);

// Distance between equal-shape matrices: the difference is flattened and
// carried as one weighted vector with uniform product weights.
double matrix_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const MetricSpec& m);
double matrix_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                       const MetricSpec& m);

// Ky-Fan error transfer between a mean per-function error and the expected
// error of the stacked vector. Input eps is the hypothesis-side mean error;
// the returned value is a certified bound for the other side, capped at 1.
enum class ConversionDirection { FunctionsToVector, VectorToFunctions };
double l0_width_conversion_bound(double eps, ConversionDirection direction);

}  // namespace widthlab
