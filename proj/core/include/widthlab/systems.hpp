#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "widthlab/rng.hpp"

namespace widthlab {

// A finite function system: N functions sampled on M points carrying a
// probability weight each. Columns are functions, rows are sample points.
struct FunctionSystem {
  Eigen::MatrixXd samples;          // M x N
  Eigen::VectorXd weights;          // M, positive, sums to 1
  std::vector<std::string> labels;  // optional, size N when present
  std::string grid;                 // free-form description of the sample set

  Eigen::Index points() const { return samples.rows(); }
  Eigen::Index size() const { return samples.cols(); }
  void validate() const;

  // diag(sqrt(w)) * samples: the isometry that carries L_2(mu) onto ell_2.
  Eigen::MatrixXd weight_adjusted() const;
  // samples^T diag(w) samples.
  Eigen::MatrixXd gram() const;

  static FunctionSystem from_samples(Eigen::MatrixXd samples);
  static FunctionSystem from_samples(Eigen::MatrixXd samples, Eigen::VectorXd weights);
};

struct ComplexFunctionSystem {
  Eigen::MatrixXcd samples;
  Eigen::VectorXd weights;
  std::vector<std::string> labels;
  std::string grid;

  Eigen::Index points() const { return samples.rows(); }
  Eigen::Index size() const { return samples.cols(); }
  void validate() const;
};

// Any materialized matrix is capped at 2^26 entries.
inline constexpr std::int64_t kMaxMaterializedEntries = std::int64_t(1) << 26;

// Full 2^k x 2^k sign-character table on the binary cube, Paley column order:
// entry(y, x) = (-1)^popcount(x & y). Materialization needs k <= 13.
FunctionSystem walsh_system(int k);
// Streaming single entry for any k <= 62.
int walsh_entry(int k, std::uint64_t x, std::uint64_t y);

// e(t) = exp(2 pi i t).
std::complex<double> unit_root(double t);
// Full N x N character table of Z_N: entry(y, x) = e(x*y/N). Needs N <= 8192.
ComplexFunctionSystem dft_system(Eigen::Index n);

// Exponentials e(k x) for |k| <= n_freq sampled on the uniform torus grid
// x_j = j/m_points. Columns ordered k = -n_freq..n_freq.
ComplexFunctionSystem trig_grid_system(int n_freq, int m_points);

// Dilates phi(k_j x) of a profile given by its samples on the fine torus grid.
// Frequencies are the greedy minimal lacunary sequence: k_1 = 1,
// k_{j+1} = max(k_j + 1, ceil(lambda k_j)). Requires k_count <= grid/4.
FunctionSystem lacunary_system(const Eigen::VectorXd& profile_samples, double lambda,
                               int count);

struct OneDimLaw {
  enum class Kind { PointMass, Uniform, Gaussian, Rademacher, ThreePoint };
  Kind kind = Kind::Rademacher;
  double a = 0.0;  // PointMass value | Uniform lower | Gaussian mean | ThreePoint P(nonzero)
  double b = 0.0;  // Uniform upper | Gaussian sd | ThreePoint magnitude

  static OneDimLaw point_mass(double value);
  static OneDimLaw uniform(double lo, double hi);
  static OneDimLaw gaussian(double mean, double sd);
  static OneDimLaw rademacher();
  static OneDimLaw three_point(double eps, double magnitude);
  double draw(Rng& rng) const;
};

struct RandomVectorModel {
  enum class Kind { IndependentComponents, RandomSigns, SparseThreePoint, UniformFromColumns };
  Kind kind = Kind::RandomSigns;
  Eigen::Index dim = 0;
  std::vector<OneDimLaw> laws;  // IndependentComponents: size 1 (iid) or dim
  double eps = 0.0;             // SparseThreePoint P(nonzero)
  double K = 0.0;               // SparseThreePoint magnitude, eps * K^p = 1
  double p = 0.0;
  Eigen::MatrixXd columns;      // UniformFromColumns pool

  static RandomVectorModel independent(Eigen::Index dim, std::vector<OneDimLaw> laws);
  static RandomVectorModel random_signs(Eigen::Index dim);
  static RandomVectorModel sparse_three_point(Eigen::Index dim, double eps, double p);
  static RandomVectorModel uniform_from_columns(Eigen::MatrixXd columns);
  void validate() const;
  Eigen::VectorXd draw(Rng& rng) const;
};

// Row t is the draw of substream (seed, t); identical for any worker count.
Eigen::VectorXd sample_one(const RandomVectorModel& model, std::uint64_t seed,
                           std::uint64_t trial);
Eigen::MatrixXd sample(const RandomVectorModel& model, int trials, std::uint64_t seed);

// N functions piecewise constant on N uniform cells with values +-delta.
FunctionSystem piecewise_constant_random_system(Eigen::Index n, double delta,
                                                std::uint64_t seed);

// Gaussian system orthonormalized w.r.t. its weights; gram() = I to roundoff.
FunctionSystem random_orthonormal_system(Eigen::Index points, Eigen::Index size,
                                         std::uint64_t seed);

// Doubles the domain (0,1) -> (0,2) and appends a bottom block Psi supported on
// (1,2) so the extended system is orthonormal in L_2 of the doubled domain
// (unit mass per unit interval). With G the weighted Gram of phi, the bottom
// block solves Psi-Gram = I - G via the symmetric PSD square root; phi already
// orthonormal gives Psi = 0. Requires ||G|| <= 1 (+1e-12). Returned weights are
// halved, so the probability-weighted Gram of the output is I/2; orthonormality
// of the completion is the statement 2 * gram(output) = I.
FunctionSystem orthonormal_completion(const FunctionSystem& phi);

}  // namespace widthlab
