#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "widthlab/metric.hpp"
#include "widthlab/subspace.hpp"
#include "widthlab/systems.hpp"

namespace widthlab {

enum class Certainty { Exact, UpperBound, LowerEvidence, MonteCarloEstimate };

std::string describe(Certainty c);

// Thin SVD with nonincreasing singular values; reconstruction is checked to
// 1e-8 relative on construction.
struct SpectralDecomposition {
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd left_basis;   // M x r
  Eigen::MatrixXd right_basis;  // N x r
};

SpectralDecomposition spectral_decomposition(const Eigen::MatrixXd& a);

struct WidthResult {
  double value = 0.0;
  Certainty certainty = Certainty::UpperBound;
  Eigen::Index n = 0;
  MetricSpec metric;
  std::optional<double> stderr_value;  // present iff MonteCarloEstimate
  std::string provenance;
  std::optional<Subspace> subspace;  // optimal/best subspace when available
};

struct LowRankApprox {
  Eigen::MatrixXd left;   // M x r
  Eigen::MatrixXd right;  // r x N
  double error = 0.0;     // matrix_distance(A, left*right, metric)
  MetricSpec metric;
  Certainty certainty = Certainty::UpperBound;
  int sweeps = 0;
  bool hit_iteration_cap = false;
  // Objective after the initial fit and after every sweep of the winning
  // restart; nonincreasing by construction.
  std::vector<double> sweep_errors;

  Eigen::Index rank() const { return left.cols(); }
  Eigen::MatrixXd approximant() const { return left * right; }
};

// Exact mean width of the system columns in weighted L_2: the tail-spectrum
// formula value = sqrt(sum_{k>n} sigma_k^2 / N) with sigma_k the singular
// values of the weight-adjusted sample matrix. Returns the optimal subspace.
WidthResult exact_l2_avg_width(const FunctionSystem& x, Eigen::Index n);

// Best Frobenius rank-n approximant via truncated SVD; error is the plain
// Frobenius norm of the spectral tail.
LowRankApprox eckart_young_truncation(const Eigen::MatrixXd& a, Eigen::Index n);

// Alternating row/column minimization under an arbitrary metric. Column and
// row subproblems are subspace distance solves; sweeps never increase the
// objective (worse per-column solves are discarded). For Hamming instances
// with at most 4096 entries a column-skeleton local search runs on top.
// col_opts tunes the inner distance solves (its seed field is overridden).
LowRankApprox altmin_lowrank(const Eigen::MatrixXd& a, Eigen::Index n,
                             const MetricSpec& m, int restarts = 3,
                             int max_sweeps = 30,
                             std::uint64_t seed = 0xA17A3Dull,
                             const SolverOptions& col_opts = SolverOptions());

enum class SubspaceStrategy { RandomSubspace, AltMin, SVDInit };

// Monte-Carlo / optimization upper estimates of the average width. For the
// RandomSubspace strategy the result is a mean +- stderr over Haar draws; for
// AltMin / SVDInit it is the achieved value of the single best subspace found.
WidthResult mc_avg_width_upper(const FunctionSystem& x, Eigen::Index n,
                               const MetricSpec& m, SubspaceStrategy strategy,
                               int trials, std::uint64_t seed);
WidthResult mc_avg_width_upper(const RandomVectorModel& model, Eigen::Index n,
                               const MetricSpec& m, SubspaceStrategy strategy,
                               int trials, std::uint64_t seed);

// <x, Px> / ||Px||_{p'} with P the projector onto Q^perp and p' the conjugate
// exponent (plain counting norms). A guaranteed lower bound on the ell_p
// distance from x to Q for 1 < p <= 2; returns 0 when Px = 0.
double gluskin_certificate(const Eigen::VectorXd& x, const Subspace& q, double p);

// Empirical lower estimate of the smallest B with ||sum a_k phi_k||_{L_p'} <=
// B |a| on the ell_2 sphere, by projected gradient ascent from several starts.
double sp_constant(const FunctionSystem& x, double p_prime, int restarts = 16,
                   std::uint64_t seed = 0x5BC0115ull);

struct BinomTail {
  long double tail_sum;  // sum_{i<=d} C(k,i), exact for k <= 64
  long double bound;     // (e k / d)^d, 1 when d = 0
};

BinomTail binom_tail(int k, int d);

// Both sides of the sum-vs-expectation transpose identity for the system with
// eta the columnwise weighted-L_2 projection onto Q: (sum_k ||xi_k -
// eta_k||_p^p, E_mu ||xi(t) - eta(t)||_{ell_p}^p). Equal up to roundoff.
std::pair<double, double> transpose_identity_check(const FunctionSystem& x,
                                                   const Subspace& q, double p);

}  // namespace widthlab
