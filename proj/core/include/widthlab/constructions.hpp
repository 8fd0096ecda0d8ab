#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "widthlab/interpolation.hpp"
#include "widthlab/metric.hpp"

namespace widthlab {

// ---------------------------------------------------------------------------
// Sign interpolation and the Walsh low-rank construction.

struct SignInterpolant {
  RationalPolynomial poly;
  long long node_lo = 0;
  long long node_hi = 0;
};

// Interpolates (-1)^t on the integers of [center - radius, center + radius];
// throws when the window holds no integer.
SignInterpolant sign_interpolant(double center, double radius);

struct WalshLowRankReport {
  int k = 0;
  double lambda = 1.0;
  bool hypothesis_satisfied = true;  // 1 <= lambda <= sqrt(k)/4
  long long window_lo = 0;           // interpolation nodes, clamped to [0, k]
  long long window_hi = 0;
  int degree = 0;
  double predicted_error = 0.0;          // 4 exp(-2 lambda^2)
  double predicted_row_error = 0.0;      // 2 exp(-2 lambda^2), rows in the core set
  double measured_error = 0.0;           // Hamming, exhaustive or sampled
  double measured_core_row_error = 0.0;  // worst row over the core set
  std::optional<double> stderr_value;    // sampled mode only
  std::int64_t entries_checked = 0;
  long double rank_bound_core = 0.0L;   // binomial tail at the degree
  long double rank_bound_total = 0.0L;  // core bound + its square
  Eigen::Index sampled_numerical_rank = 0;
  Eigen::Index sampled_submatrix_size = 0;
};

// The section-4 approximation of the Walsh character table: rows with
// near-balanced index get q(<x,y>) with q the sign interpolant; the rest are
// products over an XOR split of the index into two balanced halves.
class WalshLowRank {
 public:
  WalshLowRank(int k, double lambda);

  const WalshLowRankReport& report() const { return report_; }
  // True when the index is in the balanced core set.
  bool in_core(std::uint64_t x) const;
  // The XOR split used for an out-of-core row.
  std::pair<std::uint64_t, std::uint64_t> split(std::uint64_t x) const;
  // Approximant entry, exact-rational pipeline rounded at the end.
  double entry(std::uint64_t x, std::uint64_t y) const;
  // Whether the approximant reproduces the character exactly at (x, y);
  // decided in exact arithmetic.
  bool entry_exact(std::uint64_t x, std::uint64_t y) const;
  // Hamming error of one row (fraction of the 2^k columns), exact count.
  double row_error(std::uint64_t x) const;

  const SignInterpolant& interpolant() const { return q_; }

  // Exhaustive error measurement; requires 2^(2k) <= 2^26.
  void measure_exhaustive();
  // Monte-Carlo error measurement over uniform (x, y) pairs.
  void measure_sampled(std::int64_t count, std::uint64_t seed);

 private:
  void measure_sampled_rank();

  int k_;
  std::uint64_t size_;
  SignInterpolant q_;
  std::vector<char> q_exact_;    // per t in [0, k]: q(t) == (-1)^t exactly
  std::vector<double> q_value_;  // per t in [0, k]
  mutable std::vector<std::pair<std::uint64_t, std::uint64_t>> split_cache_;
  mutable std::vector<char> split_known_;
  WalshLowRankReport report_;
};

WalshLowRank walsh_lowrank(int k, double lambda);  // exhaustive, k <= 13
WalshLowRank walsh_lowrank(int k, double lambda, std::int64_t sample_count,
                           std::uint64_t seed);

struct MonomialRankReport {
  int k = 0;
  int degree = 0;
  Eigen::Index numerical_rank = 0;
  long double binom_bound = 0.0L;
  double sigma_ratio = 0.0;  // first singular value below threshold / sigma_1
};

// Materializes (q(<x,y>))_{x,y in Z_2^k} for a dense polynomial q given by
// monomial coefficients and compares its numerical rank (threshold
// 1e-8 sigma_1) against the binomial tail bound. Needs 2^(2k) <= 2^26.
MonomialRankReport monomial_rank_matrix(int k,
                                        const std::vector<double>& monomial_coeffs);

// ---------------------------------------------------------------------------
// DFT low-rank construction.

struct DftLowRankReport {
  int k = 0;
  double lambda = 1.0;
  int s0 = 0;
  bool hypothesis_satisfied = true;  // 1 <= lambda <= k^(1/4)
  double uniform_tail_bound = 0.0;   // 2 pi k 2^{-s0}
  double max_tail_error_checked = 0.0;
  std::int64_t tail_entries_checked = 0;
  bool tail_bound_violated = false;
  double sampled_offwindow_fraction = 0.0;  // entries with a factor off-window
  double sampled_l0_error = 0.0;            // Ky-Fan norm of sampled |diff|
  std::optional<double> stderr_value;
  std::int64_t entries_checked = 0;
  std::vector<int> factor_degrees;
  long double rank_bound = 0.0L;  // product of per-factor binomial tails
};

// Character e(xy / 2^k) approximated by the truncated carry product
// prod_{s<=s0} e(2^{-s} T_s) with each factor replaced by a polynomial in the
// integer sum T_s = sum_{i+j=k-s} x_i y_j.
class DftLowRank {
 public:
  DftLowRank(int k, double lambda, int s0);

  const DftLowRankReport& report() const { return report_; }
  // Integer convolution sums T_s, s = 1..s0.
  std::vector<long long> carry_sums(std::uint64_t x, std::uint64_t y) const;
  // Truncated character prod e(2^{-s} T_s): the polynomial-free reference.
  std::complex<double> truncated_character(std::uint64_t x, std::uint64_t y) const;
  // Full approximant with interpolated factors.
  std::complex<double> entry(std::uint64_t x, std::uint64_t y) const;
  bool all_factors_in_window(std::uint64_t x, std::uint64_t y) const;
  std::complex<double> exact_character(std::uint64_t x, std::uint64_t y) const;

  // Exhaustively verifies |e(xy/2^k) - truncated| <= 2 pi k 2^{-s0}; the
  // comparison phase is exact integer arithmetic. Requires 2^(2k) <= 2^26.
  void verify_tail_bound_exhaustive();
  void measure_sampled(std::int64_t count, std::uint64_t seed);

 private:
  int k_;
  int s0_;
  std::uint64_t size_;
  long long window_lo_ = 0;
  long long window_hi_ = 0;
  std::vector<ComplexPolynomial> factors_;  // index s-1
  DftLowRankReport report_;
};

DftLowRank dft_lowrank(int k, double lambda, int s0);

// ---------------------------------------------------------------------------
// Trigonometric machinery: Fejer kernel, step-cover sets, one-term approx.

struct TrigPolynomial {
  int half_length = 0;            // m: frequencies -m..m
  Eigen::VectorXd coefficients;   // size 2m+1, entry l+m is c_l

  double coeff(long long l) const {
    return (l < -half_length || l > half_length)
               ? 0.0
               : coefficients[static_cast<Eigen::Index>(l + half_length)];
  }
  std::complex<double> value(double x) const;  // sum c_l e(l x)
  void validate_kernel() const;                // c_0 must be 1
};

struct FejerKernel {
  int m = 1;  // order: the kernel K_{m-1}, degree m-1
  TrigPolynomial polynomial;
  Eigen::VectorXd grid;     // x_j = j / points
  Eigen::VectorXd samples;  // closed-form values on the grid

  double value(double x) const;  // (1/m) (sin(pi m x)/sin(pi x))^2
};

FejerKernel fejer_kernel(int m, int points);

struct StepCoverSet {
  std::int64_t n = 0;  // modulus: the underlying group is Z_n
  int m = 1;           // progression half-length
  double tau = 0.0;    // inclusion probability from the lemma
  std::int64_t s = 0;  // candidate-step budget S of the proof
  std::vector<std::int64_t> lambda;   // sorted members of the set
  std::vector<std::int64_t> witness;  // per k: step h with k +- l h in the set
  int retries_used = 0;

  bool contains(std::int64_t value) const;
  // Re-verifies every witness: gcd(h, n) = 1 and k +- l h in the set.
  bool verify() const;
};

StepCoverSet lambda_set(std::int64_t n, int m, std::uint64_t seed,
                        int max_retries = 64);

struct TrigApprox {
  std::int64_t k = 0;
  std::int64_t step = 0;               // h used for this frequency
  Eigen::VectorXcd approximant;        // values on Z_n
  double error = 0.0;                  // ||t - e(k./n)||_{L_p^n}
  double substitution_residual = 0.0;  // | ||T(h.)|| - ||T|| |
  std::vector<std::int64_t> spectrum;  // {k} union {k + l h mod n : c_l != 0}
};

// t(x) = e(kx/n) T(h x / n) with h the cover witness for k; the spectrum off
// k lands inside the cover set.
TrigApprox trig_approx(std::int64_t k, const StepCoverSet& cover,
                       const TrigPolynomial& t, std::int64_t n, double p);

// | ||T(h.)||_{L_p^n} - ||T||_{L_p^n} |: multiplication by an invertible step
// permutes the grid, so this is summation noise only.
double substitution_residual(const TrigPolynomial& t, std::int64_t h,
                             std::int64_t n, double p);

// ---------------------------------------------------------------------------
// Sparse non-rigidity simulation (p > 2).

struct SparseSimResult {
  double estimate = 0.0;  // mean per-coordinate E|xi_1 - eta_1|^p estimate
  double stderr_value = 0.0;
  int trials = 0;
  double eps = 0.0;
  double magnitude = 0.0;  // K with eps K^p = 1
  std::int64_t all_zero_events = 0;
  std::int64_t single_events = 0;
  std::int64_t multi_events = 0;
  std::vector<double> trial_values;  // per-trial K^p-scaled costs, trial order
};

// Draws sparse three-point vectors against one Haar subspace; vectors with a
// single spike are approximated in ell_inf from the subspace, the rest by 0.
SparseSimResult sparse_nonrigidity_sim(double p, Eigen::Index dim,
                                       Eigen::Index subspace_dim, double eps,
                                       int trials, std::uint64_t seed);

}  // namespace widthlab
