#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

#include "widthlab/metric.hpp"
#include "widthlab/rng.hpp"
#include "widthlab/systems.hpp"

namespace widthlab {

// Linear subspace of R^M held as an orthonormal basis (basis^T basis = I).
class Subspace {
 public:
  Subspace() = default;

  // Orthonormalizes the given spanning columns (QR with one
  // re-orthogonalization pass); near-dependent columns are deflated away at
  // the relative tolerance.
  static Subspace from_columns(const Eigen::MatrixXd& columns, double tol = 1e-12);
  // Accepts an already orthonormal basis; throws if the Gram is off by > 1e-8.
  static Subspace from_orthonormal(Eigen::MatrixXd basis);
  static Subspace zero(Eigen::Index ambient);

  const Eigen::MatrixXd& basis() const { return basis_; }
  Eigen::Index ambient_dim() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }

  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  Subspace with_extra_column(const Eigen::VectorXd& column) const;

 private:
  Eigen::MatrixXd basis_;
};

// Haar-distributed random subspace (Gaussian matrix, sign-fixed QR).
Subspace random_subspace(Eigen::Index ambient, Eigen::Index dim, Rng& rng);
Subspace random_subspace(Eigen::Index ambient, Eigen::Index dim, std::uint64_t seed);

enum class DistanceStatus {
  Exact,               // closed form (least squares / norm of x itself)
  ConvexConverged,     // convex metric, duality gap within tolerance
  HeuristicUpperBound  // non-convex metric or convex solve past its cap
};

struct DistanceResult {
  double value = 0.0;
  // Coefficients of the nearest point found: approx = basis * minimizer. The
  // reported value is always the metric evaluated at this minimizer.
  Eigen::VectorXd minimizer;
  // Dual certificate when the metric is convex: z in Q^perp with dual norm
  // <= 1, so <x,z> is a true lower bound for the distance.
  std::optional<Eigen::VectorXd> certificate;
  double gap = 0.0;  // value - <x, certificate> when a certificate exists
  DistanceStatus status = DistanceStatus::Exact;
};

struct SolverOptions {
  // ConvexConverged requires gap <= gap_tol_rel * (1 + norm(x)).
  double gap_tol_rel = 1e-7;
  int max_stages = 14;    // smoothing continuation stages
  int max_inner = 60;     // reweighted iterations per stage
  int multistart = 8;     // heuristic metrics only
  std::uint64_t seed = 0x517CC1B727220A95ull;
};

// Distance from x to Q under m. Weights give the point masses for weighted
// kinds (Lp, KyFanL0, Hamming); empty means uniform 1/M.
DistanceResult distance(const Eigen::VectorXd& x, const Subspace& q,
                        const MetricSpec& m,
                        const Eigen::VectorXd& weights = Eigen::VectorXd(),
                        const SolverOptions& opts = SolverOptions());

struct MeanDistanceResult {
  double value = 0.0;
  // True when any per-column solve came back heuristic, making the mean an
  // upper bound rather than a converged value.
  bool upper_bound_only = false;
};

// ((1/N) sum_k rho(x_k, Q)^power)^(1/power) over the columns of X, with the
// system's point weights feeding the metric.
MeanDistanceResult mean_distance(const FunctionSystem& x, const Subspace& q,
                                 const MetricSpec& m, double power,
                                 const SolverOptions& opts = SolverOptions());

}  // namespace widthlab
