#include "widthlab/subspace.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "widthlab/parallel.hpp"

namespace widthlab {
namespace {

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& columns, double tol) {
  if (columns.cols() == 0) return Eigen::MatrixXd(columns.rows(), 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(columns);
  qr.setThreshold(tol);
  const Eigen::Index rank = qr.rank();
  if (rank == 0) return Eigen::MatrixXd(columns.rows(), 0);
  Eigen::MatrixXd q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(columns.rows(), rank);
  // Second pass keeps the Gram at identity to ~1e-15 even for sour inputs.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr2(q);
  q = qr2.householderQ() * Eigen::MatrixXd::Identity(columns.rows(), rank);
  return q;
}

Eigen::VectorXd probability_weights(const Eigen::VectorXd& weights, Eigen::Index m) {
  if (weights.size() == 0)
    return Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  if (weights.size() != m)
    throw std::invalid_argument("distance: weights size mismatch");
  return weights;
}

// Weights that enter the solver objective (norm() itself knows which kinds
// ignore them; the solver needs the same convention for reweighted steps).
Eigen::VectorXd objective_weights(const MetricSpec& m, const Eigen::VectorXd& prob,
                                  Eigen::Index rows) {
  switch (m.kind) {
    case MetricKind::Lp:
    case MetricKind::KyFanL0:
    case MetricKind::Hamming: return prob;
    case MetricKind::LpCounting:
    case MetricKind::Linf: return Eigen::VectorXd::Ones(rows);
  }
  return prob;
}

struct Problem {
  const Eigen::VectorXd& x;
  const Eigen::MatrixXd& basis;
  Eigen::VectorXd prob;  // probability weights for norm evaluation
  Eigen::VectorXd u;     // objective weights for the solver
  MetricSpec metric;
  SolverOptions opts;
  double x_norm = 0.0;

  double gap_tol() const { return opts.gap_tol_rel * (1.0 + x_norm); }
  Eigen::VectorXd residual(const Eigen::VectorXd& c) const { return x - basis * c; }
  double eval(const Eigen::VectorXd& c) const { return norm(residual(c), prob, metric); }
};

// Solves (B^T diag(w) B + ridge I) c = B^T diag(w) x.
Eigen::VectorXd weighted_ls(const Eigen::MatrixXd& basis, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& w, double ridge = 0.0) {
  const Eigen::MatrixXd bw = w.asDiagonal() * basis;
  Eigen::MatrixXd normal = basis.transpose() * bw;
  if (ridge > 0.0)
    normal.diagonal().array() += ridge * (normal.trace() / std::max<Eigen::Index>(1, normal.rows()) + 1e-300);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  Eigen::VectorXd c = ldlt.solve(basis.transpose() * (w.asDiagonal() * x));
  if (!c.allFinite()) {
    normal.diagonal().array() += 1e-10 * normal.diagonal().mean() + 1e-300;
    c = Eigen::LDLT<Eigen::MatrixXd>(normal).solve(basis.transpose() * (w.asDiagonal() * x));
    if (!c.allFinite()) c = Eigen::VectorXd::Zero(basis.cols());
  }
  return c;
}

double dual_norm(const Eigen::VectorXd& z, const Problem& prob) {
  const MetricSpec& m = prob.metric;
  if (m.kind == MetricKind::Linf) return z.lpNorm<1>();
  const double p = m.p;
  const Eigen::VectorXd& u = prob.u;
  if (p == 1.0) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      best = std::max(best, std::abs(z[i]) / u[i]);
    return best;
  }
  const double q = p / (p - 1.0);
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] == 0.0) continue;
    acc += u[i] * std::pow(static_cast<long double>(std::abs(z[i]) / u[i]),
                           static_cast<long double>(q));
  }
  return static_cast<double>(std::pow(acc, 1.0L / static_cast<long double>(q)));
}

// Dual-feasible point from the norm subgradient at the residual, projected
// into Q^perp and rescaled: <x,z> is then a true lower bound.
struct DualPoint {
  Eigen::VectorXd z;
  double value = 0.0;
};

DualPoint project_and_score(Eigen::VectorXd z, const Problem& prob) {
  z -= prob.basis * (prob.basis.transpose() * z);
  const double s = dual_norm(z, prob);
  if (s > 1.0) z /= s;
  const double score = prob.x.dot(z);
  return {std::move(z), score};
}

DualPoint gradient_certificate(const Eigen::VectorXd& r, const Problem& prob) {
  const Eigen::Index m = r.size();
  Eigen::VectorXd z(m);
  if (prob.metric.kind == MetricKind::Linf) {
    Eigen::Index imax = 0;
    r.cwiseAbs().maxCoeff(&imax);
    z.setZero();
    z[imax] = r[imax] >= 0 ? 1.0 : -1.0;
    return project_and_score(std::move(z), prob);
  }
  const double p = prob.metric.p;
  if (p == 1.0) {
    for (Eigen::Index i = 0; i < m; ++i)
      z[i] = prob.u[i] * (r[i] > 0 ? 1.0 : (r[i] < 0 ? -1.0 : 0.0));
    return project_and_score(std::move(z), prob);
  }
  const double rn = norm(r, prob.prob, prob.metric);
  if (rn <= 0.0) return {Eigen::VectorXd::Zero(m), 0.0};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double t = std::abs(r[i]) / rn;
    z[i] = prob.u[i] * (r[i] >= 0 ? 1.0 : -1.0) * std::pow(t, p - 1.0);
  }
  return project_and_score(std::move(z), prob);
}

// l1 only: fix z = u .* sign(r) off the near-zero set and complete on it so
// that B^T z = 0, staying inside the box |z_i| <= u_i when possible.
DualPoint l1_completion_certificate(const Eigen::VectorXd& r, const Problem& prob) {
  const Eigen::Index m = r.size();
  const double scale = prob.x_norm + 1e-300;
  std::vector<Eigen::Index> zero_set;
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(r[i]) <= 1e-7 * scale) {
      zero_set.push_back(i);
      z[i] = 0.0;
    } else {
      z[i] = prob.u[i] * (r[i] > 0 ? 1.0 : -1.0);
    }
  }
  if (!zero_set.empty()) {
    Eigen::MatrixXd bs(prob.basis.cols(), static_cast<Eigen::Index>(zero_set.size()));
    for (std::size_t k = 0; k < zero_set.size(); ++k)
      bs.col(static_cast<Eigen::Index>(k)) = prob.basis.row(zero_set[k]).transpose();
    const Eigen::VectorXd rhs = -prob.basis.transpose() * z;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(bs);
    const Eigen::VectorXd fill = cod.solve(rhs);
    for (std::size_t k = 0; k < zero_set.size(); ++k)
      z[zero_set[k]] = fill[static_cast<Eigen::Index>(k)];
  }
  return project_and_score(std::move(z), prob);
}

// Exact l1 solve by support pivoting: the optimum interpolates x on n
// independent rows, and a vertex is optimal iff the dual fill on its support
// stays inside the weight box. Each step removes the first box-violating
// support row (Bland's rule, no cycling) and enters the weighted-median
// blocker of the resulting line search. On success c and value hold the
// optimum and cert carries a dual point whose score matches value to
// rounding, so the caller's gap check passes.
bool l1_simplex(const Problem& prob, Eigen::VectorXd& c, double& value,
                DualPoint& cert) {
  const Eigen::Index m = prob.x.size();
  const Eigen::Index n = prob.basis.cols();
  if (n == 0 || m <= n) return false;

  // Initial support: independent rows among the smallest warm-start residuals.
  std::vector<Eigen::Index> sup;
  {
    const Eigen::VectorXd r0 = prob.residual(c);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(r0[a]) < std::abs(r0[b]);
    });
    sup.reserve(static_cast<std::size_t>(n));
    Eigen::MatrixXd grow(n, n);
    for (const Eigen::Index idx : order) {
      if (static_cast<Eigen::Index>(sup.size()) == n) break;
      const Eigen::Index k = static_cast<Eigen::Index>(sup.size());
      grow.row(k) = prob.basis.row(idx);
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(
          grow.topRows(k + 1));
      cod.setThreshold(1e-10);
      if (cod.rank() == k + 1) sup.push_back(idx);
    }
    if (static_cast<Eigen::Index>(sup.size()) < n) return false;
  }

  Eigen::MatrixXd bs(n, n);
  Eigen::VectorXd xs(n);
  Eigen::MatrixXd binv(n, n);
  std::vector<char> in_sup(static_cast<std::size_t>(m));
  int since_refactor = 0;
  const auto refactor = [&]() -> bool {
    std::fill(in_sup.begin(), in_sup.end(), 0);
    for (Eigen::Index k = 0; k < n; ++k) {
      bs.row(k) = prob.basis.row(sup[static_cast<std::size_t>(k)]);
      xs[k] = prob.x[sup[static_cast<std::size_t>(k)]];
      in_sup[static_cast<std::size_t>(sup[static_cast<std::size_t>(k)])] = 1;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bs);
    binv = lu.inverse();
    if (!binv.allFinite()) return false;
    const Eigen::VectorXd cand = binv * xs;
    if (!cand.allFinite()) return false;
    c = cand;
    since_refactor = 0;
    return true;
  };
  // Basis changes one support row per pivot, so the inverse follows by a
  // rank-one update; rebuilt from scratch periodically and before declaring
  // optimality.
  const auto swap_row = [&](Eigen::Index k, Eigen::Index enter) -> bool {
    const Eigen::Index old_row = sup[static_cast<std::size_t>(k)];
    const Eigen::RowVectorXd w = prob.basis.row(enter) - bs.row(k);
    const Eigen::VectorXd col = binv.col(k);
    const double denom = 1.0 + w.dot(col);
    sup[static_cast<std::size_t>(k)] = enter;
    if (std::abs(denom) < 1e-8 || ++since_refactor >= 48) return refactor();
    const Eigen::RowVectorXd wb = (w * binv) / denom;
    binv.noalias() -= col * wb;
    bs.row(k) = prob.basis.row(enter);
    xs[k] = prob.x[enter];
    in_sup[static_cast<std::size_t>(old_row)] = 0;
    in_sup[static_cast<std::size_t>(enter)] = 1;
    const Eigen::VectorXd cand = binv * xs;
    if (!binv.allFinite() || !cand.allFinite()) return refactor();
    c = cand;
    return true;
  };
  if (!refactor()) return false;

  const int cap = 120 + 20 * static_cast<int>(n);
  for (int pivot = 0; pivot < cap; ++pivot) {
    const Eigen::VectorXd r = prob.residual(c);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_sup[static_cast<std::size_t>(i)] || r[i] == 0.0) continue;
      v += (prob.u[i] * (r[i] > 0 ? 1.0 : -1.0)) * prob.basis.row(i).transpose();
    }
    const Eigen::VectorXd zs = -(binv.transpose() * v);
    if (!zs.allFinite()) return false;

    Eigen::Index leave = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double box = prob.u[sup[static_cast<std::size_t>(k)]];
      if (std::abs(zs[k]) > box * (1.0 + 1e-9) + 1e-13) {
        leave = k;
        break;
      }
    }
    if (leave < 0) {
      if (since_refactor > 0) {
        // Only trust optimality straight off a fresh factorization.
        if (!refactor()) return false;
        continue;
      }
      value = norm(r, prob.prob, prob.metric);
      Eigen::VectorXd z(m);
      for (Eigen::Index i = 0; i < m; ++i)
        z[i] = in_sup[static_cast<std::size_t>(i)]
                   ? 0.0
                   : prob.u[i] * (r[i] > 0 ? 1.0 : (r[i] < 0 ? -1.0 : 0.0));
      for (Eigen::Index k = 0; k < n; ++k) z[sup[static_cast<std::size_t>(k)]] = zs[k];
      cert = project_and_score(std::move(z), prob);
      return true;
    }

    const double sigma = zs[leave] > 0 ? 1.0 : -1.0;
    const Eigen::VectorXd d = -sigma * binv.col(leave);
    if (!d.allFinite()) return false;
    // Line search: slope starts at u_leave - |z_leave| < 0 and gains
    // 2 u_i |g_i| at each off-support crossing t_i = r_i / g_i > 0.
    struct Crossing {
      double t;
      double gain;
      Eigen::Index row;
    };
    std::vector<Crossing> crossings;
    double slope = prob.u[sup[static_cast<std::size_t>(leave)]] - std::abs(zs[leave]);
    Eigen::Index degenerate_enter = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_sup[static_cast<std::size_t>(i)]) continue;
      const double g = prob.basis.row(i).dot(d);
      if (g == 0.0) continue;
      if (r[i] == 0.0) {
        // Ties the vertex: the kink sits at t = 0, so it raises the slope
        // immediately and marks a same-point support swap.
        slope += prob.u[i] * std::abs(g);
        if (degenerate_enter < 0) degenerate_enter = i;
        continue;
      }
      const double t = r[i] / g;
      if (t > 0.0) crossings.push_back({t, 2.0 * prob.u[i] * std::abs(g), i});
    }
    Eigen::Index enter = -1;
    if (slope >= 0.0) {
      enter = degenerate_enter;
    } else {
      std::sort(crossings.begin(), crossings.end(),
                [](const Crossing& a, const Crossing& b) {
                  if (a.t != b.t) return a.t < b.t;
                  return a.row < b.row;
                });
      for (const Crossing& cr : crossings) {
        slope += cr.gain;
        if (slope >= 0.0) {
          enter = cr.row;
          break;
        }
      }
    }
    if (enter < 0) return false;
    if (!swap_row(leave, enter)) return false;
  }
  return false;
}

// Exact Chebyshev solve via revised simplex on the dual LP
//   max x.z  s.t.  B^T z = 0, ||z||_1 <= 1.
// Columns are signed rows (sigma*b_i; 1) with cost sigma*x_i; a basis is n+1
// of them. The optimal multipliers pi split into the primal coefficients
// (first n entries) and the Chebyshev level, so one solve certifies both
// sides. Seeded from the residual of a good iterate the start basis is
// usually optimal already. Bland's rule keeps the pivoting finite.
bool linf_simplex(const Problem& prob, const Eigen::VectorXd& r_hint,
                  Eigen::VectorXd& c, double& value, DualPoint& cert) {
  const Eigen::Index m = prob.x.size();
  const Eigen::Index n = prob.basis.cols();
  if (n < 1 || m < n + 1) return false;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double fa = std::abs(r_hint[a]);
    const double fb = std::abs(r_hint[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  });

  // Greedy independent reference: n rows spanning the coefficient space plus
  // the best remaining row, so the transposed reference has a 1-dim kernel.
  std::vector<Eigen::Index> ref;
  ref.reserve(static_cast<std::size_t>(n) + 1);
  {
    Eigen::MatrixXd grow(n, n);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-10);
    Eigen::Index rank = 0;
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    for (Eigen::Index idx : order) {
      if (rank == n) break;
      grow.row(rank) = prob.basis.row(idx);
      cod.compute(grow.topRows(rank + 1));
      if (cod.rank() == rank + 1) {
        ++rank;
        ref.push_back(idx);
        used[static_cast<std::size_t>(idx)] = 1;
      }
    }
    if (rank < n) return false;
    for (Eigen::Index idx : order) {
      if (!used[static_cast<std::size_t>(idx)]) {
        ref.push_back(idx);
        break;
      }
    }
    if (ref.size() != static_cast<std::size_t>(n) + 1) return false;
  }

  Eigen::MatrixXd bt(n, n + 1);
  for (Eigen::Index k = 0; k <= n; ++k)
    bt.col(k) = prob.basis.row(ref[static_cast<std::size_t>(k)]).transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> klu(bt);
  klu.setThreshold(1e-12);
  if (klu.dimensionOfKernel() != 1) return false;
  Eigen::VectorXd nu = klu.kernel().col(0);
  double orient = 0.0;
  for (Eigen::Index k = 0; k <= n; ++k)
    orient += prob.x[ref[static_cast<std::size_t>(k)]] * nu[k];
  if (orient < 0.0) nu = -nu;

  std::vector<double> sign(static_cast<std::size_t>(n) + 1);
  for (Eigen::Index k = 0; k <= n; ++k)
    sign[static_cast<std::size_t>(k)] = nu[k] >= 0.0 ? 1.0 : -1.0;

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 1.0;
  Eigen::MatrixXd basis_mat(n + 1, n + 1);
  Eigen::VectorXd cost_b(n + 1);
  Eigen::FullPivLU<Eigen::MatrixXd> blu;
  const double scale = std::max(1.0, prob.x.cwiseAbs().maxCoeff());

  const auto refactor = [&]() -> bool {
    for (Eigen::Index k = 0; k <= n; ++k) {
      const Eigen::Index row = ref[static_cast<std::size_t>(k)];
      const double s = sign[static_cast<std::size_t>(k)];
      basis_mat.col(k).head(n) = s * prob.basis.row(row).transpose();
      basis_mat(n, k) = 1.0;
      cost_b[k] = s * prob.x[row];
    }
    blu.compute(basis_mat);
    return blu.isInvertible();
  };
  if (!refactor()) return false;

  Eigen::VectorXd yb = blu.solve(rhs);
  if (!yb.allFinite() || yb.minCoeff() < -1e-9) return false;

  const int max_pivots = 300 + 40 * static_cast<int>(n);
  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    const Eigen::VectorXd pi = blu.transpose().solve(cost_b);
    if (!pi.allFinite()) return false;
    Eigen::Index enter_row = -1;
    double enter_sign = 1.0;
    for (Eigen::Index i = 0; i < m && enter_row < 0; ++i) {
      const double bi_pi = prob.basis.row(i).dot(pi.head(n));
      if (prob.x[i] - bi_pi - pi[n] > 1e-11 * scale) {
        enter_row = i;
        enter_sign = 1.0;
      } else if (bi_pi - prob.x[i] - pi[n] > 1e-11 * scale) {
        enter_row = i;
        enter_sign = -1.0;
      }
    }
    if (enter_row < 0) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
      for (Eigen::Index k = 0; k <= n; ++k)
        z[ref[static_cast<std::size_t>(k)]] +=
            sign[static_cast<std::size_t>(k)] * std::max(yb[k], 0.0);
      DualPoint dp = project_and_score(std::move(z), prob);
      if (dp.value > cert.value) cert = std::move(dp);
      const Eigen::VectorXd cand = pi.head(n);
      const double cand_value = prob.eval(cand);
      if (cand_value < value) {
        value = cand_value;
        c = cand;
      }
      return true;
    }
    Eigen::VectorXd col(n + 1);
    col.head(n) = enter_sign * prob.basis.row(enter_row).transpose();
    col[n] = 1.0;
    const Eigen::VectorXd d = blu.solve(col);
    if (!d.allFinite()) return false;
    double best_t = std::numeric_limits<double>::infinity();
    Eigen::Index leave = -1;
    for (Eigen::Index k = 0; k <= n; ++k) {
      if (d[k] <= 1e-13) continue;
      const double t = std::max(yb[k], 0.0) / d[k];
      if (leave < 0 || t < best_t - 1e-12 * (1.0 + best_t)) {
        best_t = t;
        leave = k;
      } else if (t <= best_t + 1e-12 * (1.0 + best_t) &&
                 ref[static_cast<std::size_t>(k)] <
                     ref[static_cast<std::size_t>(leave)]) {
        leave = k;
      }
    }
    if (leave < 0) return false;
    ref[static_cast<std::size_t>(leave)] = enter_row;
    sign[static_cast<std::size_t>(leave)] = enter_sign;
    if (!refactor()) return false;
    yb = blu.solve(rhs);
    if (!yb.allFinite() || yb.minCoeff() < -1e-7) return false;
  }
  return false;
}

// Euclidean projection onto the l1 ball of radius 1 (sort-based threshold).
void l1_ball_project(Eigen::VectorXd& z) {
  if (z.lpNorm<1>() <= 1.0) return;
  std::vector<double> mags(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i)
    mags[static_cast<std::size_t>(i)] = std::abs(z[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double acc = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    acc += mags[k];
    const double cand = (acc - 1.0) / static_cast<double>(k + 1);
    if (cand >= (k + 1 < mags.size() ? mags[k + 1] : 0.0)) {
      theta = cand;
      break;
    }
  }
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double mag = std::max(0.0, std::abs(z[i]) - theta);
    z[i] = z[i] >= 0 ? mag : -mag;
  }
}

// Projected ascent on the dual set {B^T z = 0, dual_norm(z) <= 1}: alternate
// a step along the projected objective with the ball clip and the subspace
// projection. Every candidate is re-validated by project_and_score, so the
// returned point is always feasible; this only ever tightens the gap.
DualPoint dual_ascent(const Problem& prob, const DualPoint& seed) {
  const bool is_linf = prob.metric.kind == MetricKind::Linf;
  if (!is_linf && prob.metric.p != 1.0) return seed;
  Eigen::VectorXd dir =
      prob.x - prob.basis * (prob.basis.transpose() * prob.x);
  const double dn = dual_norm(dir, prob);
  if (!(dn > 0.0)) return seed;
  dir /= dn;
  DualPoint best = seed;
  Eigen::VectorXd z = seed.z.size() == prob.x.size()
                          ? seed.z
                          : Eigen::VectorXd::Zero(prob.x.size());
  double eta = 0.5;
  for (int it = 0; it < 200; ++it) {
    z += eta * dir;
    if (is_linf) {
      l1_ball_project(z);
    } else {
      for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = std::clamp(z[i], -prob.u[i], prob.u[i]);
    }
    z -= prob.basis * (prob.basis.transpose() * z);
    DualPoint cand = project_and_score(z, prob);
    if (cand.value > best.value) {
      best = std::move(cand);
    } else {
      eta *= 0.7;
      if (eta < 1e-5) break;
    }
  }
  return best;
}

// Small non-negative least squares with a simplex constraint: minimize
// ||C a||^2 over a >= 0, sum a = 1. Active-set on the zero bounds.
Eigen::VectorXd simplex_nnls(const Eigen::MatrixXd& c) {
  const Eigen::Index k = c.cols();
  std::vector<bool> active(static_cast<std::size_t>(k), true);
  Eigen::VectorXd a = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  for (int pass = 0; pass < 3 * static_cast<int>(k) + 10; ++pass) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < k; ++i)
      if (active[static_cast<std::size_t>(i)]) support.push_back(i);
    if (support.empty()) break;
    const Eigen::Index s = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j)
        kkt(i, j) = 2.0 * c.col(support[static_cast<std::size_t>(i)])
                              .dot(c.col(support[static_cast<std::size_t>(j)]));
    kkt.diagonal().head(s).array() += 1e-12;
    for (Eigen::Index i = 0; i < s; ++i) kkt(i, s) = kkt(s, i) = 1.0;
    rhs[s] = 1.0;
    const Eigen::VectorXd sol = kkt.ldlt().solve(rhs);
    Eigen::Index worst = -1;
    double worst_val = -1e-12;
    for (Eigen::Index i = 0; i < s; ++i)
      if (sol[i] < worst_val) {
        worst_val = sol[i];
        worst = i;
      }
    if (worst < 0) {
      a.setZero();
      for (Eigen::Index i = 0; i < s; ++i)
        a[support[static_cast<std::size_t>(i)]] = std::max(0.0, sol[i]);
      const double total = a.sum();
      if (total > 0) a /= total;
      return a;
    }
    active[static_cast<std::size_t>(support[static_cast<std::size_t>(worst)])] = false;
  }
  const double total = a.sum();
  if (total > 0) a /= total;
  return a;
}

DualPoint linf_activeset_certificate(const Eigen::VectorXd& r, const Problem& prob) {
  const Eigen::Index m = r.size();
  const double peak = r.cwiseAbs().maxCoeff();
  if (peak <= 0.0) return {Eigen::VectorXd::Zero(m), 0.0};
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(r[a]) > std::abs(r[b]);
  });
  const Eigen::Index cap =
      std::min<Eigen::Index>(m, prob.basis.cols() + 24);
  std::vector<Eigen::Index> act;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index idx = order[static_cast<std::size_t>(i)];
    if (std::abs(r[idx]) >= (1.0 - 1e-4) * peak ||
        static_cast<Eigen::Index>(act.size()) < std::min<Eigen::Index>(m, prob.basis.cols() + 1))
      act.push_back(idx);
    if (static_cast<Eigen::Index>(act.size()) >= cap) break;
  }
  Eigen::MatrixXd c(prob.basis.cols(), static_cast<Eigen::Index>(act.size()));
  for (std::size_t k = 0; k < act.size(); ++k) {
    const double sgn = r[act[k]] >= 0 ? 1.0 : -1.0;
    c.col(static_cast<Eigen::Index>(k)) = sgn * prob.basis.row(act[k]).transpose();
  }
  const Eigen::VectorXd a = simplex_nnls(c);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < act.size(); ++k)
    z[act[k]] = (r[act[k]] >= 0 ? 1.0 : -1.0) * a[static_cast<Eigen::Index>(k)];
  return project_and_score(std::move(z), prob);
}

struct ConvexOutcome {
  Eigen::VectorXd c;
  DualPoint best_dual;
};

// Reweighted least squares on the eps-smoothed p-objective with damping and a
// geometric smoothing schedule. Works for every p in [1, inf); the certificate
// is checked after each stage so the loop can stop at the gap target.
ConvexOutcome irls_lp(const Problem& prob, double p_exponent, bool build_cert) {
  const Eigen::Index m = prob.x.size();
  const double scale = std::max(prob.x.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd c = weighted_ls(prob.basis, prob.x, prob.u);
  DualPoint best_dual{Eigen::VectorXd::Zero(m), 0.0};
  double best_value = prob.eval(c);
  Eigen::VectorXd best_c = c;

  const double p = p_exponent;
  auto smoothed = [&](const Eigen::VectorXd& r, double eps) {
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < m; ++i)
      acc += prob.u[i] * std::pow(static_cast<long double>(r[i] * r[i] + eps * eps),
                                  static_cast<long double>(p / 2.0));
    return static_cast<double>(acc);
  };

  double eps = 0.1 * scale;
  for (int stage = 0; stage < prob.opts.max_stages; ++stage) {
    for (int it = 0; it < prob.opts.max_inner; ++it) {
      const Eigen::VectorXd r = prob.residual(c);
      Eigen::VectorXd w(m);
      for (Eigen::Index i = 0; i < m; ++i)
        w[i] = prob.u[i] *
               std::pow(r[i] * r[i] + eps * eps, (p - 2.0) / 2.0);
      const Eigen::VectorXd next = weighted_ls(prob.basis, prob.x, w, 1e-14);
      const double before = smoothed(r, eps);
      Eigen::VectorXd cand = next;
      double t = 1.0;
      int backtracks = 0;
      while (smoothed(prob.residual(cand), eps) > before && backtracks < 25) {
        t *= 0.5;
        cand = c + t * (next - c);
        ++backtracks;
      }
      const double move = (cand - c).norm();
      c = cand;
      if (move <= 1e-14 * (1.0 + c.norm())) break;
    }
    const double value_here = prob.eval(c);
    if (value_here < best_value) {
      best_value = value_here;
      best_c = c;
    }
    if (build_cert) {
      const Eigen::VectorXd r = prob.residual(best_c);
      DualPoint dp = gradient_certificate(r, prob);
      if (dp.value > best_dual.value) best_dual = dp;
      if (p == 1.0 && eps <= 1e-5 * scale) {
        DualPoint dc = l1_completion_certificate(r, prob);
        if (dc.value > best_dual.value) best_dual = dc;
      }
      if (best_value - best_dual.value <= prob.gap_tol()) break;
    }
    eps *= 0.1;
    if (eps < 1e-15 * scale) break;
  }
  return {best_c, best_dual};
}

// Refit on an explicit row subset: the l1 optimum interpolates x on n rows,
// so square solves over candidate supports walk the vertex set.
bool l1_refit_support(const Problem& prob, const std::vector<Eigen::Index>& rows,
                      Eigen::VectorXd& c, double& value) {
  const Eigen::Index n = prob.basis.cols();
  Eigen::MatrixXd bs(n, n);
  Eigen::VectorXd xs(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    bs.row(k) = prob.basis.row(rows[static_cast<std::size_t>(k)]);
    xs[k] = prob.x[rows[static_cast<std::size_t>(k)]];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(bs);
  const Eigen::VectorXd cand = cod.solve(xs);
  if (!cand.allFinite()) return false;
  const double cand_value = prob.eval(cand);
  if (cand_value < value) {
    value = cand_value;
    c = cand;
    return true;
  }
  return false;
}

// Iterated support polish with leave-one-out exchanges: refit on the n
// smallest residual rows, then try swapping each of them for the next-ranked
// row until no exchange improves.
void l1_support_polish(const Problem& prob, Eigen::VectorXd& c, double& value) {
  const Eigen::Index m = prob.x.size();
  const Eigen::Index n = prob.basis.cols();
  if (n == 0 || m <= n) return;
  for (int round = 0; round < 24; ++round) {
    const Eigen::VectorXd r = prob.residual(c);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(r[a]) < std::abs(r[b]);
    });
    std::vector<Eigen::Index> rows(order.begin(), order.begin() + n);
    bool improved = l1_refit_support(prob, rows, c, value);
    if (!improved && m > n) {
      for (Eigen::Index drop = 0; drop < n && !improved; ++drop) {
        std::vector<Eigen::Index> swapped = rows;
        swapped[static_cast<std::size_t>(drop)] = order[static_cast<std::size_t>(n)];
        improved = l1_refit_support(prob, swapped, c, value);
      }
    }
    if (!improved) break;
  }
}

// Equalize the near-active rows; improves the Chebyshev iterate beyond what
// p-continuation reaches.
void linf_polish(const Problem& prob, Eigen::VectorXd& c, double& value) {
  const Eigen::Index m = prob.x.size();
  const Eigen::Index n = prob.basis.cols();
  for (int round = 0; round < 60; ++round) {
    const Eigen::VectorXd r = prob.residual(c);
    const double peak = r.cwiseAbs().maxCoeff();
    if (peak <= 0) return;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(r[a]) > std::abs(r[b]);
    });
    const double window = (round < 20) ? 1e-2 : (round < 40 ? 1e-4 : 1e-6);
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index idx = order[static_cast<std::size_t>(i)];
      if (std::abs(r[idx]) >= (1.0 - window) * peak ||
          static_cast<Eigen::Index>(act.size()) <= n)
        act.push_back(idx);
      if (static_cast<Eigen::Index>(act.size()) >= std::min<Eigen::Index>(m, 2 * n + 16)) break;
    }
    const Eigen::Index s = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd a(s, n + 1);
    Eigen::VectorXd rhs(s);
    for (Eigen::Index k = 0; k < s; ++k) {
      a.block(k, 0, 1, n) = prob.basis.row(act[static_cast<std::size_t>(k)]);
      a(k, n) = (r[act[static_cast<std::size_t>(k)]] >= 0 ? 1.0 : -1.0);
      rhs[k] = prob.x[act[static_cast<std::size_t>(k)]];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    const Eigen::VectorXd sol = cod.solve(rhs);
    if (!sol.allFinite()) return;
    const Eigen::VectorXd cand = sol.head(n);
    const double cand_value = prob.eval(cand);
    if (cand_value < value - 1e-16 * (1.0 + value)) {
      value = cand_value;
      c = cand;
    } else if (round >= 20) {
      return;
    }
  }
}

DistanceResult solve_convex_lp(const Problem& prob) {
  DistanceResult res;
  const double p = prob.metric.p;
  ConvexOutcome out;
  double value;
  bool simplex_done = false;
  if (p == 1.0) {
    // The simplex finisher reaches the exact vertex from any reasonable
    // support, so the smoothing pass only needs to be a cheap warm start.
    Problem warm = prob;
    warm.opts.max_stages = std::min(warm.opts.max_stages, 2);
    warm.opts.max_inner = std::min(warm.opts.max_inner, 6);
    out = irls_lp(warm, p, /*build_cert=*/false);
    value = prob.eval(out.c);
    Eigen::VectorXd sc = out.c;
    double sval = value;
    DualPoint scert{Eigen::VectorXd::Zero(prob.x.size()), 0.0};
    if (l1_simplex(prob, sc, sval, scert)) {
      if (sval < value) {
        value = sval;
        out.c = sc;
      }
      if (scert.value > out.best_dual.value) out.best_dual = std::move(scert);
      simplex_done = value - out.best_dual.value <= prob.gap_tol();
    }
    if (!simplex_done) {
      ConvexOutcome full = irls_lp(prob, p, /*build_cert=*/true);
      double fval = prob.eval(full.c);
      l1_support_polish(prob, full.c, fval);
      if (fval < value) {
        value = fval;
        out.c = full.c;
      }
      if (full.best_dual.value > out.best_dual.value)
        out.best_dual = std::move(full.best_dual);
      Eigen::VectorXd rc = out.c;
      double rval = value;
      DualPoint rcert{Eigen::VectorXd::Zero(prob.x.size()), 0.0};
      if (l1_simplex(prob, rc, rval, rcert)) {
        if (rval < value) {
          value = rval;
          out.c = rc;
        }
        if (rcert.value > out.best_dual.value) out.best_dual = std::move(rcert);
      }
    }
  } else {
    out = irls_lp(prob, p, /*build_cert=*/true);
    value = prob.eval(out.c);
  }
  if (p == 1.0 && !simplex_done) {
    const Eigen::VectorXd r = prob.residual(out.c);
    DualPoint dc = l1_completion_certificate(r, prob);
    if (dc.value > out.best_dual.value) out.best_dual = dc;
    DualPoint dg = gradient_certificate(r, prob);
    if (dg.value > out.best_dual.value) out.best_dual = dg;
    if (value - out.best_dual.value > prob.gap_tol()) {
      DualPoint da = dual_ascent(prob, out.best_dual);
      if (da.value > out.best_dual.value) out.best_dual = std::move(da);
    }
  }
  res.value = value;
  res.minimizer = out.c;
  res.certificate = out.best_dual.z;
  res.gap = std::max(0.0, value - out.best_dual.value);
  res.status = res.gap <= prob.gap_tol() ? DistanceStatus::ConvexConverged
                                         : DistanceStatus::HeuristicUpperBound;
  return res;
}

DistanceResult solve_linf(const Problem& prob) {
  DistanceResult res;
  const Eigen::Index m = prob.x.size();
  // Lawson iteration: multiplicative weight updates w <- w|r| converge to the
  // Chebyshev point. At every weighted-LS iterate B^T (w.*r) = 0, so w.*r is
  // already a dual direction; scoring it gives a certified stop.
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  Eigen::VectorXd c = weighted_ls(prob.basis, prob.x, w, 1e-14);
  double value = prob.eval(c);
  Eigen::VectorXd best_c = c;
  DualPoint best_dual{Eigen::VectorXd::Zero(m), 0.0};
  int stall = 0;
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd r = prob.residual(c);
    const double peak = r.cwiseAbs().maxCoeff();
    if (peak < value - 1e-16 * (1.0 + peak)) {
      value = peak;
      best_c = c;
      stall = 0;
    } else {
      ++stall;
    }
    Eigen::VectorXd z = w.cwiseProduct(r);
    const double z_l1 = z.lpNorm<1>();
    if (z_l1 > 0.0) {
      DualPoint dp = project_and_score(z / z_l1, prob);
      if (dp.value > best_dual.value) best_dual = dp;
    }
    if (value - best_dual.value <= 0.25 * prob.gap_tol()) break;
    if (stall > 60) break;
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < m; ++i) {
      w[i] = std::max(w[i] * std::abs(r[i]), 1e-300);
      total += w[i];
    }
    w /= static_cast<double>(total);
    c = weighted_ls(prob.basis, prob.x, w, 1e-14);
    if (!c.allFinite()) break;
  }
  linf_polish(prob, best_c, value);
  DualPoint dual = linf_activeset_certificate(prob.residual(best_c), prob);
  if (best_dual.value > dual.value) dual = best_dual;
  DualPoint dual_grad = gradient_certificate(prob.residual(best_c), prob);
  if (dual_grad.value > dual.value) dual = dual_grad;
  if (value - dual.value > 0.25 * prob.gap_tol())
    linf_simplex(prob, prob.residual(best_c), best_c, value, dual);
  if (value - dual.value > prob.gap_tol()) {
    DualPoint da = dual_ascent(prob, dual);
    if (da.value > dual.value) dual = std::move(da);
  }
  res.value = value;
  res.minimizer = best_c;
  res.certificate = dual.z;
  res.gap = std::max(0.0, value - dual.value);
  res.status = res.gap <= prob.gap_tol() ? DistanceStatus::ConvexConverged
                                         : DistanceStatus::HeuristicUpperBound;
  return res;
}

void threshold_refits(const Problem& prob, Eigen::VectorXd& best_c, double& best_value) {
  const Eigen::Index m = prob.x.size();
  const Eigen::VectorXd r = prob.residual(best_c);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return std::abs(r[a]) > std::abs(r[b]); });
  std::vector<Eigen::Index> drops;
  if (m <= 96) {
    for (Eigen::Index j = 0; j < m; ++j) drops.push_back(j);
  } else {
    for (Eigen::Index j = 0; j < 32; ++j) drops.push_back(j);
    double g = 32.0;
    while (g < static_cast<double>(m - 1)) {
      drops.push_back(static_cast<Eigen::Index>(g));
      g *= 1.4;
    }
  }
  Eigen::VectorXd keep_w = prob.u;
  Eigen::Index dropped = 0;
  for (const Eigen::Index j : drops) {
    while (dropped < j && dropped < m) {
      keep_w[order[static_cast<std::size_t>(dropped)]] = 0.0;
      ++dropped;
    }
    Eigen::VectorXd masked = keep_w;
    for (Eigen::Index i = 0; i < m; ++i)
      if (masked[i] == 0.0) masked[i] = 1e-12 * prob.u[i];
    const Eigen::VectorXd cand = weighted_ls(prob.basis, prob.x, masked, 1e-13);
    if (!cand.allFinite()) continue;
    const double cand_value = prob.eval(cand);
    if (cand_value < best_value) {
      best_value = cand_value;
      best_c = cand;
    }
  }
}

void breakpoint_scan_1d(const Problem& prob, Eigen::VectorXd& best_c, double& best_value) {
  const Eigen::Index m = prob.x.size();
  const Eigen::VectorXd b = prob.basis.col(0);
  std::vector<double> cands{0.0};
  for (Eigen::Index i = 0; i < m; ++i)
    if (std::abs(b[i]) > 1e-14) cands.push_back(prob.x[i] / b[i]);
  if (m <= 64) {
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j) {
        const double dm = b[i] - b[j];
        const double dp = b[i] + b[j];
        if (std::abs(dm) > 1e-14) cands.push_back((prob.x[i] - prob.x[j]) / dm);
        if (std::abs(dp) > 1e-14) cands.push_back((prob.x[i] + prob.x[j]) / dp);
      }
  }
  Eigen::VectorXd c(1);
  for (const double cand : cands) {
    c[0] = cand;
    const double v = prob.eval(c);
    if (v < best_value) {
      best_value = v;
      best_c = c;
    }
  }
}

DistanceResult solve_heuristic(const Problem& prob) {
  const Eigen::Index m = prob.x.size();
  const Eigen::Index n = prob.basis.cols();
  const double scale = std::max(prob.x.cwiseAbs().maxCoeff(), 1e-300);

  Eigen::VectorXd best_c = Eigen::VectorXd::Zero(n);
  double best_value = prob.eval(best_c);  // c = 0 keeps the norm(x) cap
  auto consider = [&](const Eigen::VectorXd& c) {
    if (!c.allFinite()) return;
    const double v = prob.eval(c);
    if (v < best_value) {
      best_value = v;
      best_c = c;
    }
  };

  const Eigen::VectorXd c_l2 = weighted_ls(prob.basis, prob.x, prob.u);
  consider(c_l2);
  {
    Problem l1prob = prob;
    l1prob.metric = (prob.metric.kind == MetricKind::LpCounting)
                        ? MetricSpec::lp_counting(1.0)
                        : MetricSpec::lp(1.0);
    l1prob.x_norm = norm(prob.x, prob.prob, l1prob.metric);
    ConvexOutcome l1 = irls_lp(l1prob, 1.0, /*build_cert=*/false);
    consider(l1.c);
  }

  const bool sub_one_p = prob.metric.kind == MetricKind::Lp ||
                         prob.metric.kind == MetricKind::LpCounting;
  Rng rng = Rng::stream(prob.opts.seed, 0xBADDECAF);
  for (int start = 0; start < prob.opts.multistart; ++start) {
    Eigen::VectorXd c = c_l2;
    if (start > 0) {
      for (Eigen::Index i = 0; i < n; ++i)
        c[i] += (0.3 * scale) * rng.next_gaussian();
    }
    // Smoothing schedule eps_k = scale * 10^-k, k = 1..6.
    for (int k = 1; k <= 6; ++k) {
      const double eps = scale * std::pow(10.0, -k);
      for (int it = 0; it < 25; ++it) {
        const Eigen::VectorXd r = prob.residual(c);
        Eigen::VectorXd w(m);
        for (Eigen::Index i = 0; i < m; ++i) {
          const double sq = r[i] * r[i] + eps * eps;
          w[i] = sub_one_p ? prob.u[i] * std::pow(sq, (prob.metric.p - 2.0) / 2.0)
                           : prob.u[i] / sq;
        }
        const Eigen::VectorXd next = weighted_ls(prob.basis, prob.x, w, 1e-13);
        if (!next.allFinite()) break;
        const double move = (next - c).norm();
        c = next;
        if (move <= 1e-12 * (1.0 + c.norm())) break;
      }
      consider(c);
    }
    threshold_refits(prob, best_c, best_value);
  }
  if (n == 1) breakpoint_scan_1d(prob, best_c, best_value);

  DistanceResult res;
  res.value = best_value;
  res.minimizer = best_c;
  res.status = DistanceStatus::HeuristicUpperBound;
  res.gap = 0.0;
  return res;
}

// Exact-on-small-path for Hamming: the optimal column matches a maximal
// consistent row subset, so enumerating n-row interpolation subsets finds it.
void hamming_subset_search(const Problem& prob, Eigen::VectorXd& best_c,
                           double& best_value) {
  const Eigen::Index m = prob.x.size();
  const Eigen::Index n = prob.basis.cols();
  if (n == 0 || n > m) return;
  double log_comb = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    log_comb += std::log(static_cast<double>(m - i) / static_cast<double>(i + 1));
  const bool exhaustive = log_comb <= std::log(20000.0);

  auto try_subset = [&](const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd bs(n, n);
    Eigen::VectorXd xs(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      bs.row(k) = prob.basis.row(rows[static_cast<std::size_t>(k)]);
      xs[k] = prob.x[rows[static_cast<std::size_t>(k)]];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(bs);
    const Eigen::VectorXd cand = cod.solve(xs);
    if (!cand.allFinite()) return;
    const double v = prob.eval(cand);
    if (v < best_value) {
      best_value = v;
      best_c = cand;
    }
  };

  if (exhaustive) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
    for (;;) {
      try_subset(rows);
      Eigen::Index k = n - 1;
      while (k >= 0 && rows[static_cast<std::size_t>(k)] == m - n + k) --k;
      if (k < 0) break;
      ++rows[static_cast<std::size_t>(k)];
      for (Eigen::Index j = k + 1; j < n; ++j)
        rows[static_cast<std::size_t>(j)] = rows[static_cast<std::size_t>(j - 1)] + 1;
    }
  } else {
    Rng rng = Rng::stream(prob.opts.seed, 0x5AB5E7);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (int trial = 0; trial < 400; ++trial) {
      for (Eigen::Index k = 0; k < n; ++k)
        rows[static_cast<std::size_t>(k)] =
            static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(m)));
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
      while (static_cast<Eigen::Index>(rows.size()) < n) {
        const Eigen::Index extra =
            static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(m)));
        if (std::find(rows.begin(), rows.end(), extra) == rows.end())
          rows.push_back(extra);
      }
      try_subset(rows);
    }
  }
}

}  // namespace

Subspace Subspace::from_columns(const Eigen::MatrixXd& columns, double tol) {
  Subspace q;
  q.basis_ = orthonormalize(columns, tol);
  return q;
}

Subspace Subspace::from_orthonormal(Eigen::MatrixXd basis) {
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const double err = (gram - Eigen::MatrixXd::Identity(basis.cols(), basis.cols()))
                         .cwiseAbs()
                         .maxCoeff();
  if (basis.cols() > 0 && err > 1e-8)
    throw std::invalid_argument("Subspace: basis is not orthonormal");
  Subspace q;
  q.basis_ = std::move(basis);
  return q;
}

Subspace Subspace::zero(Eigen::Index ambient) {
  Subspace q;
  q.basis_ = Eigen::MatrixXd(ambient, 0);
  return q;
}

Eigen::VectorXd Subspace::project(const Eigen::VectorXd& x) const {
  if (x.size() != ambient_dim())
    throw std::invalid_argument("Subspace::project: dimension mismatch");
  return basis_ * (basis_.transpose() * x);
}

Subspace Subspace::with_extra_column(const Eigen::VectorXd& column) const {
  Eigen::MatrixXd cols(ambient_dim(), dim() + 1);
  cols.leftCols(dim()) = basis_;
  cols.col(dim()) = column;
  return from_columns(cols);
}

Subspace random_subspace(Eigen::Index ambient, Eigen::Index dim, Rng& rng) {
  if (dim < 0 || dim > ambient)
    throw std::invalid_argument("random_subspace: need 0 <= dim <= ambient");
  if (dim == 0) return Subspace::zero(ambient);
  Eigen::MatrixXd g(ambient, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < ambient; ++i) g(i, j) = rng.next_gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(ambient, dim);
  const Eigen::MatrixXd r = q.transpose() * g;
  // Sign fix makes the distribution exactly Haar and the output unique.
  for (Eigen::Index j = 0; j < dim; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return Subspace::from_orthonormal(std::move(q));
}

Subspace random_subspace(Eigen::Index ambient, Eigen::Index dim, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x5EED5ull);
  return random_subspace(ambient, dim, rng);
}

DistanceResult distance(const Eigen::VectorXd& x, const Subspace& q,
                        const MetricSpec& m, const Eigen::VectorXd& weights,
                        const SolverOptions& opts) {
  m.validate();
  if (x.size() != q.ambient_dim())
    throw std::invalid_argument("distance: x does not live in the ambient space");
  const Eigen::Index rows = x.size();
  Problem prob{
      x, q.basis(), probability_weights(weights, rows), Eigen::VectorXd(), m, opts, 0.0};
  prob.u = objective_weights(m, prob.prob, rows);
  prob.x_norm = norm(x, prob.prob, m);

  DistanceResult res;
  if (q.dim() == 0) {
    res.value = prob.x_norm;
    res.minimizer = Eigen::VectorXd(0);
    res.status = DistanceStatus::Exact;
    return res;
  }
  if (q.dim() >= rows) {
    res.minimizer = q.basis().transpose() * x;
    res.value = prob.eval(res.minimizer);
    res.status = DistanceStatus::Exact;
    return res;
  }

  switch (m.kind) {
    case MetricKind::Lp:
    case MetricKind::LpCounting: {
      if (m.p == 2.0) {
        res.minimizer = weighted_ls(q.basis(), x, prob.u);
        res.value = prob.eval(res.minimizer);
        DualPoint dual = gradient_certificate(prob.residual(res.minimizer), prob);
        res.certificate = dual.z;
        res.gap = std::max(0.0, res.value - dual.value);
        res.status = DistanceStatus::Exact;
        return res;
      }
      if (m.p > 1.0) return solve_convex_lp(prob);
      if (m.p == 1.0) return solve_convex_lp(prob);
      return solve_heuristic(prob);  // 0 < p < 1
    }
    case MetricKind::Linf: return solve_linf(prob);
    case MetricKind::KyFanL0: return solve_heuristic(prob);
    case MetricKind::Hamming: {
      DistanceResult r = solve_heuristic(prob);
      hamming_subset_search(prob, r.minimizer, r.value);
      return r;
    }
  }
  throw std::logic_error("distance: unreachable");
}

MeanDistanceResult mean_distance(const FunctionSystem& x, const Subspace& q,
                                 const MetricSpec& m, double power,
                                 const SolverOptions& opts) {
  if (!(power > 0.0)) throw std::invalid_argument("mean_distance: power must be > 0");
  x.validate();
  const Eigen::Index n = x.size();
  std::vector<double> values(static_cast<std::size_t>(n), 0.0);
  std::vector<char> heuristic(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
    const DistanceResult r =
        distance(x.samples.col(static_cast<Eigen::Index>(j)), q, m, x.weights, opts);
    values[j] = r.value;
    heuristic[j] = r.status == DistanceStatus::HeuristicUpperBound ? 1 : 0;
  });
  long double acc = 0.0L;
  bool any_heuristic = false;
  for (std::size_t j = 0; j < values.size(); ++j) {
    acc += std::pow(static_cast<long double>(values[j]),
                    static_cast<long double>(power));
    any_heuristic = any_heuristic || heuristic[j];
  }
  MeanDistanceResult out;
  out.value = static_cast<double>(
      std::pow(acc / static_cast<long double>(n), 1.0L / static_cast<long double>(power)));
  out.upper_bound_only = any_heuristic;
  return out;
}

}  // namespace widthlab
