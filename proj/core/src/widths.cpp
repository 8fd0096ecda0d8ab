#include "widthlab/widths.hpp"

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

double stddev_of_mean(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  long double acc = 0.0L;
  for (const double t : v) acc += (t - mean) * (t - mean);
  const double var = static_cast<double>(acc) / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

double tail_rms(const Eigen::VectorXd& sigma, Eigen::Index n) {
  long double acc = 0.0L;
  for (Eigen::Index k = n; k < sigma.size(); ++k)
    acc += static_cast<long double>(sigma[k]) * sigma[k];
  return static_cast<double>(std::sqrt(acc));
}

}  // namespace

std::string describe(Certainty c) {
  switch (c) {
    case Certainty::Exact: return "exact";
    case Certainty::UpperBound: return "upper-bound";
    case Certainty::LowerEvidence: return "lower-evidence";
    case Certainty::MonteCarloEstimate: return "monte-carlo";
  }
  return "?";
}

SpectralDecomposition spectral_decomposition(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd;
  if (a.rows() * a.cols() > 512 * 512) {
    Eigen::BDCSVD<Eigen::MatrixXd> big(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SpectralDecomposition out{big.singularValues(), big.matrixU(), big.matrixV()};
    const double err = (out.left_basis * out.singular_values.asDiagonal() *
                            out.right_basis.transpose() -
                        a)
                           .norm();
    if (err > 1e-8 * (1.0 + a.norm()))
      throw std::runtime_error("spectral_decomposition: reconstruction failed");
    return out;
  }
  svd.compute(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SpectralDecomposition out{svd.singularValues(), svd.matrixU(), svd.matrixV()};
  const double err = (out.left_basis * out.singular_values.asDiagonal() *
                          out.right_basis.transpose() -
                      a)
                         .norm();
  if (err > 1e-8 * (1.0 + a.norm()))
    throw std::runtime_error("spectral_decomposition: reconstruction failed");
  return out;
}

WidthResult exact_l2_avg_width(const FunctionSystem& x, Eigen::Index n) {
  x.validate();
  const Eigen::Index count = x.size();
  if (n < 0 || n > count)
    throw std::invalid_argument("exact_l2_avg_width: need 0 <= n <= N");
  const SpectralDecomposition sd = spectral_decomposition(x.weight_adjusted());

  WidthResult res;
  res.n = n;
  res.metric = MetricSpec::lp(2.0);
  res.certainty = Certainty::Exact;
  res.provenance = "tail spectrum of the weight-adjusted sample matrix";
  const Eigen::Index r = std::min<Eigen::Index>(n, sd.singular_values.size());
  res.value = tail_rms(sd.singular_values, r) / std::sqrt(static_cast<double>(count));

  // Top left singular vectors pulled back to the original coordinates span
  // the optimal subspace (they are orthonormal in the weighted geometry).
  Eigen::MatrixXd cols = sd.left_basis.leftCols(r);
  for (Eigen::Index i = 0; i < cols.rows(); ++i)
    cols.row(i) /= std::sqrt(x.weights[i]);
  res.subspace = Subspace::from_columns(cols);
  return res;
}

LowRankApprox eckart_young_truncation(const Eigen::MatrixXd& a, Eigen::Index n) {
  if (n < 0 || n > std::min(a.rows(), a.cols()))
    throw std::invalid_argument("eckart_young_truncation: rank out of range");
  const SpectralDecomposition sd = spectral_decomposition(a);
  const Eigen::Index r = std::min<Eigen::Index>(n, sd.singular_values.size());

  LowRankApprox out;
  out.metric = MetricSpec::lp_counting(2.0);
  out.certainty = Certainty::Exact;
  out.left = sd.left_basis.leftCols(r) *
             sd.singular_values.head(r).asDiagonal();
  out.right = sd.right_basis.leftCols(r).transpose();
  out.error = tail_rms(sd.singular_values, r);
  return out;
}

namespace {

// One half-sweep: approximate every column of `target` from the span of
// `basis_cols`, keeping the incumbent coefficients wherever the solver came
// back worse. Returns the new coefficient matrix (dim x cols).
Eigen::MatrixXd fit_columns(const Eigen::MatrixXd& target, const Subspace& q,
                            const Eigen::MatrixXd& incumbent, const MetricSpec& m,
                            const SolverOptions& opts) {
  const Eigen::Index cols = target.cols();
  Eigen::MatrixXd coef(q.dim(), cols);
  parallel_for(static_cast<std::size_t>(cols), [&](std::size_t j) {
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    SolverOptions local = opts;
    local.seed = opts.seed + 0x9E3779B97F4A7C15ull * (j + 1);
    const DistanceResult r = distance(target.col(jj), q, m, Eigen::VectorXd(), local);
    double new_value = r.value;
    if (incumbent.size() > 0) {
      const Eigen::VectorXd old_res =
          target.col(jj) - q.basis() * incumbent.col(jj);
      const double old_value =
          norm(old_res,
               Eigen::VectorXd::Constant(target.rows(),
                                         1.0 / static_cast<double>(target.rows())),
               m);
      if (old_value < new_value) {
        coef.col(jj) = incumbent.col(jj);
        return;
      }
    }
    coef.col(jj) = r.minimizer;
    (void)new_value;
  });
  return coef;
}

// Column-skeleton descent for tiny Hamming instances: pick n columns of A as
// the generating set, fit everything from their span with exact small-subset
// solves, and greedily swap skeleton columns while the count improves.
void hamming_skeleton_search(const Eigen::MatrixXd& a, Eigen::Index n,
                             const MetricSpec& m, const SolverOptions& opts,
                             Eigen::MatrixXd& best_left, Eigen::MatrixXd& best_right,
                             double& best_error) {
  const Eigen::Index cols = a.cols();
  if (n == 0 || cols == 0) return;
  std::vector<Eigen::Index> skeleton;
  for (Eigen::Index j = 0; j < std::min(n, cols); ++j) skeleton.push_back(j);

  auto evaluate = [&](const std::vector<Eigen::Index>& sk, Eigen::MatrixXd& left,
                      Eigen::MatrixXd& right) {
    Eigen::MatrixXd gen(a.rows(), static_cast<Eigen::Index>(sk.size()));
    for (std::size_t t = 0; t < sk.size(); ++t)
      gen.col(static_cast<Eigen::Index>(t)) = a.col(sk[t]);
    const Subspace q = Subspace::from_columns(gen);
    if (q.dim() == 0) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd coef =
        fit_columns(a, q, Eigen::MatrixXd(), m, opts);
    left = q.basis();
    right = coef;
    return matrix_distance(a, left * right, m);
  };

  Eigen::MatrixXd left, right;
  double err = evaluate(skeleton, left, right);
  if (err < best_error) {
    best_error = err;
    best_left = left;
    best_right = right;
  }
  bool improved = true;
  int guard = 0;
  while (improved && guard++ < 64) {
    improved = false;
    for (std::size_t t = 0; t < skeleton.size() && !improved; ++t) {
      for (Eigen::Index cand = 0; cand < cols; ++cand) {
        if (std::find(skeleton.begin(), skeleton.end(), cand) != skeleton.end())
          continue;
        std::vector<Eigen::Index> trial = skeleton;
        trial[t] = cand;
        Eigen::MatrixXd l2, r2;
        const double e2 = evaluate(trial, l2, r2);
        if (e2 < err - 1e-15) {
          err = e2;
          skeleton = trial;
          if (err < best_error) {
            best_error = err;
            best_left = l2;
            best_right = r2;
          }
          improved = true;
          break;
        }
      }
    }
  }
}

}  // namespace

LowRankApprox altmin_lowrank(const Eigen::MatrixXd& a, Eigen::Index n,
                             const MetricSpec& m, int restarts, int max_sweeps,
                             std::uint64_t seed, const SolverOptions& col_opts) {
  m.validate();
  if (n < 0) throw std::invalid_argument("altmin_lowrank: rank must be >= 0");
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  const Eigen::Index r = std::min<Eigen::Index>(n, std::min(rows, cols));

  LowRankApprox best;
  best.metric = m;
  best.certainty = Certainty::UpperBound;
  best.left = Eigen::MatrixXd::Zero(rows, 0);
  best.right = Eigen::MatrixXd::Zero(0, cols);
  best.error = matrix_distance(a, Eigen::MatrixXd::Zero(rows, cols), m);
  if (r == 0) return best;

  // The non-convex Ky-Fan objective is driven through the Hamming surrogate;
  // the reported error still uses the requested metric.
  MetricSpec inner = m;
  if (m.kind == MetricKind::KyFanL0) {
    inner = MetricSpec::hamming(m.zero_threshold);
  }

  SolverOptions opts = col_opts;
  opts.seed = seed;

  const SpectralDecomposition sd = spectral_decomposition(a);
  const double scale = sd.singular_values.size() > 0 ? sd.singular_values[0] : 1.0;

  int total_sweeps = 0;
  bool cap_hit = false;
  for (int restart = 0; restart < std::max(1, restarts); ++restart) {
    Eigen::MatrixXd left;
    if (restart == 0) {
      left = sd.left_basis.leftCols(std::min<Eigen::Index>(r, sd.left_basis.cols()));
    } else {
      Rng rng = Rng::stream(seed, 0xA17u, static_cast<std::uint64_t>(restart));
      left.resize(rows, r);
      for (Eigen::Index j = 0; j < r; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
          left(i, j) = scale * rng.next_gaussian();
    }
    Subspace col_space = Subspace::from_columns(left);
    if (col_space.dim() == 0) continue;
    Eigen::MatrixXd right = fit_columns(a, col_space, Eigen::MatrixXd(), inner, opts);
    double err = matrix_distance(a, col_space.basis() * right, m);
    Eigen::MatrixXd cur_left = col_space.basis();
    std::vector<double> history{err};

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
      bool moved = false;

      // Row pass on the transpose. The incumbent rows live in the span of
      // `right`, so projecting them onto the orthonormal row basis warm-starts
      // every solve at the current objective.
      const Subspace row_space = Subspace::from_columns(right.transpose());
      if (row_space.dim() == 0) break;
      const Eigen::MatrixXd incumbent_rows =
          row_space.basis().transpose() * (cur_left * right).transpose();
      const Eigen::MatrixXd left_coef =
          fit_columns(a.transpose(), row_space, incumbent_rows, inner, opts);
      const Eigen::MatrixXd cand_left = left_coef.transpose();
      const Eigen::MatrixXd cand_right = row_space.basis().transpose();
      const double cand_err = matrix_distance(a, cand_left * cand_right, m);
      if (cand_err < err) {
        cur_left = cand_left;
        right = cand_right;
        err = cand_err;
        moved = true;
      }

      // Column pass, warm-started the same way.
      const Subspace next_col = Subspace::from_columns(cur_left);
      if (next_col.dim() == 0) break;
      const Eigen::MatrixXd incumbent_cols =
          next_col.basis().transpose() * (cur_left * right);
      const Eigen::MatrixXd new_right =
          fit_columns(a, next_col, incumbent_cols, inner, opts);
      const double new_err = matrix_distance(a, next_col.basis() * new_right, m);
      if (new_err < err) {
        cur_left = next_col.basis();
        right = new_right;
        err = new_err;
        moved = true;
      }
      history.push_back(err);
      if (!moved) {
        ++sweep;
        break;
      }
    }
    total_sweeps += sweep;
    cap_hit = cap_hit || sweep >= max_sweeps;
    if (err < best.error) {
      best.error = err;
      best.left = cur_left;
      best.right = right;
      best.sweep_errors = history;
    }
    if (best.error == 0.0) break;
  }

  if ((m.kind == MetricKind::Hamming || m.kind == MetricKind::KyFanL0) &&
      rows * cols <= 4096) {
    Eigen::MatrixXd sl = best.left, sr = best.right;
    double serr = best.error;
    hamming_skeleton_search(a, r, m, opts, sl, sr, serr);
    if (serr < best.error) {
      best.error = serr;
      best.left = sl;
      best.right = sr;
    }
  }

  best.sweeps = total_sweeps;
  best.hit_iteration_cap = cap_hit;
  return best;
}

namespace {

WidthResult finish_strategy_result(const FunctionSystem& x, Eigen::Index n,
                                   const MetricSpec& m, const Subspace& q,
                                   const char* provenance) {
  const MeanDistanceResult mean = mean_distance(x, q, m, 1.0);
  WidthResult res;
  res.value = mean.value;
  res.certainty = Certainty::UpperBound;
  res.n = n;
  res.metric = m;
  res.provenance = provenance;
  res.subspace = q;
  return res;
}

}  // namespace

WidthResult mc_avg_width_upper(const FunctionSystem& x, Eigen::Index n,
                               const MetricSpec& m, SubspaceStrategy strategy,
                               int trials, std::uint64_t seed) {
  x.validate();
  m.validate();
  if (n < 0 || n > x.points())
    throw std::invalid_argument("mc_avg_width_upper: subspace order out of range");

  switch (strategy) {
    case SubspaceStrategy::RandomSubspace: {
      if (trials <= 0)
        throw std::invalid_argument("mc_avg_width_upper: trials must be positive");
      std::vector<double> values(static_cast<std::size_t>(trials), 0.0);
      parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
        Rng rng = Rng::stream(seed, 0x5D1Bu, t);
        const Subspace q = random_subspace(x.points(), n, rng);
        values[t] = mean_distance(x, q, m, 1.0).value;
      });
      const double mean =
          std::accumulate(values.begin(), values.end(), 0.0) / values.size();
      WidthResult res;
      res.value = mean;
      res.certainty = Certainty::MonteCarloEstimate;
      res.n = n;
      res.metric = m;
      res.stderr_value = stddev_of_mean(values, mean);
      res.provenance = "mean over Haar random subspaces";
      return res;
    }
    case SubspaceStrategy::SVDInit: {
      const WidthResult l2 = exact_l2_avg_width(x, n);
      return finish_strategy_result(x, n, m, *l2.subspace,
                                    "weighted-SVD subspace");
    }
    case SubspaceStrategy::AltMin: {
      const LowRankApprox lr = altmin_lowrank(x.samples, n, m, 3, 30, seed);
      const Subspace q = lr.rank() > 0 ? Subspace::from_columns(lr.left)
                                       : Subspace::zero(x.points());
      WidthResult res = finish_strategy_result(x, n, m, q, "altmin subspace");
      const WidthResult l2 = exact_l2_avg_width(x, n);
      const WidthResult alt =
          finish_strategy_result(x, n, m, *l2.subspace, "weighted-SVD subspace");
      return alt.value < res.value ? alt : res;
    }
  }
  throw std::logic_error("mc_avg_width_upper: unreachable");
}

WidthResult mc_avg_width_upper(const RandomVectorModel& model, Eigen::Index n,
                               const MetricSpec& m, SubspaceStrategy strategy,
                               int trials, std::uint64_t seed) {
  model.validate();
  m.validate();
  if (trials <= 0)
    throw std::invalid_argument("mc_avg_width_upper: trials must be positive");
  if (n < 0 || n > model.dim)
    throw std::invalid_argument("mc_avg_width_upper: subspace order out of range");

  if (strategy == SubspaceStrategy::RandomSubspace) {
    std::vector<double> values(static_cast<std::size_t>(trials), 0.0);
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
      const Eigen::VectorXd xi = sample_one(model, seed, t);
      Rng rng = Rng::stream(seed, 0x5D1Bu, t);
      const Subspace q = random_subspace(model.dim, n, rng);
      values[t] = distance(xi, q, m).value;
    });
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    WidthResult res;
    res.value = mean;
    res.certainty = Certainty::MonteCarloEstimate;
    res.n = n;
    res.metric = m;
    res.stderr_value = stddev_of_mean(values, mean);
    res.provenance = "fresh draw and fresh Haar subspace per trial";
    return res;
  }

  // Strategy subspace trained on one sample, scored on a fresh one.
  const int train = std::max(16, std::min(trials, 128));
  const Eigen::MatrixXd draws = sample(model, train, seed ^ 0x7E57ABA5ull);
  Subspace q = Subspace::zero(model.dim);
  if (n > 0) {
    if (strategy == SubspaceStrategy::SVDInit) {
      const SpectralDecomposition sd = spectral_decomposition(draws.transpose());
      q = Subspace::from_columns(
          sd.left_basis.leftCols(std::min<Eigen::Index>(n, sd.left_basis.cols())));
    } else {
      const LowRankApprox lr = altmin_lowrank(draws.transpose(), n, m, 2, 12, seed);
      if (lr.rank() > 0) q = Subspace::from_columns(lr.left);
    }
  }
  std::vector<double> values(static_cast<std::size_t>(trials), 0.0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    const Eigen::VectorXd xi = sample_one(model, seed, t);
    values[t] = distance(xi, q, m).value;
  });
  WidthResult res;
  res.value = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  res.certainty = Certainty::UpperBound;
  res.n = n;
  res.metric = m;
  res.provenance = strategy == SubspaceStrategy::SVDInit
                       ? "sample-SVD subspace, fresh evaluation draws"
                       : "altmin subspace, fresh evaluation draws";
  res.subspace = q;
  return res;
}

double gluskin_certificate(const Eigen::VectorXd& x, const Subspace& q, double p) {
  if (!(p > 1.0 && p <= 2.0))
    throw std::invalid_argument("gluskin_certificate: need 1 < p <= 2");
  if (x.size() != q.ambient_dim())
    throw std::invalid_argument("gluskin_certificate: dimension mismatch");
  const Eigen::VectorXd px = x - q.project(x);
  const double p_conj = p / (p - 1.0);
  double denom = 0.0;
  if (p_conj > 1e12) {
    denom = px.cwiseAbs().maxCoeff();
  } else {
    long double acc = 0.0L;
    const double peak = px.cwiseAbs().maxCoeff();
    if (peak == 0.0) return 0.0;
    for (Eigen::Index i = 0; i < px.size(); ++i)
      acc += std::pow(static_cast<long double>(std::abs(px[i]) / peak),
                      static_cast<long double>(p_conj));
    denom = peak * static_cast<double>(
                       std::pow(acc, 1.0L / static_cast<long double>(p_conj)));
  }
  if (denom == 0.0) return 0.0;
  return x.dot(px) / denom;
}

double sp_constant(const FunctionSystem& x, double p_prime, int restarts,
                   std::uint64_t seed) {
  x.validate();
  if (p_prime < 2.0)
    throw std::invalid_argument("sp_constant: conjugate exponent must be >= 2");
  const Eigen::Index count = x.size();
  const MetricSpec m = MetricSpec::lp(p_prime);

  auto value_at = [&](const Eigen::VectorXd& a) {
    return norm(Eigen::VectorXd(x.samples * a), x.weights, m);
  };

  // Weighted p'-norm gradient in the coefficient space.
  auto gradient_at = [&](const Eigen::VectorXd& a, double f) {
    const Eigen::VectorXd r = x.samples * a;
    Eigen::VectorXd g(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const double t = std::abs(r[i]);
      g[i] = t == 0.0 ? 0.0
                      : x.weights[i] * (r[i] > 0 ? 1.0 : -1.0) *
                            std::pow(t, p_prime - 1.0);
    }
    const double denom = std::pow(std::max(f, 1e-300), p_prime - 1.0);
    return Eigen::VectorXd(x.samples.transpose() * g / denom);
  };

  double best = 0.0;
  // The weighted top singular pair solves p' = 2 exactly and seeds the rest.
  const SpectralDecomposition sd = spectral_decomposition(x.weight_adjusted());
  Eigen::VectorXd top = sd.right_basis.col(0);

  for (int start = 0; start < std::max(1, restarts); ++start) {
    Eigen::VectorXd a(count);
    if (start == 0) {
      a = top;
    } else {
      Rng rng = Rng::stream(seed, 0x59C0u, static_cast<std::uint64_t>(start));
      for (Eigen::Index i = 0; i < count; ++i) a[i] = rng.next_gaussian();
    }
    a.normalize();
    double f = value_at(a);
    double step = 0.5;
    for (int it = 0; it < 200 && step > 1e-12; ++it) {
      const Eigen::VectorXd g = gradient_at(a, f);
      Eigen::VectorXd cand = a + step * g;
      const double nrm = cand.norm();
      if (nrm == 0.0) break;
      cand /= nrm;
      const double fc = value_at(cand);
      if (fc > f) {
        a = cand;
        f = fc;
        step *= 1.25;
      } else {
        step *= 0.5;
      }
    }
    best = std::max(best, f);
  }
  return best;
}

BinomTail binom_tail(int k, int d) {
  if (k < 0 || d < 0 || d > k)
    throw std::invalid_argument("binom_tail: need 0 <= d <= k");
  long double sum = 0.0L;
  long double c = 1.0L;  // C(k, 0)
  for (int i = 0; i <= d; ++i) {
    sum += c;
    c = c * static_cast<long double>(k - i) / static_cast<long double>(i + 1);
  }
  const long double e = 2.718281828459045235360287471352662498L;
  const long double bound =
      d == 0 ? 1.0L
             : std::pow(e * static_cast<long double>(k) / static_cast<long double>(d),
                        static_cast<long double>(d));
  return {sum, bound};
}

std::pair<double, double> transpose_identity_check(const FunctionSystem& x,
                                                   const Subspace& q, double p) {
  x.validate();
  if (!(p >= 1.0))
    throw std::invalid_argument("transpose_identity_check: need p >= 1");
  if (q.ambient_dim() != x.points())
    throw std::invalid_argument("transpose_identity_check: ambient mismatch");

  // eta_k = weighted-L2 projection of column k; the identity holds for any
  // response, projection is the paper's choice.
  const Eigen::Index count = x.size();
  Eigen::MatrixXd eta(x.points(), count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const DistanceResult r = distance(x.samples.col(k), q, MetricSpec::lp(2.0),
                                      x.weights);
    eta.col(k) = q.basis() * r.minimizer;
  }
  const Eigen::MatrixXd diff = x.samples - eta;

  long double lhs = 0.0L;  // sum over functions of the L_p(mu)^p norms
  for (Eigen::Index k = 0; k < count; ++k)
    for (Eigen::Index i = 0; i < diff.rows(); ++i)
      lhs += x.weights[i] *
             std::pow(static_cast<long double>(std::abs(diff(i, k))),
                      static_cast<long double>(p));

  long double rhs = 0.0L;  // expectation over points of the ell_p^N power
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    long double row = 0.0L;
    for (Eigen::Index k = 0; k < count; ++k)
      row += std::pow(static_cast<long double>(std::abs(diff(i, k))),
                      static_cast<long double>(p));
    rhs += x.weights[i] * row;
  }
  return {static_cast<double>(lhs), static_cast<double>(rhs)};
}

}  // namespace widthlab
