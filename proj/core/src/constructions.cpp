#include "widthlab/constructions.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "widthlab/rng.hpp"
#include "widthlab/subspace.hpp"
#include "widthlab/widths.hpp"

namespace widthlab {
namespace {

constexpr long double kPiL = 3.141592653589793238462643383279502884L;

long long popcount_ll(std::uint64_t v) {
  return static_cast<long long>(std::popcount(v));
}

// Window [center - radius, center + radius] clamped to [lo_cap, hi_cap],
// returned as its integer endpoints.
std::pair<long long, long long> clamped_window(double center, double radius,
                                               long long lo_cap, long long hi_cap) {
  const long long lo =
      std::max(lo_cap, static_cast<long long>(std::ceil(center - radius - 1e-12)));
  const long long hi =
      std::min(hi_cap, static_cast<long long>(std::floor(center + radius + 1e-12)));
  return {lo, hi};
}

}  // namespace

SignInterpolant sign_interpolant(double center, double radius) {
  if (!(radius >= 0.0))
    throw std::invalid_argument("sign_interpolant: radius must be >= 0");
  const long long lo = static_cast<long long>(std::ceil(center - radius - 1e-12));
  const long long hi = static_cast<long long>(std::floor(center + radius + 1e-12));
  if (lo > hi) throw std::invalid_argument("sign_interpolant: empty integer window");
  SignInterpolant out;
  out.node_lo = lo;
  out.node_hi = hi;
  out.poly = RationalPolynomial::interpolate_signs(lo, hi);
  return out;
}

WalshLowRank::WalshLowRank(int k, double lambda) : k_(k) {
  if (k < 1 || k > 62) throw std::invalid_argument("walsh_lowrank: need 1 <= k <= 62");
  if (!(lambda > 0)) throw std::invalid_argument("walsh_lowrank: lambda must be > 0");
  size_ = std::uint64_t(1) << k;

  report_.k = k;
  report_.lambda = lambda;
  report_.hypothesis_satisfied =
      lambda >= 1.0 && lambda <= std::sqrt(static_cast<double>(k)) / 4.0;
  report_.predicted_error = 4.0 * std::exp(-2.0 * lambda * lambda);
  report_.predicted_row_error = 2.0 * std::exp(-2.0 * lambda * lambda);

  const double root_k = std::sqrt(static_cast<double>(k));
  const auto [lo, hi] = clamped_window(k / 4.0, 2.0 * lambda * root_k, 0, k);
  if (lo > hi)
    throw std::invalid_argument("walsh_lowrank: interpolation window is empty");
  report_.window_lo = lo;
  report_.window_hi = hi;
  q_ = SignInterpolant{RationalPolynomial::interpolate_signs(lo, hi), lo, hi};
  report_.degree = q_.poly.degree();

  q_exact_.resize(static_cast<std::size_t>(k) + 1);
  q_value_.resize(static_cast<std::size_t>(k) + 1);
  for (long long t = 0; t <= k; ++t) {
    const Rational v = q_.poly.at_integer(t);
    const Rational sign = (t % 2 == 0) ? Rational(1) : Rational(-1);
    q_exact_[static_cast<std::size_t>(t)] = (v == sign) ? 1 : 0;
    q_value_[static_cast<std::size_t>(t)] = to_double(v);
  }

  split_cache_.assign(size_ <= (std::uint64_t(1) << 26) ? size_ : 0, {0, 0});
  split_known_.assign(split_cache_.size(), 0);

  const BinomTail bt = binom_tail(k, report_.degree);
  report_.rank_bound_core = bt.tail_sum;
  report_.rank_bound_total = bt.tail_sum + bt.tail_sum * bt.tail_sum;
}

bool WalshLowRank::in_core(std::uint64_t x) const {
  const double c = static_cast<double>(popcount_ll(x)) - k_ / 2.0;
  return std::abs(c) <= std::sqrt(static_cast<double>(k_)) + 1e-12;
}

std::pair<std::uint64_t, std::uint64_t> WalshLowRank::split(std::uint64_t x) const {
  if (x >= size_) throw std::out_of_range("walsh_lowrank: row index out of range");
  const bool cacheable = x < split_cache_.size();
  if (cacheable && split_known_[x]) return split_cache_[x];

  std::pair<std::uint64_t, std::uint64_t> result{0, 0};
  bool found = false;
  // Deterministic per (k, x): rejection draws first, then the guaranteed scan.
  Rng rng = Rng::stream(0x5A11F00Dull, static_cast<std::uint64_t>(k_), x);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const std::uint64_t x1 = rng.next_below(size_);
    if (in_core(x1) && in_core(x ^ x1)) {
      result = {x1, x ^ x1};
      found = true;
      break;
    }
  }
  if (!found) {
    for (std::uint64_t x1 = 0; x1 < size_; ++x1) {
      if (in_core(x1) && in_core(x ^ x1)) {
        result = {x1, x ^ x1};
        found = true;
        break;
      }
    }
  }
  if (!found) throw std::runtime_error("walsh_lowrank: no balanced split exists");
  if (cacheable) {
    split_cache_[x] = result;
    split_known_[x] = 1;
  }
  return result;
}

double WalshLowRank::entry(std::uint64_t x, std::uint64_t y) const {
  if (x >= size_ || y >= size_)
    throw std::out_of_range("walsh_lowrank: index out of range");
  if (in_core(x)) return q_value_[static_cast<std::size_t>(popcount_ll(x & y))];
  const auto [x1, x2] = split(x);
  return q_value_[static_cast<std::size_t>(popcount_ll(x1 & y))] *
         q_value_[static_cast<std::size_t>(popcount_ll(x2 & y))];
}

bool WalshLowRank::entry_exact(std::uint64_t x, std::uint64_t y) const {
  if (x >= size_ || y >= size_)
    throw std::out_of_range("walsh_lowrank: index out of range");
  if (in_core(x)) return q_exact_[static_cast<std::size_t>(popcount_ll(x & y))] != 0;
  const auto [x1, x2] = split(x);
  const long long t1 = popcount_ll(x1 & y);
  const long long t2 = popcount_ll(x2 & y);
  if (q_exact_[static_cast<std::size_t>(t1)] && q_exact_[static_cast<std::size_t>(t2)])
    return true;
  // Exact-arithmetic fallback: wrong factors can still multiply to the truth.
  const Rational prod = q_.poly.at_integer(t1) * q_.poly.at_integer(t2);
  const Rational sign = ((t1 + t2) % 2 == 0) ? Rational(1) : Rational(-1);
  return prod == sign;
}

double WalshLowRank::row_error(std::uint64_t x) const {
  std::uint64_t bad = 0;
  for (std::uint64_t y = 0; y < size_; ++y)
    if (!entry_exact(x, y)) ++bad;
  return static_cast<double>(bad) / static_cast<double>(size_);
}

void WalshLowRank::measure_exhaustive() {
  if (2 * k_ > 26)
    throw std::invalid_argument("walsh_lowrank: exhaustive mode needs 2^(2k) <= 2^26");
  long double total = 0.0L;
  double worst_core = 0.0;
  for (std::uint64_t x = 0; x < size_; ++x) {
    const double re = row_error(x);
    total += re;
    if (in_core(x)) worst_core = std::max(worst_core, re);
  }
  report_.measured_error = static_cast<double>(total / static_cast<long double>(size_));
  report_.measured_core_row_error = worst_core;
  report_.entries_checked = static_cast<std::int64_t>(size_ * size_);
  report_.stderr_value.reset();
  measure_sampled_rank();
}

void WalshLowRank::measure_sampled(std::int64_t count, std::uint64_t seed) {
  if (count <= 0) throw std::invalid_argument("walsh_lowrank: sample count must be > 0");
  Rng rng = Rng::stream(seed, 0x3A1E5ull);
  std::int64_t bad = 0;
  for (std::int64_t i = 0; i < count; ++i) {
    const std::uint64_t x = rng.next_below(size_);
    const std::uint64_t y = rng.next_below(size_);
    if (!entry_exact(x, y)) ++bad;
  }
  const double p = static_cast<double>(bad) / static_cast<double>(count);
  report_.measured_error = p;
  report_.stderr_value = std::sqrt(p * (1.0 - p) / static_cast<double>(count));
  report_.entries_checked = count;

  // Core-row audit on a small deterministic batch of core rows.
  double worst_core = 0.0;
  int audited = 0;
  if (k_ <= 20) {
    for (std::uint64_t x = 0; x < size_ && audited < 8; ++x) {
      if (!in_core(x)) continue;
      ++audited;
      std::uint64_t bad_row = 0;
      const std::uint64_t cols = std::min<std::uint64_t>(size_, 1 << 16);
      for (std::uint64_t j = 0; j < cols; ++j) {
        const std::uint64_t y = size_ <= cols ? j : rng.next_below(size_);
        if (!entry_exact(x, y)) ++bad_row;
      }
      worst_core =
          std::max(worst_core, static_cast<double>(bad_row) / static_cast<double>(cols));
    }
  }
  report_.measured_core_row_error = worst_core;
  measure_sampled_rank();
}

void WalshLowRank::measure_sampled_rank() {
  const Eigen::Index s =
      static_cast<Eigen::Index>(std::min<std::uint64_t>(size_, 256));
  Eigen::MatrixXd sub(s, s);
  Rng rng = Rng::stream(0x4A11C7ull, static_cast<std::uint64_t>(k_));
  for (Eigen::Index i = 0; i < s; ++i) {
    const std::uint64_t x =
        size_ <= 256 ? static_cast<std::uint64_t>(i) : rng.next_below(size_);
    for (Eigen::Index j = 0; j < s; ++j) {
      const std::uint64_t y =
          size_ <= 256 ? static_cast<std::uint64_t>(j) : rng.next_below(size_);
      sub(i, j) = entry(x, y);
    }
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sub);
  const Eigen::VectorXd sv = svd.singularValues();
  Eigen::Index rank = 0;
  if (sv.size() > 0 && sv[0] > 0)
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > 1e-8 * sv[0]) ++rank;
  report_.sampled_numerical_rank = rank;
  report_.sampled_submatrix_size = s;
}

WalshLowRank walsh_lowrank(int k, double lambda) {
  WalshLowRank w(k, lambda);
  w.measure_exhaustive();
  return w;
}

WalshLowRank walsh_lowrank(int k, double lambda, std::int64_t sample_count,
                           std::uint64_t seed) {
  WalshLowRank w(k, lambda);
  w.measure_sampled(sample_count, seed);
  return w;
}

MonomialRankReport monomial_rank_matrix(int k,
                                        const std::vector<double>& monomial_coeffs) {
  if (k < 1 || 2 * k > 26)
    throw std::invalid_argument("monomial_rank_matrix: need 1 <= k and 2^(2k) <= 2^26");
  if (monomial_coeffs.empty())
    throw std::invalid_argument("monomial_rank_matrix: empty polynomial");
  const Eigen::Index n = Eigen::Index(1) << k;
  int degree = 0;
  for (std::size_t i = 0; i < monomial_coeffs.size(); ++i)
    if (monomial_coeffs[i] != 0.0) degree = static_cast<int>(i);

  std::vector<double> value_at(static_cast<std::size_t>(k) + 1, 0.0);
  for (long long t = 0; t <= k; ++t) {
    double acc = 0.0;
    for (std::size_t i = monomial_coeffs.size(); i-- > 0;)
      acc = acc * static_cast<double>(t) + monomial_coeffs[i];
    value_at[static_cast<std::size_t>(t)] = acc;
  }

  Eigen::MatrixXd mat(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      mat(x, y) = value_at[static_cast<std::size_t>(
          popcount_ll(static_cast<std::uint64_t>(x) & static_cast<std::uint64_t>(y)))];

  Eigen::BDCSVD<Eigen::MatrixXd> svd(mat);
  const Eigen::VectorXd sv = svd.singularValues();
  MonomialRankReport rep;
  rep.k = k;
  rep.degree = degree;
  rep.binom_bound = binom_tail(k, degree).tail_sum;
  double ratio = 0.0;
  Eigen::Index rank = 0;
  if (sv.size() > 0 && sv[0] > 0) {
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv[i] > 1e-8 * sv[0]) {
        ++rank;
      } else if (ratio == 0.0) {
        ratio = sv[i] / sv[0];
      }
    }
  }
  rep.numerical_rank = rank;
  rep.sigma_ratio = ratio;
  return rep;
}

// ---------------------------------------------------------------------------

DftLowRank::DftLowRank(int k, double lambda, int s0) : k_(k), s0_(s0) {
  if (k < 1 || k > 30) throw std::invalid_argument("dft_lowrank: need 1 <= k <= 30");
  if (s0 < 1 || s0 > k) throw std::invalid_argument("dft_lowrank: need 1 <= s0 <= k");
  if (!(lambda > 0)) throw std::invalid_argument("dft_lowrank: lambda must be > 0");
  size_ = std::uint64_t(1) << k;

  report_.k = k;
  report_.lambda = lambda;
  report_.s0 = s0;
  report_.hypothesis_satisfied =
      lambda >= 1.0 && lambda <= std::pow(static_cast<double>(k), 0.25);
  report_.uniform_tail_bound =
      2.0 * static_cast<double>(kPiL) * k * std::pow(2.0, -s0);

  const double root_k = std::sqrt(static_cast<double>(k));
  const auto [lo, hi] = clamped_window(k / 4.0, 2.0 * lambda * root_k, 0, k);
  if (lo > hi) throw std::invalid_argument("dft_lowrank: interpolation window is empty");
  window_lo_ = lo;
  window_hi_ = hi;

  report_.rank_bound = 1.0L;
  for (int s = 1; s <= s0; ++s) {
    std::vector<long long> nodes;
    std::vector<std::complex<long double>> values;
    const long double denom = static_cast<long double>(std::uint64_t(1) << s);
    for (long long t = lo; t <= hi; ++t) {
      nodes.push_back(t);
      const long double angle = 2.0L * kPiL * static_cast<long double>(t) / denom;
      values.emplace_back(std::cos(angle), std::sin(angle));
    }
    factors_.push_back(ComplexPolynomial::interpolate(std::move(nodes), std::move(values)));
    report_.factor_degrees.push_back(factors_.back().degree());
    report_.rank_bound *= binom_tail(k, factors_.back().degree()).tail_sum;
  }
}

std::vector<long long> DftLowRank::carry_sums(std::uint64_t x, std::uint64_t y) const {
  std::vector<long long> sums(static_cast<std::size_t>(s0_), 0);
  for (int s = 1; s <= s0_; ++s) {
    const int weight = k_ - s;  // bit pairs with i + j = k - s
    long long t = 0;
    for (int i = 0; i <= weight && i < k_; ++i) {
      const int j = weight - i;
      if (j < 0 || j >= k_) continue;
      t += static_cast<long long>((x >> i) & 1u) *
           static_cast<long long>((y >> j) & 1u);
    }
    sums[static_cast<std::size_t>(s - 1)] = t;
  }
  return sums;
}

std::complex<double> DftLowRank::truncated_character(std::uint64_t x,
                                                     std::uint64_t y) const {
  const std::vector<long long> sums = carry_sums(x, y);
  // Exact integer phase numerator mod 2^k, sine only at the very end.
  std::uint64_t num = 0;
  const std::uint64_t mask = size_ - 1;
  for (int s = 1; s <= s0_; ++s) {
    const std::uint64_t term =
        (static_cast<std::uint64_t>(sums[static_cast<std::size_t>(s - 1)])
         << (k_ - s)) &
        mask;
    num = (num + term) & mask;
  }
  const long double angle =
      2.0L * kPiL * static_cast<long double>(num) / static_cast<long double>(size_);
  return {static_cast<double>(std::cos(angle)), static_cast<double>(std::sin(angle))};
}

std::complex<double> DftLowRank::exact_character(std::uint64_t x,
                                                 std::uint64_t y) const {
  const std::uint64_t mask = size_ - 1;
  const std::uint64_t num =
      static_cast<std::uint64_t>((static_cast<unsigned __int128>(x) * y) & mask);
  const long double angle =
      2.0L * kPiL * static_cast<long double>(num) / static_cast<long double>(size_);
  return {static_cast<double>(std::cos(angle)), static_cast<double>(std::sin(angle))};
}

std::complex<double> DftLowRank::entry(std::uint64_t x, std::uint64_t y) const {
  const std::vector<long long> sums = carry_sums(x, y);
  std::complex<long double> acc(1.0L, 0.0L);
  for (std::size_t s = 0; s < factors_.size(); ++s)
    acc *= factors_[s].at_long(static_cast<long double>(sums[s]));
  return {static_cast<double>(acc.real()), static_cast<double>(acc.imag())};
}

bool DftLowRank::all_factors_in_window(std::uint64_t x, std::uint64_t y) const {
  const std::vector<long long> sums = carry_sums(x, y);
  for (const long long t : sums)
    if (t < window_lo_ || t > window_hi_) return false;
  return true;
}

void DftLowRank::verify_tail_bound_exhaustive() {
  if (2 * k_ > 26)
    throw std::invalid_argument("dft_lowrank: exhaustive mode needs 2^(2k) <= 2^26");
  const std::uint64_t mask = size_ - 1;
  double worst = 0.0;
  for (std::uint64_t x = 0; x < size_; ++x) {
    for (std::uint64_t y = 0; y < size_; ++y) {
      const std::uint64_t a =
          static_cast<std::uint64_t>((static_cast<unsigned __int128>(x) * y) & mask);
      std::uint64_t b = 0;
      const std::vector<long long> sums = carry_sums(x, y);
      for (int s = 1; s <= s0_; ++s)
        b = (b + ((static_cast<std::uint64_t>(sums[static_cast<std::size_t>(s - 1)])
                   << (k_ - s)) &
                  mask)) &
            mask;
      const std::uint64_t d = (a - b) & mask;
      const long double frac =
          static_cast<long double>(d) / static_cast<long double>(size_);
      const double err = static_cast<double>(
          2.0L * std::abs(std::sin(kPiL * frac)));
      worst = std::max(worst, err);
    }
  }
  report_.max_tail_error_checked = worst;
  report_.tail_entries_checked = static_cast<std::int64_t>(size_ * size_);
  report_.tail_bound_violated = worst > report_.uniform_tail_bound;
}

void DftLowRank::measure_sampled(std::int64_t count, std::uint64_t seed) {
  if (count <= 0) throw std::invalid_argument("dft_lowrank: sample count must be > 0");
  Rng rng = Rng::stream(seed, 0xD377ull);
  Eigen::VectorXd diffs(static_cast<Eigen::Index>(count));
  std::int64_t off_window = 0;
  for (std::int64_t i = 0; i < count; ++i) {
    const std::uint64_t x = rng.next_below(size_);
    const std::uint64_t y = rng.next_below(size_);
    if (!all_factors_in_window(x, y)) ++off_window;
    diffs[static_cast<Eigen::Index>(i)] =
        std::abs(entry(x, y) - exact_character(x, y));
  }
  const double p = static_cast<double>(off_window) / static_cast<double>(count);
  report_.sampled_offwindow_fraction = p;
  report_.stderr_value = std::sqrt(p * (1.0 - p) / static_cast<double>(count));
  report_.entries_checked = count;
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(
      diffs.size(), 1.0 / static_cast<double>(diffs.size()));
  report_.sampled_l0_error = norm(diffs, w, MetricSpec::ky_fan_l0(1e-9));
}

DftLowRank dft_lowrank(int k, double lambda, int s0) {
  DftLowRank d(k, lambda, s0);
  if (2 * k <= 26) {
    d.verify_tail_bound_exhaustive();
  }
  d.measure_sampled(std::min<std::int64_t>(200000, static_cast<std::int64_t>(1)
                                                       << (2 * std::min(k, 20))),
                    0x5EEDD11ull);
  return d;
}

// ---------------------------------------------------------------------------

SparseSimResult sparse_nonrigidity_sim(double p, Eigen::Index dim,
                                       Eigen::Index subspace_dim, double eps,
                                       int trials, std::uint64_t seed) {
  if (!(p > 2.0)) throw std::invalid_argument("sparse_nonrigidity_sim: need p > 2");
  if (subspace_dim < 0 || subspace_dim >= dim)
    throw std::invalid_argument("sparse_nonrigidity_sim: need 0 <= n < N");
  if (eps < 0.0 || eps > 1.0)
    throw std::invalid_argument("sparse_nonrigidity_sim: eps must be in [0, 1]");
  if (trials <= 0)
    throw std::invalid_argument("sparse_nonrigidity_sim: trials must be positive");

  SparseSimResult out;
  out.trials = trials;
  out.eps = eps;
  out.magnitude = eps > 0.0 ? std::pow(eps, -1.0 / p) : 0.0;
  if (eps == 0.0) {
    out.trial_values.assign(static_cast<std::size_t>(trials), 0.0);
    out.all_zero_events = trials;
    return out;
  }

  Rng qrng = Rng::stream(seed, 0x5B5ull);
  const Subspace q = random_subspace(dim, subspace_dim, qrng);

  // Per-spike cost (1/N) sum_j |e_i - y_i|_j^p with y_i the best ell_inf
  // approximation of e_i; solved lazily, one coordinate at a time.
  std::vector<double> spike_cost(static_cast<std::size_t>(dim), -1.0);
  SolverOptions opts;
  opts.gap_tol_rel = 1e-5;
  opts.seed = seed ^ 0xC0FFEEull;
  auto spike_cost_at = [&](Eigen::Index i) {
    if (spike_cost[static_cast<std::size_t>(i)] >= 0.0)
      return spike_cost[static_cast<std::size_t>(i)];
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[i] = 1.0;
    const DistanceResult r = distance(e, q, MetricSpec::linf(), Eigen::VectorXd(), opts);
    const Eigen::VectorXd res = e - q.basis() * r.minimizer;
    long double acc = 0.0L;
    for (Eigen::Index j = 0; j < dim; ++j)
      acc += std::pow(static_cast<long double>(std::abs(res[j])),
                      static_cast<long double>(p));
    const double cost = static_cast<double>(acc / static_cast<long double>(dim));
    spike_cost[static_cast<std::size_t>(i)] = cost;
    return cost;
  };

  const double kp = 1.0 / eps;  // K^p
  std::vector<double> values(static_cast<std::size_t>(trials), 0.0);
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::stream(seed, 0x7121A1ull, static_cast<std::uint64_t>(t));
    Eigen::Index nonzero = 0;
    Eigen::Index spike = -1;
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (rng.next_double() < eps) {
        ++nonzero;
        if (nonzero == 1) spike = i;
      }
    }
    if (nonzero == 0) {
      ++out.all_zero_events;
      values[static_cast<std::size_t>(t)] = 0.0;
    } else if (nonzero == 1) {
      ++out.single_events;
      values[static_cast<std::size_t>(t)] = kp * spike_cost_at(spike);
    } else {
      ++out.multi_events;
      values[static_cast<std::size_t>(t)] =
          kp * static_cast<double>(nonzero) / static_cast<double>(dim);
    }
  }
  long double mean = 0.0L;
  for (const double v : values) mean += v;
  mean /= trials;
  out.estimate = static_cast<double>(mean);
  long double var = 0.0L;
  for (const double v : values) var += (v - out.estimate) * (v - out.estimate);
  if (trials > 1)
    out.stderr_value = std::sqrt(static_cast<double>(var) / (trials - 1.0) /
                                 static_cast<double>(trials));
  out.trial_values = std::move(values);
  return out;
}

}  // namespace widthlab
