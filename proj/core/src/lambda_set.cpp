#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "widthlab/constructions.hpp"
#include "widthlab/metric.hpp"
#include "widthlab/rng.hpp"
#include "widthlab/systems.hpp"

namespace widthlab {
namespace {

double lp_norm_on_grid(const Eigen::VectorXcd& values, double p) {
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(
      values.size(), 1.0 / static_cast<double>(values.size()));
  return norm(values, w, MetricSpec::lp(p));
}

}  // namespace

std::complex<double> TrigPolynomial::value(double x) const {
  std::complex<double> acc(0.0, 0.0);
  for (long long l = -half_length; l <= half_length; ++l) {
    const double c = coeff(l);
    if (c == 0.0) continue;
    acc += c * unit_root(static_cast<double>(l) * x);
  }
  return acc;
}

void TrigPolynomial::validate_kernel() const {
  if (coefficients.size() != 2 * static_cast<Eigen::Index>(half_length) + 1)
    throw std::invalid_argument("TrigPolynomial: coefficient count mismatch");
  if (std::abs(coeff(0) - 1.0) > 1e-12)
    throw std::invalid_argument("TrigPolynomial: kernel normalization c_0 != 1");
}

double FejerKernel::value(double x) const {
  constexpr double pi = 3.14159265358979323846;
  const double frac = x - std::floor(x);
  const double s = std::sin(pi * frac);
  if (std::abs(s) < 1e-154) return static_cast<double>(m);
  const double t = std::sin(pi * m * frac) / s;
  return t * t / static_cast<double>(m);
}

FejerKernel fejer_kernel(int m, int points) {
  if (m < 1) throw std::invalid_argument("fejer_kernel: order must be >= 1");
  if (points < 8 * m)
    throw std::invalid_argument("fejer_kernel: need at least 8m sample points");
  FejerKernel k;
  k.m = m;
  k.polynomial.half_length = m - 1;
  k.polynomial.coefficients.resize(2 * (m - 1) + 1);
  for (int l = -(m - 1); l <= m - 1; ++l)
    k.polynomial.coefficients[l + (m - 1)] =
        1.0 - static_cast<double>(std::abs(l)) / static_cast<double>(m);
  k.grid.resize(points);
  k.samples.resize(points);
  for (int j = 0; j < points; ++j) {
    k.grid[j] = static_cast<double>(j) / static_cast<double>(points);
    k.samples[j] = k.value(k.grid[j]);
  }
  return k;
}

bool StepCoverSet::contains(std::int64_t value) const {
  return std::binary_search(lambda.begin(), lambda.end(), value);
}

bool StepCoverSet::verify() const {
  if (static_cast<std::int64_t>(witness.size()) != n) return false;
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int64_t h = witness[static_cast<std::size_t>(k)];
    if (h <= 0 || h >= n) return false;
    if (std::gcd(h, n) != 1) return false;
    for (int l = 1; l <= m; ++l) {
      const std::int64_t fwd = (k + l * h) % n;
      const std::int64_t bwd = ((k - l * h) % n + n) % n;
      if (!contains(fwd) || !contains(bwd)) return false;
    }
  }
  return true;
}

StepCoverSet lambda_set(std::int64_t n, int m, std::uint64_t seed, int max_retries) {
  if (m < 1) throw std::invalid_argument("lambda_set: need m >= 1");
  if (n < 16 * static_cast<std::int64_t>(m) * m * m * m)
    throw std::invalid_argument("lambda_set: need N >= 16 m^4");
  if (max_retries < 1) throw std::invalid_argument("lambda_set: need max_retries >= 1");

  const double log_n = std::log(static_cast<double>(n));
  const double s_budget =
      static_cast<double>(n) / (static_cast<double>(m) * m * m * log_n);
  const double tau = std::min(
      1.0, std::pow(std::log(4.0 * static_cast<double>(n)) / s_budget,
                    1.0 / (2.0 * static_cast<double>(m))));

  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(attempt));
    std::vector<std::int64_t> members;
    std::vector<char> in_set(static_cast<std::size_t>(n), 0);
    for (std::int64_t r = 0; r < n; ++r) {
      if (rng.next_double() < tau) {
        members.push_back(r);
        in_set[static_cast<std::size_t>(r)] = 1;
      }
    }
    if (static_cast<double>(members.size()) >
        3.0 * tau * static_cast<double>(n))
      continue;

    std::vector<std::int64_t> witness(static_cast<std::size_t>(n), 0);
    bool covered = true;
    for (std::int64_t k = 0; k < n && covered; ++k) {
      bool found = false;
      for (std::int64_t h = 1; h < n; ++h) {
        if (std::gcd(h, n) != 1) continue;
        bool ok = true;
        for (int l = 1; l <= m && ok; ++l) {
          const std::int64_t fwd = (k + l * h) % n;
          const std::int64_t bwd = ((k - l * h) % n + n) % n;
          ok = in_set[static_cast<std::size_t>(fwd)] &&
               in_set[static_cast<std::size_t>(bwd)];
        }
        if (ok) {
          witness[static_cast<std::size_t>(k)] = h;
          found = true;
          break;
        }
      }
      covered = found;
    }
    if (!covered) continue;

    StepCoverSet out;
    out.n = n;
    out.m = m;
    out.tau = tau;
    out.s = static_cast<std::int64_t>(std::max(1.0, std::floor(s_budget)));
    out.lambda = std::move(members);
    out.witness = std::move(witness);
    out.retries_used = attempt;
    if (!out.verify())
      throw std::logic_error("lambda_set: post-hoc verification failed");
    return out;
  }
  throw std::runtime_error("lambda_set: no admissible set found within the retry cap");
}

double substitution_residual(const TrigPolynomial& t, std::int64_t h,
                             std::int64_t n, double p) {
  Eigen::VectorXcd direct(n);
  Eigen::VectorXcd substituted(n);
  for (std::int64_t j = 0; j < n; ++j) {
    direct[j] = t.value(static_cast<double>(j) / static_cast<double>(n));
    substituted[j] = t.value(static_cast<double>((h % n) * j % n) /
                             static_cast<double>(n));
  }
  return std::abs(lp_norm_on_grid(substituted, p) - lp_norm_on_grid(direct, p));
}

TrigApprox trig_approx(std::int64_t k, const StepCoverSet& cover,
                       const TrigPolynomial& t, std::int64_t n, double p) {
  if (cover.n != n) throw std::invalid_argument("trig_approx: cover modulus mismatch");
  if (k < 0 || k >= n) throw std::invalid_argument("trig_approx: frequency out of range");
  t.validate_kernel();
  if (t.half_length > cover.m)
    throw std::invalid_argument("trig_approx: polynomial wider than the cover reach");

  TrigApprox out;
  out.k = k;
  out.step = cover.witness[static_cast<std::size_t>(k)];

  Eigen::VectorXcd approx(n);
  Eigen::VectorXcd target(n);
  for (std::int64_t j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(n);
    const double hx = static_cast<double>(out.step * j % n) / static_cast<double>(n);
    target[j] = unit_root(static_cast<double>(k) * x);
    approx[j] = target[j] * t.value(hx);
  }
  out.approximant = approx;
  out.error = lp_norm_on_grid(approx - target, p);
  out.substitution_residual = substitution_residual(t, out.step, n, p);

  out.spectrum.push_back(k);
  for (long long l = -t.half_length; l <= t.half_length; ++l) {
    if (l == 0 || t.coeff(l) == 0.0) continue;
    const std::int64_t freq = ((k + l * out.step) % n + n) % n;
    out.spectrum.push_back(freq);
    if (!cover.contains(freq))
      throw std::logic_error("trig_approx: spectrum escaped the cover set");
  }
  std::sort(out.spectrum.begin(), out.spectrum.end());
  out.spectrum.erase(std::unique(out.spectrum.begin(), out.spectrum.end()),
                     out.spectrum.end());
  return out;
}

}  // namespace widthlab
