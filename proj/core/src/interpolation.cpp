#include "widthlab/interpolation.hpp"

#include <stdexcept>
#include <utility>

namespace widthlab {

double to_double(const Rational& r) { return static_cast<double>(r); }

RationalPolynomial RationalPolynomial::interpolate(std::vector<long long> nodes,
                                                   std::vector<Rational> values) {
  if (nodes.empty() || nodes.size() != values.size())
    throw std::invalid_argument("interpolate: need matching nonempty nodes/values");
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      if (nodes[i] == nodes[j])
        throw std::invalid_argument("interpolate: repeated node");

  // Divided-difference table, in place: after step j, values[i] holds
  // f[x_{i-j},...,x_i].
  const std::size_t n = nodes.size();
  std::vector<Rational> table = std::move(values);
  std::vector<Rational> newton;
  newton.reserve(n);
  newton.push_back(table[0]);
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t i = n - 1; i >= j; --i) {
      table[i] = (table[i] - table[i - 1]) /
                 Rational(nodes[i] - nodes[i - j]);
      if (i == j) break;
    }
    newton.push_back(table[j]);
  }
  RationalPolynomial p;
  p.nodes_ = std::move(nodes);
  p.newton_ = std::move(newton);
  return p;
}

RationalPolynomial RationalPolynomial::interpolate_signs(long long lo, long long hi) {
  if (lo > hi) throw std::invalid_argument("interpolate_signs: empty window");
  std::vector<long long> nodes;
  std::vector<Rational> values;
  for (long long t = lo; t <= hi; ++t) {
    nodes.push_back(t);
    values.push_back(((t % 2 + 2) % 2 == 0) ? Rational(1) : Rational(-1));
  }
  return interpolate(std::move(nodes), std::move(values));
}

Rational RationalPolynomial::at_integer(long long t) const {
  if (empty()) return Rational(0);
  Rational acc = newton_.back();
  for (std::size_t j = newton_.size() - 1; j-- > 0;) {
    acc = acc * Rational(t - nodes_[j]) + newton_[j];
  }
  return acc;
}

double RationalPolynomial::at(double t) const {
  if (empty()) return 0.0;
  double acc = static_cast<double>(newton_.back());
  for (std::size_t j = newton_.size() - 1; j-- > 0;) {
    acc = acc * (t - static_cast<double>(nodes_[j])) +
          static_cast<double>(newton_[j]);
  }
  return acc;
}

std::vector<Rational> RationalPolynomial::monomial_coefficients() const {
  if (empty()) return {};
  std::vector<Rational> poly{newton_.back()};
  for (std::size_t j = newton_.size() - 1; j-- > 0;) {
    // poly <- poly * (X - x_j) + c_j
    std::vector<Rational> next(poly.size() + 1, Rational(0));
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= poly[i] * Rational(nodes_[j]);
    }
    next[0] += newton_[j];
    poly = std::move(next);
  }
  return poly;
}

ComplexPolynomial ComplexPolynomial::interpolate(
    std::vector<long long> nodes, std::vector<std::complex<long double>> values) {
  if (nodes.empty() || nodes.size() != values.size())
    throw std::invalid_argument("interpolate: need matching nonempty nodes/values");
  const std::size_t n = nodes.size();
  std::vector<std::complex<long double>> table = std::move(values);
  std::vector<std::complex<long double>> newton;
  newton.reserve(n);
  newton.push_back(table[0]);
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t i = n - 1; i >= j; --i) {
      table[i] = (table[i] - table[i - 1]) /
                 static_cast<long double>(nodes[i] - nodes[i - j]);
      if (i == j) break;
    }
    newton.push_back(table[j]);
  }
  ComplexPolynomial p;
  p.nodes_ = std::move(nodes);
  p.newton_ = std::move(newton);
  return p;
}

std::complex<long double> ComplexPolynomial::at_long(long double t) const {
  if (empty()) return {0.0L, 0.0L};
  std::complex<long double> acc = newton_.back();
  for (std::size_t j = newton_.size() - 1; j-- > 0;) {
    acc = acc * (t - static_cast<long double>(nodes_[j])) + newton_[j];
  }
  return acc;
}

std::complex<double> ComplexPolynomial::at(double t) const {
  const std::complex<long double> v = at_long(static_cast<long double>(t));
  return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
}

}  // namespace widthlab
