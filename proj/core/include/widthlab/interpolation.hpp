#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <complex>
#include <vector>

namespace widthlab {

using Rational = boost::multiprecision::cpp_rational;

// Polynomial through integer nodes kept in Newton form with exact rational
// divided differences: evaluation at integers is exact, which is what the
// character-approximation bounds lean on.
class RationalPolynomial {
 public:
  RationalPolynomial() = default;

  static RationalPolynomial interpolate(std::vector<long long> nodes,
                                        std::vector<Rational> values);
  // Interpolates t -> (-1)^t on every integer of [lo, hi].
  static RationalPolynomial interpolate_signs(long long lo, long long hi);

  bool empty() const { return newton_.empty(); }
  int degree() const { return static_cast<int>(newton_.size()) - 1; }
  const std::vector<long long>& nodes() const { return nodes_; }

  Rational at_integer(long long t) const;  // exact
  double at(double t) const;               // floating Horner on Newton form
  // Dense coefficients c_0 + c_1 X + ... expanded in exact arithmetic.
  std::vector<Rational> monomial_coefficients() const;

 private:
  std::vector<long long> nodes_;
  std::vector<Rational> newton_;
};

// Same scheme in extended precision for complex-valued windows (roots of
// unity are not rational); nodes are still integers.
class ComplexPolynomial {
 public:
  ComplexPolynomial() = default;

  static ComplexPolynomial interpolate(std::vector<long long> nodes,
                                       std::vector<std::complex<long double>> values);

  bool empty() const { return newton_.empty(); }
  int degree() const { return static_cast<int>(newton_.size()) - 1; }
  const std::vector<long long>& nodes() const { return nodes_; }

  std::complex<double> at(double t) const;
  std::complex<long double> at_long(long double t) const;

 private:
  std::vector<long long> nodes_;
  std::vector<std::complex<long double>> newton_;
};

double to_double(const Rational& r);

}  // namespace widthlab
