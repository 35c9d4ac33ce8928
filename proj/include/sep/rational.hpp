#pragma once

#include <gmpxx.h>

#include <Eigen/Core>

#include <cstdio>
#include <stdexcept>
#include <string>

namespace sep {

/// Exact scalar used by the rational solve path. Backed by GMP; all
/// arithmetic keeps results in canonical form.
using Rational = mpq_class;

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class resource_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Rational make_rational(long num, long den = 1) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  Rational r(num, den);
  r.canonicalize();
  return r;
}

/// Parses "p/q", plain integers, and decimal literals ("0.25" -> 1/4).
Rational parse_rational(const std::string& text);

std::string format_rational(const Rational& r);

/// 17 significant digits, locale-independent.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

template <class S>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr bool exact = false;
  static double from_rational(const Rational& r) { return r.get_d(); }
  static std::string format(double x) { return format_double(x); }
  static double zero_tol(double requested) { return requested; }
};

template <>
struct scalar_traits<Rational> {
  static constexpr bool exact = true;
  static Rational from_rational(const Rational& r) { return r; }
  static std::string format(const Rational& r) { return format_rational(r); }
  static Rational zero_tol(double) { return Rational(0); }
};

template <class S>
S from_rational(const Rational& r) {
  return scalar_traits<S>::from_rational(r);
}

template <class S>
std::string format_scalar(const S& x) {
  return scalar_traits<S>::format(x);
}

template <class S>
double to_double(const S& x) {
  if constexpr (scalar_traits<S>::exact)
    return x.get_d();
  else
    return x;
}

template <class S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace sep

namespace Eigen {

// Exact rational scalar support (the usual custom-scalar adaptor).
template <>
struct NumTraits<mpq_class> : GenericNumTraits<mpq_class> {
  typedef mpq_class Real;
  typedef mpq_class NonInteger;
  typedef mpq_class Nested;
  static inline Real epsilon() { return 0; }
  static inline Real dummy_precision() { return 0; }
  static inline int digits10() { return 0; }
  enum {
    IsInteger = 0,
    IsSigned = 1,
    IsComplex = 0,
    RequireInitialization = 1,
    ReadCost = 6,
    AddCost = 150,
    MulCost = 100
  };
};

}  // namespace Eigen
