#include "numstress/softfloat.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace numstress::softfloat {

namespace {

// Round a real-valued n with |n| < 2^53 to the nearest integer, ties to even,
// without touching the fenv rounding mode.
double round_integer_ties_even(double n) {
  const double f = std::floor(n);
  const double diff = n - f;  // exact: f and n share an exponent window
  if (diff > 0.5) return f + 1.0;
  if (diff < 0.5) return f;
  // exact tie: pick the even neighbor
  return (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
}

}  // namespace

double FloatFormat::unit_roundoff() const {
  return std::ldexp(1.0, -(mantissa_bits + 1));
}

double FloatFormat::max_finite() const {
  return (2.0 - std::ldexp(1.0, -mantissa_bits)) * std::ldexp(1.0, emax());
}

double FloatFormat::min_positive_normal() const {
  return std::ldexp(1.0, emin());
}

double FloatFormat::min_positive_subnormal() const {
  return std::ldexp(1.0, emin() - mantissa_bits);
}

const FloatFormat& binary16() {
  static const FloatFormat f{"binary16", 5, 10, true};
  return f;
}

const FloatFormat& bfloat16() {
  static const FloatFormat f{"bfloat16", 8, 7, true};
  return f;
}

const FloatFormat& binary32() {
  static const FloatFormat f{"binary32", 8, 23, true};
  return f;
}

const FloatFormat& binary64() {
  static const FloatFormat f{"binary64", 11, 52, true};
  return f;
}

const std::vector<std::string>& format_names() {
  static const std::vector<std::string> names{"binary16", "bfloat16",
                                              "binary32", "binary64"};
  return names;
}

bool is_known_format(std::string_view name) {
  for (const auto& n : format_names())
    if (n == name) return true;
  return false;
}

const FloatFormat& format_by_name(std::string_view name) {
  if (name == "binary16") return binary16();
  if (name == "bfloat16") return bfloat16();
  if (name == "binary32") return binary32();
  if (name == "binary64") return binary64();
  std::ostringstream msg;
  msg << "format_by_name: unknown format '" << name << "' (known:";
  for (const auto& n : format_names()) msg << ' ' << n;
  msg << ')';
  throw std::invalid_argument(msg.str());
}

double round(const FloatFormat& fmt, double x) {
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(x) || x == 0.0) return x;  // keeps the zero's sign
  if (binary64().contained_in(fmt)) return x;

  // Snap to the format's value grid around x: quantum 2^(e - mantissa_bits)
  // in the normal range, constant 2^(emin - mantissa_bits) below it. The
  // scaled value x / quantum is a power-of-two rescale of a double, hence
  // exact, and its magnitude stays under 2^53, so the integer rounding below
  // is the only inexact step.
  const int e = std::ilogb(x);
  const int qexp = (e < fmt.emin() ? fmt.emin() : e) - fmt.mantissa_bits;
  const double quantum = std::ldexp(1.0, qexp);
  const double n = x / quantum;
  double r = round_integer_ties_even(n) * quantum;

  if (std::abs(r) > fmt.max_finite())
    return std::copysign(std::numeric_limits<double>::infinity(), x);
  if (r == 0.0) return std::copysign(0.0, x);
  if (!fmt.subnormals_enabled && std::abs(r) < fmt.min_positive_normal())
    return std::copysign(0.0, x);
  return r;
}

RoundingDecomposition decompose(const FloatFormat& fmt, double x) {
  RoundingDecomposition d;
  d.rounded = round(fmt, x);
  if (x == 0.0) {
    d.relative_term = 0.0;
    d.in_relative_model = true;
    return d;
  }
  d.relative_term = std::isfinite(d.rounded)
                        ? d.rounded / x - 1.0
                        : std::numeric_limits<double>::quiet_NaN();
  const double ax = std::abs(x);
  d.in_relative_model = std::isfinite(x) &&
                        ax >= fmt.min_positive_normal() &&
                        ax <= fmt.max_finite();
  return d;
}

double rounded_binop(const FloatFormat& fmt, BinOp op, double a, double b) {
  double wide = 0.0;
  switch (op) {
    case BinOp::add: wide = a + b; break;
    case BinOp::sub: wide = a - b; break;
    case BinOp::mul: wide = a * b; break;
    case BinOp::div: wide = a / b; break;
  }
  return round(fmt, wide);
}

}  // namespace numstress::softfloat
