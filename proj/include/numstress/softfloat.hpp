#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace numstress::softfloat {

// Description of a binary interchange format emulated on a binary64 carrier.
// mantissa_bits counts explicit fraction bits (10 for binary16); precision is
// mantissa_bits + 1 including the hidden bit.
struct FloatFormat {
  std::string name;
  int exponent_bits = 0;
  int mantissa_bits = 0;
  bool subnormals_enabled = true;  // false = flush subnormal results to zero

  int bias() const { return (1 << (exponent_bits - 1)) - 1; }
  int emax() const { return bias(); }
  int emin() const { return 1 - bias(); }

  double unit_roundoff() const;         // 2^-(mantissa_bits + 1)
  double max_finite() const;            // (2 - 2^-mantissa_bits) * 2^emax
  double min_positive_normal() const;   // 2^emin
  double min_positive_subnormal() const;  // 2^(emin - mantissa_bits)

  // True when every value of this format is exactly representable in `wider`
  // (mantissa and exponent ranges both contained).
  bool contained_in(const FloatFormat& wider) const {
    return mantissa_bits <= wider.mantissa_bits &&
           exponent_bits <= wider.exponent_bits;
  }
};

// Registry. Formats are addressed by name; unknown names throw
// std::invalid_argument listing the known ones.
const FloatFormat& binary16();
const FloatFormat& bfloat16();
const FloatFormat& binary32();
const FloatFormat& binary64();
const FloatFormat& format_by_name(std::string_view name);
bool is_known_format(std::string_view name);
const std::vector<std::string>& format_names();

// Round a binary64 value to the nearest value of `fmt`, ties to even.
//  - values beyond max_finite round to +/-infinity per the usual
//    round-to-nearest overflow rule
//  - subnormal results are exact grid points unless subnormals_enabled is
//    false, in which case they flush to signed zero
//  - every NaN maps to one canonical quiet NaN; infinities and signed zeros
//    pass through
//  - a format as wide as binary64 makes this the identity
double round(const FloatFormat& fmt, double x);

// x -> (rounded, k) with rounded = x * (1 + k). Outside the normal range
// (zero, subnormals, overflow, non-finite) the relative model does not
// guarantee |k| <= unit_roundoff and the result is marked accordingly;
// k is reported as 0 for x == 0.
struct RoundingDecomposition {
  double rounded = 0.0;
  double relative_term = 0.0;
  bool in_relative_model = false;
};
RoundingDecomposition decompose(const FloatFormat& fmt, double x);

// One arithmetic operation at `fmt` precision: the binary64 result of a op b
// rounded into fmt. For operands already representable in fmt this is the
// correctly rounded fmt operation: binary64 keeps 2*precision + 2 bits of
// every product/sum/quotient of fmt values for all supported formats, so the
// second rounding is innocuous.
enum class BinOp { add, sub, mul, div };
double rounded_binop(const FloatFormat& fmt, BinOp op, double a, double b);

}  // namespace numstress::softfloat
