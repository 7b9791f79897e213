#pragma once

// Independent reference converters used only by tests.
//
// These are deliberately NOT built on the library under test: they convert by
// integer bit manipulation of the binary64 pattern (guard/round/sticky with
// ties-to-even), the classic table-free route used by half-precision
// libraries. The library's grid-quantization rounding must agree with these
// bit-level encoders everywhere.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace fp_oracle {

// ---- binary16 ----------------------------------------------------------

inline std::uint16_t encode_binary16(double d) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 63) << 15);
  const std::uint64_t exp = (bits >> 52) & 0x7FF;
  const std::uint64_t frac = bits & 0xFFFFFFFFFFFFFull;

  if (exp == 0x7FF) {
    if (frac != 0) return 0x7E00;  // every NaN -> canonical quiet NaN
    return sign | 0x7C00;
  }
  if (exp == 0 && frac == 0) return sign;  // signed zero

  // value = sig * 2^(e-52), top set bit of sig moved to bit 52
  std::uint64_t sig;
  int e;
  if (exp == 0) {
    sig = frac;
    e = -1022;
  } else {
    sig = frac | (1ull << 52);
    e = static_cast<int>(exp) - 1023;
  }
  while (!(sig >> 52)) {
    sig <<= 1;
    --e;
  }

  if (e > 15) return sign | 0x7C00;  // far above max finite -> infinity

  int shift;          // bits dropped below the kept significand
  std::uint64_t base; // exponent field with hidden bit folded out below
  if (e >= -14) {
    shift = 42;  // keep hidden bit + 10 fraction bits
    base = static_cast<std::uint64_t>(e + 15) << 10;
  } else {
    shift = 42 + (-14 - e);  // subnormal target: shorter significand
    base = 0;
  }

  std::uint64_t kept = 0;
  bool round_up = false;
  if (shift < 64) {
    kept = sig >> shift;
    const std::uint64_t rem = sig & ((1ull << shift) - 1);
    const std::uint64_t half = 1ull << (shift - 1);
    round_up = (rem > half) || (rem == half && (kept & 1));
  }

  std::uint64_t out =
      (e >= -14) ? base + (kept - (1ull << 10)) : kept;
  out += round_up ? 1 : 0;  // carry may promote subnormal or bump exponent
  if (out >= 0x7C00) return sign | 0x7C00;
  return sign | static_cast<std::uint16_t>(out);
}

inline double decode_binary16(std::uint16_t h) {
  const int sign = (h >> 15) & 1;
  const int exp = (h >> 10) & 0x1F;
  const int mant = h & 0x3FF;
  double mag;
  if (exp == 0x1F) {
    if (mant != 0) return std::numeric_limits<double>::quiet_NaN();
    mag = std::numeric_limits<double>::infinity();
  } else if (exp == 0) {
    mag = std::ldexp(static_cast<double>(mant), -24);
  } else {
    mag = std::ldexp(static_cast<double>(1024 + mant), exp - 25);
  }
  return sign ? -mag : mag;
}

inline double round_binary16(double d) {
  return decode_binary16(encode_binary16(d));
}

// ---- bfloat16 ----------------------------------------------------------

inline std::uint16_t encode_bfloat16(double d) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 63) << 15);
  const std::uint64_t exp = (bits >> 52) & 0x7FF;
  const std::uint64_t frac = bits & 0xFFFFFFFFFFFFFull;

  if (exp == 0x7FF) {
    if (frac != 0) return 0x7FC0;
    return sign | 0x7F80;
  }
  if (exp == 0 && frac == 0) return sign;

  std::uint64_t sig;
  int e;
  if (exp == 0) {
    sig = frac;
    e = -1022;
  } else {
    sig = frac | (1ull << 52);
    e = static_cast<int>(exp) - 1023;
  }
  while (!(sig >> 52)) {
    sig <<= 1;
    --e;
  }

  if (e > 127) return sign | 0x7F80;

  int shift;
  std::uint64_t base;
  if (e >= -126) {
    shift = 45;  // keep hidden bit + 7 fraction bits
    base = static_cast<std::uint64_t>(e + 127) << 7;
  } else {
    shift = 45 + (-126 - e);
    base = 0;
  }

  std::uint64_t kept = 0;
  bool round_up = false;
  if (shift < 64) {
    kept = sig >> shift;
    const std::uint64_t rem = sig & ((1ull << shift) - 1);
    const std::uint64_t half = 1ull << (shift - 1);
    round_up = (rem > half) || (rem == half && (kept & 1));
  }

  std::uint64_t out = (e >= -126) ? base + (kept - (1ull << 7)) : kept;
  out += round_up ? 1 : 0;
  if (out >= 0x7F80) return sign | 0x7F80;
  return sign | static_cast<std::uint16_t>(out);
}

inline double decode_bfloat16(std::uint16_t h) {
  const int sign = (h >> 15) & 1;
  const int exp = (h >> 7) & 0xFF;
  const int mant = h & 0x7F;
  double mag;
  if (exp == 0xFF) {
    if (mant != 0) return std::numeric_limits<double>::quiet_NaN();
    mag = std::numeric_limits<double>::infinity();
  } else if (exp == 0) {
    mag = std::ldexp(static_cast<double>(mant), -133);
  } else {
    mag = std::ldexp(static_cast<double>(128 + mant), exp - 134);
  }
  return sign ? -mag : mag;
}

inline double round_bfloat16(double d) {
  return decode_bfloat16(encode_bfloat16(d));
}

// ---- binary32 ----------------------------------------------------------
// Hardware float conversion is itself a correctly rounded IEEE operation and
// serves as the independent reference for the 32-bit target.

inline double round_binary32(double d) {
  if (std::isnan(d)) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(static_cast<float>(d));
}

// Bitwise equality with NaN treated as a single equivalence class.
inline bool same_value(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace fp_oracle
