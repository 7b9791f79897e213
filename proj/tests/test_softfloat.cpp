#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "fp16_oracle.hpp"
#include "numstress/rng.hpp"
#include "numstress/softfloat.hpp"

using namespace numstress;
using softfloat::BinOp;
using softfloat::FloatFormat;

namespace {

double sample_exponent_range(SplitMix64& rng, int elo, int ehi) {
  const double frac = rng.next_unit();
  const int e = elo + static_cast<int>(rng.next_u64() %
                                       static_cast<std::uint64_t>(ehi - elo + 1));
  const double sign = (rng.next_u64() & 1) ? -1.0 : 1.0;
  return sign * std::ldexp(1.0 + frac, e);
}

}  // namespace

TEST_CASE("registry constants") {
  const FloatFormat& h = softfloat::binary16();
  CHECK(h.exponent_bits == 5);
  CHECK(h.mantissa_bits == 10);
  CHECK(h.unit_roundoff() == 0x1.0p-11);
  CHECK(h.max_finite() == 65504.0);
  CHECK(h.min_positive_normal() == 0x1.0p-14);
  CHECK(h.min_positive_subnormal() == 0x1.0p-24);

  const FloatFormat& b = softfloat::bfloat16();
  CHECK(b.exponent_bits == 8);
  CHECK(b.mantissa_bits == 7);
  CHECK(b.unit_roundoff() == 0x1.0p-8);
  CHECK(b.max_finite() == 3.3895313892515355e+38);
  CHECK(b.min_positive_normal() == 0x1.0p-126);

  CHECK(softfloat::binary32().unit_roundoff() == 0x1.0p-24);
  CHECK(softfloat::binary64().unit_roundoff() == 0x1.0p-53);

  CHECK(softfloat::format_by_name("binary16").name == "binary16");
  CHECK(softfloat::is_known_format("bfloat16"));
  CHECK_FALSE(softfloat::is_known_format("binary8"));
  CHECK_THROWS_AS(softfloat::format_by_name("binary8"), std::invalid_argument);
}

TEST_CASE("pinned binary16 roundings") {
  const FloatFormat& h = softfloat::binary16();
  CHECK(softfloat::round(h, 0.1) == 0.0999755859375);
  CHECK(softfloat::round(h, 2049.0) == 2048.0);  // tie, even mantissa wins
  CHECK(softfloat::round(h, 2051.0) == 2052.0);
  CHECK(softfloat::round(h, 70000.0) ==
        std::numeric_limits<double>::infinity());
  CHECK(softfloat::round(h, -70000.0) ==
        -std::numeric_limits<double>::infinity());
  CHECK(softfloat::round(h, 65504.0) == 65504.0);
  CHECK(softfloat::round(h, 65519.0) == 65504.0);
  // midpoint between max finite and the next power of two overflows (ties to
  // the even candidate, which is out of range)
  CHECK(softfloat::round(h, 65520.0) ==
        std::numeric_limits<double>::infinity());
  CHECK(softfloat::round(h, 1.0) == 1.0);
  CHECK(softfloat::round(h, -0.1) == -0.0999755859375);
}

TEST_CASE("special values") {
  const FloatFormat& h = softfloat::binary16();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();

  CHECK(std::isnan(softfloat::round(h, nan)));
  CHECK(std::isnan(softfloat::round(h, -nan)));
  CHECK(softfloat::round(h, inf) == inf);
  CHECK(softfloat::round(h, -inf) == -inf);
  CHECK(softfloat::round(h, 0.0) == 0.0);
  CHECK_FALSE(std::signbit(softfloat::round(h, 0.0)));
  CHECK(std::signbit(softfloat::round(h, -0.0)));
  // tiny values round to signed zero
  CHECK(softfloat::round(h, 1e-300) == 0.0);
  CHECK_FALSE(std::signbit(softfloat::round(h, 1e-300)));
  CHECK(std::signbit(softfloat::round(h, -1e-300)));
}

TEST_CASE("subnormal grid and flush-to-zero") {
  const FloatFormat& h = softfloat::binary16();
  const double sub = 0x1.0p-24;  // smallest positive binary16 value
  CHECK(softfloat::round(h, sub) == sub);
  CHECK(softfloat::round(h, 1.5 * std::ldexp(1.0, -25)) == sub);
  CHECK(softfloat::round(h, 0.4 * sub) == 0.0);
  CHECK(softfloat::round(h, 167.7 * sub) == 168.0 * sub);  // 1e-5 territory
  CHECK(softfloat::round(h, 1e-5) == 168.0 * sub);

  FloatFormat ftz = h;
  ftz.subnormals_enabled = false;
  CHECK(softfloat::round(ftz, 1e-5) == 0.0);
  CHECK(std::signbit(softfloat::round(ftz, -1e-5)));
  CHECK(softfloat::round(ftz, h.min_positive_normal()) ==
        h.min_positive_normal());
  // flushing applies to the rounded result: just under min normal rounds up
  // to min normal and survives
  const double near = h.min_positive_normal() * (1.0 - 1e-6);
  CHECK(softfloat::round(ftz, near) == h.min_positive_normal());
}

TEST_CASE("binary64 target is the identity") {
  const FloatFormat& d = softfloat::binary64();
  SplitMix64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::bit_cast<double>(rng.next_u64());
    const double r = softfloat::round(d, v);
    CHECK(fp_oracle::same_value(r, std::isnan(v)
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : v));
  }
}

TEST_CASE("binary16 round-trip over every bit pattern") {
  const FloatFormat& h = softfloat::binary16();
  for (std::uint32_t bits = 0; bits <= 0xFFFF; ++bits) {
    const double v = fp_oracle::decode_binary16(static_cast<std::uint16_t>(bits));
    const double r = softfloat::round(h, v);
    CHECK(fp_oracle::same_value(r, std::isnan(v)
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : v));
  }
}

TEST_CASE("agreement with the bit-level oracle: binary16") {
  const FloatFormat& h = softfloat::binary16();
  SplitMix64 rng(101);
  for (int i = 0; i < 20000; ++i) {
    const double v = i % 2 == 0
                         ? sample_exponent_range(rng, -30, 20)
                         : std::bit_cast<double>(rng.next_u64());
    const double mine = softfloat::round(h, v);
    const double ref = fp_oracle::round_binary16(v);
    CHECK_MESSAGE(fp_oracle::same_value(mine, ref),
                  "input " << v << " -> " << mine << " vs oracle " << ref);
  }
}

TEST_CASE("agreement with the bit-level oracle: bfloat16") {
  const FloatFormat& b = softfloat::bfloat16();
  SplitMix64 rng(202);
  for (int i = 0; i < 20000; ++i) {
    const double v = i % 2 == 0
                         ? sample_exponent_range(rng, -140, 140)
                         : std::bit_cast<double>(rng.next_u64());
    const double mine = softfloat::round(b, v);
    const double ref = fp_oracle::round_bfloat16(v);
    CHECK_MESSAGE(fp_oracle::same_value(mine, ref),
                  "input " << v << " -> " << mine << " vs oracle " << ref);
  }
}

TEST_CASE("agreement with hardware float: binary32") {
  const FloatFormat& f = softfloat::binary32();
  SplitMix64 rng(303);
  for (int i = 0; i < 20000; ++i) {
    const double v = i % 2 == 0
                         ? sample_exponent_range(rng, -140, 130)
                         : std::bit_cast<double>(rng.next_u64());
    const double mine = softfloat::round(f, v);
    const double ref = fp_oracle::round_binary32(v);
    CHECK_MESSAGE(fp_oracle::same_value(mine, ref),
                  "input " << v << " -> " << mine << " vs oracle " << ref);
  }
}

TEST_CASE("constructed midpoints tie to even") {
  const FloatFormat& h = softfloat::binary16();
  SplitMix64 rng(404);
  for (int i = 0; i < 2000; ++i) {
    // random normal binary16 value, not at the top exponent
    const int e = -14 + static_cast<int>(rng.next_u64() % 29);  // [-14, 14]
    const std::uint64_t mant = rng.next_u64() % 1024;
    const double v = std::ldexp(1024.0 + static_cast<double>(mant), e - 10);
    const double quantum = std::ldexp(1.0, e - 10);
    const double mid = v + 0.5 * quantum;  // exact in binary64
    const double r = softfloat::round(h, mid);
    const double even = (mant % 2 == 0) ? v : v + quantum;
    CHECK_MESSAGE(r == even, "midpoint above " << v << " went to " << r);
  }
}

TEST_CASE("relative error stays within the unit roundoff on normals") {
  SplitMix64 rng(505);
  for (const auto* fmt : {&softfloat::binary16(), &softfloat::bfloat16(),
                          &softfloat::binary32()}) {
    const double u = fmt->unit_roundoff();
    const double llo = std::log2(fmt->min_positive_normal());
    const double lhi = std::log2(fmt->max_finite());
    for (int i = 0; i < 3000; ++i) {
      const double mag = std::exp2(rng.next_uniform(llo, lhi));
      const double v = (rng.next_u64() & 1) ? -mag : mag;
      const auto d = softfloat::decompose(*fmt, v);
      CHECK(d.in_relative_model);
      CHECK(std::abs(d.relative_term) <= u);
      // reconstructing v*(1+k) re-rounds twice in binary64, so the identity
      // holds to a couple of binary64 ulps, not bitwise
      CHECK(d.rounded ==
            doctest::Approx(v * (1.0 + d.relative_term)).epsilon(1e-15));
    }
  }
}

TEST_CASE("decompose flags the regimes the relative model excludes") {
  const FloatFormat& h = softfloat::binary16();

  const auto zero = softfloat::decompose(h, 0.0);
  CHECK(zero.relative_term == 0.0);
  CHECK(zero.in_relative_model);

  const auto sub = softfloat::decompose(h, 1e-5);  // subnormal range
  CHECK_FALSE(sub.in_relative_model);

  const auto over = softfloat::decompose(h, 1e6);  // beyond max finite
  CHECK_FALSE(over.in_relative_model);

  const auto pinned = softfloat::decompose(h, 0.1);
  CHECK(pinned.rounded == 0.0999755859375);
  CHECK(pinned.relative_term == -0.000244140625);
  CHECK(pinned.in_relative_model);
}

TEST_CASE("single arithmetic operations round correctly") {
  const FloatFormat& h = softfloat::binary16();

  // all four ops agree with rounding the exact binary64 result
  const double a = 0.0999755859375;  // binary16 value
  CHECK(softfloat::rounded_binop(h, BinOp::mul, a, a) == 0.0099945068359375);
  CHECK(softfloat::rounded_binop(h, BinOp::add, 2048.0, 1.0) == 2048.0);
  CHECK(softfloat::rounded_binop(h, BinOp::sub, 2048.0, 1.0) == 2047.0);
  CHECK(softfloat::rounded_binop(h, BinOp::div, 1.0, 3.0) == 0.333251953125);
  CHECK(softfloat::rounded_binop(h, BinOp::mul, 512.0, 512.0) ==
        std::numeric_limits<double>::infinity());
  CHECK(std::isnan(softfloat::rounded_binop(h, BinOp::div, 0.0, 0.0)));

  // correctly rounded against the oracle for random binary16 operand pairs
  SplitMix64 rng(606);
  for (int i = 0; i < 5000; ++i) {
    const double x =
        fp_oracle::round_binary16(sample_exponent_range(rng, -20, 14));
    const double y =
        fp_oracle::round_binary16(sample_exponent_range(rng, -20, 14));
    for (BinOp op : {BinOp::add, BinOp::sub, BinOp::mul, BinOp::div}) {
      double exact = 0.0;
      switch (op) {
        case BinOp::add: exact = x + y; break;
        case BinOp::sub: exact = x - y; break;
        case BinOp::mul: exact = x * y; break;
        case BinOp::div: exact = x / y; break;
      }
      const double mine = softfloat::rounded_binop(h, op, x, y);
      const double ref = fp_oracle::round_binary16(exact);
      CHECK_MESSAGE(fp_oracle::same_value(mine, ref),
                    x << " op " << y << " -> " << mine << " vs " << ref);
    }
  }
}

TEST_CASE("rounding is deterministic") {
  const FloatFormat& h = softfloat::binary16();
  SplitMix64 rng(707);
  for (int i = 0; i < 1000; ++i) {
    const double v = sample_exponent_range(rng, -26, 17);
    CHECK(softfloat::round(h, v) == softfloat::round(h, v));
  }
}
