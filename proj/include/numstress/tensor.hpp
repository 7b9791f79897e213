#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "numstress/softfloat.hpp"

namespace numstress {

// Dense row-major tensor of binary64 values. format_tag names the format the
// values were last rounded into; every element is a fixed point of
// round(format_tag, .) by construction.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::string format_tag = "binary64";

  std::size_t size() const { return values.size(); }

  static std::size_t numel(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(),
                           static_cast<std::size_t>(1),
                           [](std::size_t a, std::size_t b) { return a * b; });
  }

  static Tensor zeros(std::vector<std::size_t> shape,
                      std::string tag = "binary64") {
    Tensor t;
    t.values.assign(numel(shape), 0.0);
    t.shape = std::move(shape);
    t.format_tag = std::move(tag);
    return t;
  }

  static Tensor vector(std::vector<double> v, std::string tag = "binary64") {
    Tensor t;
    t.shape = {v.size()};
    t.values = std::move(v);
    t.format_tag = std::move(tag);
    return t;
  }

  static Tensor matrix(std::vector<std::vector<double>> rows,
                       std::string tag = "binary64") {
    Tensor t;
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows[0].size() : 0;
    for (const auto& row : rows)
      if (row.size() != c)
        throw std::invalid_argument("Tensor::matrix: ragged rows");
    t.shape = {r, c};
    t.values.reserve(r * c);
    for (const auto& row : rows)
      t.values.insert(t.values.end(), row.begin(), row.end());
    t.format_tag = std::move(tag);
    return t;
  }

  double& at(std::size_t i) { return values[i]; }
  double at(std::size_t i) const { return values[i]; }
  // 2-d access for weight matrices
  double at(std::size_t r, std::size_t c) const {
    return values[r * shape[1] + c];
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape;
}

// Elementwise rounding into fmt; retags the result.
inline Tensor round_into(const softfloat::FloatFormat& fmt, const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values) v = softfloat::round(fmt, v);
  out.format_tag = fmt.name;
  return out;
}

inline bool all_finite(const Tensor& t) {
  for (double v : t.values)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double l1_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values) s += std::abs(v);
  return s;
}

inline double l2_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values) s += v * v;
  return std::sqrt(s);
}

inline double linf_norm(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values) m = std::max(m, std::abs(v));
  return m;
}

inline double l1_diff(const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b)) throw std::invalid_argument("l1_diff: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += std::abs(a.values[i] - b.values[i]);
  return s;
}

inline double l2_diff(const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b)) throw std::invalid_argument("l2_diff: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace numstress
