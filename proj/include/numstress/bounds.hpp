#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "numstress/graph.hpp"

namespace numstress {

enum class LipschitzMethod { layer_product_upper, finite_difference_lower };

struct LipschitzEstimate {
  double value = 0.0;
  LipschitzMethod method = LipschitzMethod::layer_product_upper;
  std::vector<double> per_layer;  // factors, layer_product_upper only
};

// Product of layer Lipschitz constants over a chain graph made of matmul,
// bias add, affine, tanh and relu nodes only (spectral norm for weights, 1
// for the rest). Any other kind or topology throws, naming the node. Spectral
// norms come from deterministic power iteration (relative tolerance 1e-9,
// at most 10^4 iterations, failure to converge throws with the count).
LipschitzEstimate lipschitz_upper(const Graph& g);

// Empirical lower estimate: max ||f(a)-f(b)|| / ||a-b|| over `samples`
// random pairs drawn in the L2 ball of `radius` around x, plus the antipodal
// pair of each draw, evaluated in binary64. Degenerate pairs are skipped.
LipschitzEstimate finite_diff_lipschitz(const Graph& g, const Tensor& x,
                                        double radius, int samples,
                                        std::uint64_t seed);

// Which roundings the error model charges for: the model's two (input and
// output), or additionally every intermediate operation.
enum class BoundRounding { endpoints, full };

// One numerical trial of the forward error bound
//   ||f(round(x)) rounded - f(x)|| <= L*u*||x|| + u*||f(x)|| + L*u^2*||x||
// with Euclidean norms, u the format's unit roundoff and L a Lipschitz upper
// bound for f. `endpoints` evaluates f itself in binary64 (the regime the
// bound models); `full` rounds every intermediate too, for comparison only.
struct BoundReport {
  double input_norm = 0.0;
  double output_norm = 0.0;
  double measured_error = 0.0;
  double term_input = 0.0;         // L * u * ||x||
  double term_result = 0.0;        // u * ||f(x)||
  double term_second_order = 0.0;  // L * u^2 * ||x||
  double bound = 0.0;              // sum of the three terms
  double lipschitz = 0.0;
  double unit_roundoff = 0.0;
  bool nonfinite = false;
  bool satisfied = false;
};

BoundReport check_bound(const Graph& g, const Tensor& x,
                        const softfloat::FloatFormat& fmt,
                        const LipschitzEstimate& lip,
                        BoundRounding rounding = BoundRounding::endpoints);

}  // namespace numstress
