#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "numstress/attack.hpp"
#include "numstress/bounds.hpp"
#include "numstress/graph.hpp"

namespace numstress {

// ---- shared statistics ---------------------------------------------------

// Spearman rank correlation; ties get average ranks.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// ---- amplification demo --------------------------------------------------

// Fixed 2-2-1 tanh network: W1 = [[4, 4], [4, -4]], w2 = [-1, 1], zero
// biases. Moving the second input coordinate by delta gives
// y = -2*tanh(4*delta): gradient -8 at the origin, an ~8x local gain.
Graph amplification_graph();

struct TanhDemoRow {
  double delta = 0.0;
  double y_ref = 0.0;   // binary64 evaluation
  double y_lo = 0.0;    // low-precision evaluation
  double abs_diff = 0.0;
  double amplification = 0.0;  // |y_ref| / |delta|
};

// Symmetric grid of `count` deltas over [-range, range] (count even, so zero
// itself is never a grid point).
std::vector<TanhDemoRow> tanh_demo(const softfloat::FloatFormat& lo, int count,
                                   double range);

// ---- single-operation rounding sweep --------------------------------------

struct SweepRow {
  std::string op;  // "mul" | "add"
  double a = 0.0, b = 0.0;
  double exact = 0.0;    // binary64 result
  double rounded = 0.0;  // result rounded into the format
  double abs_diff = 0.0;
  double rel_diff = 0.0;
  bool flagged = false;  // non-finite rounded result
};

struct PrimitiveSweepResult {
  std::vector<SweepRow> rows;    // mul rows first, then add rows
  double spearman_mul = 0.0;     // rank corr of |a*b| vs abs_diff, unflagged rows
  std::size_t valid_add_rows = 0;
};

// Per-op error survey over the format's positive normal range: `pairs`
// multiplications with log-uniform operands (overflowing products keep a
// max-finite error surrogate and a flag) and `pairs` additions with
// linear-uniform operands, resampled so every exact sum stays finite.
PrimitiveSweepResult primitive_sweep(const softfloat::FloatFormat& fmt,
                                     int pairs, std::uint64_t seed);

// ---- model generation ------------------------------------------------------

// Fully-connected stack: affine(widths[0] -> widths[1]), activation, ...,
// affine(-> widths.back()), no activation after the last affine. Weights are
// uniform Xavier draws from the seed; biases zero.
ModelSpec random_mlp(const std::vector<std::size_t>& widths,
                     const std::string& activation, std::uint64_t seed);

// ---- precision ablation ----------------------------------------------------

struct AblationRow {
  std::string format;
  double proxy_clean = 0.0;
  double proxy_perturbed = 0.0;
  double accumulated_diff = 0.0;  // vs binary64 at x + delta
  double output_l1_change = 0.0;  // clean vs perturbed under this format
};

// Evaluates one fixed perturbation (typically found under binary16) across
// formats.
std::vector<AblationRow> precision_ablation(
    const Graph& g, const Tensor& x, const Tensor& delta,
    const std::vector<std::string>& formats, AccumulationMode accumulation);

// ---- budget sweep ----------------------------------------------------------

struct SweepCellResult {
  double epsilon = 0.0;
  PerturbationKind kind = PerturbationKind::none;
  std::uint64_t seed = 0;
  double proxy_loss = 0.0;
  double accumulated_diff = 0.0;  // binary16 vs binary32 at x + delta
  double output_l1_change = 0.0;
};

// Full grid epsilons x kinds x seeds. The optimized kind runs the attack at
// each budget; baselines draw from a per-(seed, kind) stream shared across
// budgets, so a budget change rescales or reclips the same underlying draw.
// epsilon = 0 short-circuits every kind to delta = 0. `jobs` > 1
// evaluates cells concurrently; row order is the canonical grid order either
// way.
std::vector<SweepCellResult> epsilon_sweep(const Graph& g, const Tensor& x,
                                           const AttackConfig& base,
                                           const std::vector<double>& epsilons,
                                           const std::vector<PerturbationKind>& kinds,
                                           const std::vector<std::uint64_t>& seeds,
                                           int jobs);

// ---- bound trials ----------------------------------------------------------

struct BoundTrialRow {
  int trial = 0;
  BoundReport report;
};

// Random inputs x ~ U[-1, 1]^d (coordinates resampled out of the format's
// subnormal range, where the relative error model does not apply), bound
// checked per trial against the graph's layer-product Lipschitz constant.
std::vector<BoundTrialRow> bound_trials(const Graph& g,
                                        const softfloat::FloatFormat& fmt,
                                        int trials, std::uint64_t seed,
                                        BoundRounding rounding);

}  // namespace numstress
