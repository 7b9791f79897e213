#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "numstress/graph.hpp"
#include "numstress/shadow.hpp"

namespace numstress {

enum class Optimizer { sign_ascent, adaptive_moment };

Optimizer optimizer_from_name(const std::string& name);
const char* optimizer_name(Optimizer o);

struct AdaptiveMomentParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.2;  // decoupled: shrinks delta directly
};

// Budgeted input-perturbation search. The perturbation delta lives in
// binary64 (master copy); the graph is evaluated at round(fmt, x + delta).
struct AttackConfig {
  std::string format = "binary16";
  AccumulationMode accumulation = AccumulationMode::strict;
  double epsilon = 16.0 / 255.0;  // L-inf budget, > 0
  double alpha = 0.01;            // step size, > 0
  int iterations = 100;           // >= 1
  Optimizer optimizer = Optimizer::sign_ascent;
  AdaptiveMomentParams adaptive;
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  std::uint64_t seed = 0;
  bool record_diff_history = true;  // binary16-vs-binary32 divergence per step

  void validate() const;
};

struct AttackState {
  Tensor delta;  // binary64 master copy, starts at zero
  int iteration = 0;
  std::vector<double> loss_history;
  std::vector<double> diff_history;
  std::vector<std::string> events;  // non-finite / degenerate-step notices
  Tensor m, v;                      // adaptive moment buffers
};

struct AttackReport {
  AttackConfig config;
  Tensor delta;                      // final projected perturbation
  std::vector<double> loss_history;  // iterations+1 entries; [0] = clean
  std::vector<double> diff_history;  // same length when recorded, else empty
  std::vector<std::string> events;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Sum over all non-input nodes of the elementwise absolute activations,
// accumulated in binary64. Non-finite elements contribute max_finite of the
// trace's format; their node ids are appended to *saturated when given.
double proxy_loss(const Trace& t, std::vector<std::size_t>* saturated = nullptr);

// Gradient of proxy_loss with respect to the graph input: seeds
// sign(activation) at every non-input node (0 for zero or non-finite
// elements) and pulls the cotangents back through the recorded trace.
Tensor proxy_loss_gradient(const Graph& g, const Trace& t);

// Clamp delta into the L-inf ball, then into [domain_lo - x, domain_hi - x],
// with an ulp-level repair so x + delta lands inside the domain exactly.
// Idempotent; requires x itself inside the domain.
Tensor project(const Tensor& delta, const Tensor& x, const AttackConfig& cfg);

// One optimizer step: evaluates the proxy loss at the current delta (appended
// to loss_history), ascends, projects. sign_ascent takes sign(0) = 0 steps on
// zero coordinates; adaptive_moment runs bias-corrected first/second moments
// on the negated loss with decoupled weight decay.
void attack_step(const Graph& g, const Tensor& x, AttackState& st,
                 const AttackConfig& cfg);

// Full loop from delta = 0. Histories get iterations+1 entries: entry i holds
// the metric after i steps, the last one evaluated after the loop ends.
// Deterministic for a fixed (graph, x, config).
AttackReport run_attack(const Graph& g, const Tensor& x,
                        const AttackConfig& cfg);

// Reference perturbations the optimized one must beat.
enum class PerturbationKind { none, uniform, gaussian, optimized };

const char* kind_token(PerturbationKind k);  // NONE / RAND / GAUS / NUM
PerturbationKind kind_from_token(const std::string& token);

// none: zeros. uniform: coordinates ~ U[-eps, eps]. gaussian: N(0, 0.1)
// clipped to the budget. All are domain-projected against x. The optimized
// kind is produced by run_attack, not here.
Tensor baseline_perturbation(PerturbationKind kind, const Tensor& x,
                             const AttackConfig& cfg);

}  // namespace numstress
