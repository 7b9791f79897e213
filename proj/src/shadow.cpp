#include "numstress/shadow.hpp"

#include <cmath>
#include <stdexcept>

namespace numstress {

ShadowTrace shadow_forward(const Graph& g, const Tensor& x,
                           const softfloat::FloatFormat& lo,
                           const softfloat::FloatFormat& ref,
                           const ForwardOptions& opts) {
  if (!lo.contained_in(ref))
    throw std::invalid_argument(
        "shadow_forward: reference format " + ref.name +
        " cannot represent every " + lo.name + " value");

  const Tensor xlo = round_into(lo, x);
  const Trace tlo = forward(g, xlo, lo, opts);
  const Trace tref = forward(g, xlo, ref, opts);

  ShadowTrace s;
  s.lo_format = lo.name;
  s.ref_format = ref.name;
  s.per_node_l1.assign(g.nodes.size(), 0.0);
  s.per_node_linf.assign(g.nodes.size(), 0.0);

  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    const Tensor& a = tlo.per_node[i];
    const Tensor& b = tref.per_node[i];
    bool nonfinite = false;
    double l1 = 0.0, linf = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double va = a.values[k], vb = b.values[k];
      if (!std::isfinite(va) || !std::isfinite(vb)) {
        nonfinite = true;
        continue;  // error is aggregated over finite elements only
      }
      const double d = std::abs(va - vb);
      l1 += d;
      if (d > linf) linf = d;
    }
    s.per_node_l1[i] = l1;
    s.per_node_linf[i] = linf;
    s.total_error += l1;
    if (nonfinite) s.nonfinite_nodes.push_back(i);
  }
  return s;
}

double accumulated_diff(const Graph& g, const std::vector<Tensor>& inputs,
                        const softfloat::FloatFormat& lo,
                        const softfloat::FloatFormat& ref,
                        const ForwardOptions& opts, bool* warned_empty) {
  if (warned_empty) *warned_empty = inputs.empty();
  double total = 0.0;
  for (const Tensor& x : inputs)
    total += shadow_forward(g, x, lo, ref, opts).total_error;
  return total;
}

SensitivityTrace sensitivity_trace(const Graph& g, const Tensor& x,
                                   const Tensor& delta,
                                   const softfloat::FloatFormat& fmt,
                                   const ForwardOptions& opts) {
  if (!same_shape(x, delta))
    throw std::invalid_argument("sensitivity_trace: delta shape mismatch");

  Tensor xp = x;
  for (std::size_t i = 0; i < xp.size(); ++i) xp.values[i] += delta.values[i];

  const Trace clean = forward(g, round_into(fmt, x), fmt, opts);
  const Trace pert = forward(g, round_into(fmt, xp), fmt, opts);

  SensitivityTrace s;
  s.per_node_l1.assign(g.nodes.size(), 0.0);
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    s.per_node_l1[i] = l1_diff(clean.per_node[i], pert.per_node[i]);
  s.output_l1 =
      l1_diff(gather_outputs(g, clean), gather_outputs(g, pert));
  return s;
}

}  // namespace numstress
