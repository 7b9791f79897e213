#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "numstress/graph.hpp"

namespace numstress {

// Paired execution of one graph under a low-precision format and a reference
// format, recording where the two runs diverge, node by node.
struct ShadowTrace {
  std::string lo_format;
  std::string ref_format;
  std::vector<double> per_node_l1;    // sum of |lo - ref| per node (0 for input)
  std::vector<double> per_node_linf;  // worst single element per node
  std::vector<std::size_t> nonfinite_nodes;  // nodes with non-finite elements
  double total_error = 0.0;  // sum of per_node_l1 over non-input nodes

  bool flagged(std::size_t id) const {
    for (std::size_t n : nonfinite_nodes)
      if (n == id) return true;
    return false;
  }
};

// Runs the same lo-rounded input through both formats. ref must be able to
// represent every lo value exactly (mantissa and exponent at least as wide);
// equal formats are allowed and give zero error. Errors on flagged nodes sum
// only the finite elements.
ShadowTrace shadow_forward(const Graph& g, const Tensor& x,
                           const softfloat::FloatFormat& lo,
                           const softfloat::FloatFormat& ref,
                           const ForwardOptions& opts = {});

// Sum of shadow total_error over a set of inputs. An empty set yields 0.0
// and sets *warned_empty when provided.
double accumulated_diff(const Graph& g, const std::vector<Tensor>& inputs,
                        const softfloat::FloatFormat& lo,
                        const softfloat::FloatFormat& ref,
                        const ForwardOptions& opts = {},
                        bool* warned_empty = nullptr);

// How far each node's activation moves when the input moves from x to
// x + delta, both runs under the same single format: the cleanly measurable
// footprint of an input perturbation.
struct SensitivityTrace {
  std::vector<double> per_node_l1;
  double output_l1 = 0.0;  // over the graph's declared outputs
};

SensitivityTrace sensitivity_trace(const Graph& g, const Tensor& x,
                                   const Tensor& delta,
                                   const softfloat::FloatFormat& fmt,
                                   const ForwardOptions& opts = {});

}  // namespace numstress
