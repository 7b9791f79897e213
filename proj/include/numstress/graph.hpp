#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "numstress/softfloat.hpp"
#include "numstress/tensor.hpp"

namespace numstress {

// Elementary-operation graph. Exactly one input node, always id 0; every
// other node reads only lower ids (edges point forward), so node order is a
// topological order and a single left-to-right pass evaluates the graph.
enum class NodeKind {
  input,
  constant,
  add,
  sub,
  mul_elementwise,
  div_elementwise,
  matmul,
  tanh,
  relu,
  exp,
  softmax,
  layernorm,
  affine,
};

const char* kind_name(NodeKind k);

// params by kind:
//   constant       params[0] = the value
//   add/sub/mul/div  two graph inputs and no params, or one graph input plus
//                    params[0] as the right-hand operand (the bias form)
//   matmul         params[0] = weight [out, in]; input is a length-in vector
//   affine         params[0] = weight, optional params[1] = bias (fused
//                  matmul + bias add, rounding-identical to the two-node form)
//   layernorm      optional params[0] = gain, params[1] = shift
// Param tensors are rounded into the compute format at use.
struct Node {
  std::size_t id = 0;
  NodeKind kind = NodeKind::input;
  std::vector<std::size_t> inputs;
  std::vector<Tensor> params;
};

struct Graph {
  std::vector<Node> nodes;
  std::vector<std::size_t> outputs;        // non-empty, valid ids
  std::vector<std::size_t> input_shape;    // empty = take shape from x

  // Number of non-input nodes; the summation range of every per-operation
  // aggregate (shadow totals, proxy loss).
  std::size_t operation_count() const {
    return nodes.empty() ? 0 : nodes.size() - 1;
  }

  // Structural checks: id ordering, arities, param presence/shapes that do
  // not depend on the runtime input shape. Throws std::runtime_error naming
  // the offending node.
  void validate() const;
};

// Output shape of every node given the input shape. Throws on any shape
// inconsistency, naming the node.
std::vector<std::vector<std::size_t>> infer_shapes(
    const Graph& g, const std::vector<std::size_t>& input_shape);

enum class AccumulationMode { strict, wide };

AccumulationMode accumulation_from_name(const std::string& name);
const char* accumulation_name(AccumulationMode m);

// Reduction format for wide accumulation: binary32, or the compute format
// itself when that is at least as wide (so binary64-wide == binary64-strict).
const softfloat::FloatFormat& accumulation_format(
    const softfloat::FloatFormat& fmt);

struct ForwardOptions {
  AccumulationMode accumulation = AccumulationMode::strict;
  bool naive_softmax = false;  // default softmax subtracts the row max
};

// Recorded forward execution: the rounded output of every node. Non-finite
// values are recorded and flagged, never fatal.
struct Trace {
  std::string format;
  AccumulationMode accumulation = AccumulationMode::strict;
  std::vector<Tensor> per_node;
  std::vector<bool> nonfinite;

  bool any_nonfinite() const {
    for (bool f : nonfinite)
      if (f) return true;
    return false;
  }
};

// Evaluate the graph with every elementary operation rounded into fmt.
// strict mode rounds after each scalar multiply and each scalar add inside
// reductions (matmul/softmax/layernorm); wide mode rounds products into fmt
// but carries reduction partial sums in accumulation_format(fmt), rounding
// the final value into fmt. x must match the graph's input shape and already
// be representable in fmt.
Trace forward(const Graph& g, const Tensor& x,
              const softfloat::FloatFormat& fmt,
              const ForwardOptions& opts = {});

// Concatenated outputs of a recorded trace, in graph output order.
Tensor gather_outputs(const Graph& g, const Trace& t);

// Reverse-mode gradient with respect to the graph input, computed in
// binary64 with rounding treated as the identity, linearized at the trace's
// recorded activations. seeds[i] is the cotangent injected at node i (empty
// tensor = none); gradients may be non-finite when the trace is.
Tensor backward_node_seeds(const Graph& g, const Trace& t,
                           const std::vector<Tensor>& seeds);

// Cotangent seeded at the single output node (throws if the graph declares
// more than one output).
Tensor backward(const Graph& g, const Trace& t, const Tensor& cotangent);

// Model description mirroring the on-disk JSON schema: an input width and a
// stack of layers. Affine layers lower to matmul + add(bias) nodes, bias
// defaulting to zeros; activations map to single nodes.
struct ModelLayer {
  std::string type;  // affine | tanh | relu | exp | softmax | layernorm
  bool has_weights = false;
  bool has_bias = false;
  Tensor weights;  // [out, in]
  Tensor bias;     // [out]
};

struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<ModelLayer> layers;
  std::vector<std::size_t> output_ids;  // empty = last node
};

// Builds and validates the graph; rejection messages carry the layer index.
Graph build_from_spec(const ModelSpec& spec);

}  // namespace numstress
