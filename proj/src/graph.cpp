#include "numstress/graph.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace numstress {

namespace {

using softfloat::FloatFormat;

[[noreturn]] void node_error(const char* where, std::size_t id,
                             const std::string& msg) {
  std::ostringstream os;
  os << where << ": node " << id << ": " << msg;
  throw std::runtime_error(os.str());
}

bool is_binary(NodeKind k) {
  return k == NodeKind::add || k == NodeKind::sub ||
         k == NodeKind::mul_elementwise || k == NodeKind::div_elementwise;
}

}  // namespace

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::input: return "input";
    case NodeKind::constant: return "constant";
    case NodeKind::add: return "add";
    case NodeKind::sub: return "sub";
    case NodeKind::mul_elementwise: return "mul_elementwise";
    case NodeKind::div_elementwise: return "div_elementwise";
    case NodeKind::matmul: return "matmul";
    case NodeKind::tanh: return "tanh";
    case NodeKind::relu: return "relu";
    case NodeKind::exp: return "exp";
    case NodeKind::softmax: return "softmax";
    case NodeKind::layernorm: return "layernorm";
    case NodeKind::affine: return "affine";
  }
  return "?";
}

AccumulationMode accumulation_from_name(const std::string& name) {
  if (name == "strict") return AccumulationMode::strict;
  if (name == "wide") return AccumulationMode::wide;
  throw std::invalid_argument(
      "accumulation_from_name: expected 'strict' or 'wide', got '" + name +
      "'");
}

const char* accumulation_name(AccumulationMode m) {
  return m == AccumulationMode::strict ? "strict" : "wide";
}

const FloatFormat& accumulation_format(const FloatFormat& fmt) {
  return softfloat::binary32().contained_in(fmt) ? fmt : softfloat::binary32();
}

void Graph::validate() const {
  if (nodes.empty())
    throw std::runtime_error("Graph::validate: empty graph");
  if (nodes[0].kind != NodeKind::input || nodes[0].id != 0 ||
      !nodes[0].inputs.empty())
    throw std::runtime_error("Graph::validate: node 0 must be the input node");

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    if (n.id != i) node_error("Graph::validate", i, "id out of order");
    for (std::size_t in : n.inputs)
      if (in >= i)
        node_error("Graph::validate", i, "edge does not point backward");

    switch (n.kind) {
      case NodeKind::input:
        if (i != 0) node_error("Graph::validate", i, "second input node");
        break;
      case NodeKind::constant:
        if (!n.inputs.empty() || n.params.size() != 1)
          node_error("Graph::validate", i, "constant takes no inputs, one param");
        break;
      case NodeKind::add:
      case NodeKind::sub:
      case NodeKind::mul_elementwise:
      case NodeKind::div_elementwise:
        if (!((n.inputs.size() == 2 && n.params.empty()) ||
              (n.inputs.size() == 1 && n.params.size() == 1)))
          node_error("Graph::validate", i,
                     "elementwise op wants two inputs, or one input + param");
        break;
      case NodeKind::matmul:
        if (n.inputs.size() != 1 || n.params.size() != 1 ||
            n.params[0].shape.size() != 2)
          node_error("Graph::validate", i, "matmul wants one input and a 2-d weight");
        break;
      case NodeKind::affine:
        if (n.inputs.size() != 1 || n.params.empty() || n.params.size() > 2 ||
            n.params[0].shape.size() != 2)
          node_error("Graph::validate", i, "affine wants one input, weight [+ bias]");
        break;
      case NodeKind::tanh:
      case NodeKind::relu:
      case NodeKind::exp:
      case NodeKind::softmax:
        if (n.inputs.size() != 1 || !n.params.empty())
          node_error("Graph::validate", i, "unary op wants exactly one input");
        break;
      case NodeKind::layernorm:
        if (n.inputs.size() != 1 ||
            (!n.params.empty() && n.params.size() != 2))
          node_error("Graph::validate", i,
                     "layernorm wants one input and optionally gain+shift");
        break;
    }
  }

  if (outputs.empty())
    throw std::runtime_error("Graph::validate: no output nodes");
  for (std::size_t o : outputs)
    if (o >= nodes.size())
      throw std::runtime_error("Graph::validate: output id out of range");
}

std::vector<std::vector<std::size_t>> infer_shapes(
    const Graph& g, const std::vector<std::size_t>& input_shape) {
  if (!g.input_shape.empty() && g.input_shape != input_shape)
    throw std::runtime_error("infer_shapes: input shape mismatch");

  std::vector<std::vector<std::size_t>> shapes(g.nodes.size());
  shapes[0] = input_shape;

  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    switch (n.kind) {
      case NodeKind::input:
        break;
      case NodeKind::constant:
        shapes[i] = n.params[0].shape;
        break;
      case NodeKind::add:
      case NodeKind::sub:
      case NodeKind::mul_elementwise:
      case NodeKind::div_elementwise: {
        const auto& a = shapes[n.inputs[0]];
        const auto& b =
            n.inputs.size() == 2 ? shapes[n.inputs[1]] : n.params[0].shape;
        if (a != b)
          node_error("infer_shapes", i, "operand shapes differ (no broadcasting)");
        shapes[i] = a;
        break;
      }
      case NodeKind::matmul:
      case NodeKind::affine: {
        const auto& w = n.params[0].shape;
        const auto& x = shapes[n.inputs[0]];
        if (x.size() != 1 || x[0] != w[1])
          node_error("infer_shapes", i, "weight columns must match input length");
        if (n.kind == NodeKind::affine && n.params.size() == 2 &&
            n.params[1].shape != std::vector<std::size_t>{w[0]})
          node_error("infer_shapes", i, "bias length must match weight rows");
        shapes[i] = {w[0]};
        break;
      }
      case NodeKind::tanh:
      case NodeKind::relu:
      case NodeKind::exp:
        shapes[i] = shapes[n.inputs[0]];
        break;
      case NodeKind::softmax:
      case NodeKind::layernorm: {
        const auto& x = shapes[n.inputs[0]];
        if (x.size() != 1)
          node_error("infer_shapes", i, "softmax/layernorm want a 1-d input");
        if (n.kind == NodeKind::layernorm && n.params.size() == 2 &&
            (n.params[0].shape != x || n.params[1].shape != x))
          node_error("infer_shapes", i, "gain/shift must match input length");
        shapes[i] = x;
        break;
      }
    }
  }
  return shapes;
}

namespace {

// --- forward kernels -----------------------------------------------------

struct EvalCtx {
  const FloatFormat& fmt;
  const FloatFormat& red;  // reduction format (fmt in strict mode)
  bool wide;
  bool naive_softmax;

  double rnd(double v) const { return softfloat::round(fmt, v); }
  double fold(double acc, double term) const {
    return softfloat::round(red, acc + term);
  }
  // closes a reduction: re-round into fmt when the carrier was wider
  double finish(double acc) const { return wide ? rnd(acc) : acc; }
};

std::vector<double> matvec(const EvalCtx& c, const Tensor& w,
                           const std::vector<double>& x) {
  const std::size_t m = w.shape[0], n = w.shape[1];
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc = c.fold(acc, c.rnd(w.at(i, j) * x[j]));
    out[i] = c.finish(acc);
  }
  return out;
}

std::vector<double> softmax_eval(const EvalCtx& c,
                                 const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> t(n);
  if (c.naive_softmax) {
    t = v;
  } else {
    double m = -std::numeric_limits<double>::infinity();
    for (double e : v)
      if (e > m) m = e;
    for (std::size_t i = 0; i < n; ++i) t[i] = c.rnd(v[i] - m);
  }
  std::vector<double> e(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = c.rnd(std::exp(t[i]));
    s = c.fold(s, e[i]);
  }
  s = c.finish(s);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = c.rnd(e[i] / s);
  return out;
}

std::vector<double> layernorm_eval(const EvalCtx& c,
                                   const std::vector<double>& v,
                                   const Tensor* gain, const Tensor* shift) {
  const std::size_t n = v.size();
  const double nn = static_cast<double>(n);
  double sum = 0.0;
  for (double e : v) sum = c.fold(sum, e);
  const double mean = c.rnd(c.finish(sum) / nn);

  std::vector<double> d(n);
  double vsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = c.rnd(v[i] - mean);
    vsum = c.fold(vsum, c.rnd(d[i] * d[i]));
  }
  const double var = c.rnd(c.finish(vsum) / nn);
  const double eps = c.rnd(1e-5);
  const double denom = c.rnd(std::sqrt(c.rnd(var + eps)));

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = c.rnd(d[i] / denom);
    if (gain) out[i] = c.rnd(out[i] * gain->values[i]);
    if (shift) out[i] = c.rnd(out[i] + shift->values[i]);
  }
  return out;
}

}  // namespace

Trace forward(const Graph& g, const Tensor& x, const FloatFormat& fmt,
              const ForwardOptions& opts) {
  g.validate();
  const auto shapes = infer_shapes(g, x.shape);

  for (double v : x.values) {
    const double r = softfloat::round(fmt, v);
    const bool ok = (r == v) || (std::isnan(r) && std::isnan(v));
    if (!ok)
      throw std::invalid_argument(
          "forward: input is not representable in " + fmt.name);
  }

  const bool wide = opts.accumulation == AccumulationMode::wide;
  const EvalCtx ctx{fmt, wide ? accumulation_format(fmt) : fmt, wide,
                    opts.naive_softmax};

  Trace tr;
  tr.format = fmt.name;
  tr.accumulation = opts.accumulation;
  tr.per_node.resize(g.nodes.size());
  tr.nonfinite.assign(g.nodes.size(), false);

  tr.per_node[0] = x;
  tr.per_node[0].format_tag = fmt.name;

  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    Tensor out = Tensor::zeros(shapes[i], fmt.name);

    if (n.kind == NodeKind::constant) {
      out = round_into(fmt, n.params[0]);
    } else if (is_binary(n.kind)) {
      const Tensor& a = tr.per_node[n.inputs[0]];
      const Tensor b = n.inputs.size() == 2
                           ? tr.per_node[n.inputs[1]]
                           : round_into(fmt, n.params[0]);
      for (std::size_t k = 0; k < out.size(); ++k) {
        double w = 0.0;
        switch (n.kind) {
          case NodeKind::add: w = a.values[k] + b.values[k]; break;
          case NodeKind::sub: w = a.values[k] - b.values[k]; break;
          case NodeKind::mul_elementwise: w = a.values[k] * b.values[k]; break;
          default: w = a.values[k] / b.values[k]; break;
        }
        out.values[k] = ctx.rnd(w);
      }
    } else if (n.kind == NodeKind::matmul || n.kind == NodeKind::affine) {
      const Tensor w = round_into(fmt, n.params[0]);
      auto mm = matvec(ctx, w, tr.per_node[n.inputs[0]].values);
      if (n.kind == NodeKind::affine) {
        const bool has_bias = n.params.size() == 2;
        const Tensor b = has_bias ? round_into(fmt, n.params[1]) : Tensor{};
        for (std::size_t k = 0; k < mm.size(); ++k)
          mm[k] = ctx.rnd(mm[k] + (has_bias ? b.values[k] : 0.0));
      }
      out.values = std::move(mm);
    } else if (n.kind == NodeKind::softmax) {
      out.values = softmax_eval(ctx, tr.per_node[n.inputs[0]].values);
    } else if (n.kind == NodeKind::layernorm) {
      Tensor gain, shift;
      const bool has = n.params.size() == 2;
      if (has) {
        gain = round_into(fmt, n.params[0]);
        shift = round_into(fmt, n.params[1]);
      }
      out.values = layernorm_eval(ctx, tr.per_node[n.inputs[0]].values,
                                  has ? &gain : nullptr,
                                  has ? &shift : nullptr);
    } else {  // tanh / relu / exp
      const Tensor& a = tr.per_node[n.inputs[0]];
      for (std::size_t k = 0; k < out.size(); ++k) {
        const double v = a.values[k];
        double w = 0.0;
        switch (n.kind) {
          case NodeKind::tanh: w = std::tanh(v); break;
          case NodeKind::exp: w = std::exp(v); break;
          default: w = std::isnan(v) ? v : (v > 0.0 ? v : 0.0); break;
        }
        out.values[k] = ctx.rnd(w);
      }
    }

    tr.nonfinite[i] = !all_finite(out);
    tr.per_node[i] = std::move(out);
  }
  return tr;
}

Tensor gather_outputs(const Graph& g, const Trace& t) {
  std::vector<double> v;
  for (std::size_t o : g.outputs)
    v.insert(v.end(), t.per_node[o].values.begin(),
             t.per_node[o].values.end());
  return Tensor::vector(std::move(v), t.format);
}

namespace {

// mean/variance in binary64 at the recorded input; the linearization point
// for the layernorm pullback.
void layernorm_backward(const FloatFormat& fmt, const Node& n,
                        const Tensor& xin, const std::vector<double>& gup,
                        std::vector<double>& gx) {
  const std::size_t len = xin.size();
  const double nn = static_cast<double>(len);
  double mu = 0.0;
  for (double v : xin.values) mu += v;
  mu /= nn;
  double var = 0.0;
  for (double v : xin.values) var += (v - mu) * (v - mu);
  var /= nn;
  const double eps = softfloat::round(fmt, 1e-5);
  const double sigma = std::sqrt(var + eps);

  std::vector<double> gt(len);
  if (n.params.size() == 2) {
    const Tensor gain = round_into(fmt, n.params[0]);
    for (std::size_t i = 0; i < len; ++i) gt[i] = gup[i] * gain.values[i];
  } else {
    gt = gup;
  }

  double mg = 0.0, mgy = 0.0;
  std::vector<double> y(len);
  for (std::size_t i = 0; i < len; ++i) {
    y[i] = (xin.values[i] - mu) / sigma;
    mg += gt[i];
    mgy += gt[i] * y[i];
  }
  mg /= nn;
  mgy /= nn;
  for (std::size_t i = 0; i < len; ++i)
    gx[i] += (gt[i] - mg - y[i] * mgy) / sigma;
}

}  // namespace

Tensor backward_node_seeds(const Graph& g, const Trace& t,
                           const std::vector<Tensor>& seeds) {
  g.validate();
  if (seeds.size() != g.nodes.size())
    throw std::invalid_argument("backward_node_seeds: one seed slot per node");
  const FloatFormat& fmt = softfloat::format_by_name(t.format);
  const auto shapes = infer_shapes(g, t.per_node[0].shape);

  std::vector<std::vector<double>> grads(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    grads[i].assign(Tensor::numel(shapes[i]), 0.0);
    if (!seeds[i].values.empty()) {
      if (seeds[i].shape != shapes[i])
        node_error("backward_node_seeds", i, "seed shape mismatch");
      for (std::size_t k = 0; k < grads[i].size(); ++k)
        grads[i][k] += seeds[i].values[k];
    }
  }

  for (std::size_t i = g.nodes.size(); i-- > 1;) {
    const Node& n = g.nodes[i];
    const std::vector<double>& gu = grads[i];

    switch (n.kind) {
      case NodeKind::input:
      case NodeKind::constant:
        break;
      case NodeKind::add: {
        auto& ga = grads[n.inputs[0]];
        for (std::size_t k = 0; k < gu.size(); ++k) ga[k] += gu[k];
        if (n.inputs.size() == 2) {
          auto& gb = grads[n.inputs[1]];
          for (std::size_t k = 0; k < gu.size(); ++k) gb[k] += gu[k];
        }
        break;
      }
      case NodeKind::sub: {
        auto& ga = grads[n.inputs[0]];
        for (std::size_t k = 0; k < gu.size(); ++k) ga[k] += gu[k];
        if (n.inputs.size() == 2) {
          auto& gb = grads[n.inputs[1]];
          for (std::size_t k = 0; k < gu.size(); ++k) gb[k] -= gu[k];
        }
        break;
      }
      case NodeKind::mul_elementwise: {
        const Tensor& a = t.per_node[n.inputs[0]];
        const Tensor b = n.inputs.size() == 2 ? t.per_node[n.inputs[1]]
                                              : round_into(fmt, n.params[0]);
        auto& ga = grads[n.inputs[0]];
        for (std::size_t k = 0; k < gu.size(); ++k) ga[k] += gu[k] * b.values[k];
        if (n.inputs.size() == 2) {
          auto& gb = grads[n.inputs[1]];
          for (std::size_t k = 0; k < gu.size(); ++k)
            gb[k] += gu[k] * a.values[k];
        }
        break;
      }
      case NodeKind::div_elementwise: {
        const Tensor& a = t.per_node[n.inputs[0]];
        const Tensor b = n.inputs.size() == 2 ? t.per_node[n.inputs[1]]
                                              : round_into(fmt, n.params[0]);
        auto& ga = grads[n.inputs[0]];
        for (std::size_t k = 0; k < gu.size(); ++k) ga[k] += gu[k] / b.values[k];
        if (n.inputs.size() == 2) {
          auto& gb = grads[n.inputs[1]];
          for (std::size_t k = 0; k < gu.size(); ++k)
            gb[k] -= gu[k] * a.values[k] / (b.values[k] * b.values[k]);
        }
        break;
      }
      case NodeKind::matmul:
      case NodeKind::affine: {
        const Tensor w = round_into(fmt, n.params[0]);
        auto& gx = grads[n.inputs[0]];
        const std::size_t m = w.shape[0], nc = w.shape[1];
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t cidx = 0; cidx < nc; ++cidx)
            gx[cidx] += w.at(r, cidx) * gu[r];
        break;
      }
      case NodeKind::tanh: {
        const Tensor& y = t.per_node[i];
        auto& gx = grads[n.inputs[0]];
        for (std::size_t k = 0; k < gu.size(); ++k)
          gx[k] += gu[k] * (1.0 - y.values[k] * y.values[k]);
        break;
      }
      case NodeKind::relu: {
        const Tensor& xin = t.per_node[n.inputs[0]];
        auto& gx = grads[n.inputs[0]];
        for (std::size_t k = 0; k < gu.size(); ++k)
          if (xin.values[k] > 0.0) gx[k] += gu[k];
        break;
      }
      case NodeKind::exp: {
        const Tensor& y = t.per_node[i];
        auto& gx = grads[n.inputs[0]];
        for (std::size_t k = 0; k < gu.size(); ++k)
          gx[k] += gu[k] * y.values[k];
        break;
      }
      case NodeKind::softmax: {
        const Tensor& y = t.per_node[i];
        auto& gx = grads[n.inputs[0]];
        double dot = 0.0;
        for (std::size_t k = 0; k < gu.size(); ++k) dot += gu[k] * y.values[k];
        for (std::size_t k = 0; k < gu.size(); ++k)
          gx[k] += y.values[k] * (gu[k] - dot);
        break;
      }
      case NodeKind::layernorm:
        layernorm_backward(fmt, n, t.per_node[n.inputs[0]], gu,
                           grads[n.inputs[0]]);
        break;
    }
  }

  Tensor out;
  out.shape = shapes[0];
  out.values = std::move(grads[0]);
  out.format_tag = "binary64";
  return out;
}

Tensor backward(const Graph& g, const Trace& t, const Tensor& cotangent) {
  if (g.outputs.size() != 1)
    throw std::invalid_argument(
        "backward: single-output graphs only; seed nodes directly otherwise");
  std::vector<Tensor> seeds(g.nodes.size());
  seeds[g.outputs[0]] = cotangent;
  return backward_node_seeds(g, t, seeds);
}

Graph build_from_spec(const ModelSpec& spec) {
  if (spec.input_dim == 0)
    throw std::runtime_error("build_from_spec: input_dim must be positive");

  Graph g;
  g.input_shape = {spec.input_dim};
  g.nodes.push_back(Node{0, NodeKind::input, {}, {}});

  std::size_t width = spec.input_dim;
  std::size_t prev = 0;

  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const ModelLayer& L = spec.layers[li];
    std::ostringstream where;
    where << "build_from_spec: layer " << li;

    if (L.type == "affine") {
      if (!L.has_weights || L.weights.shape.size() != 2)
        throw std::runtime_error(where.str() + ": affine needs a 2-d weight matrix");
      const std::size_t out_w = L.weights.shape[0];
      const std::size_t in_w = L.weights.shape[1];
      if (in_w != width) {
        std::ostringstream os;
        os << where.str() << ": weight expects input width " << in_w
           << " but previous layer produces " << width;
        throw std::runtime_error(os.str());
      }
      Tensor bias = L.has_bias ? L.bias : Tensor::zeros({out_w});
      if (bias.shape != std::vector<std::size_t>{out_w})
        throw std::runtime_error(where.str() + ": bias length must match weight rows");

      const std::size_t mm_id = g.nodes.size();
      g.nodes.push_back(Node{mm_id, NodeKind::matmul, {prev}, {L.weights}});
      const std::size_t add_id = g.nodes.size();
      g.nodes.push_back(Node{add_id, NodeKind::add, {mm_id}, {std::move(bias)}});
      prev = add_id;
      width = out_w;
    } else {
      NodeKind k;
      if (L.type == "tanh") k = NodeKind::tanh;
      else if (L.type == "relu") k = NodeKind::relu;
      else if (L.type == "exp") k = NodeKind::exp;
      else if (L.type == "softmax") k = NodeKind::softmax;
      else if (L.type == "layernorm") k = NodeKind::layernorm;
      else
        throw std::runtime_error(where.str() + ": unknown layer type '" +
                                 L.type + "'");
      if (L.has_weights || L.has_bias)
        throw std::runtime_error(where.str() + ": '" + L.type +
                                 "' takes no weights");
      const std::size_t id = g.nodes.size();
      g.nodes.push_back(Node{id, k, {prev}, {}});
      prev = id;
    }
  }

  if (spec.output_ids.empty()) {
    g.outputs = {prev};
  } else {
    for (std::size_t o : spec.output_ids)
      if (o >= g.nodes.size())
        throw std::runtime_error("build_from_spec: output id out of range");
    g.outputs = spec.output_ids;
  }

  g.validate();
  infer_shapes(g, g.input_shape);  // reject shape inconsistencies now
  return g;
}

}  // namespace numstress
