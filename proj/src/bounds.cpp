#include "numstress/bounds.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "numstress/rng.hpp"

namespace numstress {

namespace {

// Largest singular value by power iteration on W^T W. Deterministic start
// away from the coordinate axes; convergence on the relative change of the
// estimate.
double spectral_norm(const Tensor& w, std::size_t node_id) {
  const std::size_t m = w.shape[0], n = w.shape[1];

  double amax = 0.0;
  for (double v : w.values) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return 0.0;

  std::vector<double> v(n);
  double norm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    v[j] = 1.0 + 1e-3 * static_cast<double>(j);
    norm += v[j] * v[j];
  }
  norm = std::sqrt(norm);
  for (double& e : v) e /= norm;

  const int max_iters = 10000;
  const double rel_tol = 1e-9;
  double sigma_prev = 0.0;
  std::vector<double> u(m), w_v(n);

  for (int it = 1; it <= max_iters; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += w.at(i, j) * v[j];
      u[i] = s;
    }
    double sigma = 0.0;
    for (double e : u) sigma += e * e;
    sigma = std::sqrt(sigma);
    if (sigma == 0.0) {
      // start vector fell in the null space; nudge and continue
      for (std::size_t j = 0; j < n; ++j) v[j] = (j % 2 ? -1.0 : 1.0);
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += w.at(i, j) * u[i];
      w_v[j] = s;
    }
    double nv = 0.0;
    for (double e : w_v) nv += e * e;
    nv = std::sqrt(nv);
    for (std::size_t j = 0; j < n; ++j) v[j] = w_v[j] / nv;

    if (it > 1 && std::abs(sigma - sigma_prev) <= rel_tol * sigma)
      return sigma;
    sigma_prev = sigma;
  }

  std::ostringstream os;
  os << "lipschitz_upper: node " << node_id
     << ": power iteration did not converge within " << max_iters
     << " iterations";
  throw std::runtime_error(os.str());
}

}  // namespace

LipschitzEstimate lipschitz_upper(const Graph& g) {
  g.validate();

  LipschitzEstimate est;
  est.method = LipschitzMethod::layer_product_upper;
  est.value = 1.0;

  std::size_t prev = 0;
  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.inputs.size() != 1 || n.inputs[0] != prev) {
      std::ostringstream os;
      os << "lipschitz_upper: node " << i
         << ": graph is not a single chain from the input";
      throw std::runtime_error(os.str());
    }

    double factor = 0.0;
    switch (n.kind) {
      case NodeKind::matmul:
      case NodeKind::affine:
        factor = spectral_norm(n.params[0], i);
        break;
      case NodeKind::add:
        if (n.params.size() != 1) {
          std::ostringstream os;
          os << "lipschitz_upper: node " << i
             << ": only the bias form of add is supported";
          throw std::runtime_error(os.str());
        }
        factor = 1.0;  // translation
        break;
      case NodeKind::tanh:
      case NodeKind::relu:
        factor = 1.0;  // 1-Lipschitz
        break;
      default: {
        std::ostringstream os;
        os << "lipschitz_upper: node " << i << ": kind '"
           << kind_name(n.kind) << "' has no layer factor";
        throw std::runtime_error(os.str());
      }
    }
    est.per_layer.push_back(factor);
    est.value *= factor;
    prev = i;
  }
  return est;
}

LipschitzEstimate finite_diff_lipschitz(const Graph& g, const Tensor& x,
                                        double radius, int samples,
                                        std::uint64_t seed) {
  if (!(radius > 0.0))
    throw std::invalid_argument("finite_diff_lipschitz: radius must be > 0");
  if (samples < 1)
    throw std::invalid_argument("finite_diff_lipschitz: samples must be >= 1");

  const softfloat::FloatFormat& f64 = softfloat::binary64();
  SplitMix64 rng(seed);
  const std::size_t d = x.size();

  auto draw_in_ball = [&]() {
    std::vector<double> u(d);
    double norm = 0.0;
    for (double& e : u) {
      e = rng.next_gaussian();
      norm += e * e;
    }
    norm = std::sqrt(norm);
    const double r =
        radius * std::pow(rng.next_unit(), 1.0 / static_cast<double>(d));
    for (double& e : u) e = (norm > 0.0) ? e / norm * r : 0.0;
    return u;
  };

  auto eval = [&](const std::vector<double>& offset) {
    Tensor p = x;
    for (std::size_t i = 0; i < d; ++i) p.values[i] += offset[i];
    return gather_outputs(g, forward(g, p, f64));
  };

  LipschitzEstimate est;
  est.method = LipschitzMethod::finite_difference_lower;
  est.value = 0.0;

  auto consider = [&](const std::vector<double>& ua,
                      const std::vector<double>& ub) {
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      dist += (ua[i] - ub[i]) * (ua[i] - ub[i]);
    dist = std::sqrt(dist);
    if (dist == 0.0) return;  // degenerate pair
    const double dy = l2_diff(eval(ua), eval(ub));
    est.value = std::max(est.value, dy / dist);
  };

  for (int s = 0; s < samples; ++s) {
    const auto u1 = draw_in_ball();
    const auto u2 = draw_in_ball();
    consider(u1, u2);
    std::vector<double> neg(d);
    for (std::size_t i = 0; i < d; ++i) neg[i] = -u1[i];
    consider(u1, neg);
  }
  return est;
}

BoundReport check_bound(const Graph& g, const Tensor& x,
                        const softfloat::FloatFormat& fmt,
                        const LipschitzEstimate& lip, BoundRounding rounding) {
  const softfloat::FloatFormat& f64 = softfloat::binary64();
  const double u = fmt.unit_roundoff();

  BoundReport r;
  r.lipschitz = lip.value;
  r.unit_roundoff = u;
  r.input_norm = l2_norm(x);

  const Tensor y = gather_outputs(g, forward(g, x, f64));
  r.output_norm = l2_norm(y);

  const Tensor xr = round_into(fmt, x);
  Tensor yhat;
  if (rounding == BoundRounding::endpoints) {
    yhat = round_into(fmt, gather_outputs(g, forward(g, xr, f64)));
  } else {
    const Trace t = forward(g, xr, fmt);
    yhat = gather_outputs(g, t);
  }

  r.nonfinite = !all_finite(yhat);
  r.measured_error = r.nonfinite
                         ? std::numeric_limits<double>::infinity()
                         : l2_diff(yhat, y);
  r.term_input = lip.value * u * r.input_norm;
  r.term_result = u * r.output_norm;
  r.term_second_order = lip.value * u * u * r.input_norm;
  r.bound = r.term_input + r.term_result + r.term_second_order;
  r.satisfied = !r.nonfinite && r.measured_error <= r.bound;
  return r;
}

}  // namespace numstress
