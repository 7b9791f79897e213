#include "numstress/attack.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "numstress/rng.hpp"

namespace numstress {

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "sign_ascent") return Optimizer::sign_ascent;
  if (name == "adaptive_moment") return Optimizer::adaptive_moment;
  throw std::invalid_argument(
      "optimizer_from_name: expected 'sign_ascent' or 'adaptive_moment', got '" +
      name + "'");
}

const char* optimizer_name(Optimizer o) {
  return o == Optimizer::sign_ascent ? "sign_ascent" : "adaptive_moment";
}

const char* kind_token(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::none: return "NONE";
    case PerturbationKind::uniform: return "RAND";
    case PerturbationKind::gaussian: return "GAUS";
    case PerturbationKind::optimized: return "NUM";
  }
  return "?";
}

PerturbationKind kind_from_token(const std::string& token) {
  if (token == "NONE" || token == "none") return PerturbationKind::none;
  if (token == "RAND" || token == "rand") return PerturbationKind::uniform;
  if (token == "GAUS" || token == "gaus") return PerturbationKind::gaussian;
  if (token == "NUM" || token == "num") return PerturbationKind::optimized;
  throw std::invalid_argument("kind_from_token: unknown perturbation kind '" +
                              token + "'");
}

void AttackConfig::validate() const {
  softfloat::format_by_name(format);  // throws on unknown names
  if (!(epsilon > 0.0))
    throw std::invalid_argument("AttackConfig: epsilon must be positive");
  if (!(alpha > 0.0))
    throw std::invalid_argument("AttackConfig: alpha must be positive");
  if (iterations < 1)
    throw std::invalid_argument("AttackConfig: iterations must be >= 1");
  if (!(domain_lo < domain_hi))
    throw std::invalid_argument("AttackConfig: domain_lo must be < domain_hi");
  if (!(adaptive.beta1 >= 0.0 && adaptive.beta1 < 1.0 &&
        adaptive.beta2 >= 0.0 && adaptive.beta2 < 1.0))
    throw std::invalid_argument("AttackConfig: betas must lie in [0, 1)");
}

double proxy_loss(const Trace& t, std::vector<std::size_t>* saturated) {
  const double surrogate =
      softfloat::format_by_name(t.format).max_finite();
  double loss = 0.0;
  for (std::size_t i = 1; i < t.per_node.size(); ++i) {
    bool flagged = false;
    for (double v : t.per_node[i].values) {
      if (std::isfinite(v)) {
        loss += std::abs(v);
      } else {
        loss += surrogate;
        flagged = true;
      }
    }
    if (flagged && saturated) saturated->push_back(i);
  }
  return loss;
}

Tensor proxy_loss_gradient(const Graph& g, const Trace& t) {
  std::vector<Tensor> seeds(g.nodes.size());
  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    Tensor s = t.per_node[i];
    for (double& v : s.values) {
      if (!std::isfinite(v) || v == 0.0)
        v = 0.0;
      else
        v = v > 0.0 ? 1.0 : -1.0;
    }
    s.format_tag = "binary64";
    seeds[i] = std::move(s);
  }
  return backward_node_seeds(g, t, seeds);
}

Tensor project(const Tensor& delta, const Tensor& x, const AttackConfig& cfg) {
  if (!same_shape(delta, x))
    throw std::invalid_argument("project: delta shape mismatch");
  Tensor out = delta;
  out.format_tag = "binary64";
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double xi = x.values[i];
    if (!(xi >= cfg.domain_lo && xi <= cfg.domain_hi))
      throw std::invalid_argument("project: x lies outside the domain");
    double d = out.values[i];
    if (std::isnan(d)) d = 0.0;
    d = std::min(std::max(d, -cfg.epsilon), cfg.epsilon);
    d = std::min(std::max(d, cfg.domain_lo - xi), cfg.domain_hi - xi);
    // repair the last ulp so x + d sits inside [lo, hi] exactly; each
    // nextafter moves d toward zero, so the budget clamp stays intact
    while (xi + d > cfg.domain_hi) d = std::nextafter(d, -inf);
    while (xi + d < cfg.domain_lo) d = std::nextafter(d, inf);
    out.values[i] = d;
  }
  return out;
}

namespace {

Tensor eval_input(const softfloat::FloatFormat& fmt, const Tensor& x,
                  const Tensor& delta) {
  Tensor xp = x;
  for (std::size_t i = 0; i < xp.size(); ++i) xp.values[i] += delta.values[i];
  return round_into(fmt, xp);
}

double diff_at(const Graph& g, const Tensor& x, const Tensor& delta,
               const AttackConfig& cfg) {
  Tensor xp = x;
  for (std::size_t i = 0; i < xp.size(); ++i) xp.values[i] += delta.values[i];
  const ForwardOptions opts{cfg.accumulation, false};
  return accumulated_diff(g, {xp}, softfloat::binary16(),
                          softfloat::binary32(), opts);
}

}  // namespace

void attack_step(const Graph& g, const Tensor& x, AttackState& st,
                 const AttackConfig& cfg) {
  cfg.validate();
  const softfloat::FloatFormat& fmt = softfloat::format_by_name(cfg.format);
  const ForwardOptions opts{cfg.accumulation, false};

  const Trace tr = forward(g, eval_input(fmt, x, st.delta), fmt, opts);
  std::vector<std::size_t> saturated;
  st.loss_history.push_back(proxy_loss(tr, &saturated));
  if (!saturated.empty()) {
    std::ostringstream os;
    os << "iteration " << st.iteration << ": non-finite activations at "
       << saturated.size() << " node(s), loss saturated";
    st.events.push_back(os.str());
  }

  Tensor grad = proxy_loss_gradient(g, tr);
  bool grad_nonfinite = false;
  for (double& v : grad.values) {
    if (!std::isfinite(v)) {
      v = 0.0;
      grad_nonfinite = true;
    }
  }
  if (grad_nonfinite) {
    std::ostringstream os;
    os << "iteration " << st.iteration
       << ": non-finite gradient coordinates treated as zero";
    st.events.push_back(os.str());
  }

  if (cfg.optimizer == Optimizer::sign_ascent) {
    for (std::size_t i = 0; i < st.delta.size(); ++i) {
      const double gi = grad.values[i];
      const double s = gi > 0.0 ? 1.0 : (gi < 0.0 ? -1.0 : 0.0);
      st.delta.values[i] += cfg.alpha * s;
    }
  } else {
    if (st.m.values.empty()) {
      st.m = Tensor::zeros(x.shape);
      st.v = Tensor::zeros(x.shape);
    }
    const AdaptiveMomentParams& p = cfg.adaptive;
    const int t = st.iteration + 1;
    const double bc1 = 1.0 - std::pow(p.beta1, t);
    const double bc2 = 1.0 - std::pow(p.beta2, t);
    for (std::size_t i = 0; i < st.delta.size(); ++i) {
      const double gi = -grad.values[i];  // minimize the negated loss
      st.m.values[i] = p.beta1 * st.m.values[i] + (1.0 - p.beta1) * gi;
      st.v.values[i] = p.beta2 * st.v.values[i] + (1.0 - p.beta2) * gi * gi;
      const double mhat = st.m.values[i] / bc1;
      const double vhat = st.v.values[i] / bc2;
      st.delta.values[i] -=
          cfg.alpha * (mhat / (std::sqrt(vhat) + p.eps) +
                       p.weight_decay * st.delta.values[i]);
    }
  }

  st.delta = project(st.delta, x, cfg);
  ++st.iteration;
}

AttackReport run_attack(const Graph& g, const Tensor& x,
                        const AttackConfig& cfg) {
  cfg.validate();
  const softfloat::FloatFormat& fmt = softfloat::format_by_name(cfg.format);
  const ForwardOptions opts{cfg.accumulation, false};

  const Tensor xc = round_into(fmt, x);
  for (double v : xc.values)
    if (!(v >= cfg.domain_lo && v <= cfg.domain_hi))
      throw std::invalid_argument("run_attack: x lies outside the domain");

  AttackState st;
  st.delta = Tensor::zeros(x.shape, "binary64");

  for (int i = 0; i < cfg.iterations; ++i) {
    if (cfg.record_diff_history)
      st.diff_history.push_back(diff_at(g, xc, st.delta, cfg));
    attack_step(g, xc, st, cfg);
  }

  st.loss_history.push_back(
      proxy_loss(forward(g, eval_input(fmt, xc, st.delta), fmt, opts)));
  if (cfg.record_diff_history)
    st.diff_history.push_back(diff_at(g, xc, st.delta, cfg));

  AttackReport rep;
  rep.config = cfg;
  rep.delta = st.delta;
  rep.loss_history = std::move(st.loss_history);
  rep.diff_history = std::move(st.diff_history);
  rep.events = std::move(st.events);
  rep.initial_loss = rep.loss_history.front();
  rep.final_loss = rep.loss_history.back();
  return rep;
}

Tensor baseline_perturbation(PerturbationKind kind, const Tensor& x,
                             const AttackConfig& cfg) {
  cfg.validate();
  Tensor d = Tensor::zeros(x.shape, "binary64");
  SplitMix64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(kind)));
  switch (kind) {
    case PerturbationKind::none:
      break;
    case PerturbationKind::uniform:
      for (double& v : d.values)
        v = rng.next_uniform(-cfg.epsilon, cfg.epsilon);
      break;
    case PerturbationKind::gaussian:
      for (double& v : d.values) {
        const double z = 0.1 * rng.next_gaussian();
        v = std::min(std::max(z, -cfg.epsilon), cfg.epsilon);
      }
      break;
    case PerturbationKind::optimized:
      throw std::invalid_argument(
          "baseline_perturbation: the optimized perturbation comes from "
          "run_attack");
  }
  return project(d, x, cfg);
}

}  // namespace numstress
