#include "numstress/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "numstress/rng.hpp"
#include "numstress/shadow.hpp"

namespace numstress {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

Tensor add_tensors(const Tensor& x, const Tensor& d) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += d.values[i];
  return out;
}

}  // namespace

double spearman_rho(const std::vector<double>& a,
                    const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman_rho: need two equal-length series");
  return pearson(average_ranks(a), average_ranks(b));
}

Graph amplification_graph() {
  ModelSpec spec;
  spec.input_dim = 2;

  ModelLayer l1;
  l1.type = "affine";
  l1.has_weights = true;
  l1.weights = Tensor::matrix({{4.0, 4.0}, {4.0, -4.0}});
  ModelLayer l2;
  l2.type = "tanh";
  ModelLayer l3;
  l3.type = "affine";
  l3.has_weights = true;
  l3.weights = Tensor::matrix({{-1.0, 1.0}});

  spec.layers = {l1, l2, l3};
  return build_from_spec(spec);
}

std::vector<TanhDemoRow> tanh_demo(const softfloat::FloatFormat& lo, int count,
                                   double range) {
  if (count < 2) throw std::invalid_argument("tanh_demo: count must be >= 2");
  if (!(range > 0.0))
    throw std::invalid_argument("tanh_demo: range must be positive");

  const Graph g = amplification_graph();
  const softfloat::FloatFormat& f64 = softfloat::binary64();

  std::vector<TanhDemoRow> rows;
  rows.reserve(count);
  const double step = 2.0 * range / static_cast<double>(count - 1);
  for (int k = 0; k < count; ++k) {
    TanhDemoRow r;
    r.delta = -range + step * static_cast<double>(k);
    const Tensor x = Tensor::vector({0.0, r.delta});
    r.y_ref = gather_outputs(g, forward(g, x, f64)).values[0];
    r.y_lo =
        gather_outputs(g, forward(g, round_into(lo, x), lo)).values[0];
    r.abs_diff = std::abs(r.y_lo - r.y_ref);
    r.amplification = r.delta != 0.0
                          ? std::abs(r.y_ref) / std::abs(r.delta)
                          : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(r);
  }
  return rows;
}

PrimitiveSweepResult primitive_sweep(const softfloat::FloatFormat& fmt,
                                     int pairs, std::uint64_t seed) {
  if (pairs < 2)
    throw std::invalid_argument("primitive_sweep: pairs must be >= 2");

  SplitMix64 rng(seed);
  const double lo = fmt.min_positive_normal();
  const double hi = fmt.max_finite();
  const double llo = std::log2(lo), lhi = std::log2(hi);

  auto draw_log = [&]() {
    return softfloat::round(fmt, std::exp2(rng.next_uniform(llo, lhi)));
  };
  auto draw_lin = [&]() {
    return softfloat::round(fmt, rng.next_uniform(lo, hi));
  };

  PrimitiveSweepResult res;
  res.rows.reserve(2 * static_cast<std::size_t>(pairs));

  std::vector<double> mul_magnitude, mul_error;
  for (int i = 0; i < pairs; ++i) {
    SweepRow r;
    r.op = "mul";
    r.a = draw_log();
    r.b = draw_log();
    r.exact = r.a * r.b;
    r.rounded = softfloat::round(fmt, r.exact);
    if (std::isfinite(r.rounded)) {
      r.abs_diff = std::abs(r.rounded - r.exact);
      r.rel_diff = r.abs_diff / std::abs(r.exact);
      mul_magnitude.push_back(std::abs(r.exact));
      mul_error.push_back(r.abs_diff);
    } else {
      r.flagged = true;  // overflowed the format: record the overshoot
      r.abs_diff = std::abs(r.exact) - hi;
      r.rel_diff = r.abs_diff / std::abs(r.exact);
    }
    res.rows.push_back(std::move(r));
  }
  res.spearman_mul = spearman_rho(mul_magnitude, mul_error);

  for (int i = 0; i < pairs; ++i) {
    SweepRow r;
    r.op = "add";
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000)
        throw std::runtime_error(
            "primitive_sweep: could not sample a finite sum");
      r.a = draw_lin();
      r.b = draw_lin();
      r.exact = r.a + r.b;
      r.rounded = softfloat::round(fmt, r.exact);
      if (std::isfinite(r.rounded)) break;
    }
    r.abs_diff = std::abs(r.rounded - r.exact);
    r.rel_diff = r.abs_diff / std::abs(r.exact);
    res.rows.push_back(std::move(r));
    ++res.valid_add_rows;
  }
  return res;
}

ModelSpec random_mlp(const std::vector<std::size_t>& widths,
                     const std::string& activation, std::uint64_t seed) {
  if (widths.size() < 2)
    throw std::invalid_argument("random_mlp: need at least two widths");
  for (std::size_t w : widths)
    if (w == 0) throw std::invalid_argument("random_mlp: zero width");

  SplitMix64 rng(seed);
  ModelSpec spec;
  spec.input_dim = widths[0];

  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t in_w = widths[i], out_w = widths[i + 1];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(in_w + out_w));
    Tensor w = Tensor::zeros({out_w, in_w});
    for (double& v : w.values) v = rng.next_uniform(-limit, limit);

    ModelLayer affine;
    affine.type = "affine";
    affine.has_weights = true;
    affine.weights = std::move(w);
    spec.layers.push_back(std::move(affine));

    if (i + 2 < widths.size()) {
      ModelLayer act;
      act.type = activation;
      spec.layers.push_back(std::move(act));
    }
  }
  return spec;
}

std::vector<AblationRow> precision_ablation(
    const Graph& g, const Tensor& x, const Tensor& delta,
    const std::vector<std::string>& formats, AccumulationMode accumulation) {
  const ForwardOptions opts{accumulation, false};
  const Tensor xp_raw = add_tensors(x, delta);

  std::vector<AblationRow> rows;
  for (const std::string& name : formats) {
    const softfloat::FloatFormat& fmt = softfloat::format_by_name(name);
    AblationRow r;
    r.format = name;

    const Tensor xc = round_into(fmt, x);
    const Tensor xp = round_into(fmt, xp_raw);
    const Trace tc = forward(g, xc, fmt, opts);
    const Trace tp = forward(g, xp, fmt, opts);
    r.proxy_clean = proxy_loss(tc);
    r.proxy_perturbed = proxy_loss(tp);
    r.accumulated_diff = accumulated_diff(g, {xp_raw}, fmt,
                                          softfloat::binary64(), opts);
    r.output_l1_change =
        l1_diff(gather_outputs(g, tc), gather_outputs(g, tp));
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

SweepCellResult evaluate_sweep_cell(const Graph& g, const Tensor& xc,
                                    const AttackConfig& base, double epsilon,
                                    PerturbationKind kind,
                                    std::uint64_t seed) {
  const softfloat::FloatFormat& fmt = softfloat::format_by_name(base.format);
  const ForwardOptions opts{base.accumulation, false};

  Tensor delta;
  if (epsilon == 0.0) {
    delta = Tensor::zeros(xc.shape, "binary64");
  } else {
    AttackConfig cfg = base;
    cfg.epsilon = epsilon;
    cfg.seed = seed;
    cfg.record_diff_history = false;
    if (kind == PerturbationKind::optimized)
      delta = run_attack(g, xc, cfg).delta;
    else
      delta = baseline_perturbation(kind, xc, cfg);
  }

  SweepCellResult r;
  r.epsilon = epsilon;
  r.kind = kind;
  r.seed = seed;

  const Tensor xp_raw = add_tensors(xc, delta);
  const Tensor xp = round_into(fmt, xp_raw);
  const Trace tp = forward(g, xp, fmt, opts);
  r.proxy_loss = proxy_loss(tp);
  r.accumulated_diff = accumulated_diff(g, {xp_raw}, softfloat::binary16(),
                                        softfloat::binary32(), opts);
  r.output_l1_change = l1_diff(gather_outputs(g, forward(g, xc, fmt, opts)),
                               gather_outputs(g, tp));
  return r;
}

}  // namespace

std::vector<SweepCellResult> epsilon_sweep(
    const Graph& g, const Tensor& x, const AttackConfig& base,
    const std::vector<double>& epsilons,
    const std::vector<PerturbationKind>& kinds,
    const std::vector<std::uint64_t>& seeds, int jobs) {
  if (epsilons.empty() || kinds.empty() || seeds.empty())
    throw std::invalid_argument("epsilon_sweep: empty grid axis");

  const softfloat::FloatFormat& fmt = softfloat::format_by_name(base.format);
  const Tensor xc = round_into(fmt, x);

  struct Cell {
    double eps;
    PerturbationKind kind;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double e : epsilons)
    for (PerturbationKind k : kinds)
      for (std::uint64_t s : seeds) cells.push_back({e, k, s});

  std::vector<SweepCellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        results[i] = evaluate_sweep_cell(g, xc, base, cells[i].eps,
                                         cells[i].kind, cells[i].seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int nthreads = std::max(1, jobs);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

std::vector<BoundTrialRow> bound_trials(const Graph& g,
                                        const softfloat::FloatFormat& fmt,
                                        int trials, std::uint64_t seed,
                                        BoundRounding rounding) {
  if (trials < 1)
    throw std::invalid_argument("bound_trials: trials must be >= 1");
  if (g.input_shape.empty())
    throw std::invalid_argument("bound_trials: graph has no declared input shape");

  const LipschitzEstimate lip = lipschitz_upper(g);
  SplitMix64 rng(seed);
  const std::size_t d = Tensor::numel(g.input_shape);
  const double tiny = fmt.min_positive_normal();

  std::vector<BoundTrialRow> rows;
  rows.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    Tensor x = Tensor::zeros(g.input_shape);
    for (std::size_t i = 0; i < d; ++i) {
      double v = rng.next_uniform(-1.0, 1.0);
      while (std::abs(v) < tiny) v = rng.next_uniform(-1.0, 1.0);
      x.values[i] = v;
    }
    BoundTrialRow row;
    row.trial = t;
    row.report = check_bound(g, x, fmt, lip, rounding);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace numstress
