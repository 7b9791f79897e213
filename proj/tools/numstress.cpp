// numstress: emulate reduced-precision IEEE arithmetic, trace rounding error
// against a high-precision shadow run, search for error-maximizing input
// perturbations, and check forward error bounds.
//
// Exit codes: 0 success; 2 malformed input file or model; 3 non-finite
// intermediates encountered with --fail-on-nonfinite; 4 internal error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "numstress/attack.hpp"
#include "numstress/bounds.hpp"
#include "numstress/experiments.hpp"
#include "numstress/graph.hpp"
#include "numstress/io.hpp"
#include "numstress/rng.hpp"
#include "numstress/shadow.hpp"
#include "numstress/softfloat.hpp"

namespace {

using namespace numstress;

constexpr int EXIT_SCHEMA = 2;
constexpr int EXIT_NONFINITE = 3;
constexpr int EXIT_INTERNAL = 4;

struct GlobalOpts {
  std::string format = "binary16";
  std::string accumulation = "strict";
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 1;
  bool fail_on_nonfinite = false;
};

// Sink for CSV/JSON payloads: --out path, or stdout when omitted.
class OutSink {
 public:
  explicit OutSink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write file: " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

const softfloat::FloatFormat& global_format(const GlobalOpts& g) {
  return softfloat::format_by_name(g.format);
}

AccumulationMode global_accumulation(const GlobalOpts& g) {
  return accumulation_from_name(g.accumulation);
}

Tensor input_or_random(const std::string& input_path, const Graph& g,
                       std::uint64_t seed) {
  if (!input_path.empty()) {
    Tensor x = load_tensor(input_path);
    if (!g.input_shape.empty() && x.shape != g.input_shape)
      throw SchemaError(input_path + ": input shape does not match the model");
    return x;
  }
  if (g.input_shape.empty())
    throw SchemaError("model declares no input shape; pass --input");
  Tensor x = Tensor::zeros(g.input_shape);
  SplitMix64 rng(mix_seed(seed, 0xA11CEull));
  for (double& v : x.values) v = rng.next_unit();
  return x;
}

std::string bool_cell(bool b) { return b ? "1" : "0"; }

// ---- primitive-sweep -------------------------------------------------------

int run_primitive_sweep(const GlobalOpts& g, int pairs, bool flush_subnormals) {
  softfloat::FloatFormat fmt = global_format(g);
  fmt.subnormals_enabled = !flush_subnormals;

  const PrimitiveSweepResult res = primitive_sweep(fmt, pairs, g.seed);

  OutSink sink(g.out);
  std::ostringstream cfg;
  cfg << "cmd=primitive-sweep format=" << fmt.name << " pairs=" << pairs
      << " seed=" << g.seed << " flush_subnormals=" << flush_subnormals;
  CsvWriter csv(sink.stream(), cfg.str(),
                {"op", "a", "b", "result_ref", "result_rounded", "abs_diff",
                 "rel_diff", "flagged"});
  for (const SweepRow& r : res.rows)
    csv.row({r.op, CsvWriter::cell(r.a), CsvWriter::cell(r.b),
             CsvWriter::cell(r.exact), CsvWriter::cell(r.rounded),
             CsvWriter::cell(r.abs_diff), CsvWriter::cell(r.rel_diff),
             bool_cell(r.flagged)});

  std::cerr << "primitive-sweep: spearman(|a*b|, abs_diff) = "
            << format_g17(res.spearman_mul)
            << ", valid add rows = " << res.valid_add_rows << '\n';
  return 0;
}

// ---- tanh-demo -------------------------------------------------------------

int run_tanh_demo(const GlobalOpts& g, int count, double range,
                  bool flush_subnormals) {
  softfloat::FloatFormat fmt = global_format(g);
  fmt.subnormals_enabled = !flush_subnormals;

  const auto rows = tanh_demo(fmt, count, range);

  OutSink sink(g.out);
  std::ostringstream cfg;
  cfg << "cmd=tanh-demo format=" << fmt.name << " count=" << count
      << " range=" << format_g17(range);
  CsvWriter csv(sink.stream(), cfg.str(),
                {"delta", "y_ref", "y_lo", "abs_diff", "amplification"});
  for (const TanhDemoRow& r : rows)
    csv.row({CsvWriter::cell(r.delta), CsvWriter::cell(r.y_ref),
             CsvWriter::cell(r.y_lo), CsvWriter::cell(r.abs_diff),
             CsvWriter::cell(r.amplification)});
  return 0;
}

// ---- attack ----------------------------------------------------------------

int run_attack_cmd(const GlobalOpts& g, const std::string& model_path,
                   const std::string& input_path, double epsilon, double alpha,
                   int iterations, const std::string& optimizer,
                   double weight_decay, const std::string& kind_str,
                   bool no_diff_history) {
  const Graph graph = load_model(model_path);
  const Tensor x = input_or_random(input_path, graph, g.seed);

  AttackConfig cfg;
  cfg.format = g.format;
  cfg.accumulation = global_accumulation(g);
  cfg.epsilon = epsilon;
  cfg.alpha = alpha;
  cfg.iterations = iterations;
  cfg.optimizer = optimizer_from_name(optimizer);
  cfg.adaptive.weight_decay = weight_decay;
  cfg.seed = g.seed;
  cfg.record_diff_history = !no_diff_history;
  cfg.validate();

  const PerturbationKind kind = kind_from_token(kind_str);
  AttackReport rep;
  if (kind == PerturbationKind::optimized) {
    rep = run_attack(graph, x, cfg);
  } else {
    // one-shot baseline: metrics at the drawn perturbation only
    const softfloat::FloatFormat& fmt = global_format(g);
    const Tensor xc = round_into(fmt, x);
    const Tensor delta = baseline_perturbation(kind, xc, cfg);
    Tensor xp = xc;
    for (std::size_t i = 0; i < xp.size(); ++i)
      xp.values[i] += delta.values[i];
    const ForwardOptions opts{cfg.accumulation, false};
    const Trace tr = forward(graph, round_into(fmt, xp), fmt, opts);
    rep.config = cfg;
    rep.delta = delta;
    rep.loss_history = {proxy_loss(tr)};
    if (cfg.record_diff_history)
      rep.diff_history = {accumulated_diff(graph, {xp}, softfloat::binary16(),
                                           softfloat::binary32(), opts)};
    rep.initial_loss = rep.loss_history.front();
    rep.final_loss = rep.loss_history.back();
    if (tr.any_nonfinite())
      rep.events.push_back("non-finite activations at the baseline input");
  }

  OutSink sink(g.out);
  sink.stream() << attack_report_to_json(rep) << '\n';

  std::cerr << "attack: kind=" << kind_token(kind)
            << " initial_loss=" << format_g17(rep.initial_loss)
            << " final_loss=" << format_g17(rep.final_loss) << '\n';

  bool nonfinite = false;
  for (const std::string& e : rep.events)
    if (e.find("non-finite") != std::string::npos) nonfinite = true;
  return (g.fail_on_nonfinite && nonfinite) ? EXIT_NONFINITE : 0;
}

// ---- precision-ablation ------------------------------------------------------

int run_ablation(const GlobalOpts& g, const std::string& model_path,
                 const std::string& input_path,
                 std::vector<std::string> formats, double epsilon,
                 double alpha, int iterations) {
  const Graph graph = load_model(model_path);
  const Tensor x = input_or_random(input_path, graph, g.seed);

  AttackConfig cfg;
  cfg.format = g.format;  // the format the perturbation is generated under
  cfg.accumulation = global_accumulation(g);
  cfg.epsilon = epsilon;
  cfg.alpha = alpha;
  cfg.iterations = iterations;
  cfg.seed = g.seed;
  cfg.record_diff_history = false;

  const AttackReport rep = run_attack(graph, x, cfg);
  const auto rows =
      precision_ablation(graph, round_into(global_format(g), x), rep.delta,
                         formats, cfg.accumulation);

  OutSink sink(g.out);
  std::ostringstream cc;
  cc << "cmd=precision-ablation gen_format=" << g.format
     << " epsilon=" << format_g17(epsilon) << " alpha=" << format_g17(alpha)
     << " iterations=" << iterations << " seed=" << g.seed
     << " accumulation=" << g.accumulation;
  CsvWriter csv(sink.stream(), cc.str(),
                {"format", "proxy_clean", "proxy_perturbed",
                 "accumulated_diff", "output_l1_change"});
  bool nonfinite = false;
  for (const AblationRow& r : rows) {
    csv.row({r.format, CsvWriter::cell(r.proxy_clean),
             CsvWriter::cell(r.proxy_perturbed),
             CsvWriter::cell(r.accumulated_diff),
             CsvWriter::cell(r.output_l1_change)});
    if (!std::isfinite(r.proxy_perturbed) || !std::isfinite(r.proxy_clean))
      nonfinite = true;
  }
  return (g.fail_on_nonfinite && nonfinite) ? EXIT_NONFINITE : 0;
}

// ---- epsilon-sweep -----------------------------------------------------------

int run_epsilon_sweep(const GlobalOpts& g, const std::string& model_path,
                      const std::string& input_path,
                      std::vector<double> epsilons,
                      const std::string& kinds_str,
                      std::vector<std::uint64_t> seeds, int num_seeds,
                      double alpha, int iterations) {
  const Graph graph = load_model(model_path);
  const Tensor x = input_or_random(input_path, graph, g.seed);

  if (epsilons.empty())
    epsilons = {4.0 / 255, 8.0 / 255, 16.0 / 255, 32.0 / 255, 64.0 / 255};
  if (seeds.empty())
    for (int s = 1; s <= num_seeds; ++s)
      seeds.push_back(static_cast<std::uint64_t>(s));

  std::vector<PerturbationKind> kinds;
  std::stringstream ks(kinds_str);
  std::string tok;
  while (std::getline(ks, tok, ','))
    if (!tok.empty()) kinds.push_back(kind_from_token(tok));
  if (kinds.empty()) throw SchemaError("epsilon-sweep: no kinds given");

  AttackConfig base;
  base.format = g.format;
  base.accumulation = global_accumulation(g);
  base.alpha = alpha;
  base.iterations = iterations;
  base.seed = g.seed;

  const auto results =
      epsilon_sweep(graph, x, base, epsilons, kinds, seeds, g.jobs);

  OutSink sink(g.out);
  std::ostringstream cc;
  cc << "cmd=epsilon-sweep format=" << g.format << " accumulation="
     << g.accumulation << " alpha=" << format_g17(alpha)
     << " iterations=" << iterations << " seed=" << g.seed;
  CsvWriter csv(sink.stream(), cc.str(),
                {"epsilon", "kind", "seed", "proxy_loss", "accumulated_diff",
                 "output_l1_change"});
  for (const SweepCellResult& r : results)
    csv.row({CsvWriter::cell(r.epsilon), kind_token(r.kind),
             std::to_string(r.seed), CsvWriter::cell(r.proxy_loss),
             CsvWriter::cell(r.accumulated_diff),
             CsvWriter::cell(r.output_l1_change)});
  return 0;
}

// ---- random-model ------------------------------------------------------------

int run_random_model(const GlobalOpts& g, std::vector<std::size_t> widths,
                     const std::string& activation) {
  if (widths.empty()) widths = {8, 16, 16, 4};
  const ModelSpec spec = random_mlp(widths, activation, g.seed);
  if (g.out.empty())
    throw std::runtime_error("random-model: --out is required");
  save_model_spec(spec, g.out);
  std::cerr << "random-model: wrote " << g.out << '\n';
  return 0;
}

// ---- bound-check ---------------------------------------------------------------

int run_bound_check(const GlobalOpts& g, const std::string& model_path,
                    int trials, const std::string& mode) {
  const Graph graph = load_model(model_path);
  const softfloat::FloatFormat& fmt = global_format(g);
  const BoundRounding rounding = mode == "full" ? BoundRounding::full
                                                : BoundRounding::endpoints;

  const auto rows = bound_trials(graph, fmt, trials, g.seed, rounding);

  OutSink sink(g.out);
  std::ostringstream cc;
  cc << "cmd=bound-check format=" << fmt.name << " trials=" << trials
     << " seed=" << g.seed << " mode=" << mode;
  CsvWriter csv(sink.stream(), cc.str(),
                {"trial", "input_norm", "output_norm", "measured_error",
                 "term_input", "term_result", "term_second_order", "bound",
                 "lipschitz", "unit_roundoff", "nonfinite", "satisfied"});
  bool nonfinite = false;
  std::size_t satisfied = 0;
  for (const BoundTrialRow& r : rows) {
    const BoundReport& b = r.report;
    csv.row({CsvWriter::cell(r.trial), CsvWriter::cell(b.input_norm),
             CsvWriter::cell(b.output_norm), CsvWriter::cell(b.measured_error),
             CsvWriter::cell(b.term_input), CsvWriter::cell(b.term_result),
             CsvWriter::cell(b.term_second_order), CsvWriter::cell(b.bound),
             CsvWriter::cell(b.lipschitz), CsvWriter::cell(b.unit_roundoff),
             bool_cell(b.nonfinite), bool_cell(b.satisfied)});
    nonfinite = nonfinite || b.nonfinite;
    satisfied += b.satisfied ? 1 : 0;
  }
  std::cerr << "bound-check: " << satisfied << "/" << rows.size()
            << " trials satisfied the bound\n";
  return (g.fail_on_nonfinite && nonfinite) ? EXIT_NONFINITE : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "reduced-precision arithmetic emulation, shadow error tracing, "
      "perturbation search, and forward error bound checks"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--format", g.format, "compute format")
      ->check(CLI::IsMember(softfloat::format_names()));
  app.add_option("--accumulation", g.accumulation,
                 "reduction mode: strict (round every step) or wide")
      ->check(CLI::IsMember({"strict", "wide"}));
  app.add_option("--seed", g.seed, "PRNG seed");
  app.add_option("--out", g.out, "output file (stdout when omitted)");
  app.add_option("--jobs", g.jobs, "worker threads for independent cells")
      ->check(CLI::PositiveNumber);
  app.add_flag("--fail-on-nonfinite", g.fail_on_nonfinite,
               "exit 3 if any run produced non-finite intermediates");

  int rc = 0;

  // primitive-sweep
  auto* sweep = app.add_subcommand(
      "primitive-sweep", "per-operation rounding error survey (mul, add)");
  sweep->fallthrough();
  int sweep_pairs = 300;
  bool sweep_flush = false;
  sweep->add_option("--pairs", sweep_pairs, "operand pairs per operation")
      ->check(CLI::Range(2, 10000000));
  sweep->add_flag("--flush-subnormals", sweep_flush,
                  "flush subnormal results to zero");
  sweep->callback([&] { rc = run_primitive_sweep(g, sweep_pairs, sweep_flush); });

  // tanh-demo
  auto* demo = app.add_subcommand(
      "tanh-demo", "fixed 2-2-1 tanh network with ~8x input gain");
  demo->fallthrough();
  int demo_count = 1000;
  double demo_range = 0.25;
  bool demo_flush = false;
  demo->add_option("--count", demo_count, "grid points")
      ->check(CLI::Range(2, 10000000));
  demo->add_option("--range", demo_range, "half-width of the delta grid");
  demo->add_flag("--flush-subnormals", demo_flush,
                 "flush subnormal results to zero");
  demo->callback([&] { rc = run_tanh_demo(g, demo_count, demo_range, demo_flush); });

  // attack
  auto* atk = app.add_subcommand(
      "attack", "budgeted perturbation search maximizing the proxy loss");
  atk->fallthrough();
  std::string atk_model, atk_input;
  double atk_eps = 16.0 / 255, atk_alpha = 0.01, atk_wd = 0.2;
  int atk_iters = 100;
  std::string atk_opt = "sign_ascent", atk_kind = "NUM";
  bool atk_nodiff = false;
  atk->add_option("--model", atk_model, "model JSON")->required();
  atk->add_option("--input", atk_input,
                  "input tensor (random in [0,1)^d from --seed when omitted)");
  atk->add_option("--epsilon", atk_eps, "L-inf budget");
  atk->add_option("--alpha", atk_alpha, "step size");
  atk->add_option("--iterations", atk_iters, "optimizer steps");
  atk->add_option("--optimizer", atk_opt)
      ->check(CLI::IsMember({"sign_ascent", "adaptive_moment"}));
  atk->add_option("--weight-decay", atk_wd, "adaptive_moment decay");
  atk->add_option("--kind", atk_kind, "NUM, NONE, RAND or GAUS");
  atk->add_flag("--no-diff-history", atk_nodiff,
                "skip per-iteration divergence evaluation");
  atk->callback([&] {
    rc = run_attack_cmd(g, atk_model, atk_input, atk_eps, atk_alpha, atk_iters,
                        atk_opt, atk_wd, atk_kind, atk_nodiff);
  });

  // precision-ablation
  auto* abl = app.add_subcommand(
      "precision-ablation",
      "evaluate one perturbation across number formats");
  abl->fallthrough();
  std::string abl_model, abl_input;
  std::vector<std::string> abl_formats = {"binary16", "bfloat16", "binary32",
                                          "binary64"};
  double abl_eps = 16.0 / 255, abl_alpha = 0.01;
  int abl_iters = 100;
  abl->add_option("--model", abl_model, "model JSON")->required();
  abl->add_option("--input", abl_input, "input tensor");
  abl->add_option("--formats", abl_formats, "formats to evaluate")
      ->delimiter(',');
  abl->add_option("--epsilon", abl_eps, "budget for the generating attack");
  abl->add_option("--alpha", abl_alpha, "step size");
  abl->add_option("--iterations", abl_iters, "optimizer steps");
  abl->callback([&] {
    rc = run_ablation(g, abl_model, abl_input, abl_formats, abl_eps, abl_alpha,
                      abl_iters);
  });

  // epsilon-sweep
  auto* eps = app.add_subcommand(
      "epsilon-sweep", "perturbation kinds across L-inf budgets");
  eps->fallthrough();
  std::string eps_model, eps_input, eps_kinds = "NUM,NONE,RAND,GAUS";
  std::vector<double> eps_budgets;
  std::vector<std::uint64_t> eps_seeds;
  int eps_nseeds = 3, eps_iters = 100;
  double eps_alpha = 0.01;
  eps->add_option("--model", eps_model, "model JSON")->required();
  eps->add_option("--input", eps_input, "input tensor");
  eps->add_option("--epsilons", eps_budgets, "budget grid")->delimiter(',');
  eps->add_option("--kinds", eps_kinds, "comma list of NUM,NONE,RAND,GAUS");
  eps->add_option("--seeds", eps_seeds, "explicit seed list")->delimiter(',');
  eps->add_option("--num-seeds", eps_nseeds, "seeds 1..N when --seeds absent");
  eps->add_option("--alpha", eps_alpha, "step size");
  eps->add_option("--iterations", eps_iters, "optimizer steps");
  eps->callback([&] {
    rc = run_epsilon_sweep(g, eps_model, eps_input, eps_budgets, eps_kinds,
                           eps_seeds, eps_nseeds, eps_alpha, eps_iters);
  });

  // random-model
  auto* rnd = app.add_subcommand("random-model",
                                 "write a seeded fully-connected model");
  rnd->fallthrough();
  std::vector<std::size_t> rnd_widths;
  std::string rnd_act = "tanh";
  rnd->add_option("--widths", rnd_widths, "layer widths (default 8,16,16,4)")
      ->delimiter(',');
  rnd->add_option("--activation", rnd_act)
      ->check(CLI::IsMember({"tanh", "relu", "exp", "softmax", "layernorm"}));
  rnd->callback([&] { rc = run_random_model(g, rnd_widths, rnd_act); });

  // bound-check
  auto* bnd = app.add_subcommand(
      "bound-check", "numerical trials of the forward error bound");
  bnd->fallthrough();
  std::string bnd_model, bnd_mode = "endpoints";
  int bnd_trials = 100;
  bnd->add_option("--model", bnd_model, "model JSON")->required();
  bnd->add_option("--trials", bnd_trials)->check(CLI::PositiveNumber);
  bnd->add_option("--mode", bnd_mode, "endpoints or full")
      ->check(CLI::IsMember({"endpoints", "full"}));
  bnd->callback([&] { rc = run_bound_check(g, bnd_model, bnd_trials, bnd_mode); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_SCHEMA;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_SCHEMA;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return EXIT_INTERNAL;
  }
  return rc;
}
