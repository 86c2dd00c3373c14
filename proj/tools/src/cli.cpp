#include "nnlsgd_cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "nnlsgd/experiments.hpp"
#include "nnlsgd/problem.hpp"
#include "nnlsgd/table.hpp"
#include "nnlsgd/textdoc.hpp"

namespace nnlsgd::cli {

namespace {

// Bad flag values that CLI11 cannot check on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateOptions {
  std::size_t m = 30;
  std::size_t n = 50;
  std::size_t sparsity = 3;
  double q = 0.0;
  std::uint64_t seed = 0;
  bool normalize = false;
  std::string out;
};

struct SolveOptions {
  std::string input;
  std::string method = "gd";
  int layers = 3;
  double alpha = 1e-2;
  std::string step = "auto";
  std::size_t max_iters = 1'000'000;
  double grad_tol = 1e-10;
  double tol = 1e-10;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  std::size_t trace_every = 100;
  std::string out_report;
  std::string out_trace;
};

struct CheckOptions {
  std::string input;
  std::string solution;
  double tol = 1e-8;
};

struct ExperimentOptions {
  std::string spec;
  std::string kind;
  std::string out;
  std::string format = "csv";
  std::size_t threads = 1;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  bool full_scale = false;
  bool no_wall_time = false;
};

struct Options {
  GenerateOptions gen;
  SolveOptions solve;
  CheckOptions check;
  ExperimentOptions exp;
};

struct App {
  CLI::App app{"Nonnegative least squares via overparametrized gradient descent",
               "nnls"};
  CLI::App* generate = nullptr;
  CLI::App* solve = nullptr;
  CLI::App* check = nullptr;
  CLI::App* experiment = nullptr;
  CLI::Option* solve_seed = nullptr;
  CLI::Option* exp_threads = nullptr;
  CLI::Option* exp_seed = nullptr;
};

std::unique_ptr<App> make_app(Options& o) {
  auto a = std::make_unique<App>();
  CLI::App& app = a->app;
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  a->generate = app.add_subcommand(
      "generate", "Draw a Gaussian instance with a q-perturbed sparse ground truth");
  auto* g = a->generate;
  g->add_option("--m", o.gen.m, "Rows of A")->check(CLI::PositiveNumber);
  g->add_option("--n", o.gen.n, "Columns of A")->check(CLI::PositiveNumber);
  g->add_option("--sparsity", o.gen.sparsity, "Nonzeros of the positive part")
      ->check(CLI::PositiveNumber);
  g->add_option("--q", o.gen.q, "Squared norm of the negative part")
      ->check(CLI::Range(0.0, 1.0));
  g->add_option("--seed", o.gen.seed, "Instance seed (NNLS_SEED overrides)");
  g->add_flag("--normalize-columns", o.gen.normalize,
              "Scale the columns of A to unit norm");
  g->add_option("--out", o.gen.out, "Problem file to write")->required();

  a->solve = app.add_subcommand("solve", "Solve a problem file");
  auto* s = a->solve;
  s->add_option("--input", o.solve.input, "Problem file")->required();
  s->add_option("--method", o.solve.method, "Solver")
      ->check(CLI::IsMember({"gd", "sgd", "pgd", "lh"}));
  s->add_option("--layers", o.solve.layers, "Number of factors L (gd, sgd)");
  s->add_option("--alpha", o.solve.alpha, "Initialization x0 = alpha * 1 (gd, sgd)");
  s->add_option("--step", o.solve.step,
                "Step rule: const:ETA, bb[:ETA0], lipschitz[:K], nesterov:ETA; "
                "auto is const:0.01 for gd/sgd and lipschitz for pgd");
  s->add_option("--max-iters", o.solve.max_iters, "Iteration budget");
  s->add_option("--grad-tol", o.solve.grad_tol,
                "Stop when the sup-norm of the gradient drops below this (gd, sgd)");
  s->add_option("--tol", o.solve.tol,
                "Dual tolerance (lh) or step tolerance (pgd)");
  s->add_option("--batch-size", o.solve.batch_size,
                "Rows per step (sgd); 0 means ceil(M/10)");
  a->solve_seed =
      s->add_option("--seed", o.solve.seed, "Batch seed (sgd; NNLS_SEED overrides)");
  s->add_option("--trace-every", o.solve.trace_every, "Iterations between trace rows")
      ->check(CLI::PositiveNumber);
  s->add_option("--out-report", o.solve.out_report, "Write the report here");
  s->add_option("--out-trace", o.solve.out_trace, "Write the trace CSV here");

  a->check = app.add_subcommand("check", "Verify the KKT conditions of a solution");
  auto* c = a->check;
  c->add_option("--input", o.check.input, "Problem file")->required();
  c->add_option("--solution", o.check.solution,
                "Report or document with an 'x = ...' entry")
      ->required();
  c->add_option("--tol", o.check.tol, "Certification tolerance")
      ->check(CLI::PositiveNumber);

  a->experiment = app.add_subcommand("experiment", "Run an experiment");
  auto* e = a->experiment;
  auto* spec = e->add_option("--spec", o.exp.spec, "Experiment spec file");
  auto* kind = e->add_option("--kind", o.exp.kind,
                             "Run the defaults of a kind instead of a spec file")
                   ->check(CLI::IsMember({"init_sweep", "layer_trace",
                                          "stepsize_race", "stability",
                                          "rate_check", "timing"}));
  spec->excludes(kind);
  e->add_option("--out", o.exp.out, "Output file; stdout when empty");
  e->add_option("--format", o.exp.format, "Output format")
      ->check(CLI::IsMember({"csv", "text"}));
  a->exp_threads = e->add_option("--threads", o.exp.threads,
                                 "Worker threads for independent trials")
                       ->check(CLI::PositiveNumber);
  e->add_option("--trials", o.exp.trials, "Override the trial count; 0 keeps it");
  a->exp_seed = e->add_option("--seed", o.exp.seed,
                              "Override the master seed (NNLS_SEED overrides)");
  e->add_flag("--full-scale", o.exp.full_scale,
              "Use the full-size dimensions for stepsize_race and rate_check");
  e->add_flag("--no-wall-time", o.exp.no_wall_time,
              "Omit wall-clock metadata so the output is byte-reproducible");
  return a;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("NNLS_SEED");
  if (v == nullptr) return std::nullopt;
  const std::string s(v);
  std::size_t used = 0;
  unsigned long long seed = 0;
  try {
    if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
    seed = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw UsageError("NNLS_SEED must be an unsigned integer, got '" + s + "'");
  }
  return seed;
}

double parse_positive(std::string_view text, std::string_view what) {
  const auto v = parse_real(text);
  if (!v || !(*v > 0.0) || !std::isfinite(*v)) {
    throw std::invalid_argument(std::string(what) + " must be a positive number, got '" +
                                std::string(text) + "'");
  }
  return *v;
}

void print_config(std::ostream& out, const std::string& command,
                  const TextDocument& doc) {
  out << "# nnls " << command << '\n';
  for (const auto& e : doc.entries()) out << e.key << " = " << e.value << '\n';
  out << "# ---\n";
}

void print_trace_row(std::ostream& err, const std::vector<TracePoint>& trace) {
  if (trace.empty()) {
    err << "last trace row: none\n";
    return;
  }
  const TracePoint& p = trace.back();
  err << "last trace row: iter=" << p.iter << " time=" << format_real(p.time)
      << " objective=" << format_real(p.objective)
      << " stepsize=" << format_real(p.stepsize)
      << " min_entry=" << format_real(p.min_entry) << '\n';
}

ResultTable trace_table(const std::vector<TracePoint>& trace) {
  ResultTable t({{"iter", ColumnType::Integer},
                 {"time", ColumnType::Real},
                 {"objective", ColumnType::Real},
                 {"residual_yplus_sq", ColumnType::Real},
                 {"l1_norm", ColumnType::Real},
                 {"min_entry", ColumnType::Real},
                 {"stepsize", ColumnType::Real},
                 {"bregman", ColumnType::Real}});
  for (const auto& p : trace) {
    t.add_row({static_cast<std::int64_t>(p.iter), p.time, p.objective,
               p.residual_yplus_sq, p.l1_norm, p.min_entry, p.stepsize,
               p.bregman});
  }
  return t;
}

void add_kkt(TextDocument& d, const KktReport& k, double tol) {
  d.set_real("kkt_primal", k.primal_violation);
  d.set_real("kkt_dual", k.dual_violation);
  d.set_real("kkt_complementarity", k.complementarity);
  d.set_real("kkt_tol", tol);
  d.set("kkt_certified", k.certified(tol) ? "1" : "0");
}

int run_generate(const GenerateOptions& o, std::ostream& out) {
  GenerateOptions r = o;
  if (auto s = env_seed()) r.seed = *s;
  if (r.sparsity > r.n) throw UsageError("--sparsity must not exceed --n");
  TextDocument cfg;
  cfg.set_uint("m", r.m);
  cfg.set_uint("n", r.n);
  cfg.set_uint("sparsity", r.sparsity);
  cfg.set_real("q", r.q);
  cfg.set_uint("seed", r.seed);
  cfg.set_uint("normalize_columns", r.normalize ? 1 : 0);
  cfg.set("out", r.out);
  print_config(out, "generate", cfg);

  DenseMatrix A = gen_gaussian_matrix(r.m, r.n, r.seed);
  if (r.normalize) normalize_columns(A);
  const PerturbedSignal sig =
      make_q_perturbed(gen_sparse_nonneg(r.n, r.sparsity, r.seed), r.q, r.seed);
  const NnlsProblem p =
      make_problem(std::move(A), sig, r.seed,
                   "gaussian m=" + std::to_string(r.m) + " n=" +
                       std::to_string(r.n) + " s=" + std::to_string(r.sparsity) +
                       " q=" + format_real(r.q) + " seed=" + std::to_string(r.seed) +
                       (r.normalize ? " unit-columns" : ""));
  save_problem(p, r.out);
  out << "wrote " << r.out << '\n';
  return kExitOk;
}

int run_solve(const SolveOptions& o, bool seed_given, std::ostream& out,
              std::ostream& err) {
  SolveOptions r = o;
  if (auto s = env_seed()) {
    r.seed = *s;
    seed_given = true;
  }
  const bool factorized = r.method == "gd" || r.method == "sgd";
  if (factorized && r.layers < 2) throw UsageError("layers must be ≥ 2");
  if (!(r.alpha > 0.0) || !std::isfinite(r.alpha)) {
    throw UsageError("--alpha must be > 0");
  }
  if (r.max_iters < 1) throw UsageError("--max-iters must be >= 1");
  if (!(r.grad_tol >= 0.0) || !(r.tol >= 0.0)) {
    throw UsageError("tolerances must be >= 0");
  }
  if (r.step == "auto") r.step = r.method == "pgd" ? "lipschitz:1000" : "const:0.01";
  StepRule rule;
  try {
    rule = parse_step(r.step);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (r.method == "lh" && o.step != "auto") {
    throw UsageError("--step does not apply to --method lh");
  }

  TextDocument cfg;
  cfg.set("input", r.input);
  cfg.set("method", r.method);
  if (factorized) {
    cfg.set_uint("layers", static_cast<std::uint64_t>(r.layers));
    cfg.set_real("alpha", r.alpha);
    cfg.set_real("grad_tol", r.grad_tol);
  }
  if (r.method != "lh") {
    cfg.set("step", describe_step_rule(rule));
    cfg.set_uint("max_iters", r.max_iters);
    cfg.set_uint("trace_every", r.trace_every);
  }
  if (r.method == "pgd" || r.method == "lh") cfg.set_real("tol", r.tol);
  if (r.method == "sgd") {
    cfg.set_uint("batch_size", r.batch_size);
    cfg.set_uint("seed", r.seed);
  } else if (seed_given) {
    throw UsageError("--seed only applies to --method sgd");
  }
  print_config(out, "solve", cfg);

  const NnlsProblem p = load_problem(r.input);
  SolveReport rep;
  try {
    if (factorized) {
      SolverConfig sc;
      sc.layers = r.layers;
      sc.init = uniform_init(p.n(), r.alpha);
      sc.step_rule = rule;
      sc.max_iters = r.max_iters;
      sc.grad_tol = r.grad_tol;
      sc.trace_every = r.trace_every;
      sc.seed = r.seed;
      sc.batch_size = r.batch_size;
      if (r.method == "sgd" && r.batch_size > p.m()) {
        throw UsageError("--batch-size exceeds the number of rows");
      }
      rep = r.method == "gd" ? solve_gd(p, sc) : solve_sgd(p, sc);
    } else if (r.method == "pgd") {
      PgdConfig pc;
      pc.step_rule = rule;
      pc.max_iters = r.max_iters;
      pc.tol = r.tol;
      pc.trace_every = r.trace_every;
      rep = solve_pgd(p, pc);
    } else {
      rep = solve_lawson_hanson(p, r.tol);
    }
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    print_trace_row(err, e.trace());
    if (!r.out_trace.empty()) emit_table(trace_table(e.trace()), r.out_trace, TableFormat::Csv);
    return kExitFailure;
  }

  TextDocument report;
  report.add_comment("nnls-report v1");
  report.set("method", r.method);
  report.set_uint("iterations", rep.iterations);
  report.set("stop_reason", to_string(rep.stop_reason));
  report.set_real("objective", rep.objective_final);
  add_kkt(report, rep.kkt, 1e-8);
  if (rep.sign_flip_iteration) report.set_uint("sign_flip_iteration", *rep.sign_flip_iteration);
  if (r.method == "lh") report.set("rank_deficient", rep.rank_deficient ? "1" : "0");
  report.set_reals("x", rep.x_final);
  out << report.to_string();
  if (!r.out_report.empty()) report.write_file(r.out_report);
  if (!r.out_trace.empty()) emit_table(trace_table(rep.trace), r.out_trace, TableFormat::Csv);
  return kExitOk;
}

int run_check(const CheckOptions& o, std::ostream& out) {
  TextDocument cfg;
  cfg.set("input", o.input);
  cfg.set("solution", o.solution);
  cfg.set_real("tol", o.tol);
  print_config(out, "check", cfg);

  const NnlsProblem p = load_problem(o.input);
  const TextDocument sol = TextDocument::read_file(o.solution);
  const Vector x = sol.required_reals("x");
  const KktReport k = kkt_check(p.A, p.y, x, o.tol);
  out << "primal_violation = " << format_real(k.primal_violation) << '\n'
      << "dual_violation = " << format_real(k.dual_violation) << '\n'
      << "complementarity = " << format_real(k.complementarity) << '\n'
      << "certified = " << (k.certified(o.tol) ? "yes" : "no") << '\n';
  return k.certified(o.tol) ? kExitOk : kExitFailure;
}

int run_experiment_cmd(const ExperimentOptions& o, bool threads_given,
                       bool seed_given, std::ostream& out) {
  if (o.spec.empty() && o.kind.empty()) {
    throw UsageError("experiment needs --spec or --kind");
  }
  ExperimentSpec spec = o.spec.empty()
                            ? ExperimentSpec::defaults(*parse_experiment_kind(o.kind))
                            : ExperimentSpec::from_file(o.spec);
  if (o.full_scale) {
    if (spec.kind == ExperimentKind::StepsizeRace) {
      spec.m = 512;
      spec.n = 1024;
      spec.sparsity = 16;
    } else if (spec.kind == ExperimentKind::RateCheck) {
      spec.m = 2048;
      spec.n = 1024;
    } else {
      throw UsageError("--full-scale applies to stepsize_race and rate_check");
    }
  }
  if (o.trials > 0) spec.trials = o.trials;
  if (seed_given) spec.master_seed = o.seed;
  if (auto s = env_seed()) spec.master_seed = *s;
  if (threads_given) spec.threads = o.threads;
  try {
    spec.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  print_config(out, "experiment", spec.to_document());

  ResultTable table = run_experiment(spec);
  if (o.no_wall_time) table.erase_meta("wall_seconds");
  const TableFormat fmt = o.format == "text" ? TableFormat::Text : TableFormat::Csv;
  if (o.out.empty()) {
    if (fmt == TableFormat::Text) {
      write_text(table, out);
    } else {
      write_csv(table, out);
    }
  } else {
    emit_table(table, o.out, fmt);
    out << "wrote " << o.out << " (" << table.num_rows() << " rows)\n";
  }
  return kExitOk;
}

}  // namespace

StepRule parse_step(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::optional<std::string_view> arg =
      colon == std::string_view::npos ? std::nullopt
                                      : std::optional(text.substr(colon + 1));
  if (name == "const") {
    if (!arg) throw std::invalid_argument("const step needs a value, e.g. const:0.01");
    return ConstantStep{parse_positive(*arg, "const step")};
  }
  if (name == "bb") {
    return BarzilaiBorweinStep{arg ? parse_positive(*arg, "bb initial step") : 1e-2};
  }
  if (name == "lipschitz") {
    LipschitzOracleStep s;
    if (arg) {
      const double k = parse_positive(*arg, "lipschitz refresh interval");
      if (k != std::floor(k)) {
        throw std::invalid_argument("lipschitz refresh interval must be an integer");
      }
      s.refresh_every = static_cast<std::size_t>(k);
    }
    return s;
  }
  if (name == "nesterov") {
    if (!arg) throw std::invalid_argument("nesterov step needs a value, e.g. nesterov:0.01");
    return NesterovStep{parse_positive(*arg, "nesterov step")};
  }
  throw std::invalid_argument("unknown step rule '" + std::string(text) + "'");
}

std::string help_text(std::string_view command) {
  Options o;
  auto a = make_app(o);
  const CLI::App* target = &a->app;
  if (!command.empty()) target = a->app.get_subcommand(std::string(command));
  return target->help();
}

int dispatch(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
  Options o;
  auto a = make_app(o);
  try {
    a->app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* sub = nullptr;
    for (const CLI::App* s : a->app.get_subcommands()) sub = s;
    out << (sub != nullptr ? sub->help() : a->app.help());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << library_version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (a->generate->parsed()) return run_generate(o.gen, out);
    if (a->solve->parsed()) {
      return run_solve(o.solve, a->solve_seed->count() > 0, out, err);
    }
    if (a->check->parsed()) return run_check(o.check, out);
    return run_experiment_cmd(o.exp, a->exp_threads->count() > 0,
                              a->exp_seed->count() > 0, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace nnlsgd::cli
