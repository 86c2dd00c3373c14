#include "nnlsgd/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "nnlsgd/errors.hpp"
#include "nnlsgd/problem.hpp"
#include "nnlsgd/rng.hpp"
#include "nnlsgd/solvers.hpp"

#ifndef NNLSGD_VERSION_STRING
#define NNLSGD_VERSION_STRING "0.0.0"
#endif

namespace nnlsgd {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<std::string_view, 8> kRaceMethods = {
    "gd2", "gd3", "sgd2", "gd2-bb", "gd3-bb", "pgd", "gd2-nesterov",
    "gd3-nesterov"};
constexpr std::array<std::string_view, 7> kStabilityMethods = {
    "lh", "pgd", "gd2", "gd3", "sgd2", "sgd3", "pgd-bb"};
constexpr std::array<std::string_view, 3> kTimingMethods = {"pgd", "gd2",
                                                            "gd3"};

constexpr std::array<std::string_view, 23> kSpecKeys = {
    "kind",        "m",           "n",
    "sparsity",    "alpha_grid",  "q_grid",
    "alpha",       "eta",         "layers",
    "trials",      "master_seed", "max_iters",
    "precision",   "normalize_columns", "trace_every",
    "methods",     "curve_trials", "t_end",
    "dt",          "noise_level", "sizes",
    "refresh_every", "threads"};

std::string join_strings(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += v[i];
  }
  return s;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != ',') ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

bool contains(std::span<const std::string_view> set, std::string_view v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

// Runs body(i) for i in [0, n) on up to `threads` workers. The first
// exception (by index) is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::uint64_t trial_seed(const ExperimentSpec& s, std::size_t i) {
  return s.master_seed + i;
}

DenseMatrix make_matrix(const ExperimentSpec& s, std::size_t m, std::size_t n,
                        std::uint64_t seed) {
  DenseMatrix A = gen_gaussian_matrix(m, n, seed);
  if (s.normalize_columns) normalize_columns(A);
  return A;
}

NnlsProblem sparse_instance(const ExperimentSpec& s, std::uint64_t seed,
                            double q) {
  const PerturbedSignal sig =
      make_q_perturbed(gen_sparse_nonneg(s.n, s.sparsity, seed), q, seed);
  return make_problem(make_matrix(s, s.m, s.n, seed), sig, seed,
                      "trial seed " + std::to_string(seed));
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double max_violation(const KktReport& k) {
  return std::max({k.primal_violation, k.dual_violation, k.complementarity});
}

std::string matrix_note(const ExperimentSpec& s) {
  return s.normalize_columns ? "gaussian N(0,1), columns scaled to unit norm"
                             : "gaussian N(0,1)";
}

void add_common_meta(ResultTable& t, const ExperimentSpec& s) {
  t.set_meta("experiment", to_string(s.kind));
  t.set_meta("version", library_version());
  const TextDocument doc = s.to_document();
  for (const auto& e : doc.entries()) {
    t.set_meta("spec." + e.key, e.value);
  }
}

void finish_meta(ResultTable& t, Clock::time_point t0) {
  t.set_meta("wall_seconds",
             format_real(std::chrono::duration<double>(Clock::now() - t0)
                             .count()));
}

struct MethodOutcome {
  std::string status;
  Vector x;
  double iterations = kInf;
  double residual = kNaN;
  double kkt = kNaN;
  std::vector<TracePoint> trace;
};

std::string status_of(StopReason r) {
  switch (r) {
    case StopReason::TargetReached: return "reached";
    case StopReason::MaxIters: return "budget-exhausted";
    default: return to_string(r);
  }
}

}  // namespace

const char* library_version() noexcept { return NNLSGD_VERSION_STRING; }

const char* to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::InitSweep: return "init_sweep";
    case ExperimentKind::LayerTrace: return "layer_trace";
    case ExperimentKind::StepsizeRace: return "stepsize_race";
    case ExperimentKind::Stability: return "stability";
    case ExperimentKind::RateCheck: return "rate_check";
    case ExperimentKind::Timing: return "timing";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::InitSweep, ExperimentKind::LayerTrace,
                 ExperimentKind::StepsizeRace, ExperimentKind::Stability,
                 ExperimentKind::RateCheck, ExperimentKind::Timing}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::span<const std::string_view> race_methods() noexcept {
  return kRaceMethods;
}
std::span<const std::string_view> stability_methods() noexcept {
  return kStabilityMethods;
}

ExperimentSpec ExperimentSpec::defaults(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  switch (kind) {
    case ExperimentKind::InitSweep:
      s.m = 10;
      s.n = 50;
      s.sparsity = 3;
      s.alpha_grid = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
      s.layers_list = {2, 3};
      s.trials = 10;
      break;
    case ExperimentKind::LayerTrace:
      s.m = 30;
      s.n = 50;
      s.sparsity = 3;
      s.layers_list = {2, 3};
      break;
    case ExperimentKind::StepsizeRace:
      s.m = 128;
      s.n = 256;
      s.sparsity = 4;
      s.alpha = 1.0;
      s.eta = 0.02;
      s.trials = 25;
      s.max_iters = 100'000;
      s.normalize_columns = true;
      s.methods = {"gd2", "gd3", "sgd2", "gd2-bb", "gd3-bb", "pgd"};
      break;
    case ExperimentKind::Stability:
      s.m = 30;
      s.n = 50;
      s.sparsity = 3;
      s.q_grid = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
      s.trials = 20;
      s.max_iters = 10'000;
      s.methods = {"lh", "pgd", "gd3", "sgd3"};
      break;
    case ExperimentKind::RateCheck:
      s.m = 256;
      s.n = 128;
      s.alpha = 1.0;
      s.trials = 10;
      s.layers_list = {3};
      s.normalize_columns = true;
      s.methods = {"flow", "gd"};
      break;
    case ExperimentKind::Timing:
      s.m = 256;
      s.n = 256;
      s.alpha = 0.02;
      s.trials = 3;
      s.max_iters = 10'000;
      s.normalize_columns = true;
      s.methods = {"pgd", "gd2", "gd3"};
      s.sizes = {64, 128, 256};
      break;
  }
  return s;
}

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  if (trials < 1) fail("trials must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be > 0");
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be > 0");
  if (max_iters < 1) fail("max_iters must be >= 1");
  if (trace_every < 1) fail("trace_every must be >= 1");
  if (m < 1 || n < 1) fail("m and n must be >= 1");
  for (int L : layers_list)
    if (L < 2) fail("layers must be ≥ 2");

  const bool sparse = kind == ExperimentKind::InitSweep ||
                      kind == ExperimentKind::LayerTrace ||
                      kind == ExperimentKind::StepsizeRace ||
                      kind == ExperimentKind::Stability;
  if (sparse && (sparsity < 1 || sparsity > n)) {
    fail("sparsity must satisfy 1 <= sparsity <= n");
  }
  switch (kind) {
    case ExperimentKind::InitSweep:
      if (alpha_grid.empty()) fail("alpha_grid must be nonempty");
      for (double a : alpha_grid)
        if (!(a > 0.0)) fail("alpha_grid entries must be > 0");
      if (layers_list.empty()) fail("layers must be nonempty");
      break;
    case ExperimentKind::LayerTrace:
      if (layers_list.empty()) fail("layers must be nonempty");
      break;
    case ExperimentKind::StepsizeRace:
      if (methods.empty()) fail("methods must be nonempty");
      for (const auto& mth : methods)
        if (!contains(kRaceMethods, mth)) fail("unknown race method '" + mth + "'");
      if (!(precision > 0.0)) fail("precision must be > 0");
      break;
    case ExperimentKind::Stability:
      if (q_grid.empty()) fail("q_grid must be nonempty");
      for (double q : q_grid)
        if (!(q >= 0.0 && q <= 1.0)) fail("q_grid entries must lie in [0, 1]");
      if (methods.empty()) fail("methods must be nonempty");
      for (const auto& mth : methods)
        if (!contains(kStabilityMethods, mth)) {
          fail("unknown stability method '" + mth + "'");
        }
      break;
    case ExperimentKind::RateCheck:
      if (layers_list.empty()) fail("layers must be nonempty");
      if (!(dt > 0.0) || !(t_end > dt)) fail("need dt > 0 and t_end > dt");
      if (!(noise_level >= 0.0)) fail("noise_level must be >= 0");
      if (methods.empty()) fail("methods must be nonempty");
      for (const auto& mth : methods)
        if (mth != "flow" && mth != "gd") fail("unknown rate method '" + mth + "'");
      break;
    case ExperimentKind::Timing:
      if (sizes.empty()) fail("sizes must be nonempty");
      for (auto sz : sizes)
        if (sz < 1) fail("sizes must be >= 1");
      if (refresh_every < 1) fail("refresh_every must be >= 1");
      if (methods.empty()) fail("methods must be nonempty");
      for (const auto& mth : methods)
        if (!contains(kTimingMethods, mth)) fail("unknown timing method '" + mth + "'");
      break;
  }
}

TextDocument ExperimentSpec::to_document() const {
  TextDocument d;
  d.add_comment("nnls-experiment v1");
  d.set("kind", to_string(kind));
  d.set_uint("m", m);
  d.set_uint("n", n);
  d.set_uint("sparsity", sparsity);
  d.set_reals("alpha_grid", alpha_grid);
  d.set_reals("q_grid", q_grid);
  d.set_real("alpha", alpha);
  d.set_real("eta", eta);
  d.set_ints("layers", layers_list);
  d.set_uint("trials", trials);
  d.set_uint("master_seed", master_seed);
  d.set_uint("max_iters", max_iters);
  d.set_real("precision", precision);
  d.set_uint("normalize_columns", normalize_columns ? 1 : 0);
  d.set_uint("trace_every", trace_every);
  d.set("methods", join_strings(methods));
  d.set_uint("curve_trials", curve_trials);
  d.set_real("t_end", t_end);
  d.set_real("dt", dt);
  d.set_real("noise_level", noise_level);
  std::string sz;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) sz += ' ';
    sz += std::to_string(sizes[i]);
  }
  d.set("sizes", sz);
  d.set_uint("refresh_every", refresh_every);
  d.set_uint("threads", threads);
  return d;
}

ExperimentSpec ExperimentSpec::from_document(const TextDocument& doc) {
  doc.reject_unknown(kSpecKeys);
  const std::string& kind_s = doc.required("kind");
  const auto kind = parse_experiment_kind(kind_s);
  if (!kind) {
    const auto* e = doc.find("kind");
    throw ParseError(e->line, "kind", "unknown experiment kind '" + kind_s + "'");
  }
  ExperimentSpec s = defaults(*kind);
  if (auto v = doc.optional_uint("m")) s.m = *v;
  if (auto v = doc.optional_uint("n")) s.n = *v;
  if (auto v = doc.optional_uint("sparsity")) s.sparsity = *v;
  if (auto v = doc.optional_reals("alpha_grid")) s.alpha_grid = *v;
  if (auto v = doc.optional_reals("q_grid")) s.q_grid = *v;
  if (auto v = doc.optional_real("alpha")) s.alpha = *v;
  if (auto v = doc.optional_real("eta")) s.eta = *v;
  if (auto v = doc.optional_ints("layers")) s.layers_list = *v;
  if (auto v = doc.optional_uint("trials")) s.trials = *v;
  if (auto v = doc.optional_uint("master_seed")) s.master_seed = *v;
  if (auto v = doc.optional_uint("max_iters")) s.max_iters = *v;
  if (auto v = doc.optional_real("precision")) s.precision = *v;
  if (auto v = doc.optional_uint("normalize_columns")) {
    if (*v > 1) {
      throw ParseError(doc.find("normalize_columns")->line, "normalize_columns",
                       "expected 0 or 1");
    }
    s.normalize_columns = *v == 1;
  }
  if (auto v = doc.optional_uint("trace_every")) s.trace_every = *v;
  if (const auto* e = doc.find("methods")) s.methods = split_words(e->value);
  if (auto v = doc.optional_uint("curve_trials")) s.curve_trials = *v;
  if (auto v = doc.optional_real("t_end")) s.t_end = *v;
  if (auto v = doc.optional_real("dt")) s.dt = *v;
  if (auto v = doc.optional_real("noise_level")) s.noise_level = *v;
  if (auto v = doc.optional_ints("sizes")) {
    s.sizes.clear();
    for (int x : *v) {
      if (x < 1) {
        throw ParseError(doc.find("sizes")->line, "sizes", "sizes must be >= 1");
      }
      s.sizes.push_back(static_cast<std::size_t>(x));
    }
  }
  if (auto v = doc.optional_uint("refresh_every")) s.refresh_every = *v;
  if (auto v = doc.optional_uint("threads")) s.threads = *v;
  return s;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
  return from_document(TextDocument::read_file(path));
}

ExperimentSpec spec_from_metadata(const ResultTable& table) {
  TextDocument d;
  for (const auto& [k, v] : table.metadata()) {
    if (k.rfind("spec.", 0) == 0) d.set(k.substr(5), v);
  }
  if (!d.has("kind")) {
    throw ValidationError("table metadata carries no experiment spec");
  }
  return ExperimentSpec::from_document(d);
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  for (double& v : values)
    if (std::isnan(v)) v = kInf;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  const double a = values[n / 2 - 1];
  const double b = values[n / 2];
  if (std::isinf(a) || std::isinf(b)) return std::max(a, b);
  return 0.5 * (a + b);
}

double loglog_slope(std::span<const double> t, std::span<const double> v,
                    double t_min) {
  require_dims(v.size(), t.size(), "loglog_slope values");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= t_min) || !(t[i] > 0.0) || !(v[i] > 0.0) ||
        !std::isfinite(v[i])) {
      continue;
    }
    const double lx = std::log(t[i]);
    const double ly = std::log(v[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 2) return kNaN;
  const double kk = static_cast<double>(k);
  const double den = kk * sxx - sx * sx;
  if (den == 0.0) return kNaN;
  return (kk * sxy - sx * sy) / den;
}

double pgd_iteration_budget(double lambda, double dist_sq, double precision) {
  if (!(lambda >= 0.0) || !(dist_sq >= 0.0) || !(precision > 0.0)) {
    throw DomainError("pgd_iteration_budget: invalid arguments");
  }
  return std::ceil(lambda * dist_sq / (precision * precision));
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::InitSweep: return run_init_sweep(spec);
    case ExperimentKind::LayerTrace: return run_layer_trace(spec);
    case ExperimentKind::StepsizeRace: return run_stepsize_race(spec);
    case ExperimentKind::Stability: return run_stability(spec);
    case ExperimentKind::RateCheck: return run_rate_check(spec);
    case ExperimentKind::Timing: return run_timing(spec);
  }
  throw ValidationError("unknown experiment kind");
}

namespace {

void require_kind(const ExperimentSpec& s, ExperimentKind k) {
  if (s.kind != k) {
    throw ValidationError(std::string("spec kind is ") + to_string(s.kind) +
                          ", expected " + to_string(k));
  }
  s.validate();
}

}  // namespace

// ---- init sweep -----------------------------------------------------------

ResultTable run_init_sweep(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentKind::InitSweep);
  const auto t0 = Clock::now();
  ResultTable table({{"trial", ColumnType::Integer},
                     {"seed", ColumnType::Integer},
                     {"layers", ColumnType::Integer},
                     {"alpha", ColumnType::Real},
                     {"status", ColumnType::Text},
                     {"l1_norm", ColumnType::Real},
                     {"l1_ground_truth", ColumnType::Real},
                     {"objective", ColumnType::Real},
                     {"iterations", ColumnType::Integer},
                     {"stop_reason", ColumnType::Text},
                     {"kkt_violation", ColumnType::Real}});
  add_common_meta(table, spec);
  table.set_meta("matrix", matrix_note(spec));
  table.set_meta("ground_truth", "|N(0,1)| on a uniform support, unit l2 norm");
  table.set_meta("l1_reference",
                 "ground-truth l1 norm, standing in for the basis pursuit optimum");

  std::vector<std::vector<std::vector<Cell>>> rows(spec.trials);
  parallel_for(spec.trials, spec.threads, [&](std::size_t i) {
    const auto seed = trial_seed(spec, i);
    const NnlsProblem p = sparse_instance(spec, seed, 0.0);
    const double gt_l1 = norm1(*p.x_true);
    for (int L : spec.layers_list) {
      for (double a : spec.alpha_grid) {
        SolverConfig cfg;
        cfg.layers = L;
        cfg.init = uniform_init(spec.n, a);
        cfg.step_rule = ConstantStep{spec.eta};
        cfg.max_iters = spec.max_iters;
        cfg.trace_every = spec.trace_every;
        std::vector<Cell> row{static_cast<std::int64_t>(i),
                              static_cast<std::int64_t>(seed),
                              static_cast<std::int64_t>(L), a};
        try {
          const SolveReport r = solve_gd(p, cfg);
          row.insert(row.end(),
                     {std::string("ok"), norm1(r.x_final), gt_l1,
                      r.objective_final, static_cast<std::int64_t>(r.iterations),
                      std::string(to_string(r.stop_reason)),
                      max_violation(r.kkt)});
        } catch (const DivergenceError& e) {
          row.insert(row.end(),
                     {std::string("diverged"), kNaN, gt_l1, kNaN,
                      static_cast<std::int64_t>(e.iteration()),
                      std::string("diverged"), kNaN});
        }
        rows[i].push_back(std::move(row));
      }
    }
  });
  for (auto& trial : rows)
    for (auto& r : trial) table.add_row(std::move(r));
  finish_meta(table, t0);
  return table;
}

// ---- layer trace ----------------------------------------------------------

ResultTable run_layer_trace(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentKind::LayerTrace);
  const auto t0 = Clock::now();
  const std::size_t s = spec.sparsity;

  std::vector<Column> cols{{"trial", ColumnType::Integer},
                           {"iter", ColumnType::Integer}};
  for (int L : spec.layers_list) {
    const std::string l = std::to_string(L);
    cols.push_back({"objective_L" + l, ColumnType::Real});
    for (std::size_t k = 0; k < s; ++k)
      cols.push_back({"err_L" + l + "_k" + std::to_string(k), ColumnType::Real});
  }
  ResultTable table(std::move(cols));
  add_common_meta(table, spec);
  table.set_meta("matrix", matrix_note(spec));
  table.set_meta("ground_truth", "|N(0,1)| on a uniform support, unit l2 norm");
  table.set_meta("error_columns",
                 "err_L<layers>_k<j>: |x_gt - x~| at the j-th support index in "
                 "increasing order; values after a solver stops are carried "
                 "forward");

  struct Series {
    std::vector<std::size_t> iters;
    std::vector<double> objective;
    std::vector<Vector> errs;  // per trace point, s entries
    std::string status = "ok";
  };
  struct TrialResult {
    std::vector<std::size_t> support;
    Vector values;
    std::vector<Series> series;
  };
  std::vector<TrialResult> results(spec.trials);

  parallel_for(spec.trials, spec.threads, [&](std::size_t i) {
    const auto seed = trial_seed(spec, i);
    const NnlsProblem p = sparse_instance(spec, seed, 0.0);
    TrialResult& tr = results[i];
    for (std::size_t n = 0; n < spec.n; ++n) {
      if ((*p.x_true)[n] > 0.0) {
        tr.support.push_back(n);
        tr.values.push_back((*p.x_true)[n]);
      }
    }
    for (int L : spec.layers_list) {
      Series ser;
      Vector ax(p.m());
      SolverConfig cfg;
      cfg.layers = L;
      cfg.init = uniform_init(spec.n, spec.alpha);
      cfg.step_rule = ConstantStep{spec.eta};
      cfg.max_iters = spec.max_iters;
      cfg.trace_every = spec.trace_every;
      cfg.observer = [&](std::size_t it, std::span<const double> xt) {
        if (!ser.iters.empty() && ser.iters.back() == it) return;
        matvec_into(p.A, xt, ax);
        double obj = 0.0;
        for (std::size_t r = 0; r < ax.size(); ++r)
          obj += (ax[r] - p.y[r]) * (ax[r] - p.y[r]);
        Vector e(s);
        for (std::size_t k = 0; k < s; ++k)
          e[k] = std::abs(tr.values[k] - xt[tr.support[k]]);
        ser.iters.push_back(it);
        ser.objective.push_back(obj);
        ser.errs.push_back(std::move(e));
      };
      try {
        solve_gd(p, cfg);
      } catch (const DivergenceError&) {
        ser.status = "diverged";
      }
      tr.series.push_back(std::move(ser));
    }
  });

  for (std::size_t i = 0; i < spec.trials; ++i) {
    const TrialResult& tr = results[i];
    std::string sup, status;
    for (std::size_t k = 0; k < tr.support.size(); ++k) {
      if (k) sup += ' ';
      sup += std::to_string(tr.support[k]);
    }
    table.set_meta("support.trial" + std::to_string(i), sup);
    for (std::size_t l = 0; l < tr.series.size(); ++l) {
      if (l) status += ' ';
      status += tr.series[l].status;
    }
    table.set_meta("status.trial" + std::to_string(i), status);

    std::size_t last = 0;
    for (const auto& ser : tr.series)
      if (!ser.iters.empty()) last = std::max(last, ser.iters.back());
    const std::size_t te = spec.trace_every;
    const std::size_t end = (last + te - 1) / te * te;
    std::vector<std::size_t> pos(tr.series.size(), 0);
    for (std::size_t it = 0; it <= end; it += te) {
      std::vector<Cell> row{static_cast<std::int64_t>(i),
                            static_cast<std::int64_t>(it)};
      for (std::size_t l = 0; l < tr.series.size(); ++l) {
        const Series& ser = tr.series[l];
        while (pos[l] + 1 < ser.iters.size() && ser.iters[pos[l] + 1] <= it)
          ++pos[l];
        if (ser.iters.empty()) {
          row.emplace_back(kNaN);
          for (std::size_t k = 0; k < s; ++k) row.emplace_back(kNaN);
          continue;
        }
        row.emplace_back(ser.objective[pos[l]]);
        for (std::size_t k = 0; k < s; ++k) row.emplace_back(ser.errs[pos[l]][k]);
      }
      table.add_row(std::move(row));
    }
  }
  finish_meta(table, t0);
  return table;
}

// ---- stepsize race --------------------------------------------------------

namespace {

MethodOutcome run_race_method(const NnlsProblem& p, const ExperimentSpec& spec,
                              std::string_view method, std::uint64_t seed,
                              bool curves, double pgd_budget) {
  MethodOutcome out;
  const std::size_t trace_every = curves ? spec.trace_every : spec.max_iters + 1;
  try {
    if (method == "pgd") {
      PgdConfig cfg;
      cfg.step_rule = LipschitzOracleStep{};
      // PGD runs until its certified budget, not the shared cap.
      cfg.max_iters = static_cast<std::size_t>(std::max(pgd_budget, 1.0));
      cfg.tol = std::numeric_limits<double>::min();
      cfg.x0 = uniform_init(spec.n, spec.alpha);
      cfg.trace_every = curves ? spec.trace_every : cfg.max_iters + 1;
      cfg.residual_target = spec.precision;
      const SolveReport r = solve_pgd(p, cfg);
      out.status = status_of(r.stop_reason);
      out.x = r.x_final;
      out.residual = std::sqrt(r.objective_final);
      out.trace = r.trace;
      if (r.stop_reason == StopReason::TargetReached) {
        out.iterations = static_cast<double>(r.iterations);
      }
      return out;
    }
    SolverConfig cfg;
    cfg.layers = method.substr(0, 3) == "sgd" ? method[3] - '0' : method[2] - '0';
    cfg.init = uniform_init(spec.n, spec.alpha);
    cfg.max_iters = spec.max_iters;
    cfg.grad_tol = 0.0;
    cfg.objective_tol = 0.0;
    cfg.trace_every = trace_every;
    cfg.residual_target = spec.precision;
    cfg.seed = seed;
    if (method.ends_with("-bb")) {
      cfg.step_rule = BarzilaiBorweinStep{spec.eta};
    } else if (method.ends_with("-nesterov")) {
      cfg.step_rule = NesterovStep{spec.eta};
    } else {
      cfg.step_rule = ConstantStep{spec.eta};
    }
    const SolveReport r =
        method.starts_with("sgd") ? solve_sgd(p, cfg) : solve_gd(p, cfg);
    out.status = status_of(r.stop_reason);
    out.x = r.x_final;
    out.residual = std::sqrt(r.objective_final);
    out.trace = r.trace;
    if (r.stop_reason == StopReason::TargetReached) {
      out.iterations = static_cast<double>(r.iterations);
    }
  } catch (const DivergenceError& e) {
    out.status = "diverged";
    out.trace = e.trace();
  }
  return out;
}

}  // namespace

ResultTable run_stepsize_race(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentKind::StepsizeRace);
  const auto t0 = Clock::now();
  ResultTable table({{"row_kind", ColumnType::Text},
                     {"method", ColumnType::Text},
                     {"trial", ColumnType::Integer},
                     {"status", ColumnType::Text},
                     {"iterations", ColumnType::Real},
                     {"final_residual", ColumnType::Real},
                     {"pgd_budget", ColumnType::Real},
                     {"curve_iter", ColumnType::Integer},
                     {"curve_residual", ColumnType::Real}});
  add_common_meta(table, spec);
  table.set_meta("matrix", matrix_note(spec));
  table.set_meta("ground_truth", "|N(0,1)| on a uniform support, unit l2 norm");
  table.set_meta("target", "||A x~ - y||_2 <= precision; iterations is inf when "
                           "the target was not reached");
  table.set_meta("pgd_budget", "ceil(lambda ||x0 - x*||^2 / precision^2), "
                               "lambda = ||A^T A||_2; pgd uses it as its "
                               "iteration cap, the other methods use max_iters");

  struct TrialResult {
    std::vector<MethodOutcome> outcomes;
    double budget = kNaN;
  };
  std::vector<TrialResult> results(spec.trials);
  parallel_for(spec.trials, spec.threads, [&](std::size_t i) {
    const auto seed = trial_seed(spec, i);
    const NnlsProblem p = sparse_instance(spec, seed, 0.0);
    const double lambda = gram_spectral_norm(p.A).value;
    const Vector x0 = uniform_init(spec.n, spec.alpha);
    results[i].budget =
        pgd_iteration_budget(lambda, std::pow(distance(x0, *p.x_true), 2),
                             spec.precision);
    for (const auto& m : spec.methods) {
      results[i].outcomes.push_back(
          run_race_method(p, spec, m, seed, i < spec.curve_trials,
                          results[i].budget));
    }
  });

  for (std::size_t i = 0; i < spec.trials; ++i) {
    for (std::size_t k = 0; k < spec.methods.size(); ++k) {
      const MethodOutcome& o = results[i].outcomes[k];
      const bool pgd = spec.methods[k] == "pgd";
      table.add_row({std::string("trial"), spec.methods[k],
                     static_cast<std::int64_t>(i), o.status, o.iterations,
                     o.residual, pgd ? results[i].budget : kNaN,
                     std::int64_t{-1}, kNaN});
    }
  }
  for (std::size_t i = 0; i < std::min(spec.trials, spec.curve_trials); ++i) {
    for (std::size_t k = 0; k < spec.methods.size(); ++k) {
      for (const auto& tp : results[i].outcomes[k].trace) {
        table.add_row({std::string("curve"), spec.methods[k],
                       static_cast<std::int64_t>(i), std::string(""), kNaN,
                       kNaN, kNaN, static_cast<std::int64_t>(tp.iter),
                       std::sqrt(tp.objective)});
      }
    }
  }
  for (std::size_t k = 0; k < spec.methods.size(); ++k) {
    std::vector<double> its, budgets;
    for (std::size_t i = 0; i < spec.trials; ++i) {
      its.push_back(results[i].outcomes[k].iterations);
      budgets.push_back(results[i].budget);
    }
    const double med = median(its);
    const bool pgd = spec.methods[k] == "pgd";
    table.add_row({std::string("median"), spec.methods[k], std::int64_t{-1},
                   std::string(std::isfinite(med) ? "reached"
                                                  : "budget-exhausted"),
                   med, kNaN, pgd ? median(budgets) : kNaN, std::int64_t{-1},
                   kNaN});
  }
  finish_meta(table, t0);
  return table;
}

// ---- stability ------------------------------------------------------------

namespace {

MethodOutcome run_stability_method(const NnlsProblem& p,
                                   const ExperimentSpec& spec,
                                   std::string_view method,
                                   std::uint64_t seed) {
  MethodOutcome out;
  try {
    if (method == "lh") {
      const SolveReport r = solve_lawson_hanson(p);
      out.status = "ok";
      out.x = r.x_final;
      out.iterations = static_cast<double>(r.iterations);
      out.kkt = max_violation(r.kkt);
    } else if (method.starts_with("pgd")) {
      PgdConfig cfg;
      if (method == "pgd-bb") cfg.step_rule = BarzilaiBorweinStep{spec.eta};
      cfg.max_iters = spec.max_iters;
      cfg.trace_every = spec.max_iters + 1;
      const SolveReport r = solve_pgd(p, cfg);
      out.status = status_of(r.stop_reason);
      out.x = r.x_final;
      out.iterations = static_cast<double>(r.iterations);
      out.kkt = max_violation(r.kkt);
    } else {
      SolverConfig cfg;
      const bool sgd = method.starts_with("sgd");
      cfg.layers = sgd ? method[3] - '0' : method[2] - '0';
      cfg.init = uniform_init(spec.n, spec.alpha);
      cfg.step_rule = ConstantStep{spec.eta};
      cfg.max_iters = spec.max_iters;
      cfg.trace_every = spec.trace_every;
      cfg.seed = seed;
      const SolveReport r = sgd ? solve_sgd(p, cfg) : solve_gd(p, cfg);
      out.status = status_of(r.stop_reason);
      out.x = r.x_final;
      out.iterations = static_cast<double>(r.iterations);
      out.kkt = max_violation(r.kkt);
    }
    out.residual = std::sqrt(nnls_objective(p.A, p.y, out.x));
  } catch (const DivergenceError& e) {
    out.status = "diverged";
    out.iterations = static_cast<double>(e.iteration());
  } catch (const MaxItersError& e) {
    out.status = "budget-exhausted";
    out.x = e.best_iterate();
  }
  return out;
}

}  // namespace

ResultTable run_stability(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentKind::Stability);
  const auto t0 = Clock::now();
  ResultTable table({{"row_kind", ColumnType::Text},
                     {"q", ColumnType::Real},
                     {"trial", ColumnType::Integer},
                     {"method", ColumnType::Text},
                     {"status", ColumnType::Text},
                     {"error", ColumnType::Real},
                     {"residual", ColumnType::Real},
                     {"iterations", ColumnType::Real},
                     {"kkt_violation", ColumnType::Real}});
  add_common_meta(table, spec);
  table.set_meta("matrix", matrix_note(spec));
  table.set_meta("ground_truth",
                 "x = x_plus - x_minus, ||x_plus||^2 = 1 - q, ||x_minus||^2 = q; "
                 "error = ||x_hat - x_plus||_2");

  const std::size_t nq = spec.q_grid.size();
  const std::size_t nm = spec.methods.size();
  // results[trial][q][method]
  std::vector<std::vector<std::vector<MethodOutcome>>> results(spec.trials);
  std::vector<std::vector<double>> errors(spec.trials,
                                          std::vector<double>(nq * nm, kNaN));
  parallel_for(spec.trials, spec.threads, [&](std::size_t i) {
    const auto seed = trial_seed(spec, i);
    results[i].resize(nq);
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const NnlsProblem p = sparse_instance(spec, seed, spec.q_grid[qi]);
      for (std::size_t k = 0; k < nm; ++k) {
        MethodOutcome o = run_stability_method(p, spec, spec.methods[k], seed);
        if (!o.x.empty()) errors[i][qi * nm + k] = distance(o.x, *p.x_plus);
        results[i][qi].push_back(std::move(o));
      }
    }
  });

  for (std::size_t i = 0; i < spec.trials; ++i) {
    for (std::size_t qi = 0; qi < nq; ++qi) {
      for (std::size_t k = 0; k < nm; ++k) {
        const MethodOutcome& o = results[i][qi][k];
        table.add_row({std::string("trial"), spec.q_grid[qi],
                       static_cast<std::int64_t>(i), spec.methods[k], o.status,
                       errors[i][qi * nm + k], o.residual, o.iterations, o.kkt});
      }
    }
  }
  for (std::size_t qi = 0; qi < nq; ++qi) {
    for (std::size_t k = 0; k < nm; ++k) {
      std::vector<double> errs;
      for (std::size_t i = 0; i < spec.trials; ++i)
        errs.push_back(errors[i][qi * nm + k]);
      table.add_row({std::string("median"), spec.q_grid[qi], std::int64_t{-1},
                     spec.methods[k], std::string("median"), median(errs), kNaN,
                     kNaN, kNaN});
    }
  }
  finish_meta(table, t0);
  return table;
}

// ---- rate check -----------------------------------------------------------

namespace {

NnlsProblem rate_instance(const ExperimentSpec& spec, std::uint64_t seed) {
  NnlsProblem p;
  p.A = make_matrix(spec, spec.m, spec.n, seed);
  CounterRng xr(seed, streams::kValues);
  Vector x(spec.n);
  for (double& v : x) v = xr.next_normal();
  p.y = matvec(p.A, x);
  if (spec.noise_level > 0.0) {
    CounterRng nr(seed, streams::kNoise);
    Vector e(spec.m);
    for (double& v : e) v = nr.next_normal();
    const double scale = spec.noise_level * norm2(p.y) / norm2(e);
    for (std::size_t i = 0; i < e.size(); ++i) p.y[i] += scale * e[i];
  }
  p.x_true = std::move(x);
  p.seed = seed;
  p.label = "rate check seed " + std::to_string(seed);
  return p;
}

}  // namespace

ResultTable run_rate_check(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentKind::RateCheck);
  const auto t0 = Clock::now();
  ResultTable table({{"row_kind", ColumnType::Text},
                     {"trial", ColumnType::Integer},
                     {"layers", ColumnType::Integer},
                     {"method", ColumnType::Text},
                     {"status", ColumnType::Text},
                     {"time", ColumnType::Real},
                     {"residual_yplus_sq", ColumnType::Real},
                     {"t_residual", ColumnType::Real},
                     {"bregman", ColumnType::Real},
                     {"slope", ColumnType::Real},
                     {"tres_ratio", ColumnType::Real},
                     {"bregman_monotone", ColumnType::Integer}});
  add_common_meta(table, spec);
  table.set_meta("matrix", matrix_note(spec));
  table.set_meta("instance", "y = A x + e with x ~ N(0, I) and e ~ N(0, I) "
                             "scaled to noise_level ||A x||");
  table.set_meta("slope", "least-squares slope of log residual_yplus_sq "
                          "against log t over t >= t_end / 10");
  table.set_meta("tres_ratio", "t residual at t_end over its maximum on "
                               "(0, t_end / 2]");
  table.set_meta("gd_time", "iteration k of gradient descent is placed at "
                            "t = k eta");

  struct Run {
    int layers;
    std::string method;
    std::string status;
    std::vector<TracePoint> trace;
  };
  std::vector<std::vector<Run>> results(spec.trials);
  parallel_for(spec.trials, spec.threads, [&](std::size_t i) {
    const auto seed = trial_seed(spec, i);
    const NnlsProblem p = rate_instance(spec, seed);
    const SolveReport lh = solve_lawson_hanson(p);
    const Vector y_plus = matvec(p.A, lh.x_final);
    for (int L : spec.layers_list) {
      for (const auto& m : spec.methods) {
        Run run{L, m, "ok", {}};
        try {
          if (m == "flow") {
            FlowConfig fc;
            fc.layers = L;
            fc.x0 = uniform_init(spec.n, spec.alpha);
            fc.t_end = spec.t_end;
            fc.dt = spec.dt;
            fc.trace_every = spec.trace_every;
            fc.y_plus = y_plus;
            fc.z_plus = lh.x_final;
            run.trace = solve_flow_rk4(p, fc).trace;
            for (auto& tp : run.trace) tp.iter = static_cast<std::size_t>(tp.iter);
          } else {
            SolverConfig cfg;
            cfg.layers = L;
            cfg.init = uniform_init(spec.n, spec.alpha);
            cfg.step_rule = ConstantStep{spec.eta};
            cfg.max_iters =
                static_cast<std::size_t>(std::ceil(spec.t_end / spec.eta));
            cfg.grad_tol = 0.0;
            cfg.objective_tol = 0.0;
            cfg.trace_every = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(
                       static_cast<double>(spec.trace_every) * spec.dt /
                       spec.eta)));
            run.trace = solve_gd(p, cfg, y_plus).trace;
            for (auto& tp : run.trace) {
              tp.time = static_cast<double>(tp.iter) * spec.eta;
              tp.bregman = kNaN;
            }
          }
        } catch (const DivergenceError& e) {
          run.status = "diverged";
          run.trace = e.trace();
        }
        results[i].push_back(std::move(run));
      }
    }
  });

  for (std::size_t i = 0; i < spec.trials; ++i) {
    for (const Run& run : results[i]) {
      std::vector<double> ts, rs;
      for (const auto& tp : run.trace) {
        ts.push_back(tp.time);
        rs.push_back(tp.residual_yplus_sq);
        table.add_row({std::string("trace"), static_cast<std::int64_t>(i),
                       static_cast<std::int64_t>(run.layers), run.method,
                       run.status, tp.time, tp.residual_yplus_sq,
                       tp.time * tp.residual_yplus_sq, tp.bregman, kNaN, kNaN,
                       std::int64_t{-1}});
      }
      const double slope = loglog_slope(ts, rs, spec.t_end / 10.0);
      double first_half = 0.0;
      for (std::size_t k = 0; k < ts.size(); ++k)
        if (ts[k] > 0.0 && ts[k] <= spec.t_end / 2.0)
          first_half = std::max(first_half, ts[k] * rs[k]);
      const double tres_end = ts.empty() ? kNaN : ts.back() * rs.back();
      std::int64_t monotone = -1;
      if (run.method == "flow") {
        monotone = 1;
        for (std::size_t k = 1; k < run.trace.size(); ++k) {
          if (run.trace[k].bregman > run.trace[k - 1].bregman + 1e-8) monotone = 0;
        }
      }
      table.add_row({std::string("summary"), static_cast<std::int64_t>(i),
                     static_cast<std::int64_t>(run.layers), run.method,
                     run.status, ts.empty() ? kNaN : ts.back(),
                     rs.empty() ? kNaN : rs.back(), tres_end, kNaN, slope,
                     first_half > 0.0 ? tres_end / first_half : kNaN, monotone});
    }
  }
  finish_meta(table, t0);
  return table;
}

// ---- timing ---------------------------------------------------------------

ResultTable run_timing(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentKind::Timing);
  const auto t0 = Clock::now();
  ResultTable table({{"size", ColumnType::Integer},
                     {"method", ColumnType::Text},
                     {"trials", ColumnType::Integer},
                     {"iterations", ColumnType::Integer},
                     {"seconds_mean", ColumnType::Real},
                     {"seconds_per_iter", ColumnType::Real},
                     {"objective_mean", ColumnType::Real}});
  add_common_meta(table, spec);
  table.set_meta("matrix", matrix_note(spec));
  table.set_meta("setup", "square A, y = A x for dense |N(0,1)| x of unit "
                          "norm; Q = A^T A and p = A^T y are precomputed and "
                          "excluded from the timings; trials run serially");

  for (const std::size_t sz : spec.sizes) {
    std::vector<double> secs(spec.methods.size(), 0.0);
    std::vector<double> objs(spec.methods.size(), 0.0);
    for (std::size_t i = 0; i < spec.trials; ++i) {
      const auto seed = trial_seed(spec, i);
      Vector xfull(sz);
      CounterRng vr(seed, streams::kValues);
      for (double& v : xfull) v = std::abs(vr.next_normal()) + 1e-12;
      const PerturbedSignal sig = make_q_perturbed(xfull, 0.0, seed);
      const NnlsProblem p =
          make_problem(make_matrix(spec, sz, sz, seed), sig, seed, "timing");
      const GramSystem sys = GramSystem::from_problem(p);
      const double lambda = gram_spectral_norm(p.A).value;
      for (std::size_t k = 0; k < spec.methods.size(); ++k) {
        const auto& m = spec.methods[k];
        const Vector x0 = uniform_init(sz, spec.alpha);
        const auto start = Clock::now();
        Vector x = m == "pgd"
                       ? run_pgd_gram(sys, 1.0 / lambda, x0, spec.max_iters)
                       : run_gd_gram(sys, m == "gd2" ? 2 : 3, x0,
                                     spec.max_iters, spec.refresh_every);
        secs[k] += std::chrono::duration<double>(Clock::now() - start).count();
        objs[k] += sys.objective(x);
      }
    }
    for (std::size_t k = 0; k < spec.methods.size(); ++k) {
      const double tr = static_cast<double>(spec.trials);
      table.add_row({static_cast<std::int64_t>(sz), spec.methods[k],
                     static_cast<std::int64_t>(spec.trials),
                     static_cast<std::int64_t>(spec.max_iters), secs[k] / tr,
                     secs[k] / tr / static_cast<double>(spec.max_iters),
                     objs[k] / tr});
    }
  }
  finish_meta(table, t0);
  return table;
}

}  // namespace nnlsgd
