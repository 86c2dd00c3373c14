#pragma once

// Declarative experiment harness. Every experiment is a pure function of
// its spec: trial i draws its instance from seed master_seed + i, results
// are ordered by (trial, grid point) regardless of thread scheduling, and
// the spec is echoed into the table metadata under "spec.*" keys so it can
// be re-run from the output alone.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nnlsgd/table.hpp"
#include "nnlsgd/textdoc.hpp"

namespace nnlsgd {

enum class ExperimentKind {
  InitSweep,
  LayerTrace,
  StepsizeRace,
  Stability,
  RateCheck,
  Timing,
};

const char* to_string(ExperimentKind k) noexcept;
std::optional<ExperimentKind> parse_experiment_kind(std::string_view s);

// Fields not used by a kind are ignored by it (and still echoed).
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::InitSweep;
  std::size_t m = 10;
  std::size_t n = 50;
  std::size_t sparsity = 3;
  std::vector<double> alpha_grid;  // init sweep
  std::vector<double> q_grid;      // stability
  double alpha = 1e-2;             // initialization x0 = alpha * 1
  double eta = 1e-2;
  std::vector<int> layers_list;
  std::size_t trials = 1;
  std::uint64_t master_seed = 0;
  std::size_t max_iters = 1'000'000;  // stepsize race: PGD is capped by its budget instead
  double precision = 1e-3;         // stepsize race residual target
  bool normalize_columns = false;  // unit-norm columns of A
  std::size_t trace_every = 100;
  std::vector<std::string> methods;
  std::size_t curve_trials = 1;    // stepsize race: trials with curves
  double t_end = 1000.0;           // rate check
  double dt = 1e-2;                // rate check
  double noise_level = 0.1;        // rate check: ||e|| / ||A x||
  std::vector<std::size_t> sizes;  // timing: square problem sizes
  std::size_t refresh_every = 1000;  // timing
  std::size_t threads = 1;

  // Desk-scale defaults for each kind.
  static ExperimentSpec defaults(ExperimentKind kind);

  // Throws ValidationError on empty grids, zero trials, unknown methods
  // and out-of-range values.
  void validate() const;

  TextDocument to_document() const;
  // Missing keys take the kind's defaults; unknown keys are rejected.
  static ExperimentSpec from_document(const TextDocument& doc);
  static ExperimentSpec from_file(const std::string& path);

  friend bool operator==(const ExperimentSpec&,
                         const ExperimentSpec&) = default;
};

// Methods understood by the stepsize race and the stability experiment.
std::span<const std::string_view> race_methods() noexcept;
std::span<const std::string_view> stability_methods() noexcept;

ResultTable run_experiment(const ExperimentSpec& spec);
ResultTable run_init_sweep(const ExperimentSpec& spec);
ResultTable run_layer_trace(const ExperimentSpec& spec);
ResultTable run_stepsize_race(const ExperimentSpec& spec);
ResultTable run_stability(const ExperimentSpec& spec);
ResultTable run_rate_check(const ExperimentSpec& spec);
ResultTable run_timing(const ExperimentSpec& spec);

// Rebuilds the spec echoed in a table's metadata.
ExperimentSpec spec_from_metadata(const ResultTable& table);

// Median with +inf allowed (failed runs); NaN entries are treated as +inf.
// Even counts average the two middle values. Throws on empty input.
double median(std::vector<double> values);

// Least-squares slope of log(v) against log(t) over entries with
// t >= t_min, t > 0 and v > 0. NaN when fewer than two points qualify.
double loglog_slope(std::span<const double> t, std::span<const double> v,
                    double t_min);

// Smallest PGD iteration count that the O(1/t) guarantee
// f(x_t) - f* <= lambda ||x0 - x*||^2 / (2t) certifies for
// ||A x_t - y||_2 <= precision on a consistent instance (f* = 0).
double pgd_iteration_budget(double lambda, double dist_sq, double precision);

// Library version, e.g. "0.1.0".
const char* library_version() noexcept;

}  // namespace nnlsgd
