#pragma once

// Iterative NNLS solvers.
//
//  * solve_gd / solve_sgd: vanilla (stochastic) gradient descent on the
//    overparametrized loss with identically initialized factors, i.e. on
//    the reduced iterate x with the product iterate x~ = x^L.
//  * solve_flow_rk4: classical Runge-Kutta integration of x' = -g(x).
//  * solve_pgd: projected gradient descent on 1/2 ||Az - y||^2, z >= 0.
//  * solve_lawson_hanson: the active-set reference solver.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nnlsgd/errors.hpp"
#include "nnlsgd/linalg.hpp"
#include "nnlsgd/objective.hpp"
#include "nnlsgd/problem.hpp"

namespace nnlsgd {

struct ConstantStep {
  double eta = 1e-2;
};

// eta_t = ||x_t - x_{t-1}||^2 / ||A (x_t - x_{t-1})||^2 on the iterate that is
// actually updated; eta0 on the first step and whenever the ratio is
// undefined. Not safeguarded.
struct BarzilaiBorweinStep {
  double eta0 = 1e-2;
};

// eta = 1 / ||Hessian||_2 at the current iterate, refreshed every
// `refresh_every` iterations. For PGD the Hessian is A^T A and is constant.
struct LipschitzOracleStep {
  std::size_t refresh_every = 1000;
  double fallback_eta = 1e-2;
};

// Lookahead v = x_t + beta_t (x_t - x_{t-1}), x_{t+1} = v - eta grad(v) with
// beta_t = momentum_scale * (t - 1) / (t + 2). momentum_scale = 0 is plain
// descent.
struct NesterovStep {
  double eta = 1e-2;
  double momentum_scale = 1.0;
};

using StepRule =
    std::variant<ConstantStep, BarzilaiBorweinStep, LipschitzOracleStep,
                 NesterovStep>;

// Throws DomainError on nonpositive step parameters.
void validate_step_rule(const StepRule& rule);
std::string describe_step_rule(const StepRule& rule);

enum class StopReason {
  GradTol,
  ObjectiveTol,
  MaxIters,
  SignFlipDetected,
  TargetReached,
  StepTol,
  KktSatisfied,
  EndTime,
};

const char* to_string(StopReason r) noexcept;

// One row of a solver trace. Optional quantities are NaN when absent.
struct TracePoint {
  std::size_t iter = 0;
  double time = 0.0;               // flow time for RK4, iteration count otherwise
  double objective = 0.0;          // ||A x~ - y||^2
  double residual_yplus_sq = 0.0;  // ||A x~ - y_+||^2 when y_+ was supplied
  double l1_norm = 0.0;            // ||x~||_1
  double min_entry = 0.0;          // min_n x~_n
  double stepsize = 0.0;
  double bregman = 0.0;            // D_F(z_+, x~) when z_+ was supplied
  double wall_seconds = 0.0;
};

struct SolveReport {
  Vector x_final;  // x~ = x^L for factorized solvers, the raw iterate otherwise
  double objective_final = 0.0;  // ||A x_final - y||^2
  std::size_t iterations = 0;
  StopReason stop_reason = StopReason::MaxIters;
  KktReport kkt;
  std::vector<TracePoint> trace;
  std::optional<std::size_t> sign_flip_iteration;
  bool rank_deficient = false;  // Lawson-Hanson only
};

// Called at every trace point with (iteration, current x~).
using TraceObserver =
    std::function<void(std::size_t, std::span<const double>)>;

struct SolverConfig {
  int layers = 3;
  Vector init;  // x0 > 0; see uniform_init()
  StepRule step_rule = ConstantStep{1e-2};
  std::size_t max_iters = 1'000'000;
  double grad_tol = 1e-10;       // stop when ||g||_inf <= grad_tol
  double objective_tol = 1e-12;  // plateau between trace points; 0 disables
  std::size_t trace_every = 100;
  std::uint64_t seed = 0;        // SGD only
  std::size_t batch_size = 0;    // SGD only; 0 means ceil(M / 10)
  std::optional<double> residual_target;  // stop once ||A x~ - y||_2 <= target
  bool stop_on_sign_flip = false;
  double kkt_tol = 1e-8;
  TraceObserver observer;
};

Vector uniform_init(std::size_t n, double alpha);

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration,
                  std::vector<TracePoint> trace)
      : Error(what), iteration_(iteration), trace_(std::move(trace)) {}
  std::size_t iteration() const noexcept { return iteration_; }
  // Trace up to the last finite state.
  const std::vector<TracePoint>& trace() const noexcept { return trace_; }

 private:
  std::size_t iteration_;
  std::vector<TracePoint> trace_;
};

class MaxItersError : public Error {
 public:
  MaxItersError(const std::string& what, Vector best)
      : Error(what), best_(std::move(best)) {}
  const Vector& best_iterate() const noexcept { return best_; }

 private:
  Vector best_;
};

// x_{t+1} = x_t - eta_t g(x_t). Throws DomainError for a nonpositive init
// and DivergenceError on a non-finite iterate.
SolveReport solve_gd(const NnlsProblem& problem, const SolverConfig& cfg,
                     const std::optional<Vector>& y_plus = std::nullopt);

// Mini-batch variant: each step draws batch_size distinct rows B uniformly
// and uses (M / |B|) [A_B^T (A_B x^L - y_B)] * x^(L-1). Deterministic in
// cfg.seed; batch_size == M reproduces solve_gd exactly.
SolveReport solve_sgd(const NnlsProblem& problem, const SolverConfig& cfg,
                      const std::optional<Vector>& y_plus = std::nullopt);

struct FlowConfig {
  int layers = 2;
  Vector x0;  // x0 >= 0
  double t_end = 10.0;
  double dt = 1e-3;
  std::size_t trace_every = 100;  // in integration steps
  std::optional<Vector> y_plus;   // records ||A x~(t) - y_+||^2
  std::optional<Vector> z_plus;   // records D_F(z_+, x~(t))
  double kkt_tol = 1e-8;
  TraceObserver observer;
};

SolveReport solve_flow_rk4(const NnlsProblem& problem, const FlowConfig& cfg);

struct PgdConfig {
  StepRule step_rule = LipschitzOracleStep{};
  std::size_t max_iters = 1'000'000;
  double tol = 1e-12;  // stop when ||x_{t+1} - x_t||_inf <= tol
  Vector x0;           // empty means zeros; negative entries are clamped
  std::size_t trace_every = 100;
  std::optional<double> residual_target;
  std::optional<Vector> y_plus;
  double kkt_tol = 1e-8;
  TraceObserver observer;
};

SolveReport solve_pgd(const NnlsProblem& problem, const PgdConfig& cfg);

// Classical active-set method on the normal equations of the passive set
// (pivoted Cholesky with one refinement step). Terminates when no inactive
// dual entry exceeds `tol`; throws MaxItersError after `max_iters` outer
// iterations (0 means 3N).
SolveReport solve_lawson_hanson(const NnlsProblem& problem, double tol = 1e-10,
                                std::size_t max_iters = 0);

// ||d||^2 / ||A d||^2 with d = x_t - x_prev; nullopt when d == 0 or the
// denominator underflows (< 1e-30), in which case callers use eta0.
std::optional<double> bb_stepsize(std::span<const double> x_t,
                                  std::span<const double> x_prev,
                                  const DenseMatrix& A);

// 1 / ||reduced_hessian(A, y, x, L)||_2, or `fallback` if that norm is 0.
double lipschitz_stepsize(const DenseMatrix& A, std::span<const double> y,
                          std::span<const double> x, int L,
                          double fallback = 1e-2);

// y_+ = A x_+ for a Lawson-Hanson solution x_+: the projection of y onto
// the cone {A z : z >= 0}.
Vector compute_y_plus(const NnlsProblem& problem);

// Precomputed normal-equation data Q = A^T A, p = A^T y, used by the
// timing kernels below.
struct GramSystem {
  DenseMatrix Q;
  Vector p;
  double y_norm_sq = 0.0;

  static GramSystem from_problem(const NnlsProblem& problem);
  // ||A z - y||^2 = z^T Q z - 2 p^T z + ||y||^2.
  double objective(std::span<const double> z) const;
};

// Fixed-iteration kernels for timing; no stopping rule, no trace.
Vector run_pgd_gram(const GramSystem& sys, double eta, Vector x0,
                    std::size_t iters);
// Returns the product iterate x~. The stepsize 1/||Hessian|| is refreshed
// every refresh_every iterations.
Vector run_gd_gram(const GramSystem& sys, int L, Vector x0, std::size_t iters,
                   std::size_t refresh_every, double fallback_eta = 1e-2);

}  // namespace nnlsgd
