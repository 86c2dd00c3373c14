#include "nnlsgd/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "nnlsgd/rng.hpp"
#include "nnlsgd/textdoc.hpp"

namespace nnlsgd {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_layers(int L) {
  if (L < 2) throw DomainError("layers must be ≥ 2");
}

void check_problem(const NnlsProblem& p) {
  require_dims(p.y.size(), p.A.rows(), "y");
  if (p.A.rows() == 0 || p.A.cols() == 0) {
    throw DimensionError("problem matrix is empty");
  }
}

void check_config(const NnlsProblem& p, const SolverConfig& cfg) {
  check_problem(p);
  require_layers(cfg.layers);
  require_dims(cfg.init.size(), p.n(), "init");
  for (double v : cfg.init) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("init must be strictly positive and finite");
    }
  }
  validate_step_rule(cfg.step_rule);
  if (cfg.max_iters == 0) throw DomainError("max_iters must be >= 1");
  if (cfg.trace_every == 0) throw DomainError("trace_every must be >= 1");
  if (!(cfg.grad_tol >= 0.0) || !(cfg.objective_tol >= 0.0)) {
    throw DomainError("tolerances must be >= 0");
  }
  if (!(cfg.kkt_tol > 0.0)) throw DomainError("kkt_tol must be > 0");
}

// Fills u = x^(L-1) and xt = x^L with the same multiplication order as
// hadamard_pow.
void powers_into(std::span<const double> x, int L, std::span<double> u,
                 std::span<double> xt) {
  for (std::size_t n = 0; n < x.size(); ++n) {
    double p = x[n];
    for (int k = 2; k < L; ++k) p *= x[n];
    u[n] = p;
    xt[n] = p * x[n];
  }
}

double sq_residual(std::span<const double> ax, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    const double r = ax[i] - y[i];
    s += r * r;
  }
  return s;
}

// D_F(p, q) extended to q_n = 0 by continuity: entries with p_n = q_n = 0
// contribute 0, entries with p_n > 0 = q_n make the divergence infinite.
double bregman_extended(std::span<const double> p, std::span<const double> q,
                        int L) {
  Vector pp, qq;
  pp.reserve(p.size());
  qq.reserve(q.size());
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (!(q[n] >= 0.0)) return kNaN;
    if (q[n] == 0.0) {
      if (p[n] > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    pp.push_back(p[n]);
    qq.push_back(q[n]);
  }
  if (qq.empty()) return 0.0;
  return bregman_divergence(pp, qq, L);
}

// Computes the trace row for product iterate xt.
class TraceRecorder {
 public:
  TraceRecorder(const NnlsProblem& p, const std::optional<Vector>& y_plus,
                const std::optional<Vector>& z_plus, int L,
                const TraceObserver& observer)
      : p_(p), y_plus_(y_plus), z_plus_(z_plus), L_(L), observer_(observer),
        ax_(p.m()), t0_(Clock::now()) {}

  double record(std::vector<TracePoint>& trace, std::size_t iter, double time,
                std::span<const double> xt, double stepsize) {
    matvec_into(p_.A, xt, ax_);
    TracePoint tp;
    tp.iter = iter;
    tp.time = time;
    tp.objective = sq_residual(ax_, p_.y);
    tp.residual_yplus_sq = y_plus_ ? sq_residual(ax_, *y_plus_) : kNaN;
    tp.l1_norm = norm1(xt);
    tp.min_entry = *std::min_element(xt.begin(), xt.end());
    tp.stepsize = stepsize;
    tp.bregman = z_plus_ ? bregman_extended(*z_plus_, xt, L_) : kNaN;
    tp.wall_seconds = seconds_since(t0_);
    trace.push_back(tp);
    if (observer_) observer_(iter, xt);
    return tp.objective;
  }

 private:
  const NnlsProblem& p_;
  const std::optional<Vector>& y_plus_;
  const std::optional<Vector>& z_plus_;
  int L_;
  const TraceObserver& observer_;
  Vector ax_;
  Clock::time_point t0_;
};

const std::optional<Vector> kNoVector;

// Shared driver for GD and SGD. `oracle(x, g)` writes the descent direction
// at x into g and returns ||A x^L - y||^2 when it computed it exactly.
template <class Oracle>
SolveReport run_factorized(const NnlsProblem& prob, const SolverConfig& cfg,
                           const std::optional<Vector>& y_plus,
                           Oracle&& oracle) {
  if (y_plus) require_dims(y_plus->size(), prob.m(), "y_plus");
  const DenseMatrix& A = prob.A;
  const std::size_t N = prob.n();
  const int L = cfg.layers;

  Vector x = cfg.init;
  Vector x_prev = x;
  Vector v(N), g(N), u(N), xt(N), ax(prob.m());
  SolveReport rep;
  TraceRecorder rec(prob, y_plus, kNoVector, L, cfg.observer);

  const auto* nesterov = std::get_if<NesterovStep>(&cfg.step_rule);
  const auto* lipschitz = std::get_if<LipschitzOracleStep>(&cfg.step_rule);
  std::optional<DenseMatrix> Q;
  Vector p;
  if (lipschitz) {
    Q = gram(A);
    p = matvec_t(A, prob.y);
  }

  double eta = 0.0;
  double last_obj = kNaN;
  std::size_t t = 0;
  bool eval_is_x = true;
  for (;; ++t) {
    eval_is_x = true;
    if (nesterov && t >= 1) {
      const double beta = nesterov->momentum_scale *
                          (static_cast<double>(t) - 1.0) /
                          (static_cast<double>(t) + 2.0);
      if (beta != 0.0) {
        for (std::size_t n = 0; n < N; ++n)
          v[n] = x[n] + beta * (x[n] - x_prev[n]);
        eval_is_x = false;
      }
    }
    const Vector& e = eval_is_x ? x : v;

    if (t % cfg.trace_every == 0) {
      powers_into(x, L, u, xt);
      const double obj =
          rec.record(rep.trace, t, static_cast<double>(t), xt, eta);
      if (!std::isfinite(obj)) {
        rep.trace.pop_back();
        throw DivergenceError("objective became non-finite", t, rep.trace);
      }
      if (cfg.residual_target && std::sqrt(obj) <= *cfg.residual_target) {
        rep.stop_reason = StopReason::TargetReached;
        break;
      }
      if (cfg.objective_tol > 0.0 && std::isfinite(last_obj) &&
          std::abs(obj - last_obj) <= cfg.objective_tol) {
        rep.stop_reason = StopReason::ObjectiveTol;
        break;
      }
      last_obj = obj;
    }

    std::optional<double> exact = oracle(e, g);
    if (!all_finite(g)) {
      throw DivergenceError("gradient became non-finite", t, rep.trace);
    }
    if (cfg.residual_target && !exact) {
      powers_into(e, L, u, xt);
      matvec_into(A, xt, ax);
      exact = sq_residual(ax, prob.y);
    }
    if (cfg.residual_target && exact &&
        std::sqrt(*exact) <= *cfg.residual_target) {
      if (!eval_is_x) x = v;
      rep.stop_reason = StopReason::TargetReached;
      break;
    }
    if (norm_inf(g) <= cfg.grad_tol) {
      if (!eval_is_x) x = v;
      rep.stop_reason = StopReason::GradTol;
      break;
    }
    if (t >= cfg.max_iters) {
      rep.stop_reason = StopReason::MaxIters;
      break;
    }

    if (const auto* c = std::get_if<ConstantStep>(&cfg.step_rule)) {
      eta = c->eta;
    } else if (const auto* bb =
                   std::get_if<BarzilaiBorweinStep>(&cfg.step_rule)) {
      eta = t == 0 ? bb->eta0 : bb_stepsize(x, x_prev, A).value_or(bb->eta0);
    } else if (lipschitz) {
      if (t % lipschitz->refresh_every == 0) {
        const DenseMatrix H = reduced_hessian_gram(*Q, p, x, L);
        const double s = symmetric_spectral_norm(H, 1e-8, 2000).value;
        eta = s > 0.0 ? 1.0 / s : lipschitz->fallback_eta;
      }
    } else {
      eta = nesterov->eta;
    }

    x_prev = x;
    for (std::size_t n = 0; n < N; ++n) x[n] = e[n] - eta * g[n];
    if (!all_finite(x)) {
      throw DivergenceError("iterate became non-finite at iteration " +
                                std::to_string(t + 1),
                            t + 1, rep.trace);
    }
    if (!rep.sign_flip_iteration) {
      for (std::size_t n = 0; n < N; ++n) {
        if ((x_prev[n] > 0.0 && x[n] < 0.0) ||
            (x_prev[n] < 0.0 && x[n] > 0.0)) {
          rep.sign_flip_iteration = t + 1;
          break;
        }
      }
      if (rep.sign_flip_iteration && cfg.stop_on_sign_flip) {
        ++t;
        rep.stop_reason = StopReason::SignFlipDetected;
        break;
      }
    }
  }

  rep.iterations = t;
  rep.x_final = hadamard_pow(x, L);
  if (rep.trace.empty() || rep.trace.back().iter != t) {
    rec.record(rep.trace, t, static_cast<double>(t), rep.x_final, eta);
  }
  rep.objective_final = nnls_objective(A, prob.y, rep.x_final);
  rep.kkt = kkt_check(A, prob.y, rep.x_final, cfg.kkt_tol);
  return rep;
}

// Full-batch gradient oracle; shared by GD and full-batch SGD so both
// produce the same floating-point sequence.
class FullGradient {
 public:
  FullGradient(const NnlsProblem& p, int L)
      : p_(p), L_(L), u_(p.n()), xt_(p.n()), r_(p.m()) {}

  std::optional<double> operator()(std::span<const double> x,
                                   std::span<double> g) {
    powers_into(x, L_, u_, xt_);
    matvec_into(p_.A, xt_, r_);
    double obj = 0.0;
    for (std::size_t i = 0; i < r_.size(); ++i) {
      r_[i] -= p_.y[i];
      obj += r_[i] * r_[i];
    }
    matvec_t_into(p_.A, r_, g);
    for (std::size_t n = 0; n < g.size(); ++n) g[n] *= u_[n];
    return obj;
  }

 private:
  const NnlsProblem& p_;
  int L_;
  Vector u_, xt_, r_;
};

}  // namespace

void validate_step_rule(const StepRule& rule) {
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ConstantStep>) {
          if (!(r.eta > 0.0)) throw DomainError("stepsize eta must be > 0");
        } else if constexpr (std::is_same_v<T, BarzilaiBorweinStep>) {
          if (!(r.eta0 > 0.0)) throw DomainError("BB eta0 must be > 0");
        } else if constexpr (std::is_same_v<T, LipschitzOracleStep>) {
          if (r.refresh_every == 0) {
            throw DomainError("refresh_every must be >= 1");
          }
          if (!(r.fallback_eta > 0.0)) {
            throw DomainError("fallback stepsize must be > 0");
          }
        } else {
          if (!(r.eta > 0.0)) throw DomainError("stepsize eta must be > 0");
          if (!(r.momentum_scale >= 0.0)) {
            throw DomainError("momentum scale must be >= 0");
          }
        }
      },
      rule);
}

std::string describe_step_rule(const StepRule& rule) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ConstantStep>) {
          return "constant(eta=" + format_real(r.eta) + ")";
        } else if constexpr (std::is_same_v<T, BarzilaiBorweinStep>) {
          return "bb(eta0=" + format_real(r.eta0) + ")";
        } else if constexpr (std::is_same_v<T, LipschitzOracleStep>) {
          return "lipschitz(refresh_every=" + std::to_string(r.refresh_every) +
                 ")";
        } else {
          return "nesterov(eta=" + format_real(r.eta) + ")";
        }
      },
      rule);
}

const char* to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::GradTol: return "grad_tol";
    case StopReason::ObjectiveTol: return "objective_tol";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::SignFlipDetected: return "sign_flip";
    case StopReason::TargetReached: return "target_reached";
    case StopReason::StepTol: return "step_tol";
    case StopReason::KktSatisfied: return "kkt_satisfied";
    case StopReason::EndTime: return "end_time";
  }
  return "unknown";
}

Vector uniform_init(std::size_t n, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DomainError("initialization scale must be > 0");
  }
  return Vector(n, alpha);
}

SolveReport solve_gd(const NnlsProblem& problem, const SolverConfig& cfg,
                     const std::optional<Vector>& y_plus) {
  check_config(problem, cfg);
  return run_factorized(problem, cfg, y_plus,
                        FullGradient(problem, cfg.layers));
}

SolveReport solve_sgd(const NnlsProblem& problem, const SolverConfig& cfg,
                      const std::optional<Vector>& y_plus) {
  check_config(problem, cfg);
  const std::size_t M = problem.m();
  const std::size_t b = cfg.batch_size == 0 ? (M + 9) / 10 : cfg.batch_size;
  if (b > M) throw DomainError("batch_size must not exceed M");
  if (b == M) {
    return run_factorized(problem, cfg, y_plus,
                          FullGradient(problem, cfg.layers));
  }

  const int L = cfg.layers;
  const std::size_t N = problem.n();
  const DenseMatrix& A = problem.A;
  const double scale = static_cast<double>(M) / static_cast<double>(b);
  CounterRng rng(cfg.seed, streams::kBatches);
  std::vector<std::size_t> perm(M);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> batch(b);
  Vector u(N), xt(N);

  auto oracle = [&](std::span<const double> x,
                    std::span<double> g) -> std::optional<double> {
    for (std::size_t k = 0; k < b; ++k) {
      const std::size_t j = k + rng.next_below(M - k);
      std::swap(perm[k], perm[j]);
    }
    std::copy_n(perm.begin(), b, batch.begin());
    std::sort(batch.begin(), batch.end());

    powers_into(x, L, u, xt);
    std::fill(g.begin(), g.end(), 0.0);
    for (const std::size_t i : batch) {
      const double* a = A.row(i).data();
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) s += a[n] * xt[n];
      const double r = s - problem.y[i];
      for (std::size_t n = 0; n < N; ++n) g[n] += a[n] * r;
    }
    for (std::size_t n = 0; n < N; ++n) g[n] *= scale * u[n];
    return std::nullopt;
  };
  return run_factorized(problem, cfg, y_plus, oracle);
}

SolveReport solve_flow_rk4(const NnlsProblem& problem, const FlowConfig& cfg) {
  check_problem(problem);
  require_layers(cfg.layers);
  require_dims(cfg.x0.size(), problem.n(), "x0");
  for (double v : cfg.x0) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("x0 must be nonnegative and finite");
    }
  }
  if (!(cfg.dt > 0.0) || !(cfg.t_end > cfg.dt)) {
    throw DomainError("need dt > 0 and t_end > dt");
  }
  if (cfg.trace_every == 0) throw DomainError("trace_every must be >= 1");
  if (cfg.y_plus) require_dims(cfg.y_plus->size(), problem.m(), "y_plus");
  if (cfg.z_plus) require_dims(cfg.z_plus->size(), problem.n(), "z_plus");

  const std::size_t N = problem.n();
  const int L = cfg.layers;
  FullGradient field(problem, L);
  TraceRecorder rec(problem, cfg.y_plus, cfg.z_plus, L, cfg.observer);

  const auto steps =
      static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  Vector x = cfg.x0, k1(N), k2(N), k3(N), k4(N), tmp(N);
  SolveReport rep;
  double time = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    if (k % cfg.trace_every == 0) {
      rec.record(rep.trace, k, time, hadamard_pow(x, L), cfg.dt);
    }
    const double h = std::min(cfg.dt, cfg.t_end - time);
    field(x, k1);
    for (std::size_t n = 0; n < N; ++n) tmp[n] = x[n] - 0.5 * h * k1[n];
    field(tmp, k2);
    for (std::size_t n = 0; n < N; ++n) tmp[n] = x[n] - 0.5 * h * k2[n];
    field(tmp, k3);
    for (std::size_t n = 0; n < N; ++n) tmp[n] = x[n] - h * k3[n];
    field(tmp, k4);
    for (std::size_t n = 0; n < N; ++n)
      x[n] -= h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    if (!all_finite(x)) {
      std::ostringstream msg;
      msg << "flow state became non-finite at t = " << time + h
          << "; reduce dt";
      throw DivergenceError(msg.str(), k + 1, rep.trace);
    }
    time = k + 1 == steps ? cfg.t_end : static_cast<double>(k + 1) * cfg.dt;
  }

  rep.iterations = steps;
  rep.stop_reason = StopReason::EndTime;
  rep.x_final = hadamard_pow(x, L);
  rec.record(rep.trace, steps, time, rep.x_final, cfg.dt);
  rep.objective_final = nnls_objective(problem.A, problem.y, rep.x_final);
  rep.kkt = kkt_check(problem.A, problem.y, rep.x_final, cfg.kkt_tol);
  return rep;
}

SolveReport solve_pgd(const NnlsProblem& problem, const PgdConfig& cfg) {
  check_problem(problem);
  validate_step_rule(cfg.step_rule);
  if (!(cfg.tol > 0.0)) throw DomainError("tol must be > 0");
  if (cfg.trace_every == 0) throw DomainError("trace_every must be >= 1");
  if (!(cfg.kkt_tol > 0.0)) throw DomainError("kkt_tol must be > 0");
  if (cfg.y_plus) require_dims(cfg.y_plus->size(), problem.m(), "y_plus");

  const DenseMatrix& A = problem.A;
  const std::size_t N = problem.n();
  const std::size_t M = problem.m();
  Vector x(N, 0.0);
  if (!cfg.x0.empty()) {
    require_dims(cfg.x0.size(), N, "x0");
    for (std::size_t n = 0; n < N; ++n) x[n] = std::max(0.0, cfg.x0[n]);
  }

  const auto* nesterov = std::get_if<NesterovStep>(&cfg.step_rule);
  const auto* bb = std::get_if<BarzilaiBorweinStep>(&cfg.step_rule);
  double eta = 0.0;
  if (const auto* c = std::get_if<ConstantStep>(&cfg.step_rule)) {
    eta = c->eta;
  } else if (const auto* lip =
                 std::get_if<LipschitzOracleStep>(&cfg.step_rule)) {
    const double s = gram_spectral_norm(A).value;
    eta = s > 0.0 ? 1.0 / s : lip->fallback_eta;
  } else if (nesterov) {
    eta = nesterov->eta;
  }

  Vector x_prev = x, v(N), r(M), c(N);
  SolveReport rep;
  TraceRecorder rec(problem, cfg.y_plus, kNoVector, 1, cfg.observer);
  std::size_t t = 0;
  for (;; ++t) {
    bool eval_is_x = true;
    if (nesterov && t >= 1) {
      const double beta = nesterov->momentum_scale *
                          (static_cast<double>(t) - 1.0) /
                          (static_cast<double>(t) + 2.0);
      if (beta != 0.0) {
        for (std::size_t n = 0; n < N; ++n)
          v[n] = x[n] + beta * (x[n] - x_prev[n]);
        eval_is_x = false;
      }
    }
    const Vector& e = eval_is_x ? x : v;

    if (t % cfg.trace_every == 0) {
      rec.record(rep.trace, t, static_cast<double>(t), x, eta);
    }
    matvec_into(A, e, r);
    double obj = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      r[i] -= problem.y[i];
      obj += r[i] * r[i];
    }
    if (cfg.residual_target && eval_is_x &&
        std::sqrt(obj) <= *cfg.residual_target) {
      rep.stop_reason = StopReason::TargetReached;
      break;
    }
    if (t >= cfg.max_iters) {
      rep.stop_reason = StopReason::MaxIters;
      break;
    }
    matvec_t_into(A, r, c);
    if (bb) {
      eta = t == 0 ? bb->eta0 : bb_stepsize(x, x_prev, A).value_or(bb->eta0);
    }
    double delta = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double xn = std::max(0.0, e[n] - eta * c[n]);
      delta = std::max(delta, std::abs(xn - x[n]));
      x_prev[n] = x[n];
      x[n] = xn;
    }
    if (!all_finite(x)) {
      throw DivergenceError("projected gradient iterate became non-finite",
                            t + 1, rep.trace);
    }
    if (delta <= cfg.tol) {
      ++t;
      rep.stop_reason = StopReason::StepTol;
      break;
    }
  }

  rep.iterations = t;
  rep.x_final = x;
  if (rep.trace.empty() || rep.trace.back().iter != t) {
    rec.record(rep.trace, t, static_cast<double>(t), x, eta);
  }
  rep.objective_final = nnls_objective(A, problem.y, x);
  rep.kkt = kkt_check(A, problem.y, x, cfg.kkt_tol);
  return rep;
}

std::optional<double> bb_stepsize(std::span<const double> x_t,
                                  std::span<const double> x_prev,
                                  const DenseMatrix& A) {
  require_dims(x_t.size(), A.cols(), "bb_stepsize x_t");
  require_dims(x_prev.size(), A.cols(), "bb_stepsize x_prev");
  Vector d(x_t.size());
  for (std::size_t n = 0; n < d.size(); ++n) d[n] = x_t[n] - x_prev[n];
  const double num = norm2_sq(d);
  if (num == 0.0) return std::nullopt;
  const double den = norm2_sq(matvec(A, d));
  if (!(den >= 1e-30)) return std::nullopt;
  return num / den;
}

double lipschitz_stepsize(const DenseMatrix& A, std::span<const double> y,
                          std::span<const double> x, int L, double fallback) {
  if (!all_finite(x)) throw DomainError("lipschitz_stepsize: x must be finite");
  const DenseMatrix H = reduced_hessian(A, y, x, L);
  const double s = symmetric_spectral_norm(H, 1e-14, 200000).value;
  return s > 0.0 ? 1.0 / s : fallback;
}

Vector compute_y_plus(const NnlsProblem& problem) {
  return matvec(problem.A, solve_lawson_hanson(problem).x_final);
}

}  // namespace nnlsgd
