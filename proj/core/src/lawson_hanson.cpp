#include <algorithm>
#include <cmath>
#include <limits>

#include "nnlsgd/solvers.hpp"

namespace nnlsgd {

namespace {

struct SubproblemSolution {
  Vector z;  // indexed like `idx`
  bool rank_deficient = false;
};

// Solves Q[idx, idx] z = p[idx] by Cholesky with diagonal pivoting. Pivots
// below a relative threshold are dropped (their z entries are 0), which
// gives a basic least-squares solution when the block is singular.
// One step of iterative refinement follows.
SubproblemSolution solve_passive(const DenseMatrix& Q, const Vector& p,
                                 const std::vector<std::size_t>& idx) {
  const std::size_t k = idx.size();
  DenseMatrix K(k, k);
  Vector b(k);
  for (std::size_t i = 0; i < k; ++i) {
    b[i] = p[idx[i]];
    for (std::size_t j = 0; j < k; ++j) K(i, j) = Q(idx[i], idx[j]);
  }

  DenseMatrix F = K;
  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) max_diag = std::max(max_diag, K(i, i));
  const double drop = static_cast<double>(k) * 1e-14 * max_diag;

  std::size_t rank = 0;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t piv = j;
    for (std::size_t i = j + 1; i < k; ++i)
      if (F(i, i) > F(piv, piv)) piv = i;
    if (!(F(piv, piv) > drop)) break;
    if (piv != j) {
      for (std::size_t c = 0; c < k; ++c) std::swap(F(j, c), F(piv, c));
      for (std::size_t r = 0; r < k; ++r) std::swap(F(r, j), F(r, piv));
      std::swap(perm[j], perm[piv]);
    }
    const double d = std::sqrt(F(j, j));
    F(j, j) = d;
    for (std::size_t i = j + 1; i < k; ++i) F(i, j) /= d;
    // Update the full trailing block so later symmetric swaps stay valid.
    for (std::size_t c = j + 1; c < k; ++c)
      for (std::size_t i = j + 1; i < k; ++i) F(i, c) -= F(i, j) * F(c, j);
    ++rank;
  }

  // Lower factor lives in F(i, j), i >= j, for the leading `rank` pivots.
  auto solve = [&](const Vector& rhs) {
    Vector w(rank);
    for (std::size_t i = 0; i < rank; ++i) {
      double s = rhs[perm[i]];
      for (std::size_t j = 0; j < i; ++j) s -= F(i, j) * w[j];
      w[i] = s / F(i, i);
    }
    for (std::size_t i = rank; i-- > 0;) {
      double s = w[i];
      for (std::size_t j = i + 1; j < rank; ++j) s -= F(j, i) * w[j];
      w[i] = s / F(i, i);
    }
    Vector out(k, 0.0);
    for (std::size_t i = 0; i < rank; ++i) out[perm[i]] = w[i];
    return out;
  };

  SubproblemSolution sol;
  sol.rank_deficient = rank < k;
  sol.z = solve(b);
  Vector res(k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < k; ++j) s -= K(i, j) * sol.z[j];
    res[i] = s;
  }
  const Vector dz = solve(res);
  for (std::size_t i = 0; i < k; ++i) sol.z[i] += dz[i];
  return sol;
}

}  // namespace

SolveReport solve_lawson_hanson(const NnlsProblem& problem, double tol,
                                std::size_t max_iters) {
  require_dims(problem.y.size(), problem.A.rows(), "y");
  if (!(tol > 0.0)) throw DomainError("tol must be > 0");
  const DenseMatrix& A = problem.A;
  const std::size_t N = A.cols();
  if (max_iters == 0) max_iters = 3 * N;

  const DenseMatrix Q = gram(A);
  const Vector p = matvec_t(A, problem.y);

  Vector x(N, 0.0);
  std::vector<char> passive(N, 0), disabled(N, 0);
  Vector w = p;
  SolveReport rep;
  std::size_t outer = 0;

  auto passive_indices = [&] {
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < N; ++n)
      if (passive[n]) idx.push_back(n);
    return idx;
  };

  for (;;) {
    std::size_t t = N;
    double best = tol;
    for (std::size_t n = 0; n < N; ++n) {
      if (!passive[n] && !disabled[n] && w[n] > best) {
        best = w[n];
        t = n;
      }
    }
    if (t == N) break;
    if (outer >= max_iters) {
      throw MaxItersError("Lawson-Hanson exceeded " +
                              std::to_string(max_iters) + " iterations",
                          x);
    }
    ++outer;
    passive[t] = 1;

    bool entered = true;
    for (bool first = true;; first = false) {
      const auto idx = passive_indices();
      const SubproblemSolution sol = solve_passive(Q, p, idx);
      rep.rank_deficient = rep.rank_deficient || sol.rank_deficient;

      if (first) {
        const auto pos = std::find(idx.begin(), idx.end(), t) - idx.begin();
        if (!(sol.z[static_cast<std::size_t>(pos)] > 0.0)) {
          // Rounding prevents t from entering; skip it until x changes.
          passive[t] = 0;
          disabled[t] = 1;
          entered = false;
          break;
        }
      }

      double alpha = std::numeric_limits<double>::infinity();
      std::size_t blocking = N;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (sol.z[i] <= 0.0) {
          const double xi = x[idx[i]];
          const double a = xi / (xi - sol.z[i]);
          if (a < alpha) {
            alpha = a;
            blocking = idx[i];
          }
        }
      }
      if (blocking == N) {
        for (std::size_t i = 0; i < idx.size(); ++i) x[idx[i]] = sol.z[i];
        break;
      }
      for (std::size_t i = 0; i < idx.size(); ++i)
        x[idx[i]] += alpha * (sol.z[i] - x[idx[i]]);
      x[blocking] = 0.0;
      for (const std::size_t n : idx) {
        if (x[n] <= 0.0) {
          x[n] = 0.0;
          passive[n] = 0;
        }
      }
    }

    if (entered) {
      std::fill(disabled.begin(), disabled.end(), 0);
      const Vector ax = matvec(A, x);
      Vector r(ax.size());
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = problem.y[i] - ax[i];
      w = matvec_t(A, r);
    }
  }

  rep.x_final = std::move(x);
  rep.iterations = outer;
  rep.stop_reason = StopReason::KktSatisfied;
  rep.objective_final = nnls_objective(A, problem.y, rep.x_final);
  rep.kkt = kkt_check(A, problem.y, rep.x_final, std::max(tol, 1e-8));
  return rep;
}

}  // namespace nnlsgd
