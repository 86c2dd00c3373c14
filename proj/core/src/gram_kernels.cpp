#include <algorithm>

#include "nnlsgd/solvers.hpp"

namespace nnlsgd {

GramSystem GramSystem::from_problem(const NnlsProblem& problem) {
  require_dims(problem.y.size(), problem.A.rows(), "y");
  return {gram(problem.A), matvec_t(problem.A, problem.y),
          norm2_sq(problem.y)};
}

double GramSystem::objective(std::span<const double> z) const {
  require_dims(z.size(), p.size(), "objective argument");
  const Vector qz = matvec(Q, z);
  return std::max(0.0, dot(z, qz) - 2.0 * dot(p, z) + y_norm_sq);
}

Vector run_pgd_gram(const GramSystem& sys, double eta, Vector x0,
                    std::size_t iters) {
  require_dims(x0.size(), sys.p.size(), "x0");
  if (!(eta > 0.0)) throw DomainError("stepsize eta must be > 0");
  Vector x = std::move(x0);
  Vector c(x.size());
  for (std::size_t t = 0; t < iters; ++t) {
    matvec_into(sys.Q, x, c);
    for (std::size_t n = 0; n < x.size(); ++n)
      x[n] = std::max(0.0, x[n] - eta * (c[n] - sys.p[n]));
  }
  return x;
}

Vector run_gd_gram(const GramSystem& sys, int L, Vector x0, std::size_t iters,
                   std::size_t refresh_every, double fallback_eta) {
  if (L < 2) throw DomainError("layers must be ≥ 2");
  require_dims(x0.size(), sys.p.size(), "x0");
  if (refresh_every == 0) throw DomainError("refresh_every must be >= 1");
  const std::size_t N = x0.size();
  Vector x = std::move(x0);
  Vector u(N), xt(N), c(N);
  double eta = fallback_eta;
  for (std::size_t t = 0; t < iters; ++t) {
    if (t % refresh_every == 0) {
      const DenseMatrix H = reduced_hessian_gram(sys.Q, sys.p, x, L);
      const double s = symmetric_spectral_norm(H, 1e-8, 2000).value;
      eta = s > 0.0 ? 1.0 / s : fallback_eta;
    }
    for (std::size_t n = 0; n < N; ++n) {
      double p = x[n];
      for (int k = 2; k < L; ++k) p *= x[n];
      u[n] = p;
      xt[n] = p * x[n];
    }
    matvec_into(sys.Q, xt, c);
    for (std::size_t n = 0; n < N; ++n)
      x[n] -= eta * (c[n] - sys.p[n]) * u[n];
  }
  return hadamard_pow(x, L);
}

}  // namespace nnlsgd
