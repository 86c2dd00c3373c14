#include "nnlsgd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnlsgd/errors.hpp"

namespace nnlsgd {

namespace {

void require_layers(int L, const char* op) {
  if (L < 2) {
    throw DomainError(std::string(op) + ": number of layers must be >= 2");
  }
}

// A^T (A z - y).
Vector normal_residual(const DenseMatrix& A, std::span<const double> y,
                       std::span<const double> z) {
  Vector r = matvec(A, z);
  require_dims(y.size(), A.rows(), "measurement vector y");
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  return matvec_t(A, r);
}

}  // namespace

double nnls_objective(const DenseMatrix& A, std::span<const double> y,
                      std::span<const double> z) {
  require_dims(y.size(), A.rows(), "measurement vector y");
  Vector r = matvec(A, z);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - y[i];
    s += d * d;
  }
  return s;
}

double reduced_loss(const DenseMatrix& A, std::span<const double> y,
                    std::span<const double> x, int L) {
  require_layers(L, "reduced_loss");
  return 0.5 * nnls_objective(A, y, hadamard_pow(x, L));
}

Vector flow_field(const DenseMatrix& A, std::span<const double> y,
                  std::span<const double> x, int L) {
  require_layers(L, "flow_field");
  Vector g = normal_residual(A, y, hadamard_pow(x, L));
  const Vector u = hadamard_pow(x, L - 1);
  for (std::size_t n = 0; n < g.size(); ++n) g[n] *= u[n];
  return g;
}

std::vector<Vector> overparam_gradients(const DenseMatrix& A,
                                        std::span<const double> y,
                                        std::span<const Vector> factors) {
  const std::size_t L = factors.size();
  require_layers(static_cast<int>(L), "overparam_gradients");
  const std::size_t N = A.cols();
  for (const auto& f : factors) require_dims(f.size(), N, "factor");

  Vector prod = factors[0];
  for (std::size_t k = 1; k < L; ++k)
    for (std::size_t n = 0; n < N; ++n) prod[n] *= factors[k][n];
  const Vector c = normal_residual(A, y, prod);

  // Products are formed left to right skipping factor l, so identical
  // factors give bitwise identical gradients (and match flow_field).
  std::vector<Vector> grads(L, Vector(N));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < N; ++n) {
      double p = 1.0;
      bool first = true;
      for (std::size_t k = 0; k < L; ++k) {
        if (k == l) continue;
        p = first ? factors[k][n] : p * factors[k][n];
        first = false;
      }
      grads[l][n] = c[n] * p;
    }
  }
  return grads;
}

DenseMatrix reduced_hessian_gram(const DenseMatrix& Q, std::span<const double> p,
                                 std::span<const double> x, int L) {
  require_layers(L, "reduced_hessian");
  const std::size_t N = Q.cols();
  require_dims(x.size(), N, "reduced_hessian iterate");
  require_dims(p.size(), N, "reduced_hessian A^T y");

  const Vector xl = hadamard_pow(x, L);
  const Vector u = hadamard_pow(x, L - 1);
  const Vector v = L == 2 ? Vector(N, 1.0) : hadamard_pow(x, L - 2);
  Vector c = matvec(Q, xl);
  for (std::size_t n = 0; n < N; ++n) c[n] -= p[n];

  const double l2 = static_cast<double>(L) * L;
  const double l1 = static_cast<double>(L) * (L - 1);
  DenseMatrix H(N, N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) H(i, j) = l2 * Q(i, j) * u[i] * u[j];
    H(i, i) += l1 * c[i] * v[i];
  }
  return H;
}

DenseMatrix reduced_hessian(const DenseMatrix& A, std::span<const double> y,
                            std::span<const double> x, int L) {
  require_layers(L, "reduced_hessian");
  require_dims(x.size(), A.cols(), "reduced_hessian iterate");
  require_dims(y.size(), A.rows(), "measurement vector y");
  return reduced_hessian_gram(gram(A), matvec_t(A, y), x, L);
}

double bregman_potential(std::span<const double> x, int L) {
  require_layers(L, "bregman_potential");
  double s = 0.0;
  if (L == 2) {
    for (double v : x) {
      if (v < 0.0) throw DomainError("bregman_potential: x must be >= 0");
      if (v > 0.0) s += v * std::log(v) - v;
    }
    return 0.5 * s;
  }
  const double e = 2.0 / L;
  for (double v : x) {
    if (v < 0.0) throw DomainError("bregman_potential: x must be >= 0");
    s += std::pow(v, e);
  }
  return static_cast<double>(L) / (2.0 * (2.0 - L)) * s;
}

Vector bregman_gradient(std::span<const double> q, int L) {
  require_layers(L, "bregman_gradient");
  Vector g(q.size());
  for (std::size_t n = 0; n < q.size(); ++n) {
    if (!(q[n] > 0.0)) {
      throw DomainError("bregman_gradient: q must be strictly positive");
    }
    g[n] = L == 2 ? 0.5 * std::log(q[n])
                  : std::pow(q[n], 2.0 / L - 1.0) / (2.0 - L);
  }
  return g;
}

double bregman_divergence(std::span<const double> p, std::span<const double> q,
                          int L) {
  require_dims(p.size(), q.size(), "bregman_divergence operand");
  const Vector gq = bregman_gradient(q, L);
  double lin = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) lin += gq[n] * (p[n] - q[n]);
  const double d = bregman_potential(p, L) - bregman_potential(q, L) - lin;
  // Cancellation can leave a tiny negative value near p == q.
  return std::max(d, 0.0);
}

KktReport kkt_check(const DenseMatrix& A, std::span<const double> y,
                    std::span<const double> x, double tol) {
  if (!(tol > 0.0)) throw DomainError("kkt_check: tol must be > 0");
  require_dims(x.size(), A.cols(), "kkt_check iterate");
  KktReport rep;
  Vector w = normal_residual(A, y, x);
  for (double& v : w) v = -v;
  for (std::size_t i = 0; i < x.size(); ++i) {
    rep.primal_violation = std::max(rep.primal_violation, -x[i]);
    const double dual = x[i] <= tol ? std::max(0.0, w[i]) : std::abs(w[i]);
    rep.dual_violation = std::max(rep.dual_violation, dual);
    rep.complementarity = std::max(rep.complementarity, std::abs(x[i] * w[i]));
  }
  rep.dual_vector = std::move(w);
  return rep;
}

double alpha_bound(double q_plus, double epsilon, int L, std::size_t N) {
  require_layers(L, "alpha_bound");
  if (!(epsilon > 0.0)) throw DomainError("alpha_bound: epsilon must be > 0");
  if (!(q_plus >= 0.0)) throw DomainError("alpha_bound: Q+ must be >= 0");
  const double n = static_cast<double>(N);
  if (L == 2) {
    return std::exp(-0.5 - (q_plus * q_plus + n * std::exp(-1.0)) /
                               (2.0 * epsilon));
  }
  return std::pow(2.0 * epsilon / (L * (q_plus + n + epsilon)),
                  1.0 / (L - 2));
}

Vector weighted_init(std::span<const double> w, double theta) {
  if (!(theta > 0.0)) throw DomainError("weighted_init: theta must be > 0");
  if (w.empty()) throw DomainError("weighted_init: empty weight vector");
  double wmax = 0.0;
  for (double v : w) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw DomainError("weighted_init: weights must lie in (0, 1]");
    }
    wmax = std::max(wmax, v);
  }
  if (std::abs(wmax - 1.0) > 1e-12) {
    throw DomainError("weighted_init: weights must have max entry 1");
  }
  Vector x0(w.size());
  for (std::size_t n = 0; n < w.size(); ++n)
    x0[n] = std::exp(-0.5 * (1.0 + theta * w[n]));
  return x0;
}

}  // namespace nnlsgd
