#pragma once

// Loss functions, derivatives, the Bregman potential of the factorized flow,
// KKT residuals for NNLS, and the closed-form initialization bounds.
//
// Gradient convention: flow_field(x) is the per-factor gradient
//   g(x) = [A^T (A x^L - y)] * x^(L-1)
// which drives the gradient flow x' = -g(x) of identically initialized
// factors. The true gradient of reduced_loss is L * g(x), and
// reduced_hessian is the Jacobian of L * g.

#include <span>
#include <vector>

#include "nnlsgd/linalg.hpp"

namespace nnlsgd {

struct KktReport {
  double primal_violation = 0.0;  // max(0, -min_n x_n)
  double dual_violation = 0.0;    // w* > 0 on the active set, |w*| on P
  double complementarity = 0.0;   // max_n |x_n w*_n|
  Vector dual_vector;             // w* = A^T (y - A x)

  bool certified(double tol) const noexcept {
    return primal_violation <= tol && dual_violation <= tol &&
           complementarity <= tol;
  }
};

// ||A z - y||_2^2.
double nnls_objective(const DenseMatrix& A, std::span<const double> y,
                      std::span<const double> z);

// 1/2 ||A x^L - y||_2^2, L >= 2.
double reduced_loss(const DenseMatrix& A, std::span<const double> y,
                    std::span<const double> x, int L);

Vector flow_field(const DenseMatrix& A, std::span<const double> y,
                  std::span<const double> x, int L);

// Gradient of L_over with respect to each factor, sharing one evaluation
// of the residual A^T (A x~ - y) where x~ is the product of all factors.
std::vector<Vector> overparam_gradients(const DenseMatrix& A,
                                        std::span<const double> y,
                                        std::span<const Vector> factors);

// L^2 (A^T A) o [u u^T] + L(L-1) diag(A^T(A x^L - y) o x^(L-2)),
// u = x^(L-1).
DenseMatrix reduced_hessian(const DenseMatrix& A, std::span<const double> y,
                            std::span<const double> x, int L);

// Same Hessian from a precomputed Gram matrix Q = A^T A and p = A^T y.
DenseMatrix reduced_hessian_gram(const DenseMatrix& Q, std::span<const double> p,
                                 std::span<const double> x, int L);

// F(x) = 1/2 sum(x log x - x) for L = 2 (0 log 0 = 0),
//        L / (2(2 - L)) sum x^(2/L) for L > 2.
double bregman_potential(std::span<const double> x, int L);
// grad F(q); requires q > 0.
Vector bregman_gradient(std::span<const double> q, int L);
// D_F(p, q) = F(p) - F(q) - <grad F(q), p - q>; p >= 0, q > 0.
double bregman_divergence(std::span<const double> p, std::span<const double> q,
                          int L);

// Indices with x_i <= tol are treated as active (x_i = 0).
KktReport kkt_check(const DenseMatrix& A, std::span<const double> y,
                    std::span<const double> x, double tol);

// Initialization magnitude bound h(Q+, eps):
//   L = 2: exp(-1/2 - (Q+^2 + N/e) / (2 eps))
//   L > 2: (2 eps / (L (Q+ + N + eps)))^(1/(L-2))
double alpha_bound(double q_plus, double epsilon, int L, std::size_t N);

// x0_n = exp(-(1 + theta w_n) / 2) for w in (0,1]^N with max w = 1.
Vector weighted_init(std::span<const double> w, double theta);

}  // namespace nnlsgd
