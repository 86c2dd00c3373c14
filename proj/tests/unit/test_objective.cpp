#include <gtest/gtest.h>

#include <cmath>

#include "nnlsgd/errors.hpp"
#include "nnlsgd/objective.hpp"
#include "nnlsgd/problem.hpp"
#include "nnlsgd/solvers.hpp"
#include "oracles.hpp"

namespace {

using nnlsgd::DenseMatrix;
using nnlsgd::Vector;

const DenseMatrix kOne = DenseMatrix::from_rows({{1}});
const DenseMatrix kI2 = DenseMatrix::identity(2);

TEST(NnlsObjective, Examples) {
  EXPECT_EQ(nnlsgd::nnls_objective(kI2, Vector{1, 1}, Vector{1, 1}), 0.0);
  EXPECT_EQ(nnlsgd::nnls_objective(kI2, Vector{1, 1}, Vector{0, 0}), 2.0);
  EXPECT_EQ(nnlsgd::nnls_objective(DenseMatrix::from_rows({{1}, {1}}), Vector{1, 3},
                                   Vector{2}),
            2.0);
  EXPECT_THROW(nnlsgd::nnls_objective(kI2, Vector{1}, Vector{1, 1}),
               nnlsgd::DimensionError);
}

TEST(ReducedLoss, Examples) {
  EXPECT_EQ(nnlsgd::reduced_loss(kOne, Vector{4}, Vector{2}, 2), 0.0);
  EXPECT_EQ(nnlsgd::reduced_loss(kOne, Vector{0}, Vector{1}, 3), 0.5);
  EXPECT_EQ(nnlsgd::reduced_loss(kI2, Vector{1, 1}, Vector{0, 0}, 2), 1.0);
  EXPECT_THROW(nnlsgd::reduced_loss(kOne, Vector{0}, Vector{1}, 1), nnlsgd::DomainError);
}

TEST(ReducedLoss, MatchesEigenOracle) {
  oracle::Draw d(21);
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix A = d.matrix(6, 9);
    const Vector y = d.normals(6), x = d.positives(9);
    const int L = 2 + t % 3;
    const double ref = oracle::reduced_loss(A, y, x, L);
    EXPECT_NEAR(nnlsgd::reduced_loss(A, y, x, L), ref, 1e-12 * std::max(1.0, ref));
  }
}

TEST(FlowField, Examples) {
  EXPECT_EQ(nnlsgd::flow_field(kOne, Vector{4}, Vector{2}, 2), (Vector{0}));
  EXPECT_EQ(nnlsgd::flow_field(kOne, Vector{0}, Vector{2}, 2), (Vector{8}));
  oracle::Draw d(22);
  const DenseMatrix A = d.matrix(4, 5);
  for (int L : {2, 3, 5})
    EXPECT_EQ(nnlsgd::flow_field(A, d.normals(4), Vector(5, 0.0), L), Vector(5, 0.0));
}

TEST(OverparamGradients, ForcedArithmetic) {
  const std::vector<Vector> f{{2}, {3}};
  const auto g = nnlsgd::overparam_gradients(kOne, Vector{0}, f);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0], (Vector{18}));
  EXPECT_EQ(g[1], (Vector{12}));
}

TEST(OverparamGradients, IdenticalFactorsReduceToFlowField) {
  oracle::Draw d(23);
  for (int L : {2, 3, 4}) {
    const DenseMatrix A = d.matrix(5, 7);
    const Vector y = d.normals(5), x = d.positives(7);
    const std::vector<Vector> f(static_cast<std::size_t>(L), x);
    const Vector ref = nnlsgd::flow_field(A, y, x, L);
    for (const auto& g : nnlsgd::overparam_gradients(A, y, f))
      EXPECT_LE(oracle::max_rel_diff(g, ref), 1e-14);
  }
}

TEST(OverparamGradients, MatchesFiniteDifferencesOfOverparamLoss) {
  oracle::Draw d(24);
  const DenseMatrix A = d.matrix(4, 3);
  const Vector y = d.normals(4);
  const std::vector<Vector> f{d.positives(3), d.positives(3), d.positives(3)};
  const auto grads = nnlsgd::overparam_gradients(A, y, f);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const auto loss = [&](const Vector& z) {
      Vector prod(3, 1.0);
      for (std::size_t j = 0; j < f.size(); ++j)
        for (std::size_t n = 0; n < 3; ++n) prod[n] *= j == k ? z[n] : f[j][n];
      return 0.5 * nnlsgd::nnls_objective(A, y, prod);
    };
    EXPECT_LE(oracle::max_rel_diff(grads[k], oracle::fd_gradient(loss, f[k])), 1e-6);
  }
}

TEST(OverparamGradients, RejectsRaggedFactors) {
  const std::vector<Vector> f{{1, 2}, {1}};
  EXPECT_THROW(nnlsgd::overparam_gradients(kI2, Vector{1, 1}, f), nnlsgd::DimensionError);
}

TEST(ReducedHessian, ScalarExamples) {
  EXPECT_NEAR(nnlsgd::reduced_hessian(kOne, Vector{0}, Vector{2}, 2)(0, 0), 24.0, 1e-12);
  EXPECT_NEAR(nnlsgd::reduced_hessian(kOne, Vector{4}, Vector{2}, 2)(0, 0), 16.0, 1e-12);
}

TEST(ReducedHessian, Random4x3MatchesFiniteDifferences) {
  oracle::Draw d(25);
  const DenseMatrix A = d.matrix(4, 3);
  const Vector y = d.normals(4), x = d.positives(3, 0.3, 1.2);
  for (int L : {2, 3}) {
    const Eigen::MatrixXd J = oracle::fd_jacobian(
        [&](const Vector& z) {
          Vector g = nnlsgd::flow_field(A, y, z, L);
          for (double& v : g) v *= L;
          return g;
        },
        x);
    const Eigen::MatrixXd H = oracle::to_eigen(nnlsgd::reduced_hessian(A, y, x, L));
    EXPECT_LE((H - J).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(ReducedHessian, GramFormAgrees) {
  oracle::Draw d(26);
  const DenseMatrix A = d.matrix(6, 4);
  const Vector y = d.normals(6), x = d.positives(4);
  const DenseMatrix H1 = nnlsgd::reduced_hessian(A, y, x, 3);
  const DenseMatrix H2 =
      nnlsgd::reduced_hessian_gram(nnlsgd::gram(A), nnlsgd::matvec_t(A, y), x, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(H1(i, j), H2(i, j), 1e-12 * std::max(1.0, std::abs(H1(i, j))));
}

TEST(BregmanPotential, Examples) {
  EXPECT_DOUBLE_EQ(nnlsgd::bregman_potential(Vector{1}, 2), -0.5);
  EXPECT_EQ(nnlsgd::bregman_potential(Vector{0, 0}, 2), 0.0);
  EXPECT_DOUBLE_EQ(nnlsgd::bregman_potential(Vector{4}, 4), -2.0);
  EXPECT_THROW(nnlsgd::bregman_potential(Vector{-1}, 2), nnlsgd::DomainError);
}

TEST(BregmanDivergence, Examples) {
  for (int L : {2, 3, 4, 7})
    EXPECT_NEAR(nnlsgd::bregman_divergence(Vector{0.7, 1.3}, Vector{0.7, 1.3}, L), 0.0,
                1e-15);
  EXPECT_NEAR(nnlsgd::bregman_divergence(Vector{1}, Vector{std::exp(1.0)}, 2),
              std::exp(1.0) / 2.0 - 1.0, 1e-12);
  EXPECT_NEAR(std::exp(1.0) / 2.0 - 1.0, 0.35914, 1e-5);
}

TEST(BregmanDivergence, RejectsBoundaryQ) {
  EXPECT_THROW(nnlsgd::bregman_divergence(Vector{1}, Vector{0}, 2), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::bregman_divergence(Vector{1}, Vector{-1}, 3), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::bregman_divergence(Vector{-1}, Vector{1}, 3), nnlsgd::DomainError);
}

TEST(BregmanGradient, MatchesFiniteDifferences) {
  oracle::Draw d(27);
  for (int L : {2, 3, 5}) {
    const Vector q = d.positives(4, 0.3, 2.0);
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& z) { return nnlsgd::bregman_potential(z, L); }, q);
    EXPECT_LE(oracle::max_rel_diff(nnlsgd::bregman_gradient(q, L), fd), 1e-7);
  }
}

TEST(BregmanDivergence, PositiveForDistinctPoints) {
  oracle::Draw d(28);
  for (int t = 0; t < 500; ++t) {
    const int L = 2 + t % 4;
    const Vector p = d.positives(5, 0.0, 2.0), q = d.positives(5, 0.1, 2.0);
    EXPECT_GT(nnlsgd::bregman_divergence(p, q, L), 0.0);
  }
}

TEST(KktCheck, ClampedProjectionIsOptimal) {
  const auto k = nnlsgd::kkt_check(kI2, Vector{1, -1}, Vector{1, 0}, 1e-8);
  EXPECT_EQ(k.dual_vector, (Vector{0, -1}));
  EXPECT_EQ(k.primal_violation, 0.0);
  EXPECT_EQ(k.dual_violation, 0.0);
  EXPECT_EQ(k.complementarity, 0.0);
  EXPECT_TRUE(k.certified(1e-8));
}

TEST(KktCheck, ZeroIsNotOptimalForPositiveY) {
  const auto k = nnlsgd::kkt_check(kI2, Vector{1, 1}, Vector{0, 0}, 1e-8);
  EXPECT_EQ(k.dual_violation, 1.0);
  EXPECT_FALSE(k.certified(1e-8));
}

TEST(KktCheck, ReportsPrimalAndComplementarity) {
  const auto k = nnlsgd::kkt_check(kI2, Vector{1, -1}, Vector{1, -0.5}, 1e-8);
  EXPECT_EQ(k.primal_violation, 0.5);
  EXPECT_GT(k.complementarity, 0.0);
  EXPECT_THROW(nnlsgd::kkt_check(kI2, Vector{1, -1}, Vector{1, 0}, 0.0),
               nnlsgd::DomainError);
}

TEST(KktCheck, CertifiesLawsonHansonOn30x50) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    nnlsgd::NnlsProblem p;
    p.A = nnlsgd::gen_gaussian_matrix(30, 50, s);
    oracle::Draw d(s);
    p.y = d.normals(30);
    const auto x = nnlsgd::solve_lawson_hanson(p).x_final;
    const auto k = nnlsgd::kkt_check(p.A, p.y, x, 1e-8);
    EXPECT_LE(k.primal_violation, 1e-8);
    EXPECT_LE(k.dual_violation, 1e-8);
    EXPECT_LE(k.complementarity, 1e-8);
    // Dual vector recomputed independently.
    const Eigen::VectorXd w = oracle::to_eigen(p.A).transpose() *
                              (oracle::to_eigen(p.y) - oracle::to_eigen(p.A) * oracle::to_eigen(x));
    EXPECT_LE(oracle::max_abs_diff(k.dual_vector, oracle::from_eigen(w)), 1e-12);
  }
}

TEST(AlphaBound, SpotValues) {
  EXPECT_NEAR(nnlsgd::alpha_bound(1.0, 1.0, 3, 2), 0.16667, 1e-5);
  EXPECT_NEAR(nnlsgd::alpha_bound(0.0, std::exp(-1.0), 2, 1), 0.36788, 1e-5);
  EXPECT_NEAR(nnlsgd::alpha_bound(0.0, 1.0, 4, 1), 0.5, 1e-15);
}

TEST(AlphaBound, Errors) {
  EXPECT_THROW(nnlsgd::alpha_bound(1.0, 0.0, 3, 2), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::alpha_bound(-1.0, 1.0, 3, 2), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::alpha_bound(1.0, 1.0, 1, 2), nnlsgd::DomainError);
}

TEST(WeightedInit, Examples) {
  const Vector a = nnlsgd::weighted_init(Vector{1, 1}, 1.0);
  EXPECT_NEAR(a[0], 0.36788, 1e-5);
  EXPECT_NEAR(a[1], 0.36788, 1e-5);
  const Vector b = nnlsgd::weighted_init(Vector{1, 0.5}, 2.0);
  EXPECT_NEAR(b[0], 0.22313, 1e-5);
  EXPECT_NEAR(b[1], 0.36788, 1e-5);
}

TEST(WeightedInit, MaxEntryAtUnitWeights) {
  oracle::Draw d(29);
  Vector w = d.positives(10, 0.05, 1.0);
  w[3] = 1.0;
  w[7] = 1.0;
  const double theta = 3.0;
  const Vector x = nnlsgd::weighted_init(w, theta);
  // Entries decrease in w, so unit weights carry the extreme value
  // exp(-(1 + theta) / 2), which is the smallest entry.
  for (double v : x) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, std::exp(-0.5));
    EXPECT_GE(v, x[3]);
  }
  EXPECT_EQ(x[3], x[7]);
  EXPECT_NEAR(x[3], std::exp(-0.5 * (1.0 + theta)), 1e-15);
}

TEST(WeightedInit, Errors) {
  EXPECT_THROW(nnlsgd::weighted_init(Vector{0.5, 0.5}, 1.0), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::weighted_init(Vector{1, 0}, 1.0), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::weighted_init(Vector{1, 1.5}, 1.0), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::weighted_init(Vector{1}, 0.0), nnlsgd::DomainError);
}

}  // namespace
