#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "nnlsgd/errors.hpp"
#include "nnlsgd/problem.hpp"
#include "nnlsgd/rng.hpp"
#include "nnlsgd/textdoc.hpp"

namespace {

using nnlsgd::Vector;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nnlsgd_test_" + name)).string();
}

TEST(CounterRng, PureFunctionOfSeedStreamCounter) {
  nnlsgd::CounterRng a(7, 1), b(7, 1), c(7, 2), d(8, 1);
  for (int i = 0; i < 100; ++i) {
    const auto wa = a.next_u64();
    EXPECT_EQ(wa, b.next_u64());
    EXPECT_EQ(wa, nnlsgd::CounterRng::word(7, 1, static_cast<std::uint64_t>(i)));
    EXPECT_NE(wa, c.next_u64());
    EXPECT_NE(wa, d.next_u64());
  }
}

TEST(CounterRng, UniformAndBelowRanges) {
  nnlsgd::CounterRng r(3, 9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.next_uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);
    EXPECT_LT(r.next_below(7), 7u);
  }
}

TEST(GenGaussianMatrix, Deterministic) {
  EXPECT_EQ(nnlsgd::gen_gaussian_matrix(2, 3, 7), nnlsgd::gen_gaussian_matrix(2, 3, 7));
  EXPECT_NE(nnlsgd::gen_gaussian_matrix(2, 3, 7), nnlsgd::gen_gaussian_matrix(2, 3, 8));
}

TEST(GenGaussianMatrix, SampleMoments) {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto A = nnlsgd::gen_gaussian_matrix(100, 100, seed);
    double s = 0.0, s2 = 0.0;
    for (double v : A.data()) {
      s += v;
      s2 += v * v;
    }
    const double mean = s / 1e4;
    const double var = s2 / 1e4 - mean * mean;
    EXPECT_GT(mean, -0.1);
    EXPECT_LT(mean, 0.1);
    EXPECT_GT(var, 0.8);
    EXPECT_LT(var, 1.2);
  }
}

TEST(GenGaussianMatrix, SingleEntry) {
  const auto A = nnlsgd::gen_gaussian_matrix(1, 1, 5);
  EXPECT_EQ(A.rows(), 1u);
  EXPECT_EQ(A.cols(), 1u);
  EXPECT_TRUE(std::isfinite(A(0, 0)));
}

TEST(NormalizeColumns, UnitNormsAndZeroColumnsKept) {
  auto A = nnlsgd::gen_gaussian_matrix(6, 4, 2);
  for (std::size_t i = 0; i < 6; ++i) A(i, 2) = 0.0;
  nnlsgd::normalize_columns(A);
  for (std::size_t j = 0; j < 4; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 6; ++i) s += A(i, j) * A(i, j);
    EXPECT_NEAR(s, j == 2 ? 0.0 : 1.0, 1e-14);
  }
}

TEST(GenSparseNonneg, ExactSupport) {
  const Vector x = nnlsgd::gen_sparse_nonneg(50, 3, 11);
  int nz = 0;
  for (double v : x) {
    EXPECT_GE(v, 0.0);
    nz += v > 0.0;
  }
  EXPECT_EQ(nz, 3);
  EXPECT_EQ(x, nnlsgd::gen_sparse_nonneg(50, 3, 11));
}

TEST(GenSparseNonneg, FullSupportAndErrors) {
  for (double v : nnlsgd::gen_sparse_nonneg(5, 5, 1)) EXPECT_GT(v, 0.0);
  EXPECT_THROW(nnlsgd::gen_sparse_nonneg(5, 6, 1), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::gen_sparse_nonneg(5, 0, 1), nnlsgd::DomainError);
}

TEST(GenSparseNonneg, SupportIsSpreadOut) {
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Vector x = nnlsgd::gen_sparse_nonneg(20, 2, s);
    for (std::size_t n = 0; n < x.size(); ++n)
      if (x[n] > 0.0) seen.insert(n);
  }
  EXPECT_EQ(seen.size(), 20u);
}

TEST(GenSmoothNonneg, NonnegativeAndDeterministic) {
  for (std::size_t N : {16u, 49u, 30u}) {
    const Vector x = nnlsgd::gen_smooth_nonneg(N, 4);
    ASSERT_EQ(x.size(), N);
    double mx = 0.0;
    for (double v : x) {
      EXPECT_GE(v, 0.0);
      mx = std::max(mx, v);
    }
    EXPECT_GT(mx, 0.0);
    EXPECT_EQ(x, nnlsgd::gen_smooth_nonneg(N, 4));
  }
}

TEST(MakeQPerturbed, Boundaries) {
  const Vector raw = nnlsgd::gen_sparse_nonneg(30, 4, 3);
  const auto s0 = nnlsgd::make_q_perturbed(raw, 0.0, 3);
  EXPECT_EQ(s0.x_minus, Vector(30, 0.0));
  EXPECT_EQ(s0.x_true, s0.x_plus);
  EXPECT_NEAR(nnlsgd::norm2(s0.x_plus), 1.0, 1e-14);

  const auto s1 = nnlsgd::make_q_perturbed(raw, 1.0, 3);
  EXPECT_EQ(s1.x_plus, Vector(30, 0.0));
  EXPECT_NEAR(nnlsgd::norm2_sq(s1.x_minus), 1.0, 1e-14);

  const auto sh = nnlsgd::make_q_perturbed(raw, 0.5, 3);
  EXPECT_NEAR(nnlsgd::norm2_sq(sh.x_plus), 0.5, 1e-10);
  EXPECT_NEAR(nnlsgd::norm2_sq(sh.x_minus), 0.5, 1e-10);
  for (std::size_t n = 0; n < raw.size(); ++n)
    EXPECT_FALSE(sh.x_plus[n] > 0.0 && sh.x_minus[n] > 0.0);
}

TEST(MakeQPerturbed, Errors) {
  const Vector raw{1, 0, 0};
  EXPECT_THROW(nnlsgd::make_q_perturbed(raw, -0.1, 0), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::make_q_perturbed(raw, 1.5, 0), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::make_q_perturbed(Vector{1, -1}, 0.5, 0), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::make_q_perturbed(Vector{0, 0}, 0.5, 0), nnlsgd::DomainError);
  EXPECT_THROW(nnlsgd::make_q_perturbed(Vector{1, 1}, 0.5, 0), nnlsgd::DomainError);
}

nnlsgd::NnlsProblem sample_problem() {
  auto A = nnlsgd::gen_gaussian_matrix(4, 6, 12);
  const auto sig = nnlsgd::make_q_perturbed(nnlsgd::gen_sparse_nonneg(6, 2, 12), 0.3, 12);
  auto p = nnlsgd::make_problem(std::move(A), sig, 12, "sample, with comma");
  p.validate();
  return p;
}

TEST(ProblemIo, RoundTripIsBitExact) {
  const auto p = sample_problem();
  const std::string path = temp_path("roundtrip.txt");
  nnlsgd::save_problem(p, path);
  EXPECT_EQ(nnlsgd::load_problem(path), p);
  EXPECT_EQ(nnlsgd::problem_from_string(nnlsgd::problem_to_string(p)), p);
  std::filesystem::remove(path);
}

TEST(ProblemIo, TwoByTwoRoundTrip) {
  nnlsgd::NnlsProblem p;
  p.A = nnlsgd::DenseMatrix::from_rows({{1, 0.1}, {1.0 / 3.0, -2}});
  p.y = {0.7, -1e-300};
  p.label = "two";
  EXPECT_EQ(nnlsgd::problem_from_string(nnlsgd::problem_to_string(p)), p);
}

TEST(ProblemIo, OptionalFieldsMayBeAbsent) {
  const auto p = nnlsgd::problem_from_string("m = 1\nn = 2\na = 1 2\ny = 3\n");
  EXPECT_FALSE(p.x_true.has_value());
  EXPECT_FALSE(p.x_plus.has_value());
  EXPECT_FALSE(p.q.has_value());
  EXPECT_FALSE(p.seed.has_value());
  EXPECT_EQ(p.y, (Vector{3}));
}

TEST(ProblemIo, WrongYLengthIsValidationError) {
  EXPECT_THROW(nnlsgd::problem_from_string("m = 2\nn = 1\na = 1 2\ny = 3\n"),
               nnlsgd::ValidationError);
}

TEST(ProblemIo, BrokenSplitIsValidationError) {
  EXPECT_THROW(nnlsgd::problem_from_string(
                   "m = 1\nn = 2\na = 1 2\ny = 3\nx_plus = 1 0\nx_minus = 0 1\nq = 0.2\n"),
               nnlsgd::ValidationError);
}

TEST(ProblemIo, MalformedNumberNamesLineAndField) {
  try {
    nnlsgd::problem_from_string("m = 1\nn = 2\na = 1 x\ny = 3\n");
    FAIL() << "expected ParseError";
  } catch (const nnlsgd::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.field(), "a");
  }
  EXPECT_THROW(nnlsgd::problem_from_string("m = 1\nn = 2\ny = 3\n"), nnlsgd::ParseError);
  EXPECT_THROW(nnlsgd::problem_from_string("m = 1\nbogus line\n"), nnlsgd::ParseError);
  EXPECT_THROW(nnlsgd::problem_from_string("m = 1\nm = 1\n"), nnlsgd::ParseError);
  EXPECT_THROW(nnlsgd::problem_from_string("m = 1\nn = 1\na = 1\ny = 1\nextra = 2\n"),
               nnlsgd::ParseError);
}

TEST(ProblemIo, MissingFileIsIoError) {
  EXPECT_THROW(nnlsgd::load_problem("/nonexistent/dir/p.txt"), nnlsgd::IoError);
  EXPECT_THROW(nnlsgd::save_problem(sample_problem(), "/nonexistent/dir/p.txt"),
               nnlsgd::IoError);
}

TEST(TextDocument, RealsRoundTrip) {
  nnlsgd::TextDocument d;
  const Vector v{0.1, 1.0 / 3.0, -2.5e-308, 1e308, 123456789.123456789};
  d.set_reals("v", v);
  const auto back = nnlsgd::TextDocument::parse_string(d.to_string());
  EXPECT_EQ(back.required_reals("v"), v);
}

}  // namespace
