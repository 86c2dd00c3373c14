#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nnlsgd/linalg.hpp"

namespace nnlsgd {

// An NNLS instance (A, y) with optional ground-truth decomposition
// x_true = x_plus - x_minus and the seed that produced it.
struct NnlsProblem {
  DenseMatrix A;
  Vector y;
  std::optional<Vector> x_true;
  std::optional<Vector> x_plus;
  std::optional<Vector> x_minus;
  std::optional<double> q;
  std::optional<std::uint64_t> seed;
  std::string label;

  std::size_t m() const noexcept { return A.rows(); }
  std::size_t n() const noexcept { return A.cols(); }

  // Throws ValidationError when shapes disagree or the x_plus / x_minus
  // split violates nonnegativity, disjoint supports, or (given q) the
  // squared-norm split 1 - q / q to 1e-10.
  void validate() const;

  friend bool operator==(const NnlsProblem&, const NnlsProblem&) = default;
};

// i.i.d. N(0, 1) entries; a pure function of (M, N, seed).
DenseMatrix gen_gaussian_matrix(std::size_t M, std::size_t N,
                                std::uint64_t seed);

// Rescales every nonzero column to unit Euclidean norm.
void normalize_columns(DenseMatrix& A);

// Exactly s nonzeros on a uniformly drawn support, values |N(0, 1)|.
Vector gen_sparse_nonneg(std::size_t N, std::size_t s, std::uint64_t seed);

// Dense strictly positive "image-like" signal: a few smooth bumps on a
// square grid (or a line when N is not a perfect square) over a small floor.
Vector gen_smooth_nonneg(std::size_t N, std::uint64_t seed);

struct PerturbedSignal {
  Vector x_true;
  Vector x_plus;
  Vector x_minus;
  double q = 0.0;
};

// Scales x_plus_raw to squared norm 1 - q and draws x_minus as |N(0,1)| off
// the support of x_plus_raw, scaled to squared norm q.
PerturbedSignal make_q_perturbed(const Vector& x_plus_raw, double q,
                                 std::uint64_t seed);

// Builds y = A x with the given ground truth attached.
NnlsProblem make_problem(DenseMatrix A, const PerturbedSignal& signal,
                         std::uint64_t seed, std::string label);

void save_problem(const NnlsProblem& p, const std::string& path);
NnlsProblem load_problem(const std::string& path);
std::string problem_to_string(const NnlsProblem& p);
NnlsProblem problem_from_string(const std::string& text);

}  // namespace nnlsgd
