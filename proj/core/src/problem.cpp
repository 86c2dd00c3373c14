#include "nnlsgd/problem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string_view>

#include "nnlsgd/errors.hpp"
#include "nnlsgd/rng.hpp"
#include "nnlsgd/textdoc.hpp"

namespace nnlsgd {

namespace {

constexpr double kNormSplitTol = 1e-10;

void require_shape(const std::optional<Vector>& v, std::size_t n,
                   const char* name) {
  if (v && v->size() != n) {
    throw ValidationError(std::string(name) + " has length " +
                          std::to_string(v->size()) + ", expected " +
                          std::to_string(n));
  }
}

Vector scaled_to_sq_norm(Vector v, double target_sq) {
  const double cur = norm2_sq(v);
  if (target_sq == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return v;
  }
  const double scale = std::sqrt(target_sq / cur);
  for (double& x : v) x *= scale;
  return v;
}

}  // namespace

void NnlsProblem::validate() const {
  if (A.rows() == 0 || A.cols() == 0) {
    throw ValidationError("matrix must have at least one row and column");
  }
  if (y.size() != A.rows()) {
    throw ValidationError("y has length " + std::to_string(y.size()) +
                          ", expected m = " + std::to_string(A.rows()));
  }
  require_shape(x_true, A.cols(), "x_true");
  require_shape(x_plus, A.cols(), "x_plus");
  require_shape(x_minus, A.cols(), "x_minus");
  if (q && !(*q >= 0.0 && *q <= 1.0)) {
    throw ValidationError("q must lie in [0, 1]");
  }
  if (x_plus && x_minus) {
    for (std::size_t n = 0; n < x_plus->size(); ++n) {
      const double p = (*x_plus)[n];
      const double m = (*x_minus)[n];
      if (p < 0.0 || m < 0.0) {
        throw ValidationError("x_plus and x_minus must be nonnegative");
      }
      if (p > 0.0 && m > 0.0) {
        throw ValidationError("x_plus and x_minus supports must be disjoint");
      }
    }
    if (q) {
      if (std::abs(norm2_sq(*x_plus) - (1.0 - *q)) > kNormSplitTol ||
          std::abs(norm2_sq(*x_minus) - *q) > kNormSplitTol) {
        throw ValidationError(
            "squared norms of x_plus / x_minus must equal 1-q / q");
      }
    }
  }
}

DenseMatrix gen_gaussian_matrix(std::size_t M, std::size_t N,
                                std::uint64_t seed) {
  if (M == 0 || N == 0) throw DomainError("gen_gaussian_matrix: M, N >= 1");
  CounterRng rng(seed, streams::kMatrix);
  std::vector<double> data(M * N);
  for (double& v : data) v = rng.next_normal();
  return DenseMatrix(M, N, std::move(data));
}

void normalize_columns(DenseMatrix& A) {
  Vector norms(A.cols(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) norms[j] += A(i, j) * A(i, j);
  for (double& v : norms) v = std::sqrt(v);
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j)
      if (norms[j] > 0.0) A(i, j) /= norms[j];
}

Vector gen_sparse_nonneg(std::size_t N, std::size_t s, std::uint64_t seed) {
  if (s < 1 || s > N) {
    throw DomainError("gen_sparse_nonneg: sparsity must satisfy 1 <= s <= N");
  }
  CounterRng pick(seed, streams::kSupport);
  std::vector<std::size_t> perm(N);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = 0; k < s; ++k) {
    const std::size_t j = k + pick.next_below(N - k);
    std::swap(perm[k], perm[j]);
  }
  std::sort(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(s));

  CounterRng vals(seed, streams::kValues);
  Vector x(N, 0.0);
  for (std::size_t k = 0; k < s; ++k) {
    double v = 0.0;
    while (v == 0.0) v = std::abs(vals.next_normal());
    x[perm[k]] = v;
  }
  return x;
}

Vector gen_smooth_nonneg(std::size_t N, std::uint64_t seed) {
  if (N == 0) throw DomainError("gen_smooth_nonneg: N >= 1");
  CounterRng rng(seed, streams::kSmoothSignal);
  const auto side = static_cast<std::size_t>(
      std::llround(std::sqrt(static_cast<double>(N))));
  const bool grid = side * side == N;
  const double extent = grid ? static_cast<double>(side) : static_cast<double>(N);

  constexpr int kBumps = 3;
  struct Bump {
    double cx, cy, width, amp;
  };
  std::array<Bump, kBumps> bumps{};
  for (auto& b : bumps) {
    b.cx = 0.2 * extent + 0.6 * extent * rng.next_uniform();
    b.cy = 0.2 * extent + 0.6 * extent * rng.next_uniform();
    b.width = extent * (0.08 + 0.12 * rng.next_uniform());
    b.amp = 0.5 + 0.5 * rng.next_uniform();
  }
  Vector x(N, 0.0);
  double peak = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double px = grid ? static_cast<double>(n % side) : static_cast<double>(n);
    const double py = grid ? static_cast<double>(n / side) : 0.0;
    double v = 0.0;
    for (const auto& b : bumps) {
      const double dx = px - b.cx;
      const double dy = grid ? py - b.cy : 0.0;
      v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
    }
    x[n] = v;
    peak = std::max(peak, v);
  }
  // Zero background like a digit image: drop everything under 10% of peak.
  for (double& v : x) v = std::max(0.0, v - 0.1 * peak);
  return x;
}

PerturbedSignal make_q_perturbed(const Vector& x_plus_raw, double q,
                                 std::uint64_t seed) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw DomainError("make_q_perturbed: q must lie in [0, 1]");
  }
  for (double v : x_plus_raw) {
    if (v < 0.0) throw DomainError("make_q_perturbed: x_plus must be >= 0");
  }
  if (norm2_sq(x_plus_raw) == 0.0 && q < 1.0) {
    throw DomainError("make_q_perturbed: x_plus is zero but q < 1");
  }

  PerturbedSignal out;
  out.q = q;
  out.x_plus = scaled_to_sq_norm(x_plus_raw, 1.0 - q);

  CounterRng rng(seed, streams::kNegativePart);
  Vector minus(x_plus_raw.size(), 0.0);
  bool any_off_support = false;
  for (std::size_t n = 0; n < minus.size(); ++n) {
    const double g = std::abs(rng.next_normal());
    if (x_plus_raw[n] == 0.0) {
      minus[n] = g;
      any_off_support = any_off_support || g > 0.0;
    }
  }
  if (q > 0.0 && !any_off_support) {
    throw DomainError(
        "make_q_perturbed: x_plus has full support, cannot place x_minus");
  }
  out.x_minus = scaled_to_sq_norm(std::move(minus), q);

  out.x_true.resize(out.x_plus.size());
  for (std::size_t n = 0; n < out.x_true.size(); ++n)
    out.x_true[n] = out.x_plus[n] - out.x_minus[n];
  return out;
}

NnlsProblem make_problem(DenseMatrix A, const PerturbedSignal& signal,
                         std::uint64_t seed, std::string label) {
  NnlsProblem p;
  p.y = matvec(A, signal.x_true);
  p.A = std::move(A);
  p.x_true = signal.x_true;
  p.x_plus = signal.x_plus;
  p.x_minus = signal.x_minus;
  p.q = signal.q;
  p.seed = seed;
  p.label = std::move(label);
  return p;
}

namespace {

constexpr std::array<std::string_view, 10> kProblemKeys = {
    "label", "m", "n", "a", "y", "x_true", "x_plus", "x_minus", "q", "seed"};

TextDocument to_document(const NnlsProblem& p) {
  TextDocument doc;
  doc.add_comment("nnls-problem v1");
  doc.set("label", p.label);
  doc.set_uint("m", p.m());
  doc.set_uint("n", p.n());
  doc.set_reals("a", p.A.data());
  doc.set_reals("y", p.y);
  if (p.x_true) doc.set_reals("x_true", *p.x_true);
  if (p.x_plus) doc.set_reals("x_plus", *p.x_plus);
  if (p.x_minus) doc.set_reals("x_minus", *p.x_minus);
  if (p.q) doc.set_real("q", *p.q);
  if (p.seed) doc.set_uint("seed", *p.seed);
  return doc;
}

NnlsProblem from_document(const TextDocument& doc) {
  doc.reject_unknown(kProblemKeys);
  NnlsProblem p;
  if (const auto* e = doc.find("label")) p.label = e->value;
  const auto m = doc.required_uint("m");
  const auto n = doc.required_uint("n");
  auto a = doc.required_reals("a");
  if (m == 0 || n == 0) throw ValidationError("m and n must be >= 1");
  if (a.size() != m * n) {
    throw ValidationError("a has " + std::to_string(a.size()) +
                          " entries, expected m*n = " + std::to_string(m * n));
  }
  if (!all_finite(a)) throw ValidationError("a has non-finite entries");
  p.A = DenseMatrix(m, n, std::move(a));
  p.y = doc.required_reals("y");
  p.x_true = doc.optional_reals("x_true");
  p.x_plus = doc.optional_reals("x_plus");
  p.x_minus = doc.optional_reals("x_minus");
  p.q = doc.optional_real("q");
  p.seed = doc.optional_uint("seed");
  p.validate();
  return p;
}

}  // namespace

std::string problem_to_string(const NnlsProblem& p) {
  return to_document(p).to_string();
}

NnlsProblem problem_from_string(const std::string& text) {
  return from_document(TextDocument::parse_string(text));
}

void save_problem(const NnlsProblem& p, const std::string& path) {
  to_document(p).write_file(path);
}

NnlsProblem load_problem(const std::string& path) {
  return from_document(TextDocument::read_file(path));
}

}  // namespace nnlsgd
