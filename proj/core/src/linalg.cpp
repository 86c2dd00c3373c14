#include "nnlsgd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnlsgd/errors.hpp"

namespace nnlsgd {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_dims(data_.size(), rows_ * cols_, "DenseMatrix data");
  if (!all_finite(data_)) {
    throw DomainError("DenseMatrix: entries must be finite");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix D(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) D(i, i) = diag[i];
  return D;
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    require_dims(r.size(), n, "DenseMatrix::from_rows row");
    data.insert(data.end(), r.begin(), r.end());
  }
  return DenseMatrix(m, n, std::move(data));
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix T(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) T(j, i) = (*this)(i, j);
  return T;
}

void matvec_into(const DenseMatrix& A, std::span<const double> x,
                 std::span<double> out) noexcept {
  const std::size_t n = A.cols();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double* a = A.row(i).data();
    // Four partial sums; the summation order is fixed, so results are
    // deterministic across runs.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t j = 0; j < n4; j += 4) {
      s0 += a[j] * x[j];
      s1 += a[j + 1] * x[j + 1];
      s2 += a[j + 2] * x[j + 2];
      s3 += a[j + 3] * x[j + 3];
    }
    for (std::size_t j = n4; j < n; ++j) s0 += a[j] * x[j];
    out[i] = (s0 + s1) + (s2 + s3);
  }
}

void matvec_t_into(const DenseMatrix& A, std::span<const double> v,
                   std::span<double> out) noexcept {
  const std::size_t n = A.cols();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double* a = A.row(i).data();
    const double vi = v[i];
    for (std::size_t j = 0; j < n; ++j) out[j] += a[j] * vi;
  }
}

Vector matvec(const DenseMatrix& A, std::span<const double> x) {
  require_dims(x.size(), A.cols(), "matvec operand");
  Vector out(A.rows());
  matvec_into(A, x, out);
  return out;
}

Vector matvec_t(const DenseMatrix& A, std::span<const double> v) {
  require_dims(v.size(), A.rows(), "matvec_t operand");
  Vector out(A.cols());
  matvec_t_into(A, v, out);
  return out;
}

Vector hadamard_pow(std::span<const double> x, int L) {
  if (L < 1) throw DomainError("hadamard_pow: exponent must be >= 1");
  Vector out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    double p = x[n];
    for (int k = 1; k < L; ++k) p *= x[n];
    out[n] = p;
  }
  return out;
}

Vector hadamard(std::span<const double> a, std::span<const double> b) {
  require_dims(b.size(), a.size(), "hadamard operand");
  Vector out(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] * b[n];
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_dims(b.size(), a.size(), "dot operand");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2_sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(norm2_sq(x)); }

double norm1(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> x) noexcept {
  return std::all_of(x.begin(), x.end(),
                     [](double v) { return std::isfinite(v); });
}

DenseMatrix gram(const DenseMatrix& A) {
  const std::size_t n = A.cols();
  DenseMatrix G(n, n);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const auto a = A.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double aj = a[j];
      if (aj == 0.0) continue;
      double* g = G.row(j).data();
      for (std::size_t k = j; k < n; ++k) g[k] += aj * a[k];
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) G(j, k) = G(k, j);
  return G;
}

namespace {

// Irregular positive start vector: an all-ones start is an exact
// eigenvector of many structured test matrices.
Vector unit_start(std::size_t n) {
  Vector v(n);
  for (std::size_t j = 0; j < n; ++j)
    v[j] = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(j) * 0.7548776662);
  const double s = norm2(v);
  for (double& x : v) x /= s;
  return v;
}

}  // namespace

SpectralEstimate gram_spectral_norm(const DenseMatrix& A, double tol,
                                    int max_iter) {
  if (!(tol > 0.0)) throw DomainError("gram_spectral_norm: tol must be > 0");
  SpectralEstimate est;
  if (A.empty() || norm_inf(A.data()) == 0.0) {
    est.converged = true;
    return est;
  }
  Vector v = unit_start(A.cols());
  Vector Av(A.rows());
  Vector w(A.cols());
  double prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    matvec_into(A, v, Av);
    const double rayleigh = norm2_sq(Av);
    matvec_t_into(A, Av, w);
    const double wn = norm2(w);
    est.value = std::max(est.value, rayleigh);
    est.iterations = it;
    if (wn == 0.0) {
      // Start vector in the null space of A; restart along a coordinate.
      std::fill(v.begin(), v.end(), 0.0);
      v[static_cast<std::size_t>(it) % v.size()] = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = w[j] / wn;
    if (it > 1 && std::abs(rayleigh - prev) <= tol * rayleigh) {
      est.converged = true;
      break;
    }
    prev = rayleigh;
  }
  return est;
}

SpectralEstimate symmetric_spectral_norm(const DenseMatrix& S, double tol,
                                         int max_iter) {
  if (S.rows() != S.cols()) {
    throw DimensionError("symmetric_spectral_norm: matrix must be square");
  }
  if (!(tol > 0.0)) {
    throw DomainError("symmetric_spectral_norm: tol must be > 0");
  }
  SpectralEstimate est;
  if (S.empty() || norm_inf(S.data()) == 0.0) {
    est.converged = true;
    return est;
  }
  Vector v = unit_start(S.cols());
  Vector w(S.rows());
  double prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    matvec_into(S, v, w);
    const double wn = norm2(w);
    est.iterations = it;
    if (wn == 0.0) {
      std::fill(v.begin(), v.end(), 0.0);
      v[static_cast<std::size_t>(it) % v.size()] = 1.0;
      continue;
    }
    est.value = std::max(est.value, wn);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = w[j] / wn;
    if (it > 1 && std::abs(wn - prev) <= tol * wn) {
      est.converged = true;
      break;
    }
    prev = wn;
  }
  return est;
}

}  // namespace nnlsgd
