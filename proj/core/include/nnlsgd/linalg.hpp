#pragma once

// Dense real linear algebra and Hadamard calculus. Row-major storage,
// 64-bit floating point throughout, no external numerical dependencies.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace nnlsgd {

using Vector = std::vector<double>;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  // Zero-filled rows x cols matrix.
  DenseMatrix(std::size_t rows, std::size_t cols);
  // Takes ownership of row-major `data`; throws DimensionError if
  // data.size() != rows * cols and DomainError on non-finite entries.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);
  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A x. Throws DimensionError unless x.size() == A.cols().
Vector matvec(const DenseMatrix& A, std::span<const double> x);
// A^T v. Throws DimensionError unless v.size() == A.rows().
Vector matvec_t(const DenseMatrix& A, std::span<const double> v);

// Allocation-free variants for inner loops. Shapes are the caller's job.
void matvec_into(const DenseMatrix& A, std::span<const double> x,
                 std::span<double> out) noexcept;
void matvec_t_into(const DenseMatrix& A, std::span<const double> v,
                   std::span<double> out) noexcept;

// Entrywise x_n^L for L >= 1 (DomainError otherwise).
Vector hadamard_pow(std::span<const double> x, int L);
Vector hadamard(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> x);
double norm2_sq(std::span<const double> x);
double norm1(std::span<const double> x);
double norm_inf(std::span<const double> x);
bool all_finite(std::span<const double> x) noexcept;

// A^T A.
DenseMatrix gram(const DenseMatrix& A);

struct SpectralEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// ||A^T A||_2 by power iteration on A^T A from a fixed positive start
// vector, stopping once the Rayleigh quotient changes by <= tol relative.
// An all-zero A yields {0, true, 0}.
SpectralEstimate gram_spectral_norm(const DenseMatrix& A, double tol = 1e-12,
                                    int max_iter = 20000);

// ||S||_2 for symmetric (possibly indefinite) S, i.e. max |eigenvalue|,
// by power iteration on S with the estimate ||S v|| for unit v.
SpectralEstimate symmetric_spectral_norm(const DenseMatrix& S,
                                         double tol = 1e-12,
                                         int max_iter = 20000);

}  // namespace nnlsgd
