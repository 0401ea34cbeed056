#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace biloop {

// Dense column vector of 64-bit floats. All desk-scale problems in this
// library live in dimension <= a few hundred, so there is no sparse path.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  DenseVector(std::initializer_list<double> values) : data_(values) {}
  explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}

  static DenseVector zeros(std::size_t dim) { return DenseVector(dim, 0.0); }
  static DenseVector ones(std::size_t dim) { return DenseVector(dim, 1.0); }

  std::size_t dim() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool all_finite() const;

 private:
  std::vector<double> data_;
};

bool operator==(const DenseVector& a, const DenseVector& b);

DenseVector operator+(const DenseVector& a, const DenseVector& b);
DenseVector operator-(const DenseVector& a, const DenseVector& b);
DenseVector operator*(double s, const DenseVector& v);

// y += s * x
void axpy(double s, const DenseVector& x, DenseVector& y);

double dot(const DenseVector& a, const DenseVector& b);
double norm(const DenseVector& v);
double norm_sq(const DenseVector& v);

// Dense row-major matrix. The symmetric flag is set only by constructors
// that build the matrix symmetric entry-for-entry.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(const DenseVector& d);
  // Validates a[i][j] == a[j][i] exactly and sets the symmetric flag.
  static DenseMatrix symmetric(std::size_t n, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_symmetric() const { return symmetric_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }

  void mark_symmetric();

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool symmetric_ = false;
  std::vector<double> data_;
};

// A * v. Throws ContractViolation on dimension mismatch.
DenseVector matvec(const DenseMatrix& a, const DenseVector& v);

// A^T * v without forming the transpose.
DenseVector matvec_transposed(const DenseMatrix& a, const DenseVector& v);

DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// Cached Cholesky factorization of an SPD matrix, reusable across solves.
// Throws SingularityError when a pivot is not strictly positive.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const DenseMatrix& a);
  DenseVector solve(const DenseVector& b) const;
  std::size_t dim() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> lower_;  // row-major lower triangle
};

// Direct solve of A v = b for symmetric positive definite A.
DenseVector solve_spd(const DenseMatrix& a, const DenseVector& b);

// All eigenvalues of a symmetric matrix (ascending), by cyclic Jacobi sweeps.
std::vector<double> sym_eigenvalues(const DenseMatrix& a);

// Largest singular value, via eigenvalues of A^T A.
double spectral_norm(const DenseMatrix& a);

}  // namespace biloop
