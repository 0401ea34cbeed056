#include "biloop/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "biloop/errors.hpp"

namespace biloop {

namespace {

void require_same_dim(const DenseVector& a, const DenseVector& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw ContractViolation(std::string(op) + ": dimension mismatch " +
                            std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
}

}  // namespace

bool DenseVector::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool operator==(const DenseVector& a, const DenseVector& b) {
  return a.data() == b.data();
}

DenseVector operator+(const DenseVector& a, const DenseVector& b) {
  require_same_dim(a, b, "operator+");
  DenseVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] + b[i];
  return out;
}

DenseVector operator-(const DenseVector& a, const DenseVector& b) {
  require_same_dim(a, b, "operator-");
  DenseVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] - b[i];
  return out;
}

DenseVector operator*(double s, const DenseVector& v) {
  DenseVector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = s * v[i];
  return out;
}

void axpy(double s, const DenseVector& x, DenseVector& y) {
  require_same_dim(x, y, "axpy");
  for (std::size_t i = 0; i < x.dim(); ++i) y[i] += s * x[i];
}

double dot(const DenseVector& a, const DenseVector& b) {
  require_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const DenseVector& v) { return dot(v, v); }

double norm(const DenseVector& v) { return std::sqrt(norm_sq(v)); }

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw ParameterError("DenseMatrix: rows and cols must be positive");
  }
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw ParameterError("DenseMatrix: rows and cols must be positive");
  }
  if (data_.size() != rows * cols) {
    throw ContractViolation("DenseMatrix: data length " + std::to_string(data_.size()) +
                            " does not equal rows*cols " + std::to_string(rows * cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  m.symmetric_ = true;
  return m;
}

DenseMatrix DenseMatrix::diagonal(const DenseVector& d) {
  DenseMatrix m(d.dim(), d.dim(), 0.0);
  for (std::size_t i = 0; i < d.dim(); ++i) m(i, i) = d[i];
  m.symmetric_ = true;
  return m;
}

DenseMatrix DenseMatrix::symmetric(std::size_t n, std::vector<double> data) {
  DenseMatrix m(n, n, std::move(data));
  m.mark_symmetric();
  return m;
}

void DenseMatrix::mark_symmetric() {
  if (rows_ != cols_) {
    throw ContractViolation("mark_symmetric: matrix is not square");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      if ((*this)(i, j) != (*this)(j, i)) {
        throw ContractViolation("mark_symmetric: entries (" + std::to_string(i) + "," +
                                std::to_string(j) + ") differ");
      }
    }
  }
  symmetric_ = true;
}

DenseVector matvec(const DenseMatrix& a, const DenseVector& v) {
  if (a.cols() != v.dim()) {
    throw ContractViolation("matvec: A.cols " + std::to_string(a.cols()) +
                            " != v.dim " + std::to_string(v.dim()));
  }
  DenseVector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

DenseVector matvec_transposed(const DenseMatrix& a, const DenseVector& v) {
  if (a.rows() != v.dim()) {
    throw ContractViolation("matvec_transposed: A.rows " + std::to_string(a.rows()) +
                            " != v.dim " + std::to_string(v.dim()));
  }
  DenseVector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double vi = v[i];
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j) * vi;
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: inner dimensions " + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()));
  }
  DenseMatrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

CholeskyFactor::CholeskyFactor(const DenseMatrix& a) : n_(a.rows()) {
  if (a.rows() != a.cols()) {
    throw ContractViolation("CholeskyFactor: matrix is not square");
  }
  lower_.assign(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower_[i * n_ + k] * lower_[j * n_ + k];
      if (i == j) {
        if (s <= 0.0) {
          throw SingularityError("CholeskyFactor: non-positive pivot at row " +
                                 std::to_string(i));
        }
        lower_[i * n_ + i] = std::sqrt(s);
      } else {
        lower_[i * n_ + j] = s / lower_[j * n_ + j];
      }
    }
  }
}

DenseVector CholeskyFactor::solve(const DenseVector& b) const {
  if (b.dim() != n_) {
    throw ContractViolation("CholeskyFactor::solve: rhs dim " + std::to_string(b.dim()) +
                            " != " + std::to_string(n_));
  }
  DenseVector y(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower_[i * n_ + k] * y[k];
    y[i] = s / lower_[i * n_ + i];
  }
  DenseVector x(n_);
  for (std::size_t ii = n_; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n_; ++k) s -= lower_[k * n_ + ii] * x[k];
    x[ii] = s / lower_[ii * n_ + ii];
  }
  return x;
}

DenseVector solve_spd(const DenseMatrix& a, const DenseVector& b) {
  if (a.rows() != b.dim()) {
    throw ContractViolation("solve_spd: A.rows " + std::to_string(a.rows()) +
                            " != b.dim " + std::to_string(b.dim()));
  }
  return CholeskyFactor(a).solve(b);
}

std::vector<double> sym_eigenvalues(const DenseMatrix& a) {
  if (a.rows() != a.cols()) {
    throw ContractViolation("sym_eigenvalues: matrix is not square");
  }
  const std::size_t n = a.rows();
  std::vector<double> m(a.data());
  auto at = [&](std::size_t i, std::size_t j) -> double& { return m[i * n + j]; };

  // Cyclic Jacobi. Desk-scale dims make O(n^3) sweeps cheap.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    }
    if (off < 1e-28) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double spectral_norm(const DenseMatrix& a) {
  const DenseMatrix gram = matmul(transpose(a), a);
  const std::vector<double> eig = sym_eigenvalues(gram);
  return std::sqrt(std::max(0.0, eig.back()));
}

}  // namespace biloop
