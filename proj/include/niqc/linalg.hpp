#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "niqc/errors.hpp"

// Dense matrices just big enough for the verification algebra: state-space
// realizations, 2n x 2n constraint matrices and frequency-response solves.
// Everything here targets n of a few, so plain O(n^3) algorithms are used
// throughout and no external solver is required.

namespace niqc {

using Complex = std::complex<double>;

template <typename T>
class Matrix {
public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  Matrix operator+(const Matrix& o) const {
    check_same_shape(o);
    Matrix r(rows_, cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] = data_[k] + o.data_[k];
    return r;
  }

  Matrix operator-(const Matrix& o) const {
    check_same_shape(o);
    Matrix r(rows_, cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] = data_[k] - o.data_[k];
    return r;
  }

  Matrix operator*(const Matrix& o) const {
    if (cols_ != o.rows_) throw ModelError("matrix product dimension mismatch");
    Matrix r(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const T a = (*this)(i, k);
        if (a == T{}) continue;
        for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += a * o(k, j);
      }
    return r;
  }

  Matrix operator*(const T& s) const {
    Matrix r(rows_, cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] = data_[k] * s;
    return r;
  }

  friend Matrix operator*(const T& s, const Matrix& m) { return m * s; }

private:
  void check_same_shape(const Matrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw ModelError("matrix shape mismatch");
  }

  std::size_t rows_, cols_;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

inline ComplexMatrix to_complex(const RealMatrix& m) {
  ComplexMatrix r(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
  return r;
}

inline ComplexMatrix adjoint(const ComplexMatrix& m) {
  ComplexMatrix r(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r(j, i) = std::conj(m(i, j));
  return r;
}

inline RealMatrix transpose(const RealMatrix& m) {
  RealMatrix r(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r(j, i) = m(i, j);
  return r;
}

inline double max_abs(const ComplexMatrix& m) {
  double v = 0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) v = std::max(v, std::abs(m(i, j)));
  return v;
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, max_abs(m));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j)
      if (std::abs(m(i, j) - std::conj(m(j, i))) > tol * scale) return false;
  return true;
}

// Solves A X = B by Gaussian elimination with partial pivoting. A is copied;
// sizes here never exceed a handful of states, so no blocking is attempted.
inline ComplexMatrix solve(ComplexMatrix a, ComplexMatrix b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw ModelError("solve: dimension mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(a(r, col));
      if (v > best) { best = v; piv = r; }
    }
    if (best < 1e-300) throw ModelError("solve: singular matrix");
    if (piv != col) {
      for (std::size_t j = col; j < n; ++j) std::swap(a(col, j), a(piv, j));
      for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(piv, j));
    }
    const Complex d = a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const Complex f = a(r, col) / d;
      if (f == Complex{}) continue;
      for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      for (std::size_t j = 0; j < b.cols(); ++j) b(r, j) -= f * b(col, j);
    }
  }
  ComplexMatrix x(n, b.cols());
  for (std::size_t jb = 0; jb < b.cols(); ++jb) {
    for (std::size_t ir = n; ir-- > 0;) {
      Complex s = b(ir, jb);
      for (std::size_t j = ir + 1; j < n; ++j) s -= a(ir, j) * x(j, jb);
      x(ir, jb) = s / a(ir, ir);
    }
  }
  return x;
}

// Eigenvalues of a Hermitian matrix by cyclic Jacobi with unitary 2x2
// rotations (closed form for n <= 2). Off-diagonal mass is driven below
// tol * max(1, ||H||_F); returns the spectrum sorted ascending.
inline std::vector<double> hermitian_eigenvalues(ComplexMatrix h,
                                                 double tol = 1e-12) {
  const std::size_t n = h.rows();
  if (h.cols() != n) throw ModelError("hermitian_eigenvalues: not square");
  if (n == 0) return {};
  // Symmetrize defensively; callers pass matrices Hermitian up to roundoff.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const Complex v = 0.5 * (h(i, j) + std::conj(h(j, i)));
      h(i, j) = v;
      h(j, i) = std::conj(v);
    }
  if (n == 1) return {h(0, 0).real()};
  if (n == 2) {
    const double a = h(0, 0).real(), d = h(1, 1).real();
    const double r = std::abs(h(0, 1));
    const double mid = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), r);
    return {mid - rad, mid + rad};
  }

  double frob = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) frob += std::norm(h(i, j));
  const double stop = tol * std::max(1.0, std::sqrt(frob));

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2 * std::norm(h(i, j));
    if (std::sqrt(off) <= stop) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const Complex apq = h(p, q);
        const double r = std::abs(apq);
        if (r <= stop / (n * n)) continue;
        const Complex phase = apq / r;  // e^{i phi}
        const double app = h(p, p).real(), aqq = h(q, q).real();
        const double tau = (aqq - app) / (2 * r);
        const double t = (tau >= 0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1 + tau * tau));
        const double c = 1 / std::sqrt(1 + t * t);
        const double s = t * c;
        // Unitary U: U(p,p)=c, U(p,q)=s, U(q,p)=-s*conj(phase),
        // U(q,q)=c*conj(phase); apply H <- U^H H U.
        const Complex uqp = -s * std::conj(phase);
        const Complex uqq = c * std::conj(phase);
        for (std::size_t k = 0; k < n; ++k) {
          const Complex hkp = h(k, p), hkq = h(k, q);
          h(k, p) = hkp * c + hkq * uqp;
          h(k, q) = hkp * s + hkq * uqq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const Complex hpk = h(p, k), hqk = h(q, k);
          h(p, k) = c * hpk + std::conj(uqp) * hqk;
          h(q, k) = s * hpk + std::conj(uqq) * hqk;
        }
        h(p, q) = 0;
        h(q, p) = 0;
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = h(i, i).real();
  std::sort(eig.begin(), eig.end());
  return eig;
}

inline double max_eigenvalue(const ComplexMatrix& h) {
  const auto eig = hermitian_eigenvalues(h);
  if (eig.empty()) throw ModelError("max_eigenvalue: empty matrix");
  return eig.back();
}

inline double min_eigenvalue(const ComplexMatrix& h) {
  const auto eig = hermitian_eigenvalues(h);
  if (eig.empty()) throw ModelError("min_eigenvalue: empty matrix");
  return eig.front();
}

// Largest singular value, via the spectrum of M^T M.
inline double max_singular_value(const RealMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  const RealMatrix g = transpose(m) * m;
  const double lam = max_eigenvalue(to_complex(g));
  return std::sqrt(std::max(0.0, lam));
}

// v^T Xi v for a real stacked vector v; real-valued whenever Xi is Hermitian.
inline double real_quadratic_form(const ComplexMatrix& xi,
                                  const std::vector<double>& v) {
  if (xi.rows() != v.size() || xi.cols() != v.size())
    throw ModelError("quadratic form dimension mismatch");
  Complex acc = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) acc += v[i] * xi(i, j) * v[j];
  return acc.real();
}

// v^* Xi v for a complex vector v; real for Hermitian Xi.
inline double hermitian_form(const ComplexMatrix& xi,
                             const std::vector<Complex>& v) {
  if (xi.rows() != v.size() || xi.cols() != v.size())
    throw ModelError("quadratic form dimension mismatch");
  Complex acc = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      acc += std::conj(v[i]) * xi(i, j) * v[j];
  return acc.real();
}

}  // namespace niqc
