#include <gtest/gtest.h>

#include <complex>
#include <vector>

#include "niqc/linalg.hpp"

using niqc::Complex;
using niqc::ComplexMatrix;
using niqc::RealMatrix;

TEST(Matrix, product_and_scalar) {
  RealMatrix a(2, 3), b(3, 2);
  double v = 1;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) a(i, j) = v++;
  v = 1;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) b(i, j) = v++;
  const RealMatrix c = a * b;
  // [[1,2,3],[4,5,6]] * [[1,2],[3,4],[5,6]]
  EXPECT_DOUBLE_EQ(c(0, 0), 22);
  EXPECT_DOUBLE_EQ(c(0, 1), 28);
  EXPECT_DOUBLE_EQ(c(1, 0), 49);
  EXPECT_DOUBLE_EQ(c(1, 1), 64);

  const RealMatrix d = 2.0 * c - c;
  EXPECT_DOUBLE_EQ(d(1, 1), 64);
  EXPECT_THROW(a * a, niqc::ModelError);
}

TEST(Matrix, identity_multiplication_is_noop) {
  ComplexMatrix m(3, 3);
  m(0, 1) = Complex(1, -2);
  m(2, 0) = Complex(0, 5);
  const ComplexMatrix r = ComplexMatrix::identity(3) * m;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r(i, j), m(i, j));
}

TEST(Matrix, adjoint_is_an_involution) {
  ComplexMatrix m(2, 3);
  m(0, 0) = Complex(1, 1);
  m(1, 2) = Complex(-2, 3);
  const ComplexMatrix mm = niqc::adjoint(niqc::adjoint(m));
  EXPECT_EQ(mm.rows(), 2u);
  EXPECT_EQ(mm.cols(), 3u);
  EXPECT_EQ(mm(1, 2), m(1, 2));
  EXPECT_EQ(niqc::adjoint(m)(2, 1), std::conj(m(1, 2)));
}

TEST(IsHermitian, accepts_and_rejects) {
  ComplexMatrix h(2, 2);
  h(0, 0) = 2;
  h(0, 1) = Complex(1, -1);
  h(1, 0) = Complex(1, 1);
  h(1, 1) = 3;
  EXPECT_TRUE(niqc::is_hermitian(h));
  h(1, 0) = Complex(1, 1.001);
  EXPECT_FALSE(niqc::is_hermitian(h));
  ComplexMatrix rect(2, 3);
  EXPECT_FALSE(niqc::is_hermitian(rect));
}

/* oracle:
import numpy as np
Ac = np.array([[2+1j, 0, 1],[1, 3-1j, 2j],[0, 1j, 1+1j]])
b = np.array([[1],[2],[-1j]])
np.linalg.solve(Ac, b)
*/
TEST(Solve, complex_3x3_against_oracle) {
  ComplexMatrix a(3, 3), b(3, 1);
  a(0, 0) = Complex(2, 1);
  a(0, 2) = 1;
  a(1, 0) = 1;
  a(1, 1) = Complex(3, -1);
  a(1, 2) = Complex(0, 2);
  a(2, 1) = Complex(0, 1);
  a(2, 2) = Complex(1, 1);
  b(0, 0) = 1;
  b(1, 0) = 2;
  b(2, 0) = Complex(0, -1);
  const ComplexMatrix x = niqc::solve(a, b);
  EXPECT_NEAR(x(0, 0).real(), 0.665158371040724, 1e-12);
  EXPECT_NEAR(x(0, 0).imag(), -0.031674208144796, 1e-12);
  EXPECT_NEAR(x(1, 0).real(), -0.036199095022624, 1e-12);
  EXPECT_NEAR(x(1, 0).imag(), 0.239819004524887, 1e-12);
  EXPECT_NEAR(x(2, 0).real(), -0.361990950226244, 1e-12);
  EXPECT_NEAR(x(2, 0).imag(), -0.601809954751131, 1e-12);
}

TEST(Solve, residual_is_tiny) {
  ComplexMatrix a(4, 4), b(4, 2);
  unsigned s = 12345;
  auto rnd = [&s] {
    s = s * 1103515245u + 12345u;
    return static_cast<double>((s >> 16) & 0x7fff) / 16384.0 - 1.0;
  };
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) a(i, j) = Complex(rnd(), rnd());
    for (std::size_t j = 0; j < 2; ++j) b(i, j) = Complex(rnd(), rnd());
  }
  const ComplexMatrix x = niqc::solve(a, b);
  const ComplexMatrix r = a * x - b;
  EXPECT_LT(niqc::max_abs(r), 1e-12);
}

TEST(Solve, singular_matrix_throws) {
  ComplexMatrix a(2, 2), b(2, 1);
  a(0, 0) = 1;
  a(0, 1) = 2;
  a(1, 0) = 2;
  a(1, 1) = 4;  // rank one
  b(0, 0) = 1;
  b(1, 0) = 1;
  EXPECT_THROW(niqc::solve(a, b), niqc::ModelError);
}

TEST(HermitianEigenvalues, two_by_two_closed_form) {
  ComplexMatrix h(2, 2);
  h(0, 0) = 2;
  h(0, 1) = 1;
  h(1, 0) = 1;
  h(1, 1) = 2;
  const auto eig = niqc::hermitian_eigenvalues(h);
  ASSERT_EQ(eig.size(), 2u);
  EXPECT_NEAR(eig[0], 1.0, 1e-14);
  EXPECT_NEAR(eig[1], 3.0, 1e-14);
}

TEST(HermitianEigenvalues, complex_off_diagonal) {
  // [[0, i], [-i, 0]] has spectrum {-1, +1}
  ComplexMatrix h(2, 2);
  h(0, 1) = Complex(0, 1);
  h(1, 0) = Complex(0, -1);
  const auto eig = niqc::hermitian_eigenvalues(h);
  EXPECT_NEAR(eig[0], -1.0, 1e-14);
  EXPECT_NEAR(eig[1], 1.0, 1e-14);
}

/* oracle:
H = np.array([[2, 1-1j, .5, 2j],[1+1j, 3, -1j, 1],
              [.5, 1j, -1, .5-.5j],[-2j, 1, .5+.5j, 0]])
np.linalg.eigvalsh(H)
*/
TEST(HermitianEigenvalues, four_by_four_against_oracle) {
  ComplexMatrix h(4, 4);
  h(0, 0) = 2;
  h(0, 1) = Complex(1, -1);
  h(0, 2) = 0.5;
  h(0, 3) = Complex(0, 2);
  h(1, 1) = 3;
  h(1, 2) = Complex(0, -1);
  h(1, 3) = 1;
  h(2, 2) = -1;
  h(2, 3) = Complex(0.5, -0.5);
  h(3, 3) = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < i; ++j) h(i, j) = std::conj(h(j, i));
  const auto eig = niqc::hermitian_eigenvalues(h);
  ASSERT_EQ(eig.size(), 4u);
  EXPECT_NEAR(eig[0], -2.468591708460778, 1e-11);
  EXPECT_NEAR(eig[1], -0.440605877787092, 1e-11);
  EXPECT_NEAR(eig[2], 2.635020915655464, 1e-11);
  EXPECT_NEAR(eig[3], 4.274176670592406, 1e-11);
  EXPECT_NEAR(niqc::min_eigenvalue(h), eig[0], 1e-13);
  EXPECT_NEAR(niqc::max_eigenvalue(h), eig[3], 1e-13);
}

TEST(HermitianEigenvalues, trace_is_preserved) {
  ComplexMatrix h(3, 3);
  h(0, 0) = 1;
  h(1, 1) = -2;
  h(2, 2) = 4;
  h(0, 1) = Complex(2, 1);
  h(1, 0) = Complex(2, -1);
  h(1, 2) = Complex(0, -3);
  h(2, 1) = Complex(0, 3);
  const auto eig = niqc::hermitian_eigenvalues(h);
  double sum = 0;
  for (double v : eig) sum += v;
  EXPECT_NEAR(sum, 3.0, 1e-12);
}

TEST(MaxSingularValue, three_four_five) {
  RealMatrix m(2, 2);
  m(0, 0) = 3;
  m(1, 0) = 4;
  EXPECT_NEAR(niqc::max_singular_value(m), 5.0, 1e-12);
}

/* oracle: np.linalg.svd([[1,2],[3,4]])[1][0] */
TEST(MaxSingularValue, dense_against_oracle) {
  RealMatrix m(2, 2);
  m(0, 0) = 1;
  m(0, 1) = 2;
  m(1, 0) = 3;
  m(1, 1) = 4;
  EXPECT_NEAR(niqc::max_singular_value(m), 5.464985704219043, 1e-12);
}

TEST(QuadraticForms, match_hand_expansion) {
  ComplexMatrix xi(2, 2);
  xi(0, 0) = 1;
  xi(0, 1) = Complex(0, -1);
  xi(1, 0) = Complex(0, 1);
  xi(1, 1) = -2;
  // real vector [3, 2]: v'Xi v = 9 - 8 + cross terms 3*2*(i - i) = 1
  EXPECT_NEAR(niqc::real_quadratic_form(xi, {3.0, 2.0}), 1.0, 1e-14);
  // complex vector [1, i]: conj(v)'Xi v = 1 + (-i)(i)(-2) ... = 1 - 2 + 2 = 1
  const std::vector<Complex> v{Complex(1, 0), Complex(0, 1)};
  const double q = niqc::hermitian_form(xi, v);
  // expand: 1*1 + conj(1)(-i)(i) + conj(i)(i)(1) + conj(i)(-2)(i)
  //       = 1 + 1 + 1 - 2 = 1
  EXPECT_NEAR(q, 1.0, 1e-14);
  EXPECT_THROW(niqc::real_quadratic_form(xi, {1.0}), niqc::ModelError);
}
