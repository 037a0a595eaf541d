#pragma once

// Dense complex linear algebra used by the rest of the library.
//
// Vectorization convention: column stacking, so that entry (i + n*j) of
// vectorize(M) is M(i, j) and
//
//     vectorize(A * X * B) == kron(B^T, A) * vectorize(X).
//
// Under this convention the superoperator of X -> U X U^dagger is
// kron(conj(U), U).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "demon/error.hpp"

namespace demon {

using cd = std::complex<double>;

template <typename Scalar>
using CMatrixX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using CVectorX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

// Qutrit operators and their superoperators.
using Operator = Eigen::Matrix<cd, 3, 3>;
using SuperOperator = Eigen::Matrix<cd, 9, 9>;
using VecState = Eigen::Matrix<cd, 9, 1>;

namespace linops_detail {

constexpr int product_size(int a, int b) {
  return (a == Eigen::Dynamic || b == Eigen::Dynamic) ? Eigen::Dynamic : a * b;
}

inline Eigen::Index exact_sqrt(Eigen::Index n) {
  auto r = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : -1;
}

template <int Size>
constexpr int sqrt_size() {
  if constexpr (Size == Eigen::Dynamic) {
    return Eigen::Dynamic;
  } else {
    int r = 0;
    while ((r + 1) * (r + 1) <= Size) ++r;
    return r * r == Size ? r : Eigen::Dynamic;
  }
}

} // namespace linops_detail

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ConfigError(std::string(what) + ": expected a non-empty square matrix, got " +
                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

// Entrywise Hermiticity test, tolerance relative to the largest entry.
template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

template <typename Derived>
auto vectorize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  constexpr int N = Derived::RowsAtCompileTime;
  using Result = Eigen::Matrix<Scalar, linops_detail::product_size(N, N), 1>;
  require_square(m, "vectorize");
  const Eigen::Index n = m.rows();
  Result v(n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) v(i + n * j) = m(i, j);
  return v;
}

template <typename Derived>
auto devectorize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  constexpr int N = linops_detail::sqrt_size<Derived::SizeAtCompileTime>();
  using Result = Eigen::Matrix<Scalar, N, N>;
  const Eigen::Index n = linops_detail::exact_sqrt(v.size());
  if (n <= 0) {
    throw ConfigError("devectorize: length " + std::to_string(v.size()) +
                      " is not a perfect square");
  }
  Result m(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = v(i + n * j);
  return m;
}

// Standard block layout: block (i, j) of the result is a(i, j) * b.
template <typename DA, typename DB>
auto kron(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename Eigen::ScalarBinaryOpTraits<typename DA::Scalar,
                                                     typename DB::Scalar>::ReturnType;
  constexpr int R = linops_detail::product_size(DA::RowsAtCompileTime, DB::RowsAtCompileTime);
  constexpr int C = linops_detail::product_size(DA::ColsAtCompileTime, DB::ColsAtCompileTime);
  Eigen::Matrix<Scalar, R, C> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Superoperator of X -> A X B.
template <typename DA, typename DB>
auto sandwich_super(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  return kron(b.transpose(), a);
}

// Superoperator of rho -> U rho U^dagger.
template <typename Derived>
auto conjugation_super(const Eigen::MatrixBase<Derived>& u) {
  return kron(u.conjugate(), u);
}

// Tr[a^dagger b].
template <typename DA, typename DB>
auto hs_inner(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError("hs_inner: dimension mismatch");
  return (a.conjugate().cwiseProduct(b)).sum();
}

// Tr of the devectorized matrix, read straight off the diagonal slots.
template <typename Derived>
typename Derived::Scalar trace_of_vectorized(const Eigen::MatrixBase<Derived>& v) {
  const Eigen::Index n = linops_detail::exact_sqrt(v.size());
  if (n <= 0) throw ConfigError("trace_of_vectorized: length is not a perfect square");
  typename Derived::Scalar t(0);
  for (Eigen::Index i = 0; i < n; ++i) t += v(i * (n + 1));
  return t;
}

// exp(scale * h) for Hermitian h via the spectral decomposition
// V diag(exp(scale * lambda)) V^dagger. scale = -i*tau gives the propagator.
template <typename Derived>
typename Derived::PlainObject expm_hermitian(const Eigen::MatrixBase<Derived>& h,
                                             typename Derived::Scalar scale) {
  require_square(h, "expm_hermitian");
  if (!is_hermitian(h)) throw ConfigError("expm_hermitian: generator is not Hermitian");
  using Plain = typename Derived::PlainObject;
  const Plain herm = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Plain> solver(herm);
  if (solver.info() != Eigen::Success) throw ConvergenceError("expm_hermitian: eigensolver failed");
  const auto& vecs = solver.eigenvectors();
  auto phases = (scale * solver.eigenvalues().template cast<typename Derived::Scalar>())
                    .array()
                    .exp()
                    .matrix();
  return vecs * phases.asDiagonal() * vecs.adjoint();
}

// General matrix exponential: degree-13 Pade approximant with scaling and
// squaring. Throws ConvergenceError when the required number of squarings
// exceeds max_squarings or the input is not finite.
template <typename Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived>& a, int max_squarings = 1024) {
  using Plain = typename Derived::PlainObject;
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  require_square(a, "expm");

  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const Real norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(static_cast<double>(norm1)))
    throw ConvergenceError("expm: non-finite generator");
  int squarings = 0;
  if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  if (squarings > max_squarings)
    throw ConvergenceError("expm: iteration budget exceeded (" + std::to_string(squarings) +
                           " squarings needed)");

  const Plain x = a / static_cast<Real>(std::ldexp(1.0, squarings));
  const Plain id = Plain::Identity(a.rows(), a.cols());
  const Plain x2 = x * x;
  const Plain x4 = x2 * x2;
  const Plain x6 = x4 * x2;
  const Plain inner_u = x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 +
                        b[3] * x2 + b[1] * id;
  const Plain u = x * inner_u;
  const Plain v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 +
                  b[2] * x2 + b[0] * id;
  Plain r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = (r * r).eval();
  return r;
}

} // namespace demon
