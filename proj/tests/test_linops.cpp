#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "demon/linops.hpp"

using namespace demon;

namespace {

Operator random_operator(std::mt19937& rng) {
  std::normal_distribution<double> g;
  Operator m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = cd(g(rng), g(rng));
  return m;
}

double max_abs(const auto& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("vectorize stacks columns and devectorize inverts it") {
  Operator m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = cd(10 * i + j, -j);
  const VecState v = vectorize(m);
  CHECK(v(1) == m(1, 0));
  CHECK(v(3) == m(0, 1));
  CHECK(v(8) == m(2, 2));
  CHECK(max_abs(devectorize(v) - m) == 0.0);
  CHECK(trace_of_vectorized(v) == m.trace());
}

TEST_CASE("vec(A X B) = kron(B^T, A) vec(X) on random operators") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Operator a = random_operator(rng), x = random_operator(rng), b = random_operator(rng);
    // entrywise oracle, independent of kron
    VecState direct;
    const Operator axb = a * x * b;
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) direct(i + 3 * j) = axb(i, j);
    CHECK(max_abs(sandwich_super(a, b) * vectorize(x) - direct) < 1e-12);
  }
}

TEST_CASE("conjugation superoperator reproduces U rho U^dagger") {
  std::mt19937 rng(11);
  const Operator h0 = random_operator(rng);
  const Operator h = h0 + h0.adjoint();
  const Operator u = expm_hermitian(h, cd(0.0, -0.7));
  const Operator rho = random_operator(rng);
  CHECK(max_abs(devectorize(VecState(conjugation_super(u) * vectorize(rho))) - u * rho * u.adjoint()) < 1e-12);
}

TEST_CASE("kron block layout and dynamic sizes") {
  Eigen::MatrixXcd a(2, 1), b(1, 3);
  a << 1.0, 2.0;
  b << 1.0, cd(0, 1), 3.0;
  const auto k = kron(a, b);
  CHECK(k.rows() == 2);
  CHECK(k.cols() == 3);
  CHECK(k(1, 1) == cd(0, 2));
  CHECK_THROWS_AS(devectorize(Eigen::VectorXcd(5)), ConfigError);
  CHECK_THROWS_AS(vectorize(Eigen::MatrixXcd(2, 3)), ConfigError);
}

TEST_CASE("hs_inner is Tr[a^dagger b]") {
  std::mt19937 rng(3);
  const Operator a = random_operator(rng), b = random_operator(rng);
  CHECK(std::abs(hs_inner(a, b) - (a.adjoint() * b).trace()) < 1e-12);
}

TEST_CASE("expm matches the MatrixFunctions oracle") {
  std::mt19937 rng(5);
  for (double scale : {1e-3, 0.5, 3.0, 40.0}) {
    const Eigen::Matrix<cd, 9, 9> a = scale * Eigen::Matrix<cd, 9, 9>::Random();
    const Eigen::Matrix<cd, 9, 9> ours = expm(a);
    const Eigen::Matrix<cd, 9, 9> ref = a.exp();
    CHECK(max_abs(ours - ref) <= 1e-11 * std::max(1.0, max_abs(ref)));
  }
  const Operator h0 = random_operator(rng);
  const Operator h = h0 + h0.adjoint();
  CHECK(max_abs(expm(Operator(cd(0, -1.3) * h)) - expm_hermitian(h, cd(0, -1.3))) < 1e-12);
}

TEST_CASE("expm of nilpotent and zero generators") {
  Operator n = Operator::Zero();
  n(0, 1) = 2.0;
  Operator expect = Operator::Identity();
  expect(0, 1) = 2.0;
  CHECK(max_abs(expm(n) - expect) < 1e-14);
  CHECK(max_abs(expm(Operator(Operator::Zero())) - Operator::Identity()) < 1e-15);
}

TEST_CASE("expm refuses non-finite input and runaway squaring") {
  Operator bad = Operator::Zero();
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(expm(bad), ConvergenceError);
  Operator big = Operator::Identity() * 1e6;
  CHECK_THROWS_AS(expm(big, 4), ConvergenceError);
}

TEST_CASE("expm_hermitian rejects non-Hermitian generators") {
  Operator m = Operator::Zero();
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(expm_hermitian(m, cd(0, -1)), ConfigError);
  CHECK(is_hermitian(Operator(m + m.adjoint())));
}
