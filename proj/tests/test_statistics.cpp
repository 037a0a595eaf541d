#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "demon/statistics.hpp"

using namespace demon;
using std::numbers::pi;

namespace {

DemonConfig nv_config(double p_a = 1.0, double gamma_tl = 0.5) {
  DemonConfig c;
  c.hamiltonian = {HamiltonianKind::NV, 2 * pi * 2.87e9, 2 * pi * 100e6, 0.0};
  c.p_absorb = p_a;
  c.gamma_rate = gamma_tl / c.t_laser;
  return c;
}

DemonConfig mw_config(double p_a = 0.3, double gamma_tl = 0.5002) {
  DemonConfig c;
  c.hamiltonian = {HamiltonianKind::MW, 0.0, 0.0, 2 * pi * 2e6};
  c.p_absorb = p_a;
  c.gamma_rate = gamma_tl / c.t_laser;
  return c;
}

double max_abs(const auto& m) { return m.cwiseAbs().maxCoeff(); }

// Sum over the raw 9 atoms, no merging and no shifting.
double double_sum_g(const TpmStatistics& s, double eta) {
  double g = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      g += s.initial_probs(i) * s.conditional(i, j) * std::exp(-eta * (s.energies(j) - s.energies(i)));
  return g;
}

} // namespace

TEST_CASE("zero pulses give the identity conditional matrix") {
  const DemonMap map = build_block(mw_config());
  CHECK(max_abs(conditional_probabilities(map, map.eigen, 0) - Eigen::Matrix3d::Identity()) < 1e-12);
}

TEST_CASE("NV: every initial eigenstate ends in |0>") {
  const DemonMap map = build_block(nv_config(1.0, 0.5));
  const Eigen::Matrix3d c = conditional_probabilities(map, map.eigen, 80);
  for (int i = 0; i < 3; ++i) {
    CHECK(c(i, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(c(i, 1)) < 1e-12);
    CHECK(std::abs(c(i, 2)) < 1e-12);
  }
}

TEST_CASE("MW, full absorption, strong pumping: rows are overlaps with |0>") {
  const DemonMap map = build_block(mw_config(1.0, 60.0));
  const Eigen::Matrix3d c = conditional_probabilities(map, map.eigen, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(c(i, j) == doctest::Approx(std::norm(map.eigen.ket(j)(sz_index(0)))).epsilon(1e-12));
  CHECK(c(0, 0) == doctest::Approx(0.5));
  CHECK(std::abs(c(0, 1)) < 1e-12);
}

TEST_CASE("conditional rows are distributions across the parameter grid") {
  for (double pa : {0.1, 0.7, 1.0})
    for (double gtl : {0.0, 0.5, 5.0})
      for (const auto& cfg : {nv_config(pa, gtl), mw_config(pa, gtl)}) {
        const DemonMap map = build_block(cfg);
        for (int n : {1, 3, 12}) CHECK_NOTHROW(tpm_statistics(map, 1.0 / map.eigen.energies(2), n).validate());
      }
}

TEST_CASE("energy distribution") {
  TpmStatistics s;
  s.energies << -1.0, 0.0, 1.0;
  s.initial_probs << 0.2, 0.5, 0.3;
  auto d = energy_distribution(s);
  REQUIRE(d.atoms.size() == 1);
  CHECK(d.atoms[0].first == 0.0);
  CHECK(d.atoms[0].second == doctest::Approx(1.0));

  // equal rows at beta = 0: convolution of uniform(E_i) with pt(E_j)
  const Eigen::Vector3d pt(0.5, 0.2, 0.3);
  s.initial_probs.setConstant(1.0 / 3.0);
  for (int i = 0; i < 3; ++i) s.conditional.row(i) = pt.transpose();
  d = energy_distribution(s);
  CHECK(d.atoms.size() == 5);
  CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-14));
  for (const auto& [de, p] : d.atoms) {
    double expect = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (std::abs(s.energies(j) - s.energies(i) - de) < 1e-12) expect += pt(j) / 3.0;
    CHECK(p == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("NV steady-state distribution is concentrated at 0, -E_2, -E_3") {
  const DemonMap map = build_block(nv_config());
  const TpmStatistics s = tpm_statistics(map, 0.297 / map.eigen.energies(2), 80);
  const auto d = energy_distribution(s);
  REQUIRE(d.atoms.size() == 3); // |+-1> only ever feed |0>
  double at0 = 0.0, at2 = 0.0, at3 = 0.0;
  for (const auto& [de, p] : d.atoms) {
    if (std::abs(de) < 1.0) at0 += p;
    if (std::abs(de + map.eigen.energies(1)) < 1.0) at2 += p;
    if (std::abs(de + map.eigen.energies(2)) < 1.0) at3 += p;
  }
  CHECK(at0 == doctest::Approx(s.initial_probs(0)).epsilon(1e-12));
  CHECK(at2 == doctest::Approx(s.initial_probs(1)).epsilon(1e-12));
  CHECK(at3 == doctest::Approx(s.initial_probs(2)).epsilon(1e-12));
}

TEST_CASE("characteristic function: G(0) = 1, distribution oracle, unital limit") {
  const DemonMap map = build_block(mw_config(0.7));
  const TpmStatistics s = tpm_statistics(map, 3.0 / map.eigen.energies(2), 4);
  CHECK(characteristic_function(s, 0.0) == 1.0);
  const auto d = energy_distribution(s);
  CHECK(d.atoms.size() <= 7);
  for (double eta : {-2.0, -0.3, 0.5, 4.0}) {
    const double e = eta / map.eigen.energies(2);
    CHECK(characteristic_function(s, e) == doctest::Approx(characteristic_from_distribution(d, e)).epsilon(1e-12));
    CHECK(characteristic_function(s, e) == doctest::Approx(double_sum_g(s, e)).epsilon(1e-12));
  }

  const DemonMap unital = build_block(nv_config(0.7, 0.0));
  const double beta = 0.297 / unital.eigen.energies(2);
  for (int n : {1, 5, 12})
    CHECK(characteristic_function(tpm_statistics(unital, beta, n), beta) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("characteristic function survives extreme eta") {
  const DemonMap map = build_block(nv_config());
  const TpmStatistics s = tpm_statistics(map, 1.0 / map.eigen.energies(2), 3);
  CHECK(std::isfinite(characteristic_function(s, -500.0 / map.eigen.energies(2))));
  CHECK(std::isfinite(characteristic_function(s, 500.0 / map.eigen.energies(2))));
}

TEST_CASE("G is convex and G'(0) = -<dE>") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (const auto& cfg : {nv_config(0.3, 0.5), mw_config(0.7, 5.0)}) {
    const DemonMap map = build_block(cfg);
    const double scale = map.eigen.energies(2);
    const TpmStatistics s = tpm_statistics(map, u(rng) / scale, 5);
    for (int k = -20; k <= 20; ++k) {
      const double eta = 0.2 * k / scale;
      CHECK(characteristic_derivative(s, eta, 2) >= 0.0);
      const double h = 0.05 / scale;
      CHECK(characteristic_function(s, eta - h) + characteristic_function(s, eta + h) >=
            2.0 * characteristic_function(s, eta) - 1e-12);
    }
    const double h = 1e-6 / scale;
    const double fd = (characteristic_function(s, h) - characteristic_function(s, -h)) / (2 * h);
    const double de = mean_energy_change(s);
    CHECK(std::abs(fd + de) <= 1e-5 * std::abs(de));
    CHECK(characteristic_derivative(s, 0.0, 1) == doctest::Approx(-de).epsilon(1e-12));
  }
}

TEST_CASE("equal rows factorize G") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    TpmStatistics s;
    s.energies << -1.0, 0.0, 1.0;
    Eigen::Vector3d p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
    p /= p.sum();
    q /= q.sum();
    s.initial_probs = p;
    for (int i = 0; i < 3; ++i) s.conditional.row(i) = q.transpose();
    for (double eta : {-1.5, 0.3, 2.0}) {
      const double a = p(0) * std::exp(-eta) + p(1) + p(2) * std::exp(eta);
      const double b = q(0) * std::exp(eta) + q(1) + q(2) * std::exp(-eta);
      CHECK(std::abs(characteristic_function(s, eta) - a * b) < 1e-12);
    }
  }
}

TEST_CASE("eigenstate mixture equals a TPM on the thermal state") {
  for (const auto& cfg : {nv_config(0.3, 0.5), mw_config(0.3), mw_config(1.0, 5.0)}) {
    const DemonMap map = build_block(cfg);
    const double beta = 0.8 / map.eigen.energies(2);
    const ThermalState th = thermal_state(map.eigen, beta);
    for (int n : {1, 2, 7})
      CHECK(max_abs(tpm_statistics(map, beta, n).final_probs() - direct_final_populations(map, th, n)) < 1e-12);
  }
}

TEST_CASE("mean energy change") {
  TpmStatistics id;
  id.energies << 0.0, 1.0, 2.0;
  id.initial_probs << 0.5, 0.3, 0.2;
  CHECK(mean_energy_change(id) == 0.0);

  const DemonMap nv = build_block(nv_config());
  const double beta = 0.297 / nv.eigen.energies(2);
  const TpmStatistics s = tpm_statistics(nv, beta, 80);
  const Eigen::Vector3d& e = nv.eigen.energies;
  const double expect = -(e(1) * s.initial_probs(1) + e(2) * s.initial_probs(2));
  CHECK(mean_energy_change(s) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(mean_energy_change(s) < 0.0);

  const DemonMap mw = build_block(mw_config());
  const TpmStatistics hot = tpm_statistics(mw, 0.0, 200);
  const Eigen::Vector3d pinf = mw.eigen.populations(steady_state(mw));
  CHECK(mean_energy_change(hot) / mw.eigen.energies(2) ==
        doctest::Approx(pinf.dot(mw.eigen.energies) / mw.eigen.energies(2)).epsilon(1e-10));
}

TEST_CASE("JSON round trip") {
  const DemonMap map = build_block(mw_config());
  const TpmStatistics s = tpm_statistics(map, 1.0 / map.eigen.energies(2), 3);
  const nlohmann::json j = s;
  const TpmStatistics back = j.get<TpmStatistics>();
  CHECK(max_abs(back.conditional - s.conditional) == 0.0);
  CHECK(back.beta == s.beta);
  CHECK(back.n_pulses == 3);
  nlohmann::json broken = j;
  broken["conditional"] = {1, 2};
  CHECK_THROWS_AS(broken.get<TpmStatistics>(), ConfigError);
}
