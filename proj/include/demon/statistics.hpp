#pragma once

// Two-point measurement statistics: project onto an energy eigenstate, run
// n demon blocks, project again.

#include <utility>
#include <vector>

#include <json.hpp>

#include "demon/demon.hpp"

namespace demon {

struct TpmStatistics {
  Eigen::Vector3d energies = Eigen::Vector3d::Zero();
  Eigen::Vector3d initial_probs = Eigen::Vector3d::Zero();
  Eigen::Matrix3d conditional = Eigen::Matrix3d::Identity(); // row i: P_{.|i}
  double beta = 0.0;
  int n_pulses = 0;

  // Row sums 1 and entries in [-eps, 1+eps]; throws InvariantError otherwise.
  void validate(double eps = 1e-10) const;
  Eigen::Matrix3d joint() const { return initial_probs.asDiagonal() * conditional; }
  // Marginal of the second measurement, sum_i P_i P_{j|i}.
  Eigen::Vector3d final_probs() const { return conditional.transpose() * initial_probs; }
};

// P_{j|i} = Tr[P_j B^n(P_i)].
Eigen::Matrix3d conditional_probabilities(const DemonMap& map, const EigenSystem& es, int n);

TpmStatistics tpm_statistics(const DemonMap& map, double beta, int n);

// Energy-basis populations of B^n(rho_th) with no first measurement. For a
// thermal (diagonal) initial state these equal TpmStatistics::final_probs.
Eigen::Vector3d direct_final_populations(const DemonMap& map, const ThermalState& th, int n);

struct EnergyChangeDistribution {
  std::vector<std::pair<double, double>> atoms; // (Delta E, probability > 0), ascending Delta E

  double total() const;
};

// Atoms at E_j - E_i weighted by P_{j|i} P_i, merged within 1e-9 * max|E|.
EnergyChangeDistribution energy_distribution(const TpmStatistics& stats);

// G(eta) = sum_ij exp(-eta (E_j - E_i)) P_{j|i} P_i, evaluated with the
// largest exponent factored out.
double characteristic_function(const TpmStatistics& stats, double eta);

// d^k G / d eta^k for k = 1, 2.
double characteristic_derivative(const TpmStatistics& stats, double eta, int order);

double characteristic_from_distribution(const EnergyChangeDistribution& dist, double eta);

double mean_energy_change(const TpmStatistics& stats);

void to_json(nlohmann::json& j, const TpmStatistics& s);
void from_json(const nlohmann::json& j, TpmStatistics& s);

} // namespace demon
