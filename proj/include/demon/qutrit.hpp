#pragma once

// Spin-1 model layer. Basis ordering is the S_z basis (+1, 0, -1), i.e.
// index 0 is |+1>, index 1 is |0>, index 2 is |-1>. Energies are angular
// frequencies with hbar = 1.

#include <array>
#include <vector>

#include "demon/linops.hpp"

namespace demon {

enum class HamiltonianKind { NV, MW };

const char* to_string(HamiltonianKind kind);
HamiltonianKind hamiltonian_kind_from_string(const std::string& name);

struct HamiltonianSpec {
  HamiltonianKind kind = HamiltonianKind::NV;
  double delta = 0.0;  // zero-field splitting, rad/s
  double zeeman = 0.0; // gamma_e * B, rad/s
  double rabi = 0.0;   // microwave Rabi frequency, rad/s

  void validate() const;
};

// Index of |m_S> in the (+1, 0, -1) ordering.
constexpr int sz_index(int m) { return 1 - m; }

Eigen::Vector3cd sz_ket(int m);
Operator sz_projector(int m);
Operator spin_x();
Operator spin_y();
Operator spin_z();

Operator build_hamiltonian(const HamiltonianSpec& spec);

struct EigenSystem {
  Eigen::Vector3d energies;         // ascending
  Eigen::Matrix3cd vectors;         // column k is |E_{k+1}>
  std::array<Operator, 3> projectors;

  Eigen::Vector3cd ket(int k) const { return vectors.col(k); }
  double max_abs_energy() const { return energies.cwiseAbs().maxCoeff(); }
  // Populations of rho in the energy basis, <E_k| rho |E_k>.
  Eigen::Vector3d populations(const Operator& rho) const;
  Operator diagonal_state(const Eigen::Vector3d& populations) const;
};

// Diagonalizes a Hermitian 3x3 operator. Energies ascending; each
// eigenvector's first component with |c| > 1e-12 is made real positive.
EigenSystem eigensystem(const Operator& h);

struct ThermalState {
  double beta = 0.0;            // s/rad
  EigenSystem eigen;
  Operator rho;
  double partition = 0.0;       // Z, may overflow to inf for extreme beta*E
  double log_partition = 0.0;   // ln Z, always finite
  double free_energy = 0.0;     // -ln(Z)/beta, -inf at beta = 0
  Eigen::Vector3d probs;        // P_k = exp(-beta E_k)/Z
  bool negative_temperature = false;

  // exp(beta F) = 1/Z, well defined at beta = 0 as well.
  double exp_beta_free_energy() const { return std::exp(-log_partition); }
  double mean_energy() const { return probs.dot(eigen.energies); }
};

ThermalState thermal_state(const EigenSystem& es, double beta);

// Thermal populations exp(-beta E_k)/Z with shifted exponentials.
Eigen::Vector3d boltzmann_weights(const Eigen::Vector3d& energies, double beta);

// The two microwave transitions sharing |0>.
enum class Transition { ZeroMinusOne, ZeroPlusOne };

// Rotation by theta with microwave phase phi on {|0>, |m>}, identity on the
// third level. Generator is sqrt(2)*(cos(phi) S_x - sin(phi) S_y) restricted
// to the pair, U = exp(-i theta/2 G); with phi = pi/2 a pulse on (0,-1)
// sends |0> -> cos|0> - sin|-1> and on (0,+1) sends |0> -> cos|0> + sin|+1>.
Operator two_level_rotation(Transition pair, double theta, double phi);

struct Pulse {
  Transition pair;
  double theta;
  double phi;
};

struct PreparationGate {
  int target = 1;              // 1-based eigenstate index
  std::vector<Pulse> pulses;   // applied in order
  Operator unitary;            // G_i with G_i|0> = |E_i> up to a phase

  Operator readout() const { return unitary.adjoint(); }
};

// Two-pulse decomposition |0> -> |E_target>: a pulse on (0,-1) then one on
// (0,+1). Zero-angle pulses are dropped.
PreparationGate preparation_gate(int target, const EigenSystem& es);

} // namespace demon
