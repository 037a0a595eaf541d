#pragma once

// The autonomous dissipative demon: unitary evolution for tau, then a short
// laser pulse acting as a POVM whose absorption outcomes trigger optical
// pumping towards |0>. One such block is the superoperator B = A * U.

#include <array>

#include "demon/linops.hpp"
#include "demon/qutrit.hpp"

namespace demon {

struct DemonConfig {
  HamiltonianSpec hamiltonian;
  double tau = 424e-9;        // s, free evolution between pulses
  double t_laser = 41e-9;     // s, laser pulse length
  double gamma_rate = 12.2e6; // 1/s, effective optical pumping rate
  double p_absorb = 0.0;      // photon absorption probability per pulse
  int n_pulses = 0;

  double gamma_tl() const { return gamma_rate * t_laser; }
  // p_d = 1 - exp(-Gamma t_L)
  double dissipation_probability() const { return -std::expm1(-gamma_tl()); }
  // mu = 1 - p_d p_a, probability that a pulse applies no feedback
  double no_feedback_probability() const { return 1.0 - dissipation_probability() * p_absorb; }
  void validate() const;
};

// m_1..m_4 = sqrt(p_a)|-1><-1|, sqrt(p_a)|0><0|, sqrt(p_a)|+1><+1|, sqrt(1-p_a) I.
std::array<Operator, 4> build_povm(double p_absorb);

// L_0 = sqrt(Gamma)|0><+1|, L_1 = sqrt(Gamma)|0><-1|.
std::array<Operator, 2> jump_operators(double gamma_rate);

// Sum over jump operators of conj(L) (x) L - 1/2 (1 (x) L^dag L) - 1/2 ((L^dag L)^T (x) 1),
// i.e. the Lindblad generator in the column-stacking convention.
SuperOperator lindblad_generator(const std::array<Operator, 2>& jumps);

// Closed-form exp(t_L * generator): populations of |+-1> decay as
// exp(-Gamma t_L) into |0>, coherences with |0> decay as exp(-Gamma t_L/2).
SuperOperator lindblad_closed_form(double gamma_tl);

// Builds the dissipator both ways and throws InvariantError if they differ
// by more than 1e-10. Returns the closed form.
SuperOperator build_lindblad_super(double t_laser, double gamma_rate);

// Projectors onto the S_z-diagonal slots (A_1), the |0><0| feeding row (A_2)
// and the remainder (A_3 = I - A_1).
SuperOperator aux_a1();
SuperOperator aux_a2();
SuperOperator aux_a3();

// mu A_1 + (1 - mu) A_2 + (1 - p_a) A_3.
SuperOperator pulse_super_closed_form(double mu, double p_absorb);

// A = sum_j D_j (conj(m_j) (x) m_j); cross-checked against the closed form.
SuperOperator build_pulse_super(const DemonConfig& cfg);

struct DemonMap {
  DemonConfig config;
  Operator hamiltonian;
  EigenSystem eigen;
  Operator propagator;                  // exp(-i tau H)
  SuperOperator u_super;                // conj(U) (x) U
  SuperOperator a_super;                // A
  SuperOperator b_super;                // B = A U
  SuperOperator lind_super;             // L
  std::array<Operator, 4> povm;
  std::array<SuperOperator, 4> dissipators; // D_1..D_3 = L, D_4 = I
  std::array<Operator, 2> jump_ops;

  // Branch superoperators D_k (conj(m_k) (x) m_k) U; they sum to B.
  std::array<SuperOperator, 4> branches() const;
};

DemonMap build_block(const DemonConfig& cfg);

// B^n, by binary powering.
SuperOperator block_power(const DemonMap& map, int n);

// Hermitize, clip eigenvalues in [-1e-10, 0) to zero and renormalise;
// throws InvariantError on larger violations.
Operator sanitize_state(const Operator& rho, double tol = 1e-10);

// Devectorized B^n vec(rho0); checked to remain a valid state.
Operator evolve(const DemonMap& map, const Operator& rho0, int n);

struct SpectrumSummary {
  Eigen::Matrix<cd, 9, 1> eigenvalues; // sorted by decreasing modulus
  double subdominant_modulus = 0.0;    // |lambda_2|
};

SpectrumSummary block_spectrum(const DemonMap& map);

// Fixed point of B via the eigenvalue-1 eigenvector. Throws
// NonUniqueFixedPoint if |lambda_2| >= 1 - 1e-9.
Operator steady_state(const DemonMap& map);

// B^(2^k) vec(seed), trace-normalized, until successive iterates differ by < tol
// (or stop improving within 1e3 tol).
Operator power_iterate(const DemonMap& map, const Operator& seed, double tol = 1e-13,
                       int max_doublings = 80);

// Choi matrix sum_{ij} |i><j| (x) Phi(|i><j|) for complete-positivity checks.
Eigen::Matrix<cd, 9, 9> choi_matrix(const SuperOperator& s);

} // namespace demon
