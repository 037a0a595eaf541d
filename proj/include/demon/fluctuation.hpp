#pragma once

// Efficacy of the feedback and the generalized fluctuation relation
// G(beta) = gamma, plus the eta* machinery for symmetric spectra.

#include <string>
#include <vector>

#include <json.hpp>

#include "demon/statistics.hpp"

namespace demon {

// gamma = Tr[(B^dagger)^n vec(rho_th)]. Throws InvariantError on an
// imaginary residue above 1e-10.
double efficacy_numeric(const DemonMap& map, const ThermalState& th, int n);

// mu^N + 3 (1 - mu^N) exp(beta F). NV kind only.
double efficacy_analytic_nv(const DemonConfig& cfg, const ThermalState& th);

// 3 Tr[rho_inf rho_th].
double efficacy_asymptotic(const Operator& rho_inf, const ThermalState& th);

enum class EfficacyMethod { Numeric, Analytic, Asymptotic };
const char* to_string(EfficacyMethod m);

struct EfficacyReport {
  double gamma = 1.0;
  double gamma_asymptotic = 1.0;
  double characteristic_at_beta = 1.0;
  int n_pulses = 0;
  EfficacyMethod method = EfficacyMethod::Numeric;
};

EfficacyReport efficacy_report(const DemonMap& map, double beta, int n);
void to_json(nlohmann::json& j, const EfficacyReport& r);

struct SutReport {
  double characteristic_at_beta = 1.0;
  double gamma = 1.0;
  double abs_error = 0.0;
  bool pass = true; // abs_error < 1e-10
};

SutReport sut_check(const TpmStatistics& stats, const DemonMap& map);

// Smallest N with |lambda_2|^N below tol; at least 1.
int pulses_for_convergence(const DemonMap& map, double tol = 1e-8);

enum class UnitalityClass { Unital, GammaOneNonUnital, Generic };
const char* to_string(UnitalityClass c);

struct UnitalityWitness {
  UnitalityClass classification = UnitalityClass::Generic;
  double gamma_asymptotic = 1.0;
  Eigen::Vector3d populations = Eigen::Vector3d::Zero();
  // Last population forced by gamma_inf = 1 given the others.
  double family_last_population = 0.0;
};

UnitalityWitness unitality_witness(const Operator& rho_inf, const ThermalState& th);

// Energy-basis populations (p_0, p_1, p_2) with gamma_inf = 1 for the given
// free p_1. Throws ConfigError if the result leaves the simplex or the
// spectrum makes the family degenerate (w_0 == w_2).
Eigen::Vector3d gamma_one_family(double p1, const ThermalState& th);

struct CubicSolution {
  double eta_star = 0.0;
  double x = 1.0;                         // positive real root
  std::vector<std::complex<double>> roots; // all roots of the reduced polynomial
  Eigen::Vector4d coefficients = Eigen::Vector4d::Zero(); // a3, a2, a1, a0
  Eigen::Vector4d routh_column = Eigen::Vector4d::Zero();
  int sign_changes = 0;
  int degree = 3;
  double g_residual = 0.0; // |G(eta*) - 1|
};

// G(eta) = (sum_i P_i e^{eta E_i}) (sum_j Pt_j e^{-eta E_j}) on (-e_bar, 0, e_bar).
double factorized_characteristic(const Eigen::Vector3d& initial, const Eigen::Vector3d& final_probs,
                                 double e_bar, double eta);

// Nontrivial G(eta*) = 1 from the cubic in x = exp(-eta e_bar). Throws
// InvariantError if Routh-Hurwitz or the G check fails, ConfigError if no
// positive real root exists.
CubicSolution solve_eta_star_cubic(const Eigen::Vector3d& initial, const Eigen::Vector3d& ss_probs,
                                   double e_bar);

struct SteadyStateDecomposition {
  double beta_fin = 0.0;
  double lambda = 0.0;
  Eigen::Vector3d populations = Eigen::Vector3d::Zero();
  Operator coherent_residual = Operator::Zero();
  int iterations = 0;
  double residual = 0.0;
};

// exp(-beta_fin E_j) exp(lambda (E_k - E_l)^2), normalized; (k, l) cycles
// (2,3), (3,1), (1,2).
Eigen::Vector3d parametrized_populations(const Eigen::Vector3d& energies, double beta_fin, double lambda);

// Inverts parametrized_populations by damped Newton. Throws ConfigError on a
// zero probability and ConvergenceError after 200 iterations.
SteadyStateDecomposition decompose_steady_state(const Eigen::Vector3d& ss_probs,
                                                const Eigen::Vector3d& energies);
SteadyStateDecomposition decompose_steady_state(const Operator& rho_inf, const EigenSystem& es);

// f(eta) = Z_beta N (G(eta) - 1) written in partition functions; zero at eta = 0.
double ness_function(double beta, double beta_fin, double lambda, double e_bar, double eta);

struct NessSolution {
  double eta_star = 0.0;
  bool nontrivial = false;
};

NessSolution solve_ness_condition(double beta, double beta_fin, double lambda, double e_bar);

// Nontrivial root of G(eta) = 1 for arbitrary spectra, by bracketing on the
// side opposite to G'(0) and bisection. Zero when G'(0) vanishes.
NessSolution eta_star_bisection(const TpmStatistics& stats);

} // namespace demon
