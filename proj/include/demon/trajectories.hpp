#pragma once

// Exact enumeration of measurement records k_1..k_n, k in {1,2,3,4}, with
// p(k_1..k_n) = Tr[K_{k_n} ... K_{k_1} vec(rho)], K_k = D_k (conj(m_k) (x) m_k) U.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "demon/fluctuation.hpp"

namespace demon {

struct TrajectoryRecord {
  std::uint32_t code = 0; // base-4 digits, k_1 most significant, digit = k - 1
  int length = 0;
  double probability = 0.0;

  // Outcome k_i in 1..4, i 1-based.
  int outcome(int i) const { return static_cast<int>((code >> (2 * (length - i))) & 3u) + 1; }
  std::vector<int> outcomes() const;
};

struct EnumerationOptions {
  int max_pulses = 12;
  bool prune = false;
  double threshold = 1e-15; // prefix probability below which a subtree is dropped
  int threads = 0;          // 0: default_thread_count()
};

// DEMON_SIM_THREADS if set and positive, else hardware concurrency (>= 1).
int default_thread_count();

// Visits every (pruned) leaf. The visitor is called from worker threads, one
// thread per depth-1 subtree; it receives the subtree index 0..3.
using LeafVisitor = std::function<void(int subtree, std::uint32_t code, double probability)>;

struct EnumerationSummary {
  double pruned_mass = 0.0;
  // Upper bound on the entropy carried by pruned subtrees: a subtree of mass
  // m with r pulses left has at most m (r ln 4 - ln m).
  double entropy_bound = 0.0;
  std::uint64_t leaves = 0;
};

EnumerationSummary for_each_trajectory(const DemonMap& map, const Operator& rho0, int n,
                                       const EnumerationOptions& opts, const LeafVisitor& visit);

// All 4^n records in lexicographic order (pruned ones omitted). Throws
// BudgetExceeded when n > opts.max_pulses.
std::vector<TrajectoryRecord> enumerate_trajectories(const DemonMap& map, const ThermalState& th, int n,
                                                     const EnumerationOptions& opts = {});

// -sum p ln p, compensated summation. Throws ConfigError unless the
// probabilities sum to 1 within 1e-8.
double shannon_entropy(const std::vector<TrajectoryRecord>& records);

struct EntropyResult {
  double entropy = 0.0;
  double total_probability = 0.0;
  double pruned_mass = 0.0;
  double error_bound = 0.0; // EnumerationSummary::entropy_bound
  std::uint64_t leaves = 0;
};

// Streaming entropy, no record storage; deterministic reduction order.
EntropyResult trajectory_entropy(const DemonMap& map, const ThermalState& th, int n,
                                 const EnumerationOptions& opts = {});

// sum over paths of Tr[K_{k_1}^dagger ... K_{k_n}^dagger vec(rho_th)].
double efficacy_from_trajectories(const DemonMap& map, const ThermalState& th, int n);

// P_{j|i} rebuilt from the unnormalized trajectory-conditioned states.
Eigen::Matrix3d conditional_from_trajectories(const DemonMap& map, const EigenSystem& es, int n);

struct BoundsReport {
  double beta_delta_e = 0.0;
  double neg_ln_gamma = 0.0;
  std::optional<double> neg_entropy;   // empty above the enumeration budget
  bool entropy_extrapolated = false;   // pruned estimate with n >= 10
  double entropy_error_bound = 0.0;
  int n_pulses = 0;

  double tightest() const;
  bool satisfied(double tol = 1e-8) const { return beta_delta_e >= tightest() - tol; }
  // -ln gamma >= -S, i.e. the efficacy bound is the tighter one.
  bool gamma_bound_tighter() const { return !neg_entropy || neg_ln_gamma >= *neg_entropy; }
};

BoundsReport bounds_report(const DemonConfig& cfg, double beta, int n, const EnumerationOptions& opts = {});

enum class PhaseClass { Extraction, ZeroLine, Injection };
const char* to_string(PhaseClass c);

struct PhasePoint {
  double p_a = 0.0; // asymptotic population of |E_1>
  double p_b = 0.0; // asymptotic population of |E_2>
  double beta_delta_e = 0.0;
  PhaseClass cls = PhaseClass::ZeroLine;
};

// beta (sum_j p_j E_j - <E>_0) with p_3 = 1 - p_a - p_b. Throws ConfigError
// off the simplex.
PhasePoint evaluate_phase_point(const EigenSystem& es, double beta, double p_a, double p_b);

struct PhaseDiagram {
  std::vector<PhasePoint> points;
  std::vector<std::pair<double, double>> zero_line; // segment endpoints on the simplex boundary
  PhasePoint unital_point;
  std::vector<std::pair<double, double>> thermal_line; // (p_a, p_b) of rho_th(beta_inf)
  std::vector<double> thermal_line_beta;
};

// Triangular grid p_a = i/res, p_b = j/res, i + j <= res.
PhaseDiagram extraction_phase_diagram(const EigenSystem& es, double beta, int resolution);

} // namespace demon
