#include "demon/fluctuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace demon {

double efficacy_numeric(const DemonMap& map, const ThermalState& th, int n) {
  const SuperOperator back = block_power(map, n).adjoint();
  const cd g = trace_of_vectorized(VecState(back * vectorize(th.rho)));
  if (std::abs(g.imag()) > 1e-10) {
    std::ostringstream msg;
    msg << "efficacy has imaginary part " << g.imag();
    throw InvariantError(msg.str());
  }
  return g.real();
}

double efficacy_analytic_nv(const DemonConfig& cfg, const ThermalState& th) {
  if (cfg.hamiltonian.kind != HamiltonianKind::NV)
    throw ConfigError("efficacy_analytic_nv: only defined for the NV Hamiltonian");
  const double mu_n = std::pow(cfg.no_feedback_probability(), cfg.n_pulses);
  return mu_n + 3.0 * (1.0 - mu_n) * th.exp_beta_free_energy();
}

double efficacy_asymptotic(const Operator& rho_inf, const ThermalState& th) {
  return 3.0 * hs_inner(rho_inf, th.rho).real();
}

const char* to_string(EfficacyMethod m) {
  switch (m) {
  case EfficacyMethod::Numeric: return "numeric";
  case EfficacyMethod::Analytic: return "analytic";
  case EfficacyMethod::Asymptotic: return "asymptotic";
  }
  return "numeric";
}

namespace {

bool is_unital(const DemonMap& map) {
  const VecState id = vectorize(Operator(Operator::Identity()));
  return (map.b_super * id - id).cwiseAbs().maxCoeff() < 1e-12;
}

// NaN when the fixed point is not unique and the map is not unital.
double asymptotic_or_nan(const DemonMap& map, const ThermalState& th) {
  try {
    return efficacy_asymptotic(steady_state(map), th);
  } catch (const NonUniqueFixedPoint&) {
    return is_unital(map) ? 1.0 : std::numeric_limits<double>::quiet_NaN();
  }
}

} // namespace

EfficacyReport efficacy_report(const DemonMap& map, double beta, int n) {
  const ThermalState th = thermal_state(map.eigen, beta);
  EfficacyReport r;
  r.n_pulses = n;
  r.gamma = efficacy_numeric(map, th, n);
  r.characteristic_at_beta = characteristic_function(tpm_statistics(map, beta, n), beta);
  r.gamma_asymptotic = asymptotic_or_nan(map, th);
  r.method = EfficacyMethod::Numeric;
  return r;
}

void to_json(nlohmann::json& j, const EfficacyReport& r) {
  j = nlohmann::json{{"gamma", r.gamma},
                     {"gamma_asymptotic", r.gamma_asymptotic},
                     {"characteristic_at_beta", r.characteristic_at_beta},
                     {"n_pulses", r.n_pulses},
                     {"method", to_string(r.method)}};
}

SutReport sut_check(const TpmStatistics& stats, const DemonMap& map) {
  const ThermalState th = thermal_state(map.eigen, stats.beta);
  SutReport r;
  r.characteristic_at_beta = characteristic_function(stats, stats.beta);
  r.gamma = efficacy_numeric(map, th, stats.n_pulses);
  r.abs_error = std::abs(r.characteristic_at_beta - r.gamma);
  r.pass = r.abs_error < 1e-10;
  return r;
}

int pulses_for_convergence(const DemonMap& map, double tol) {
  const double lam2 = block_spectrum(map).subdominant_modulus;
  if (lam2 >= 1.0 - 1e-9) throw NonUniqueFixedPoint("pulses_for_convergence: no spectral gap");
  if (lam2 <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::log(tol) / std::log(lam2))));
}

const char* to_string(UnitalityClass c) {
  switch (c) {
  case UnitalityClass::Unital: return "unital";
  case UnitalityClass::GammaOneNonUnital: return "gamma-one-non-unital";
  case UnitalityClass::Generic: return "generic";
  }
  return "generic";
}

UnitalityWitness unitality_witness(const Operator& rho_inf, const ThermalState& th) {
  UnitalityWitness w;
  w.populations = th.eigen.populations(rho_inf);
  w.gamma_asymptotic = efficacy_asymptotic(rho_inf, th);

  const Eigen::Vector3d& q = th.probs; // proportional to exp(-beta E_k)
  const double denom = q(0) - q(2);
  w.family_last_population = denom != 0.0
                                 ? 1.0 / 3.0 - (w.populations(1) - 1.0 / 3.0) * (q(0) - q(1)) / denom
                                 : std::numeric_limits<double>::quiet_NaN();

  const Operator mixed = Operator::Identity() / 3.0;
  if ((rho_inf - mixed).cwiseAbs().maxCoeff() < 1e-10) {
    w.classification = UnitalityClass::Unital;
  } else if (std::abs(w.gamma_asymptotic - 1.0) < 1e-10) {
    w.classification = UnitalityClass::GammaOneNonUnital;
  } else {
    w.classification = UnitalityClass::Generic;
  }
  return w;
}

Eigen::Vector3d gamma_one_family(double p1, const ThermalState& th) {
  const Eigen::Vector3d& q = th.probs;
  const double denom = q(0) - q(2);
  if (std::abs(denom) < 1e-14) throw ConfigError("gamma_one_family: degenerate weights (w_0 == w_2)");
  Eigen::Vector3d p;
  p(1) = p1;
  p(2) = 1.0 / 3.0 - (p1 - 1.0 / 3.0) * (q(0) - q(1)) / denom;
  p(0) = 1.0 - p(1) - p(2);
  if (p.minCoeff() < 0.0 || p.maxCoeff() > 1.0)
    throw ConfigError("gamma_one_family: populations leave the simplex for this p_1");
  return p;
}

double factorized_characteristic(const Eigen::Vector3d& initial, const Eigen::Vector3d& final_probs,
                                 double e_bar, double eta) {
  const double y = std::exp(eta * e_bar);
  const double first = initial(0) / y + initial(1) + initial(2) * y;
  const double second = final_probs(0) * y + final_probs(1) + final_probs(2) / y;
  return first * second;
}

namespace {

void require_distribution(const Eigen::Vector3d& p, const char* what) {
  if (p.minCoeff() < -1e-12 || std::abs(p.sum() - 1.0) > 1e-10)
    throw ConfigError(std::string(what) + ": not a probability distribution");
}

std::vector<cd> polynomial_roots(const std::vector<double>& desc) {
  // desc = leading..constant, leading nonzero
  const int deg = static_cast<int>(desc.size()) - 1;
  if (deg == 1) return {cd(-desc[1] / desc[0], 0.0)};
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int k = 0; k < deg; ++k) comp(0, k) = -desc[k + 1] / desc[0];
  for (int k = 1; k < deg; ++k) comp(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(comp, false);
  std::vector<cd> out;
  for (int k = 0; k < deg; ++k) out.push_back(solver.eigenvalues()(k));
  return out;
}

double horner(const std::vector<double>& desc, double x, double* deriv) {
  double p = 0.0, d = 0.0;
  for (double c : desc) {
    d = d * x + p;
    p = p * x + c;
  }
  if (deriv) *deriv = d;
  return p;
}

} // namespace

CubicSolution solve_eta_star_cubic(const Eigen::Vector3d& initial, const Eigen::Vector3d& ss_probs,
                                   double e_bar) {
  require_distribution(initial, "solve_eta_star_cubic initial");
  require_distribution(ss_probs, "solve_eta_star_cubic steady state");
  if (!(e_bar > 0.0)) throw ConfigError("solve_eta_star_cubic: e_bar must be > 0");
  const Eigen::Vector3d& p = initial;
  const Eigen::Vector3d& q = ss_probs;

  CubicSolution sol;
  sol.coefficients << p(0) * q(2), p(0) * q(1) + p(0) * q(2) + p(1) * q(2),
      -(p(1) * q(0) + p(2) * q(0) + p(2) * q(1)), -p(2) * q(0);

  const double cmax = sol.coefficients.cwiseAbs().maxCoeff();
  if (cmax == 0.0) throw ConfigError("solve_eta_star_cubic: all coefficients vanish");
  int lead = 0;
  while (lead < 3 && std::abs(sol.coefficients(lead)) <= 1e-15 * cmax) ++lead;
  if (lead == 3) throw ConfigError("solve_eta_star_cubic: polynomial reduces to a constant");
  std::vector<double> desc(sol.coefficients.data() + lead, sol.coefficients.data() + 4);
  sol.degree = 3 - lead;

  // Routh-Hurwitz first column
  sol.routh_column.setZero();
  if (sol.degree == 3) {
    const double a3 = desc[0], a2 = desc[1], a1 = desc[2], a0 = desc[3];
    sol.routh_column << a3, a2, (a2 * a1 - a3 * a0) / a2, a0;
  } else {
    for (int k = 0; k <= sol.degree; ++k) sol.routh_column(k) = desc[k];
  }
  double prev = 0.0;
  for (int k = 0; k <= sol.degree; ++k) {
    const double v = sol.routh_column(k);
    if (v == 0.0 || !std::isfinite(v)) continue;
    if (prev != 0.0 && (v > 0.0) != (prev > 0.0)) ++sol.sign_changes;
    prev = v;
  }

  sol.roots = polynomial_roots(desc);
  std::vector<double> positive;
  for (const auto& r : sol.roots)
    if (std::abs(r.imag()) <= 1e-8 * std::max(1.0, std::abs(r)) && r.real() > 0.0) positive.push_back(r.real());
  if (positive.empty()) throw ConfigError("solve_eta_star_cubic: no positive real root, inputs inconsistent");
  if (positive.size() > 1 || sol.sign_changes != 1) {
    std::ostringstream msg;
    msg << "solve_eta_star_cubic: expected exactly one root with positive real part, Routh column has "
        << sol.sign_changes << " sign changes";
    throw InvariantError(msg.str());
  }

  double x = positive.front();
  for (int it = 0; it < 20; ++it) {
    double d = 0.0;
    const double f = horner(desc, x, &d);
    if (d == 0.0) break;
    const double step = f / d;
    if (x - step <= 0.0) break;
    x -= step;
    if (std::abs(step) <= 1e-16 * x) break;
  }
  sol.x = x;
  sol.eta_star = -std::log(x) / e_bar;
  sol.g_residual = std::abs(factorized_characteristic(p, q, e_bar, sol.eta_star) - 1.0);
  if (sol.g_residual > 1e-9) {
    std::ostringstream msg;
    msg << "solve_eta_star_cubic: G(eta*) - 1 = " << sol.g_residual;
    throw InvariantError(msg.str());
  }
  return sol;
}

namespace {

// Squared gaps paired with each level: (E2-E3)^2, (E3-E1)^2, (E1-E2)^2.
Eigen::Vector3d squared_gaps(const Eigen::Vector3d& e) {
  return {std::pow(e(1) - e(2), 2), std::pow(e(2) - e(0), 2), std::pow(e(0) - e(1), 2)};
}

Eigen::Vector3d softmax(const Eigen::Vector3d& logw) {
  const Eigen::Vector3d w = (logw.array() - logw.maxCoeff()).exp();
  return w / w.sum();
}

} // namespace

Eigen::Vector3d parametrized_populations(const Eigen::Vector3d& energies, double beta_fin, double lambda) {
  return softmax(-beta_fin * energies + lambda * squared_gaps(energies));
}

SteadyStateDecomposition decompose_steady_state(const Eigen::Vector3d& ss_probs,
                                                const Eigen::Vector3d& energies) {
  require_distribution(ss_probs, "decompose_steady_state");
  if (ss_probs.minCoeff() <= 0.0)
    throw ConfigError("decompose_steady_state: zero population, (beta_fin, lambda) lie at infinity");
  const double scale = energies.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw ConfigError("decompose_steady_state: vanishing spectrum");

  // Dimensionless unknowns b = beta_fin * scale, l = lambda * scale^2.
  const Eigen::Vector3d e = energies / scale;
  const Eigen::Vector3d d2 = squared_gaps(e);
  auto residual = [&](const Eigen::Vector2d& v) {
    const Eigen::Vector3d p = softmax(-v(0) * e + v(1) * d2);
    return Eigen::Vector2d(p(0) - ss_probs(0), p(1) - ss_probs(1));
  };

  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  Eigen::Vector2d r = residual(v);
  SteadyStateDecomposition out;
  int it = 0;
  for (; it < 200 && r.cwiseAbs().maxCoeff() > 1e-14; ++it) {
    const Eigen::Vector3d p = softmax(-v(0) * e + v(1) * d2);
    const double mean_e = p.dot(e);
    const double mean_d = p.dot(d2);
    Eigen::Matrix2d jac;
    for (int j = 0; j < 2; ++j) {
      jac(j, 0) = p(j) * (-e(j) + mean_e);
      jac(j, 1) = p(j) * (d2(j) - mean_d);
    }
    const Eigen::Vector2d step = jac.fullPivLu().solve(-r);
    if (!step.allFinite()) throw ConvergenceError("decompose_steady_state: singular Jacobian");
    double alpha = 1.0;
    Eigen::Vector2d trial = v + step;
    Eigen::Vector2d rt = residual(trial);
    while (rt.norm() >= r.norm() && alpha > 1e-10) {
      alpha *= 0.5;
      trial = v + alpha * step;
      rt = residual(trial);
    }
    if (rt.norm() >= r.norm()) break;
    v = trial;
    r = rt;
  }
  out.iterations = it;
  out.residual = r.cwiseAbs().maxCoeff();
  if (out.residual > 1e-8)
    throw ConvergenceError("decompose_steady_state: no convergence within 200 iterations");
  out.beta_fin = v(0) / scale;
  out.lambda = v(1) / (scale * scale);
  out.populations = ss_probs;
  return out;
}

SteadyStateDecomposition decompose_steady_state(const Operator& rho_inf, const EigenSystem& es) {
  const Eigen::Vector3d p = es.populations(rho_inf);
  SteadyStateDecomposition out = decompose_steady_state(p, es.energies);
  out.coherent_residual = rho_inf - es.diagonal_state(p);
  return out;
}

namespace {

// Z_x = 1 + 2 cosh(x) in units of e_bar, and its derivative.
double zpart(double x) { return 1.0 + 2.0 * std::cosh(x); }
double zpart_prime(double x) { return 2.0 * std::sinh(x); }

// Bisection for the root of a convex g with g(0) = 0 and g < 0 just past 0
// in direction dir; then Newton polish. Returns false if g never turns
// positive before |h| reaches h_max.
template <typename G, typename DG>
bool convex_root(G g, DG dg, double dir, double h_max, double& root) {
  double lo = 0.0, hi = dir * 1e-3;
  while (g(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (std::abs(hi) > h_max) return false;
  }
  for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) <= 0.0 ? lo : hi) = mid;
  }
  double h = 0.5 * (lo + hi);
  const double a = std::min(lo, hi), b = std::max(lo, hi);
  for (int it = 0; it < 5; ++it) {
    const double d = dg(h);
    if (d == 0.0) break;
    const double next = h - g(h) / d;
    if (!(next >= a && next <= b)) break;
    h = next;
  }
  root = h;
  return true;
}

} // namespace

double ness_function(double beta, double beta_fin, double lambda, double e_bar, double eta) {
  const double a = beta * e_bar, af = beta_fin * e_bar, h = eta * e_bar;
  const double c = std::exp(lambda * e_bar * e_bar);
  const double c4 = std::pow(c, 4);
  const double norm = c * (zpart(af) - 1.0) + c4;
  return c * (zpart(a - af - 2.0 * h) + zpart(af + h)) + c4 * zpart(a - h) - zpart(a) * norm -
         c * (3.0 - zpart(a + af));
}

NessSolution solve_ness_condition(double beta, double beta_fin, double lambda, double e_bar) {
  if (!(e_bar > 0.0)) throw ConfigError("solve_ness_condition: e_bar must be > 0");
  const double a = beta * e_bar, af = beta_fin * e_bar;
  const double c = std::exp(lambda * e_bar * e_bar);
  const double c4 = std::pow(c, 4);
  auto f = [&](double h) { return ness_function(beta, beta_fin, lambda, e_bar, h / e_bar); };
  auto df = [&](double h) {
    return c * (-2.0 * zpart_prime(a - af - 2.0 * h) + zpart_prime(af + h)) - c4 * zpart_prime(a - h);
  };

  NessSolution sol;
  const double slope = df(0.0);
  const double scale = zpart(a) * (c * (zpart(af) - 1.0) + c4);
  if (std::abs(slope) <= 1e-13 * scale) return sol;
  double h = 0.0;
  if (!convex_root(f, df, slope < 0.0 ? 1.0 : -1.0, 700.0, h)) return sol;
  sol.eta_star = h / e_bar;
  sol.nontrivial = true;
  return sol;
}

NessSolution eta_star_bisection(const TpmStatistics& stats) {
  const double scale = stats.energies.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw ConfigError("eta_star_bisection: vanishing spectrum");
  auto g = [&](double h) { return characteristic_function(stats, h / scale) - 1.0; };
  auto dg = [&](double h) { return characteristic_derivative(stats, h / scale, 1) / scale; };

  NessSolution sol;
  const double slope = -mean_energy_change(stats) / scale; // dG/dh at 0
  if (std::abs(slope) <= 1e-14) return sol;
  double h = 0.0;
  if (!convex_root(g, dg, slope < 0.0 ? 1.0 : -1.0, 700.0, h)) return sol;
  sol.eta_star = h / scale;
  sol.nontrivial = true;
  return sol;
}

} // namespace demon
