#include "demon/demon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace demon {

void DemonConfig::validate() const {
  hamiltonian.validate();
  if (!(p_absorb >= 0.0 && p_absorb <= 1.0)) throw ConfigError("p_absorb must lie in [0, 1]");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be finite and >= 0");
  if (!(t_laser >= 0.0) || !std::isfinite(t_laser)) throw ConfigError("t_laser must be finite and >= 0");
  if (!(gamma_rate >= 0.0) || !std::isfinite(gamma_rate))
    throw ConfigError("gamma_rate must be finite and >= 0");
  if (n_pulses < 0) throw ConfigError("n_pulses must be >= 0");
}

std::array<Operator, 4> build_povm(double p_absorb) {
  if (!(p_absorb >= 0.0 && p_absorb <= 1.0)) throw ConfigError("build_povm: p_absorb outside [0, 1]");
  const double a = std::sqrt(p_absorb);
  return {a * sz_projector(-1), a * sz_projector(0), a * sz_projector(+1),
          std::sqrt(1.0 - p_absorb) * Operator::Identity()};
}

std::array<Operator, 2> jump_operators(double gamma_rate) {
  const double g = std::sqrt(gamma_rate);
  return {g * sz_ket(0) * sz_ket(+1).adjoint(), g * sz_ket(0) * sz_ket(-1).adjoint()};
}

SuperOperator lindblad_generator(const std::array<Operator, 2>& jumps) {
  const Operator id = Operator::Identity();
  SuperOperator gen = SuperOperator::Zero();
  for (const auto& l : jumps) {
    const Operator ldl = l.adjoint() * l;
    gen += kron(l.conjugate(), l) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id);
  }
  return gen;
}

SuperOperator lindblad_closed_form(double gamma_tl) {
  const double e = std::exp(-gamma_tl);
  const double h = std::exp(-0.5 * gamma_tl);
  SuperOperator l = SuperOperator::Zero();
  const double diag[9] = {e, h, e, h, 1.0, h, e, h, e};
  for (int i = 0; i < 9; ++i) l(i, i) = diag[i];
  l(4, 0) = 1.0 - e;
  l(4, 8) = 1.0 - e;
  return l;
}

SuperOperator build_lindblad_super(double t_laser, double gamma_rate) {
  if (!(t_laser * gamma_rate >= 0.0)) throw ConfigError("build_lindblad_super: t_L * Gamma must be >= 0");
  const SuperOperator closed = lindblad_closed_form(t_laser * gamma_rate);
  const SuperOperator generated = expm(SuperOperator(t_laser * lindblad_generator(jump_operators(gamma_rate))));
  const double diff = (closed - generated).cwiseAbs().maxCoeff();
  if (diff > 1e-10) {
    std::ostringstream msg;
    msg << "Lindblad superoperator: closed form and generator exponential differ by " << diff;
    throw InvariantError(msg.str());
  }
  return closed;
}

SuperOperator aux_a1() {
  SuperOperator a = SuperOperator::Zero();
  a(0, 0) = a(4, 4) = a(8, 8) = 1.0;
  return a;
}

SuperOperator aux_a2() {
  SuperOperator a = SuperOperator::Zero();
  a(4, 0) = a(4, 4) = a(4, 8) = 1.0;
  return a;
}

SuperOperator aux_a3() { return SuperOperator::Identity() - aux_a1(); }

SuperOperator pulse_super_closed_form(double mu, double p_absorb) {
  return mu * aux_a1() + (1.0 - mu) * aux_a2() + (1.0 - p_absorb) * aux_a3();
}

namespace {

std::array<SuperOperator, 4> make_dissipators(const SuperOperator& lind) {
  return {lind, lind, lind, SuperOperator::Identity()};
}

SuperOperator sum_pulse(const std::array<Operator, 4>& povm, const std::array<SuperOperator, 4>& diss) {
  SuperOperator a = SuperOperator::Zero();
  for (int j = 0; j < 4; ++j) a += diss[j] * conjugation_super(povm[j]);
  return a;
}

void check_pulse(const SuperOperator& a, const DemonConfig& cfg) {
  const SuperOperator closed = pulse_super_closed_form(cfg.no_feedback_probability(), cfg.p_absorb);
  const double diff = (a - closed).cwiseAbs().maxCoeff();
  if (diff > 1e-12) {
    std::ostringstream msg;
    msg << "pulse superoperator: operator-sum and closed form differ by " << diff;
    throw InvariantError(msg.str());
  }
}

} // namespace

SuperOperator build_pulse_super(const DemonConfig& cfg) {
  cfg.validate();
  const auto povm = build_povm(cfg.p_absorb);
  const auto diss = make_dissipators(build_lindblad_super(cfg.t_laser, cfg.gamma_rate));
  SuperOperator a = sum_pulse(povm, diss);
  check_pulse(a, cfg);
  return a;
}

std::array<SuperOperator, 4> DemonMap::branches() const {
  std::array<SuperOperator, 4> out;
  for (int k = 0; k < 4; ++k) out[k] = dissipators[k] * conjugation_super(povm[k]) * u_super;
  return out;
}

DemonMap build_block(const DemonConfig& cfg) {
  cfg.validate();
  DemonMap map;
  map.config = cfg;
  map.hamiltonian = build_hamiltonian(cfg.hamiltonian);
  map.eigen = eigensystem(map.hamiltonian);
  map.propagator = expm_hermitian(map.hamiltonian, cd(0.0, -cfg.tau));
  map.u_super = conjugation_super(map.propagator);
  map.povm = build_povm(cfg.p_absorb);
  map.jump_ops = jump_operators(cfg.gamma_rate);
  map.lind_super = build_lindblad_super(cfg.t_laser, cfg.gamma_rate);
  map.dissipators = make_dissipators(map.lind_super);
  map.a_super = sum_pulse(map.povm, map.dissipators);
  check_pulse(map.a_super, cfg);
  map.b_super = map.a_super * map.u_super;
  return map;
}

SuperOperator block_power(const DemonMap& map, int n) {
  if (n < 0) throw ConfigError("block_power: n must be >= 0");
  SuperOperator result = SuperOperator::Identity();
  SuperOperator base = map.b_super;
  for (unsigned k = static_cast<unsigned>(n); k != 0; k >>= 1) {
    if (k & 1u) result = (result * base).eval();
    if (k > 1) base = (base * base).eval();
  }
  return result;
}

Operator sanitize_state(const Operator& rho, double tol) {
  const Operator herm = 0.5 * (rho + rho.adjoint());
  if ((rho - herm).cwiseAbs().maxCoeff() > tol)
    throw InvariantError("state is not Hermitian within tolerance");
  const cd tr = herm.trace();
  if (std::abs(tr - 1.0) > tol) {
    std::ostringstream msg;
    msg << "state trace " << tr.real() << " deviates from 1";
    throw InvariantError(msg.str());
  }
  Eigen::SelfAdjointEigenSolver<Operator> solver(herm);
  Eigen::Vector3d lam = solver.eigenvalues();
  if (lam.minCoeff() < -tol) {
    std::ostringstream msg;
    msg << "state has negative eigenvalue " << lam.minCoeff();
    throw InvariantError(msg.str());
  }
  if (lam.minCoeff() >= 0.0) return herm;
  lam = lam.cwiseMax(0.0);
  lam /= lam.sum();
  const auto& v = solver.eigenvectors();
  return v * lam.cast<cd>().asDiagonal() * v.adjoint();
}

Operator evolve(const DemonMap& map, const Operator& rho0, int n) {
  const Operator start = sanitize_state(rho0);
  if (n == 0) return start;
  return sanitize_state(devectorize(block_power(map, n) * vectorize(start)));
}

SpectrumSummary block_spectrum(const DemonMap& map) {
  Eigen::ComplexEigenSolver<SuperOperator> solver(map.b_super, false);
  if (solver.info() != Eigen::Success) throw ConvergenceError("block_spectrum: eigensolver failed");
  SpectrumSummary s;
  s.eigenvalues = solver.eigenvalues();
  std::sort(s.eigenvalues.data(), s.eigenvalues.data() + 9,
            [](const cd& a, const cd& b) { return std::abs(a) > std::abs(b); });
  s.subdominant_modulus = std::abs(s.eigenvalues(1));
  return s;
}

Operator power_iterate(const DemonMap& map, const Operator& seed, double tol, int max_doublings) {
  // Squaring compounds a one-ulp trace defect as (1 - eps)^(2^k); iterates are
  // renormalized and the loop stops once steps stop shrinking near roundoff.
  auto normalized = [](VecState x) {
    const cd tr = trace_of_vectorized(x);
    if (std::abs(tr) < 1e-300) throw InvariantError("power_iterate: iterate lost its trace");
    return VecState(x / tr);
  };
  SuperOperator power = map.b_super;
  const VecState s = vectorize(seed);
  VecState v = normalized(s);
  VecState next = normalized(power * s);
  double last = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_doublings; ++k) {
    const double step = (next - v).cwiseAbs().maxCoeff();
    if (step < tol) return devectorize(next);
    if (step < 1e3 * tol && step >= last) return devectorize(v);
    last = step;
    power = (power * power).eval();
    v = next;
    next = normalized(power * s);
  }
  throw ConvergenceError("power_iterate: no convergence within the doubling budget");
}

Operator steady_state(const DemonMap& map) {
  Eigen::ComplexEigenSolver<SuperOperator> solver(map.b_super, true);
  if (solver.info() != Eigen::Success) throw ConvergenceError("steady_state: eigensolver failed");
  const auto& vals = solver.eigenvalues();

  int fixed = 0;
  for (int k = 1; k < 9; ++k)
    if (std::abs(vals(k) - 1.0) < std::abs(vals(fixed) - 1.0)) fixed = k;
  double second = 0.0;
  for (int k = 0; k < 9; ++k)
    if (k != fixed) second = std::max(second, std::abs(vals(k)));
  if (std::abs(vals(fixed) - 1.0) > 1e-9 || second >= 1.0 - 1e-9) {
    std::ostringstream msg;
    msg << "steady_state: fixed point is not unique (|lambda_2| = " << second << ")";
    throw NonUniqueFixedPoint(msg.str());
  }

  Operator rho = devectorize(VecState(solver.eigenvectors().col(fixed)));
  rho /= rho.trace();
  rho = sanitize_state(rho);

  const VecState residual = map.b_super * vectorize(rho) - vectorize(rho);
  if (residual.cwiseAbs().maxCoeff() > 1e-10) {
    // eigenvector too inaccurate, fall back to repeated squaring
    rho = sanitize_state(power_iterate(map, Operator::Identity() / 3.0));
  }
  return rho;
}

Eigen::Matrix<cd, 9, 9> choi_matrix(const SuperOperator& s) {
  Eigen::Matrix<cd, 9, 9> choi = Eigen::Matrix<cd, 9, 9>::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Operator eij = Operator::Zero();
      eij(i, j) = 1.0;
      const Operator image = devectorize(VecState(s * vectorize(eij)));
      choi += kron(eij, image);
    }
  }
  return choi;
}

} // namespace demon
