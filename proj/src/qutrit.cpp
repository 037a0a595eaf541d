#include "demon/qutrit.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <numbers>

namespace demon {

const char* to_string(HamiltonianKind kind) {
  return kind == HamiltonianKind::NV ? "NV" : "MW";
}

HamiltonianKind hamiltonian_kind_from_string(const std::string& name) {
  if (name == "NV" || name == "nv") return HamiltonianKind::NV;
  if (name == "MW" || name == "mw") return HamiltonianKind::MW;
  throw ConfigError("unknown Hamiltonian kind '" + name + "' (expected NV or MW)");
}

void HamiltonianSpec::validate() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(delta) || !finite(zeeman) || !finite(rabi))
    throw ConfigError("Hamiltonian parameters must be finite");
  if (kind == HamiltonianKind::NV && !(delta > 0.0))
    throw ConfigError("NV Hamiltonian requires delta > 0");
  if (kind == HamiltonianKind::MW && !(rabi > 0.0))
    throw ConfigError("MW Hamiltonian requires rabi > 0");
}

Eigen::Vector3cd sz_ket(int m) {
  if (m < -1 || m > 1) throw ConfigError("sz_ket: m must be -1, 0 or +1");
  Eigen::Vector3cd k = Eigen::Vector3cd::Zero();
  k(sz_index(m)) = 1.0;
  return k;
}

Operator sz_projector(int m) {
  const Eigen::Vector3cd k = sz_ket(m);
  return k * k.adjoint();
}

Operator spin_x() {
  const double s = 1.0 / std::numbers::sqrt2;
  Operator sx;
  sx << 0, s, 0,
        s, 0, s,
        0, s, 0;
  return sx;
}

Operator spin_y() {
  const cd s(0.0, 1.0 / std::numbers::sqrt2);
  Operator sy;
  sy << 0, -s, 0,
        s, 0, -s,
        0, s, 0;
  return sy;
}

Operator spin_z() {
  return Eigen::Vector3cd(1.0, 0.0, -1.0).asDiagonal();
}

Operator build_hamiltonian(const HamiltonianSpec& spec) {
  if (spec.kind == HamiltonianKind::NV) {
    // Delta S_z^2 + gamma_e B S_z
    return Eigen::Vector3cd(spec.delta + spec.zeeman, 0.0, spec.delta - spec.zeeman).asDiagonal();
  }
  return spec.rabi * spin_x();
}

Eigen::Vector3d EigenSystem::populations(const Operator& rho) const {
  Eigen::Vector3d p;
  for (int k = 0; k < 3; ++k) p(k) = (vectors.col(k).adjoint() * rho * vectors.col(k)).value().real();
  return p;
}

Operator EigenSystem::diagonal_state(const Eigen::Vector3d& p) const {
  return vectors * p.cast<cd>().asDiagonal() * vectors.adjoint();
}

EigenSystem eigensystem(const Operator& h) {
  if (!is_hermitian(h)) throw ConfigError("eigensystem: operator is not Hermitian");
  const Operator herm = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> solver(herm);
  if (solver.info() != Eigen::Success) throw ConvergenceError("eigensystem: solver failed");

  EigenSystem es;
  es.energies = solver.eigenvalues();
  es.vectors = solver.eigenvectors();

  // Deterministic ordering for (near-)ties: keep ascending energy, then the
  // eigenvector whose leading nonzero component comes first.
  const double scale = std::max(1.0, es.energies.cwiseAbs().maxCoeff());
  auto leading = [](const Eigen::Vector3cd& v) {
    for (int i = 0; i < 3; ++i)
      if (std::abs(v(i)) > 1e-12) return i;
    return 3;
  };
  for (int pass = 0; pass < 2; ++pass) {
    for (int k = 0; k + 1 < 3; ++k) {
      if (std::abs(es.energies(k + 1) - es.energies(k)) <= 1e-12 * scale &&
          leading(es.vectors.col(k + 1)) < leading(es.vectors.col(k))) {
        std::swap(es.energies(k), es.energies(k + 1));
        es.vectors.col(k).swap(es.vectors.col(k + 1));
      }
    }
  }

  for (int k = 0; k < 3; ++k) {
    auto col = es.vectors.col(k);
    for (int i = 0; i < 3; ++i) {
      if (std::abs(col(i)) > 1e-12) {
        col *= std::conj(col(i)) / std::abs(col(i));
        col(i) = std::abs(col(i));
        break;
      }
    }
    col.normalize();
    es.projectors[k] = col * col.adjoint();
  }
  return es;
}

Eigen::Vector3d boltzmann_weights(const Eigen::Vector3d& energies, double beta) {
  const Eigen::Vector3d exponent = -beta * energies;
  const double shift = exponent.maxCoeff();
  Eigen::Vector3d w = (exponent.array() - shift).exp();
  return w / w.sum();
}

ThermalState thermal_state(const EigenSystem& es, double beta) {
  if (!std::isfinite(beta)) throw ConfigError("thermal_state: beta must be finite");
  ThermalState th;
  th.beta = beta;
  th.eigen = es;
  th.negative_temperature = beta < 0.0;

  const Eigen::Vector3d exponent = -beta * es.energies;
  const double shift = exponent.maxCoeff();
  const Eigen::Vector3d w = (exponent.array() - shift).exp();
  th.log_partition = shift + std::log(w.sum());
  th.partition = std::exp(th.log_partition);
  th.probs = w / w.sum();
  th.free_energy = beta != 0.0 ? -th.log_partition / beta
                               : -std::numeric_limits<double>::infinity();
  th.rho = es.diagonal_state(th.probs);
  return th;
}

Operator two_level_rotation(Transition pair, double theta, double phi) {
  const int zero = sz_index(0);
  const int other = pair == Transition::ZeroPlusOne ? sz_index(+1) : sz_index(-1);
  const cd e = std::polar(1.0, phi);

  // G = e^{i phi}|+1><0| + h.c. on (0,+1); e^{i phi}|0><-1| + h.c. on (0,-1).
  Operator g = Operator::Zero();
  if (pair == Transition::ZeroPlusOne) {
    g(other, zero) = e;
    g(zero, other) = std::conj(e);
  } else {
    g(zero, other) = e;
    g(other, zero) = std::conj(e);
  }
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  Operator u = Operator::Identity();
  u(zero, zero) = c;
  u(other, other) = c;
  u(zero, other) = cd(0.0, -s) * g(zero, other);
  u(other, zero) = cd(0.0, -s) * g(other, zero);
  return u;
}

namespace {

double wrap_phase(double x) { return std::remainder(x, 2.0 * std::numbers::pi); }

} // namespace

PreparationGate preparation_gate(int target, const EigenSystem& es) {
  if (target < 1 || target > 3) throw ConfigError("preparation_gate: target must be 1, 2 or 3");
  constexpr double eps = 1e-12;
  const Eigen::Vector3cd t = es.ket(target - 1);
  const cd t_plus = t(sz_index(+1));
  const cd t_zero = t(sz_index(0));
  const cd t_minus = t(sz_index(-1));

  double global = 0.0;
  if (std::abs(t_zero) > eps) global = std::arg(t_zero);
  else if (std::abs(t_minus) > eps) global = std::arg(t_minus);
  else global = std::arg(t_plus);

  PreparationGate gate;
  gate.target = target;
  const double s1 = std::min(1.0, std::abs(t_minus));
  const double theta1 = 2.0 * std::asin(s1);
  const double c1 = std::sqrt(std::max(0.0, 1.0 - s1 * s1));
  if (theta1 > eps) {
    // amplitude on |-1> is -i e^{-i phi} sin(theta/2)
    const double chi = std::arg(t_minus) - global;
    gate.pulses.push_back({Transition::ZeroMinusOne, theta1, wrap_phase(-chi - 0.5 * std::numbers::pi)});
  }
  if (c1 > eps) {
    const double theta2 = 2.0 * std::atan2(std::abs(t_plus), std::abs(t_zero));
    if (theta2 > eps) {
      // amplitude on |+1> is -i e^{i phi} sin(theta/2)
      const double chi = std::arg(t_plus) - global;
      gate.pulses.push_back({Transition::ZeroPlusOne, theta2, wrap_phase(chi + 0.5 * std::numbers::pi)});
    }
  }

  gate.unitary = Operator::Identity();
  for (const auto& p : gate.pulses) gate.unitary = two_level_rotation(p.pair, p.theta, p.phi) * gate.unitary;
  return gate;
}

} // namespace demon
