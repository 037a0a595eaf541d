#include "demon/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace demon {

void TpmStatistics::validate(double eps) const {
  for (int i = 0; i < 3; ++i) {
    const double row = conditional.row(i).sum();
    if (std::abs(row - 1.0) > eps) {
      std::ostringstream msg;
      msg << "conditional row " << i << " sums to " << row;
      throw InvariantError(msg.str());
    }
    for (int j = 0; j < 3; ++j) {
      const double p = conditional(i, j);
      if (!(p >= -eps && p <= 1.0 + eps)) {
        std::ostringstream msg;
        msg << "conditional probability P(" << j << "|" << i << ") = " << p << " outside [0, 1]";
        throw InvariantError(msg.str());
      }
    }
  }
  if (std::abs(initial_probs.sum() - 1.0) > eps || initial_probs.minCoeff() < -eps)
    throw InvariantError("initial probabilities are not a distribution");
}

Eigen::Matrix3d conditional_probabilities(const DemonMap& map, const EigenSystem& es, int n) {
  const SuperOperator bn = block_power(map, n);
  Eigen::Matrix3d cond;
  for (int i = 0; i < 3; ++i) {
    const Operator out = devectorize(VecState(bn * vectorize(es.projectors[i])));
    for (int j = 0; j < 3; ++j) cond(i, j) = hs_inner(es.projectors[j], out).real();
  }
  return cond;
}

TpmStatistics tpm_statistics(const DemonMap& map, double beta, int n) {
  const ThermalState th = thermal_state(map.eigen, beta);
  TpmStatistics s;
  s.energies = map.eigen.energies;
  s.initial_probs = th.probs;
  s.conditional = conditional_probabilities(map, map.eigen, n);
  s.beta = beta;
  s.n_pulses = n;
  s.validate();
  return s;
}

Eigen::Vector3d direct_final_populations(const DemonMap& map, const ThermalState& th, int n) {
  return th.eigen.populations(evolve(map, th.rho, n));
}

double EnergyChangeDistribution::total() const {
  double t = 0.0;
  for (const auto& a : atoms) t += a.second;
  return t;
}

EnergyChangeDistribution energy_distribution(const TpmStatistics& stats) {
  std::vector<std::pair<double, double>> raw;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      raw.emplace_back(stats.energies(j) - stats.energies(i), stats.conditional(i, j) * stats.initial_probs(i));
  std::sort(raw.begin(), raw.end());

  const double tol = 1e-9 * std::max(stats.energies.cwiseAbs().maxCoeff(), 1e-300);
  EnergyChangeDistribution dist;
  for (const auto& [de, p] : raw) {
    if (p == 0.0) continue; // structural zeros carry no atom
    if (!dist.atoms.empty() && std::abs(de - dist.atoms.back().first) < tol) {
      dist.atoms.back().second += p;
    } else {
      dist.atoms.emplace_back(de, p);
    }
  }
  return dist;
}

namespace {

// sum_ij w_ij (-dE_ij)^order exp(-eta dE_ij), shifted by the largest exponent
// and rescaled at the end.
double weighted_moment(const TpmStatistics& stats, double eta, int order) {
  const Eigen::Matrix3d w = stats.joint();
  double shift = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (w(i, j) != 0.0) shift = std::max(shift, -eta * (stats.energies(j) - stats.energies(i)));
  if (!std::isfinite(shift)) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (w(i, j) == 0.0) continue;
      const double de = stats.energies(j) - stats.energies(i);
      acc += w(i, j) * std::pow(-de, order) * std::exp(-eta * de - shift);
    }
  }
  return acc * std::exp(shift);
}

} // namespace

double characteristic_function(const TpmStatistics& stats, double eta) {
  if (eta == 0.0) return 1.0;
  return weighted_moment(stats, eta, 0);
}

double characteristic_derivative(const TpmStatistics& stats, double eta, int order) {
  if (order < 1 || order > 2) throw ConfigError("characteristic_derivative: order must be 1 or 2");
  return weighted_moment(stats, eta, order);
}

double characteristic_from_distribution(const EnergyChangeDistribution& dist, double eta) {
  double acc = 0.0;
  for (const auto& [de, p] : dist.atoms) acc += p * std::exp(-eta * de);
  return acc;
}

double mean_energy_change(const TpmStatistics& stats) {
  const Eigen::Matrix3d w = stats.joint();
  double acc = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) acc += w(i, j) * (stats.energies(j) - stats.energies(i));
  return acc;
}

void to_json(nlohmann::json& j, const TpmStatistics& s) {
  std::vector<double> cond;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cond.push_back(s.conditional(r, c));
  j = nlohmann::json{{"energies", {s.energies(0), s.energies(1), s.energies(2)}},
                     {"initial_probs", {s.initial_probs(0), s.initial_probs(1), s.initial_probs(2)}},
                     {"conditional", cond},
                     {"beta", s.beta},
                     {"n_pulses", s.n_pulses}};
}

void from_json(const nlohmann::json& j, TpmStatistics& s) {
  const auto e = j.at("energies").get<std::vector<double>>();
  const auto p = j.at("initial_probs").get<std::vector<double>>();
  const auto c = j.at("conditional").get<std::vector<double>>();
  if (e.size() != 3 || p.size() != 3 || c.size() != 9)
    throw ConfigError("TpmStatistics JSON: expected 3 energies, 3 probabilities, 9 conditionals");
  for (int k = 0; k < 3; ++k) {
    s.energies(k) = e[k];
    s.initial_probs(k) = p[k];
  }
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) s.conditional(r, col) = c[3 * r + col];
  s.beta = j.at("beta").get<double>();
  s.n_pulses = j.at("n_pulses").get<int>();
  s.validate();
}

} // namespace demon
