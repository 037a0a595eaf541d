#include "demon/trajectories.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace demon {

std::vector<int> TrajectoryRecord::outcomes() const {
  std::vector<int> out(length);
  for (int i = 1; i <= length; ++i) out[i - 1] = outcome(i);
  return out;
}

int default_thread_count() {
  if (const char* env = std::getenv("DEMON_SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Depth-first walk over all outcome strings sharing prefixes: one 9x9
// matrix-vector product per tree node. Leaf(subtree, code, vec) is called
// at depth n; subtrees run on up to `threads` workers.
template <typename Leaf>
EnumerationSummary walk(const std::array<SuperOperator, 4>& branches, const VecState& root, int n,
                        bool prune, double threshold, int threads, Leaf&& leaf) {
  EnumerationSummary total;
  if (n == 0) {
    leaf(0, 0u, root);
    total.leaves = 1;
    return total;
  }

  std::array<EnumerationSummary, 4> partial{};
  auto run_subtree = [&](int sub) {
    std::vector<VecState> stack(n + 1);
    stack[1] = branches[sub] * root;
    EnumerationSummary& acc = partial[sub];
    auto rec = [&](auto&& self, int depth, std::uint32_t code) -> void {
      const VecState& v = stack[depth];
      if (prune) {
        const double p = trace_of_vectorized(v).real();
        if (p < threshold) {
          if (p > 0.0) {
            acc.pruned_mass += p;
            acc.entropy_bound += p * ((n - depth) * std::log(4.0) - std::log(p));
          }
          return;
        }
      }
      if (depth == n) {
        leaf(sub, code, v);
        ++acc.leaves;
        return;
      }
      for (int k = 0; k < 4; ++k) {
        stack[depth + 1].noalias() = branches[k] * v;
        self(self, depth + 1, (code << 2) | static_cast<std::uint32_t>(k));
      }
    };
    rec(rec, 1, static_cast<std::uint32_t>(sub));
  };

  const int workers = std::clamp(threads, 1, 4);
  if (workers == 1) {
    for (int sub = 0; sub < 4; ++sub) run_subtree(sub);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int sub = w; sub < 4; sub += workers) run_subtree(sub);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& p : partial) {
    total.pruned_mass += p.pruned_mass;
    total.entropy_bound += p.entropy_bound;
    total.leaves += p.leaves;
  }
  return total;
}

void check_budget(int n, const EnumerationOptions& opts) {
  if (n < 0) throw ConfigError("trajectory enumeration: n must be >= 0");
  if (n > opts.max_pulses || n > 16) {
    std::ostringstream msg;
    msg << "trajectory enumeration: n = " << n << " exceeds the budget of " << opts.max_pulses
        << " pulses; raise max_pulses (at most 16) or enable pruning";
    throw BudgetExceeded(msg.str());
  }
}

int thread_count(const EnumerationOptions& opts) {
  return opts.threads > 0 ? opts.threads : default_thread_count();
}

} // namespace

EnumerationSummary for_each_trajectory(const DemonMap& map, const Operator& rho0, int n,
                                       const EnumerationOptions& opts, const LeafVisitor& visit) {
  check_budget(n, opts);
  return walk(map.branches(), vectorize(rho0), n, opts.prune, opts.threshold, thread_count(opts),
              [&](int sub, std::uint32_t code, const VecState& v) {
                visit(sub, code, trace_of_vectorized(v).real());
              });
}

std::vector<TrajectoryRecord> enumerate_trajectories(const DemonMap& map, const ThermalState& th, int n,
                                                     const EnumerationOptions& opts) {
  check_budget(n, opts);
  std::array<std::vector<TrajectoryRecord>, 4> parts;
  for_each_trajectory(map, th.rho, n, opts, [&](int sub, std::uint32_t code, double p) {
    parts[sub].push_back({code, n, p});
  });
  std::vector<TrajectoryRecord> out;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  out.reserve(total);
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

double shannon_entropy(const std::vector<TrajectoryRecord>& records) {
  KahanSum mass, h;
  for (const auto& r : records) {
    mass.add(r.probability);
    if (r.probability > 0.0) h.add(-r.probability * std::log(r.probability));
  }
  if (std::abs(mass.sum - 1.0) > 1e-8) {
    std::ostringstream msg;
    msg << "shannon_entropy: probabilities sum to " << mass.sum;
    throw ConfigError(msg.str());
  }
  return h.sum;
}

EntropyResult trajectory_entropy(const DemonMap& map, const ThermalState& th, int n,
                                 const EnumerationOptions& opts) {
  check_budget(n, opts);
  std::array<KahanSum, 4> mass, h;
  const EnumerationSummary s = for_each_trajectory(map, th.rho, n, opts, [&](int sub, std::uint32_t, double p) {
    mass[sub].add(p);
    if (p > 0.0) h[sub].add(-p * std::log(p));
  });
  EntropyResult r;
  KahanSum m, e;
  for (int k = 0; k < 4; ++k) {
    m.add(mass[k].sum);
    e.add(h[k].sum);
  }
  r.entropy = e.sum;
  r.total_probability = m.sum;
  r.pruned_mass = s.pruned_mass;
  r.error_bound = s.entropy_bound;
  r.leaves = s.leaves;
  return r;
}

double efficacy_from_trajectories(const DemonMap& map, const ThermalState& th, int n) {
  EnumerationOptions opts;
  opts.max_pulses = 16;
  check_budget(n, opts);
  std::array<SuperOperator, 4> back;
  const auto fwd = map.branches();
  for (int k = 0; k < 4; ++k) back[k] = fwd[k].adjoint();
  std::array<KahanSum, 4> acc;
  walk(back, vectorize(th.rho), n, false, 0.0, thread_count(opts),
       [&](int sub, std::uint32_t, const VecState& v) { acc[sub].add(trace_of_vectorized(v).real()); });
  KahanSum total;
  for (const auto& a : acc) total.add(a.sum);
  return total.sum;
}

Eigen::Matrix3d conditional_from_trajectories(const DemonMap& map, const EigenSystem& es, int n) {
  EnumerationOptions opts;
  check_budget(n, opts);
  const auto branches = map.branches();
  Eigen::Matrix3d cond;
  for (int i = 0; i < 3; ++i) {
    std::array<Eigen::Matrix<double, 3, 1>, 4> rows;
    for (auto& r : rows) r.setZero();
    walk(branches, vectorize(es.projectors[i]), n, false, 0.0, thread_count(opts),
         [&](int sub, std::uint32_t, const VecState& v) {
           const Operator rho = devectorize(v);
           for (int j = 0; j < 3; ++j) rows[sub](j) += hs_inner(es.projectors[j], rho).real();
         });
    cond.row(i) = (rows[0] + rows[1] + rows[2] + rows[3]).transpose();
  }
  return cond;
}

double BoundsReport::tightest() const {
  return neg_entropy ? std::max(neg_ln_gamma, *neg_entropy) : neg_ln_gamma;
}

BoundsReport bounds_report(const DemonConfig& cfg, double beta, int n, const EnumerationOptions& opts) {
  const DemonMap map = build_block(cfg);
  const ThermalState th = thermal_state(map.eigen, beta);
  const TpmStatistics stats = tpm_statistics(map, beta, n);
  BoundsReport r;
  r.n_pulses = n;
  r.beta_delta_e = beta * mean_energy_change(stats);
  r.neg_ln_gamma = -std::log(efficacy_numeric(map, th, n));
  if (n <= opts.max_pulses) {
    const EntropyResult e = trajectory_entropy(map, th, n, opts);
    r.neg_entropy = -e.entropy;
    r.entropy_error_bound = e.error_bound;
    r.entropy_extrapolated = opts.prune && n >= 10;
  }
  return r;
}

const char* to_string(PhaseClass c) {
  switch (c) {
  case PhaseClass::Extraction: return "extraction";
  case PhaseClass::ZeroLine: return "zero-line";
  case PhaseClass::Injection: return "injection";
  }
  return "zero-line";
}

PhasePoint evaluate_phase_point(const EigenSystem& es, double beta, double p_a, double p_b) {
  constexpr double eps = 1e-12;
  const double p_c = 1.0 - p_a - p_b;
  if (!(p_a >= -eps && p_b >= -eps && p_c >= -eps)) {
    std::ostringstream msg;
    msg << "phase point (" << p_a << ", " << p_b << ") lies off the simplex";
    throw ConfigError(msg.str());
  }
  const ThermalState th = thermal_state(es, beta);
  const Eigen::Vector3d& e = es.energies;
  PhasePoint pt;
  pt.p_a = p_a;
  pt.p_b = p_b;
  pt.beta_delta_e = beta * (p_a * e(0) + p_b * e(1) + p_c * e(2) - th.mean_energy());
  const double tol = 1e-12 * std::abs(beta) * std::max(es.max_abs_energy(), 1e-300);
  if (pt.beta_delta_e < -tol) pt.cls = PhaseClass::Extraction;
  else if (pt.beta_delta_e > tol) pt.cls = PhaseClass::Injection;
  else pt.cls = PhaseClass::ZeroLine;
  return pt;
}

PhaseDiagram extraction_phase_diagram(const EigenSystem& es, double beta, int resolution) {
  if (resolution < 1) throw ConfigError("extraction_phase_diagram: resolution must be >= 1");
  PhaseDiagram d;
  for (int i = 0; i <= resolution; ++i) {
    for (int j = 0; i + j <= resolution; ++j) {
      d.points.push_back(evaluate_phase_point(es, beta, static_cast<double>(i) / resolution,
                                              static_cast<double>(j) / resolution));
    }
  }
  d.unital_point = evaluate_phase_point(es, beta, 1.0 / 3.0, 1.0 / 3.0);

  // sum_j p_j E_j = <E>_0 intersected with the three simplex edges
  const Eigen::Vector3d& e = es.energies;
  const double m = thermal_state(es, beta).mean_energy();
  constexpr double eps = 1e-12;
  auto push = [&](double pa, double pb) {
    if (pa < -eps || pb < -eps || pa + pb > 1.0 + eps) return;
    pa = std::clamp(pa, 0.0, 1.0);
    pb = std::clamp(pb, 0.0, 1.0 - pa);
    for (const auto& q : d.zero_line)
      if (std::abs(q.first - pa) < 1e-10 && std::abs(q.second - pb) < 1e-10) return;
    d.zero_line.emplace_back(pa, pb);
  };
  if (e(0) != e(2)) push((m - e(2)) / (e(0) - e(2)), 0.0);
  if (e(1) != e(2)) push(0.0, (m - e(2)) / (e(1) - e(2)));
  if (e(0) != e(1)) {
    const double pa = (m - e(1)) / (e(0) - e(1));
    push(pa, 1.0 - pa);
  }
  std::sort(d.zero_line.begin(), d.zero_line.end());

  const double emax = std::max(es.max_abs_energy(), 1e-300);
  for (int k = 0; k <= resolution; ++k) {
    const double b = (-10.0 + 20.0 * k / resolution) / emax;
    const Eigen::Vector3d p = thermal_state(es, b).probs;
    d.thermal_line_beta.push_back(b);
    d.thermal_line.emplace_back(p(0), p(1));
  }
  return d;
}

} // namespace demon
