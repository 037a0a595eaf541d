// demon-sim: parameter sweeps over the dissipative qutrit demon, written as
// CSV/JSON (and optional gnuplot scripts).
//
//   demon-sim <dynamics|fluctuation|bounds|phase-diagram|eta-star> --config <path> [--out <dir>] [--plots]
//
// Exit codes: 0 ok, 2 invariant violation, 3 config error, 4 IO error.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

#include "demon/trajectories.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace demon;

namespace {

struct RunConfig {
  std::vector<DemonConfig> demons; // one per requested Hamiltonian
  std::optional<double> beta;
  std::optional<double> beta_over_emax;
  int n_pulses_max = 12;
  fs::path output_dir = ".";
  bool emit_plots = false;
  int entropy_max_pulses = 9;
  bool prune = false;
  int phase_resolution = 50;
  std::string eta_method; // "", "cubic" or "bisection"
  std::optional<Eigen::Vector3d> eta_initial, eta_final;

  double beta_for(const DemonMap& map) const {
    if (beta) return *beta;
    return *beta_over_emax / map.eigen.energies.maxCoeff();
  }
  const DemonConfig& primary() const { return demons.front(); }
};

Eigen::Vector3d vec3(const json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError(std::string(what) + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

HamiltonianSpec parse_hamiltonian(const json& j, double freq_scale) {
  HamiltonianSpec h;
  h.kind = hamiltonian_kind_from_string(j.at("kind").get<std::string>());
  h.delta = j.value("delta", 0.0) * freq_scale;
  h.zeeman = j.value("zeeman", 0.0) * freq_scale;
  h.rabi = j.value("rabi", 0.0) * freq_scale;
  h.validate();
  return h;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }

  try {
    RunConfig rc;
    const std::string units = j.value("units", "rad/s");
    double scale = 1.0;
    if (units == "Hz") scale = 2.0 * std::numbers::pi;
    else if (units != "rad/s") throw ConfigError("units must be \"Hz\" or \"rad/s\"");

    DemonConfig base;
    base.tau = j.value("tau", base.tau);
    base.t_laser = j.value("t_laser", base.t_laser);
    base.gamma_rate = j.value("gamma_rate", base.gamma_rate);
    base.p_absorb = j.value("p_absorb", 0.3);

    std::vector<json> hams;
    if (j.contains("hamiltonians")) {
      for (const auto& h : j.at("hamiltonians")) hams.push_back(h);
    } else {
      hams.push_back(j.at("hamiltonian"));
    }
    for (const auto& h : hams) {
      DemonConfig d = base;
      d.hamiltonian = parse_hamiltonian(h, scale);
      if (h.contains("p_absorb")) d.p_absorb = h.at("p_absorb").get<double>();
      d.validate();
      rc.demons.push_back(d);
    }
    if (rc.demons.empty()) throw ConfigError("no Hamiltonian given");

    if (j.contains("beta")) rc.beta = j.at("beta").get<double>() / scale;
    if (j.contains("beta_over_emax")) rc.beta_over_emax = j.at("beta_over_emax").get<double>();
    if (rc.beta.has_value() == rc.beta_over_emax.has_value())
      throw ConfigError("give exactly one of \"beta\" and \"beta_over_emax\"");

    rc.n_pulses_max = j.value("n_pulses_max", rc.n_pulses_max);
    if (rc.n_pulses_max < 0) throw ConfigError("n_pulses_max must be >= 0");
    rc.output_dir = j.value("output_dir", std::string("."));
    rc.emit_plots = j.value("emit_plots", false);
    rc.entropy_max_pulses = j.value("entropy_max_pulses", rc.entropy_max_pulses);
    rc.prune = j.value("prune", false);
    rc.phase_resolution = j.value("phase_resolution", rc.phase_resolution);
    if (rc.phase_resolution < 1) throw ConfigError("phase_resolution must be >= 1");
    if (j.contains("eta_star")) {
      const auto& e = j.at("eta_star");
      rc.eta_method = e.value("method", std::string());
      if (e.contains("initial_probs")) rc.eta_initial = vec3(e.at("initial_probs"), "eta_star.initial_probs");
      if (e.contains("ss_probs")) rc.eta_final = vec3(e.at("ss_probs"), "eta_star.ss_probs");
    }
    return rc;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::string fmt(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

class CsvWriter {
public:
  explicit CsvWriter(const fs::path& path) : path_(path) {}
  void header(std::initializer_list<const char*> cols) { row_strings(std::vector<std::string>(cols.begin(), cols.end())); }
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }
  void write() const {
    std::ofstream f(path_, std::ios::binary);
    if (!f) throw IoError("cannot write " + path_.string());
    f << out_.str();
    if (!f) throw IoError("write failed for " + path_.string());
  }

private:
  fs::path path_;
  std::ostringstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

// Runs body(k) for k in [0, count) on up to default_thread_count() threads.
template <typename F>
void parallel_for(int count, F body) {
  const int workers = std::max(1, std::min(default_thread_count(), count));
  if (workers == 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int k = w; k < count; k += workers) body(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

int cmd_dynamics(const RunConfig& rc, const fs::path& out) {
  for (const auto& d : rc.demons) {
    const DemonMap map = build_block(d);
    const int n_max = rc.n_pulses_max;
    std::vector<Eigen::Matrix3d> cond(n_max + 1);
    parallel_for(n_max + 1, [&](int n) { cond[n] = conditional_probabilities(map, map.eigen, n); });

    const std::string kind = to_string(d.hamiltonian.kind);
    CsvWriter csv(out / ("dynamics_" + kind + ".csv"));
    csv.header({"n_pulses", "i", "j", "p"});
    for (int n = 0; n <= n_max; ++n)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          csv.row_strings({std::to_string(n), std::to_string(i + 1), std::to_string(j + 1), fmt(cond[n](i, j))});
    csv.write();
    if (rc.emit_plots) {
      std::ostringstream gp;
      gp << "set datafile separator ','\nset key outside\nset xlabel 'N_L'\nset ylabel 'P(j|i)'\n"
         << "set terminal pngcairo size 1200,400\nset output 'dynamics_" << kind << ".png'\n"
         << "set multiplot layout 1,3\n";
      for (int i = 1; i <= 3; ++i) {
        gp << "set title 'initial E_" << i << "'\nplot ";
        for (int j = 1; j <= 3; ++j)
          gp << (j > 1 ? ", " : "") << "'dynamics_" << kind << ".csv' every ::1 using 1:(($2==" << i
             << " && $3==" << j << ") ? $4 : 1/0) with linespoints title 'j=" << j << "'";
        gp << "\n";
      }
      gp << "unset multiplot\n";
      write_text(out / ("dynamics_" + kind + ".gp"), gp.str());
    }
  }
  return 0;
}

int cmd_fluctuation(const RunConfig& rc, const fs::path& out) {
  const DemonConfig& d = rc.primary();
  const DemonMap map = build_block(d);
  const double beta = rc.beta_for(map);
  const ThermalState th = thermal_state(map.eigen, beta);
  const int n_max = rc.n_pulses_max;
  std::vector<EfficacyReport> reps(n_max + 1);
  parallel_for(n_max + 1, [&](int n) { reps[n] = efficacy_report(map, beta, n); });

  const bool nv = d.hamiltonian.kind == HamiltonianKind::NV;
  CsvWriter csv(out / "fluctuation.csv");
  csv.header({"n_pulses", "G_beta", "gamma", "gamma_inf", "gamma_analytic"});
  double worst = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    double analytic = std::numeric_limits<double>::quiet_NaN();
    if (nv) {
      DemonConfig dn = d;
      dn.n_pulses = n;
      analytic = efficacy_analytic_nv(dn, th);
    }
    worst = std::max(worst, std::abs(reps[n].characteristic_at_beta - reps[n].gamma));
    csv.row_strings({std::to_string(n), fmt(reps[n].characteristic_at_beta), fmt(reps[n].gamma),
                     fmt(reps[n].gamma_asymptotic), fmt(analytic)});
  }
  csv.write();
  if (rc.emit_plots) {
    write_text(out / "fluctuation.gp",
               "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'N_L'\n"
               "set terminal pngcairo\nset output 'fluctuation.png'\n"
               "plot 'fluctuation.csv' using 1:2 with points, '' using 1:3 with lines, '' using 1:4 with lines dt 2\n");
  }
  if (worst > 1e-8) {
    std::cerr << "demon-sim: fluctuation relation violated, max |G(beta) - gamma| = " << worst << "\n";
    return 2;
  }
  return 0;
}

int cmd_bounds(const RunConfig& rc, const fs::path& out) {
  const DemonConfig& d = rc.primary();
  const DemonMap map = build_block(d);
  const double beta = rc.beta_for(map);
  EnumerationOptions opts;
  opts.max_pulses = rc.entropy_max_pulses;
  opts.prune = rc.prune;
  const int n_max = rc.n_pulses_max;
  std::vector<BoundsReport> reps(n_max + 1);
  // enumeration parallelizes internally; the outer sweep stays serial
  for (int n = 0; n <= n_max; ++n) reps[n] = bounds_report(d, beta, n, opts);

  CsvWriter csv(out / "bounds.csv");
  csv.header({"n", "beta_dE", "neg_ln_gamma", "neg_entropy", "entropy_kind"});
  bool violated = false;
  for (const auto& r : reps) {
    const std::string kind = !r.neg_entropy ? "NA" : (r.entropy_extrapolated ? "extrapolated" : "exact");
    csv.row_strings({std::to_string(r.n_pulses), fmt(r.beta_delta_e), fmt(r.neg_ln_gamma),
                     r.neg_entropy ? fmt(*r.neg_entropy) : "NA", kind});
    if (!r.satisfied()) violated = true;
  }
  csv.write();
  if (rc.emit_plots) {
    write_text(out / "bounds.gp",
               "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'N_L'\n"
               "set terminal pngcairo\nset output 'bounds.png'\n"
               "plot 'bounds.csv' using 1:2 with linespoints, '' using 1:3 with lines, '' using 1:4 with lines\n");
  }
  if (violated) {
    std::cerr << "demon-sim: extraction bound violated\n";
    return 2;
  }
  return 0;
}

int cmd_phase_diagram(const RunConfig& rc, const fs::path& out) {
  const DemonMap map = build_block(rc.primary());
  const double beta = rc.beta_for(map);
  const PhaseDiagram pd = extraction_phase_diagram(map.eigen, beta, rc.phase_resolution);

  CsvWriter grid(out / "phase_diagram.csv");
  grid.header({"p_a_inf", "p_b_inf", "beta_dE", "class"});
  for (const auto& p : pd.points) grid.row_strings({fmt(p.p_a), fmt(p.p_b), fmt(p.beta_delta_e), to_string(p.cls)});
  grid.write();

  CsvWriter zero(out / "zero_line.csv");
  zero.header({"p_a_inf", "p_b_inf"});
  for (const auto& [a, b] : pd.zero_line) zero.row_strings({fmt(a), fmt(b)});
  zero.write();

  CsvWriter thermal(out / "thermal_line.csv");
  thermal.header({"beta_inf", "p_a_inf", "p_b_inf"});
  for (std::size_t k = 0; k < pd.thermal_line.size(); ++k)
    thermal.row_strings({fmt(pd.thermal_line_beta[k]), fmt(pd.thermal_line[k].first), fmt(pd.thermal_line[k].second)});
  thermal.write();

  const ThermalState th = thermal_state(map.eigen, beta);
  CsvWriter notes(out / "phase_annotations.csv");
  notes.header({"label", "p_a_inf", "p_b_inf", "beta_dE"});
  notes.row_strings({"unital", fmt(pd.unital_point.p_a), fmt(pd.unital_point.p_b), fmt(pd.unital_point.beta_delta_e)});
  notes.row_strings({"initial_thermal", fmt(th.probs(0)), fmt(th.probs(1)), "0"});
  notes.write();

  if (rc.emit_plots) {
    write_text(out / "phase_diagram.gp",
               "set datafile separator ','\nset xlabel 'p_a^inf'\nset ylabel 'p_b^inf'\n"
               "set terminal pngcairo\nset output 'phase_diagram.png'\nset palette defined (-1 'blue', 0 'white', 1 'red')\n"
               "plot 'phase_diagram.csv' every ::1 using 1:2:3 with points pt 5 palette notitle, \\\n"
               "     'zero_line.csv' every ::1 using 1:2 with lines lw 2 lc 'black' title 'zero line', \\\n"
               "     'thermal_line.csv' every ::1 using 2:3 with lines dt 2 title 'thermal', \\\n"
               "     'phase_annotations.csv' every ::1 using 2:3 with points pt 7 title 'unital / initial'\n");
  }
  return 0;
}

int cmd_eta_star(const RunConfig& rc, const fs::path& out) {
  const DemonConfig& d = rc.primary();
  const DemonMap map = build_block(d);
  const double beta = rc.beta_for(map);
  const ThermalState th = thermal_state(map.eigen, beta);

  std::string method = rc.eta_method;
  if (method.empty()) method = d.hamiltonian.kind == HamiltonianKind::MW ? "cubic" : "bisection";
  if (method != "cubic" && method != "bisection") throw ConfigError("eta_star.method must be cubic or bisection");

  const Eigen::Vector3d initial = rc.eta_initial.value_or(th.probs);
  const Eigen::Vector3d ss = rc.eta_final ? *rc.eta_final : map.eigen.populations(steady_state(map));
  json j;
  j["method"] = method;
  j["beta"] = beta;
  j["initial_probs"] = {initial(0), initial(1), initial(2)};
  j["ss_probs"] = {ss(0), ss(1), ss(2)};

  if (method == "cubic") {
    const Eigen::Vector3d& e = map.eigen.energies;
    const double e_bar = e(2);
    if (std::abs(e(0) + e(2)) > 1e-9 * e_bar || std::abs(e(1)) > 1e-9 * e_bar)
      throw ConfigError("cubic eta* needs a symmetric spectrum (-E, 0, E); use method \"bisection\"");
    const CubicSolution sol = solve_eta_star_cubic(initial, ss, e_bar);
    j["eta_star"] = sol.eta_star;
    j["x"] = sol.x;
    j["degree"] = sol.degree;
    j["coefficients"] = {sol.coefficients(0), sol.coefficients(1), sol.coefficients(2), sol.coefficients(3)};
    json roots = json::array();
    for (const auto& r : sol.roots) roots.push_back({{"re", r.real()}, {"im", r.imag()}});
    j["roots"] = roots;
    j["routh_column"] = {sol.routh_column(0), sol.routh_column(1), sol.routh_column(2), sol.routh_column(3)};
    j["routh_sign_changes"] = sol.sign_changes;
    j["g_residual"] = sol.g_residual;

    json ness;
    try {
      const SteadyStateDecomposition dec = decompose_steady_state(ss, e);
      const double beta_init = rc.eta_initial ? std::numeric_limits<double>::quiet_NaN() : beta;
      ness["beta_fin"] = dec.beta_fin;
      ness["lambda"] = dec.lambda;
      ness["converged"] = true;
      if (!std::isnan(beta_init)) {
        const NessSolution ns = solve_ness_condition(beta_init, dec.beta_fin, dec.lambda, e_bar);
        ness["eta_star"] = ns.eta_star;
        ness["nontrivial"] = ns.nontrivial;
        ness["abs_difference"] = std::abs(ns.eta_star - sol.eta_star);
      }
    } catch (const std::exception& ex) {
      ness["converged"] = false;
      ness["reason"] = ex.what();
    }
    j["ness_check"] = ness;
  } else {
    TpmStatistics stats;
    stats.energies = map.eigen.energies;
    stats.initial_probs = initial;
    for (int i = 0; i < 3; ++i) stats.conditional.row(i) = ss.transpose();
    stats.beta = beta;
    stats.n_pulses = -1;
    const NessSolution ns = eta_star_bisection(stats);
    j["eta_star"] = ns.eta_star;
    j["nontrivial"] = ns.nontrivial;
  }
  write_text(out / "eta_star.json", j.dump(2) + "\n");
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stroboscopic simulation of a dissipative qutrit Maxwell demon"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  bool plots = false;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"dynamics", "conditional probabilities P_{j|i} for N = 0..n_pulses_max"},
      {"fluctuation", "G(beta), gamma and gamma_inf per N; exits 2 if G(beta) != gamma"},
      {"bounds", "beta<dE>, -ln gamma and -<S> per N; exits 2 on a violated bound"},
      {"phase-diagram", "extraction/injection classes over the population simplex"},
      {"eta-star", "nontrivial root of G(eta) = 1 in the steady-state regime"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_flag("--plots", plots, "also write gnuplot scripts");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    RunConfig rc = load_config(config_path);
    if (!out_dir.empty()) rc.output_dir = out_dir;
    rc.emit_plots = rc.emit_plots || plots;
    std::error_code ec;
    fs::create_directories(rc.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + rc.output_dir.string() + ": " + ec.message());

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "dynamics") return cmd_dynamics(rc, rc.output_dir);
    if (cmd == "fluctuation") return cmd_fluctuation(rc, rc.output_dir);
    if (cmd == "bounds") return cmd_bounds(rc, rc.output_dir);
    if (cmd == "phase-diagram") return cmd_phase_diagram(rc, rc.output_dir);
    return cmd_eta_star(rc, rc.output_dir);
  } catch (const IoError& e) {
    std::cerr << "demon-sim: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "demon-sim: config error: " << e.what() << "\n";
    return 3;
  } catch (const BudgetExceeded& e) {
    std::cerr << "demon-sim: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "demon-sim: " << e.what() << "\n";
    return 2;
  }
}
