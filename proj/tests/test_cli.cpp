#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "demon/fluctuation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace demon;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("demon_sim_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

json nv_json() {
  return json{{"units", "Hz"},
              {"hamiltonian", {{"kind", "NV"}, {"delta", 2.87e9}, {"zeeman", 100e6}}},
              {"p_absorb", 1.0},
              {"beta_over_emax", 0.297},
              {"n_pulses_max", 6},
              {"entropy_max_pulses", 4},
              {"phase_resolution", 10}};
}

json mw_json() {
  return json{{"units", "Hz"},
              {"hamiltonian", {{"kind", "MW"}, {"rabi", 2e6}}},
              {"p_absorb", 0.3},
              {"beta_over_emax", 3.0},
              {"n_pulses_max", 6},
              {"entropy_max_pulses", 4},
              {"phase_resolution", 10}};
}

fs::path write_config(const std::string& name, const json& j) {
  const fs::path p = scratch() / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(DEMON_SIM_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST_CASE("dynamics: header, identity at zero pulses, NV rows converge to |0>") {
  const fs::path cfg = write_config("nv", nv_json());
  const fs::path out = scratch() / "dyn";
  REQUIRE(run("dynamics --config " + cfg.string() + " --out " + out.string() + " --plots") == 0);
  const auto rows = read_csv(out / "dynamics_NV.csv");
  REQUIRE(rows.size() == 1 + 7 * 9);
  CHECK(rows[0] == std::vector<std::string>{"n_pulses", "i", "j", "p"});
  for (int k = 1; k <= 9; ++k) {
    const int i = std::stoi(rows[k][1]), j = std::stoi(rows[k][2]);
    CHECK(std::stod(rows[k][3]) == doctest::Approx(i == j ? 1.0 : 0.0));
  }
  CHECK(fs::exists(out / "dynamics_NV.gp"));
}

TEST_CASE("fluctuation: gamma_inf column equals 3/Z for NV") {
  const fs::path cfg = write_config("nv", nv_json());
  const fs::path out = scratch() / "fluct";
  REQUIRE(run("fluctuation --config " + cfg.string() + " --out " + out.string()) == 0);
  const auto rows = read_csv(out / "fluctuation.csv");
  REQUIRE(rows.size() == 8);
  const double e3 = 2 * std::numbers::pi * (2.87e9 + 100e6);
  const double e2 = 2 * std::numbers::pi * (2.87e9 - 100e6);
  const double beta = 0.297 / e3;
  const double z = 1.0 + std::exp(-beta * e2) + std::exp(-beta * e3);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    CHECK(std::stod(rows[k][3]) == doctest::Approx(3.0 / z).epsilon(1e-12));
    CHECK(std::stod(rows[k][1]) == doctest::Approx(std::stod(rows[k][2])).epsilon(1e-12));
    CHECK(std::stod(rows[k][2]) == doctest::Approx(std::stod(rows[k][4])).epsilon(1e-12));
  }
}

TEST_CASE("bounds: NA beyond the entropy budget, 17 significant digits") {
  const fs::path cfg = write_config("mw", mw_json());
  const fs::path out = scratch() / "bounds";
  REQUIRE(run("bounds --config " + cfg.string() + " --out " + out.string()) == 0);
  const auto rows = read_csv(out / "bounds.csv");
  REQUIRE(rows.size() == 8);
  CHECK(rows[5][3] != "NA");
  CHECK(rows[6][3] == "NA");
  CHECK(rows[6][4] == "NA");
  CHECK(std::stod(rows[3][1]) > 0.0);
}

TEST_CASE("phase diagram and eta* outputs") {
  const fs::path cfg = write_config("mw", mw_json());
  const fs::path out = scratch() / "phase";
  REQUIRE(run("phase-diagram --config " + cfg.string() + " --out " + out.string() + " --plots") == 0);
  const auto rows = read_csv(out / "phase_diagram.csv");
  CHECK(rows[0] == std::vector<std::string>{"p_a_inf", "p_b_inf", "beta_dE", "class"});
  CHECK(rows.size() == 1 + 66);
  CHECK(read_csv(out / "zero_line.csv").size() == 3);
  const std::string gp = slurp(out / "phase_diagram.gp");
  CHECK(gp.find("phase_diagram.csv") != std::string::npos);

  REQUIRE(run("eta-star --config " + cfg.string() + " --out " + out.string()) == 0);
  const json j = json::parse(slurp(out / "eta_star.json"));
  CHECK(j.at("method") == "cubic");
  CHECK(j.at("routh_sign_changes") == 1);
  CHECK(j.at("g_residual").get<double>() < 1e-9);
  CHECK(j.at("roots").size() == 3);
  CHECK(j.at("ness_check").at("abs_difference").get<double>() * 2 * std::numbers::pi * 2e6 < 1e-8);
}

TEST_CASE("eta* override: thermal inputs give beta - beta_fin") {
  json j = mw_json();
  const Eigen::Vector3d e(-1.0, 0.0, 1.0);
  const Eigen::Vector3d p = boltzmann_weights(e, 1.0), q = boltzmann_weights(e, 0.25);
  j["eta_star"] = {{"initial_probs", {p(0), p(1), p(2)}}, {"ss_probs", {q(0), q(1), q(2)}}};
  const fs::path cfg = write_config("eta", j);
  const fs::path out = scratch() / "eta";
  REQUIRE(run("eta-star --config " + cfg.string() + " --out " + out.string()) == 0);
  const double ebar = 2 * std::numbers::pi * 2e6;
  CHECK(json::parse(slurp(out / "eta_star.json")).at("eta_star").get<double>() * ebar ==
        doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("outputs are byte-identical across runs and thread counts") {
  const fs::path cfg = write_config("nv", nv_json());
  const fs::path a = scratch() / "det_a", b = scratch() / "det_b";
  REQUIRE(run("bounds --config " + cfg.string() + " --out " + a.string()) == 0);
  REQUIRE(run("bounds --config " + cfg.string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "bounds.csv") == slurp(b / "bounds.csv"));
  REQUIRE(std::system(("DEMON_SIM_THREADS=3 " + std::string(DEMON_SIM_PATH) + " dynamics --config " + cfg.string() +
                       " --out " + a.string()).c_str()) == 0);
  REQUIRE(run("dynamics --config " + cfg.string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "dynamics_NV.csv") == slurp(b / "dynamics_NV.csv"));
}

TEST_CASE("exit codes") {
  CHECK(run("dynamics --config " + (scratch() / "missing.json").string()) == 4);
  json bad = nv_json();
  bad["p_absorb"] = 1.5;
  CHECK(run("dynamics --config " + write_config("bad", bad).string()) == 3);
  json both = nv_json();
  both["beta"] = 1e-9;
  CHECK(run("dynamics --config " + write_config("both", both).string()) == 3);
  CHECK(run("nonsense --config x") == 3);
  std::ofstream(scratch() / "garbage.json") << "{ not json";
  CHECK(run("bounds --config " + (scratch() / "garbage.json").string()) == 3);
  json nv = nv_json();
  nv["eta_star"] = {{"method", "cubic"}};
  CHECK(run("eta-star --config " + write_config("nvcubic", nv).string() + " --out " + (scratch() / "x").string()) == 3);
  const fs::path blocker = scratch() / "file_not_dir";
  std::ofstream(blocker) << "x";
  CHECK(run("dynamics --config " + write_config("nv", nv_json()).string() + " --out " + (blocker / "sub").string()) == 4);
}
