#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "polaron/app/commands.hpp"

namespace {

using namespace polaron::app;
namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig small_config(const fs::path& dir) {
  RunConfig c;
  c.n_sites = 5;
  c.max_phonons = 3;
  c.ground_max_phonons = 3;
  c.k0_index = 1;
  c.t_final = 2.0;
  c.dt = 0.1;
  c.output_dir = dir.string();
  return c;
}

TEST(Commands, QuenchCsvLayoutAndDeterminism) {
  const auto dir = fresh_dir("polaron_cli_quench");
  const auto cfg = small_config(dir);
  std::ostringstream log;
  ASSERT_EQ(cmd_quench(cfg, log), kOk);
  const std::string first = slurp(dir / "quench.csv");
  ASSERT_EQ(cmd_quench(cfg, log), kOk);
  EXPECT_EQ(first, slurp(dir / "quench.csv"));

  std::istringstream in(first);
  std::string meta_line;
  std::string header;
  std::getline(in, meta_line);
  std::getline(in, header);
  ASSERT_EQ(meta_line.substr(0, 2), "# ");
  const auto meta = nlohmann::json::parse(meta_line.substr(2));
  EXPECT_EQ(meta["config"]["n_sites"], 5);
  EXPECT_TRUE(meta.contains("tau_sp_over_tau_ec"));
  EXPECT_EQ(header, "t_ns,t_over_tau_ec,n_ph,survival,s_x,s_p,entropy,norm");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 21u);
  EXPECT_TRUE(fs::exists(dir / "quench.run.json"));

  // the header reproduces the run
  RunConfig replay;
  for (const auto& [k, v] : meta["config"].items())
    set_value(replay, k, v.is_string() ? v.get<std::string>() : v.dump());
  EXPECT_EQ(to_json(replay).dump(), to_json(cfg).dump());
  fs::remove_all(dir);
}

TEST(Commands, GroundWritesPerSectorTable) {
  const auto dir = fresh_dir("polaron_cli_ground");
  auto cfg = small_config(dir);
  cfg.phi_steps = 2;
  cfg.phi_min = 0.95 * std::numbers::pi;
  cfg.phi_max = 0.985 * std::numbers::pi;
  std::ostringstream log;
  ASSERT_EQ(cmd_ground(cfg, log), kOk);
  const std::string text = slurp(dir / "ground.csv");
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  EXPECT_EQ(lines, 2u + 5u);
  EXPECT_TRUE(fs::exists(dir / "ground_sweep.csv"));
  fs::remove_all(dir);
}

TEST(Commands, SweepRecordsEveryPoint) {
  const auto dir = fresh_dir("polaron_cli_sweep");
  auto cfg = small_config(dir);
  cfg.sweep_k0 = "1,2";
  cfg.sweep_phi = "0.975pi,0.98pi";
  cfg.t_final = 20.0;
  std::ostringstream log;
  ASSERT_EQ(cmd_sweep(cfg, log), kOk);
  const std::string text = slurp(dir / "formation.csv");
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  EXPECT_EQ(lines, 2u + 4u);
  fs::remove_all(dir);
}

TEST(Commands, OracleCheckAndMutation) {
  RunConfig cfg;
  std::ostringstream log;
  EXPECT_EQ(cmd_oracle_check(cfg, false, log), kOk);
  EXPECT_EQ(cmd_oracle_check(cfg, true, log), kScientificFailure);
  EXPECT_NE(log.str().find("FAIL"), std::string::npos);
}

#ifdef POLARON_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(POLARON_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST(Executable, ExitCodes) {
  EXPECT_EQ(run_cli("oracle-check"), 0);
  EXPECT_EQ(run_cli("oracle-check --mutate-peierls"), 1);
  EXPECT_EQ(run_cli("quench --no_such_key 3"), 2);
  EXPECT_EQ(run_cli("quench --k0_index 11"), 2);
  EXPECT_EQ(run_cli("quench --config /nonexistent/file.cfg"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Executable, PrintConfigAppliesOverrides) {
  const auto dir = fresh_dir("polaron_cli_print");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "n_sites = 7\nphi_dc = 0.975pi\n";
  }
  const std::string cmd = std::string(POLARON_CLI_PATH) + " ground --config " + (dir / "run.cfg").string() +
                          " --max-phonons 4 --print-config > " + (dir / "out.txt").string();
  ASSERT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
  const std::string out = slurp(dir / "out.txt");
  EXPECT_NE(out.find("n_sites = 7"), std::string::npos);
  EXPECT_NE(out.find("max_phonons = 4"), std::string::npos);
  fs::remove_all(dir);
}
#endif

}  // namespace
