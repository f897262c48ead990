#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "swtaxis/cli/commands.hpp"

using namespace swtaxis;
using namespace swtaxis::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("swtaxis_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

json small_stationary() {
  return json::parse(R"({
    "signal": {"kind": "stationary", "n": 2, "amplitudes": [1.0, 0.5],
               "profiles": ["cosine", {"harmonics": [[1, 0.5, 0.5], [2, 0.1, 0.0]]}]},
    "fast": {"modes": 16}
  })");
}

std::string config_error_message(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, RoundTripIsStable) {
  json j = small_stationary();
  j["constants"] = {{"kappa1", 2.5}, {"mu1", 0.7}};
  j["neutral"] = {{"k", {{"from", 0.1}, {"to", 10}, {"count", 5}, {"log", true}}}, {"speeds", {1, 2}}};
  j["seed"] = 7;
  const RunConfig a = parse_config(j);
  const json first = to_json(a);
  const RunConfig b = parse_config(first);
  EXPECT_EQ(to_json(b), first);
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_DOUBLE_EQ(b.constants.kappa1, 2.5);
  ASSERT_EQ(b.neutral_k.values.size(), 5u);
  EXPECT_NEAR(b.neutral_k.values[2], 1.0, 1e-12);
  EXPECT_EQ(b.seed, 7u);
}

TEST(Config, UnknownKeyNamesThePath) {
  json j = small_stationary();
  j["signal"]["amplitude"] = 1.0;
  EXPECT_NE(config_error_message(j).find("signal.amplitude"), std::string::npos);
  json k = small_stationary();
  k["stabilty"] = json::object();
  EXPECT_NE(config_error_message(k).find("'stabilty'"), std::string::npos);
}

TEST(Config, FieldDiagnostics) {
  json j = small_stationary();
  j["constants"] = {{"mu1", -1.0}};
  EXPECT_NE(config_error_message(j).find("constants.mu1"), std::string::npos);
  json k = small_stationary();
  k["signal"]["profiles"][1]["harmonics"][0] = {0, 1.0, 0.0};
  EXPECT_NE(config_error_message(k).find("signal.profiles[1].harmonics[0]"), std::string::npos);
  json v = small_stationary();
  v["validate"] = {{"deltas", {0.1, 0.2}}};
  EXPECT_NE(config_error_message(v).find("strictly decreasing"), std::string::npos);
}

TEST(Config, ParseErrorReportsLineAndColumn) {
  const fs::path dir = scratch("parse");
  const fs::path p = dir / "bad.json";
  std::ofstream(p) << "{\n  \"signal\": {\n    \"kind\": \"stationary\",,\n  }\n}\n";
  try {
    load_config(p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
  }
}

TEST(Config, EnvironmentOverridesConstants) {
  RunConfig cfg = parse_config(small_stationary());
  std::map<std::string, std::string> env{{"SWTAXIS_KAPPA1", "3.25"}, {"SWTAXIS_DELTA2", "0"}};
  auto get = [&](const char* name) -> const char* {
    const auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  apply_env_overrides(cfg, get);
  EXPECT_DOUBLE_EQ(cfg.constants.kappa1, 3.25);
  EXPECT_DOUBLE_EQ(cfg.constants.delta2, 0.0);
  EXPECT_EQ(cfg.overrides.size(), 2u);
  env["SWTAXIS_MU"] = "abc";
  EXPECT_THROW(apply_env_overrides(cfg, get), ConfigError);
  env["SWTAXIS_MU"] = "-1";
  EXPECT_THROW(apply_env_overrides(cfg, get), ConfigError);
}

TEST(Commands, TensorWithoutSignalIsIdentity) {
  json j = small_stationary();
  j["signal"]["amplitudes"] = {0.0, 0.0};
  const fs::path out = scratch("identity");
  std::ostringstream err;
  ASSERT_EQ(run_command("tensor", parse_config(j), out, err), exit_ok) << err.str();
  EXPECT_EQ(first_line(out / "tensor.csv"), "i,j,T_closed,T_numeric");
  std::ifstream in(out / "tensor.csv");
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    int i = 0, jj = 0;
    double tc = 0, tn = 0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &i, &jj, &tc, &tn), 4);
    EXPECT_NEAR(tc, i == jj ? 1.0 : 0.0, 1e-12);
    EXPECT_NEAR(tn, i == jj ? 1.0 : 0.0, 1e-10);
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST(Commands, ManifestRecordsRun) {
  const fs::path out = scratch("manifest");
  const RunConfig cfg = parse_config(small_stationary());
  std::ostringstream err;
  ASSERT_EQ(run_command("cell", cfg, out, err), exit_ok) << err.str();
  const json m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["command"], "cell");
  EXPECT_EQ(m["version"], version);
  EXPECT_EQ(m["config"], to_json(cfg));
  EXPECT_EQ(m["run"]["exit_code"], 0);
  EXPECT_TRUE(m["run"].contains("threads"));
  EXPECT_TRUE(m["run"].contains("tolerances"));
  EXPECT_EQ(m["outputs"].size(), 4u);
  for (const auto& f : m["outputs"]) EXPECT_TRUE(fs::exists(out / f.get<std::string>())) << f;
  EXPECT_EQ(first_line(out / "cell.csv").rfind("mean_phi_star,min_phi_star,residual_phi_star", 0), 0u);
  EXPECT_LT(m["run"]["residual_phi_star"].get<double>(), 1e-8);
}

TEST(Commands, ExitCodes) {
  std::ostringstream err;
  const RunConfig cfg = parse_config(small_stationary());
  EXPECT_EQ(run_command("nonsense", cfg, scratch("codes_a"), err), exit_config);

  json j = small_stationary();
  j["cell"] = {{"ubar", {0.0}}};  // wrong dimension
  EXPECT_EQ(run_command("cell", parse_config(j), scratch("codes_b"), err), exit_config);

  json d = small_stationary();
  d["drift"] = {{"omega", {1.0, 2.0}}};  // speed sweep needs a traveling signal
  const fs::path out = scratch("codes_c");
  EXPECT_EQ(run_command("drift", parse_config(d), out, err), exit_config);
  const json m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["run"]["exit_code"], exit_config);
  EXPECT_TRUE(m["run"].contains("error"));

  json f = small_stationary();
  f["simulate"] = {{"mode", "full"}, {"delta", 0.3}, {"horizon", 0.01}};  // 20 pi / (0.3 * 2 pi) is not whole
  EXPECT_EQ(run_command("simulate", parse_config(f), scratch("codes_d"), err), exit_config);
}

TEST(Commands, RerunsAreDeterministic) {
  json j = json::parse(R"({
    "signal": {"kind": "traveling", "n": 1, "amplitudes": [1.0], "speeds": [1.5], "profiles": ["cosine"]},
    "fast": {"modes": 16, "time_modes": 16},
    "stability": {"k": {"from": 0.1, "to": 10, "count": 30, "log": true}, "directions": 4}
  })");
  const RunConfig cfg = parse_config(j);
  std::ostringstream err;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(run_command("stability", cfg, a, err), exit_ok) << err.str();
  ASSERT_EQ(run_command("stability", cfg, b, err), exit_ok) << err.str();
  EXPECT_EQ(slurp(a / "stability_modes.csv"), slurp(b / "stability_modes.csv"));
  EXPECT_EQ(slurp(a / "stability.json"), slurp(b / "stability.json"));
  auto ma = json::parse(slurp(a / "manifest.json")), mb = json::parse(slurp(b / "manifest.json"));
  ma.erase("timestamp");
  mb.erase("timestamp");
  EXPECT_EQ(ma, mb);
}

TEST(Commands, SlowSimulationWritesSnapshots) {
  json j = small_stationary();
  j["signal"] = json::parse(R"({"kind": "stationary", "n": 1, "amplitudes": [1.0], "profiles": ["cosine"]})");
  j["simulate"] = {{"horizon", 0.5}, {"dt", 0.01}, {"snapshots", 2}, {"points", {64}}};
  const fs::path out = scratch("slow");
  std::ostringstream err;
  ASSERT_EQ(run_command("simulate", parse_config(j), out, err), exit_ok) << err.str();
  std::ifstream in(out / "slow_snapshots.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 1 + 3 * 64);  // header, then t = 0, 0.25, 0.5
}
