// End-to-end tests of the roughfut executable against generated fixtures.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kCli = ROUGHFUT_CLI;
const fs::path kFixtures = ROUGHFUT_FIXTURES;
const fs::path kWork = ROUGHFUT_CLI_WORK;

struct RunResult {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunResult run(const std::string& args) {
  fs::create_directories(kWork);
  static int counter = 0;
  const fs::path log = kWork / ("run_" + std::to_string(counter++) + ".log");
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string out(const std::string& name) { return "\"" + (kWork / name).string() + "\""; }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Cli, SimulateKeepsNormalisedSpotAtOne) {
  const auto r = run("simulate --model rbergomi --h 0.1 --eta 1.5 --rho -0.3 --xi0 flat:0.04 --n-paths 10000 --seed 7 --out " +
                     out("sim.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = read_csv(kWork / "sim.csv");
  ASSERT_EQ(rows.front(), (std::vector<std::string>{"mesh", "t", "mean_s", "stderr_s", "mean_v"}));
  ASSERT_EQ(rows.size(), 302u);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const double mean = std::stod(rows[i][2]), se = std::stod(rows[i][3]);
    EXPECT_LE(std::abs(mean - 1.0), 4.0 * se) << "t=" << rows[i][1];
  }
  EXPECT_TRUE(fs::exists(kWork / "sim.manifest.json"));
}

TEST(Cli, MissingModelIsAConfigError) {
  const auto r = run("simulate --n-paths 10 --out " + out("x.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("--model"), std::string::npos);
  EXPECT_NE(r.output.find("OPTIONS"), std::string::npos) << "usage text expected:\n" << r.output;
}

TEST(Cli, PositiveCorrelationIsRejectedForRoughBergomi) {
  const auto r = run("simulate --model rbergomi --rho 0.2 --out " + out("x.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("rho < 0"), std::string::npos) << r.output;
}

TEST(Cli, BadFlagValueIsAConfigError) {
  EXPECT_EQ(run("simulate --model rbergomi --n-paths ten --out " + out("x.csv")).code, 2);
  EXPECT_EQ(run("simulate --model nonsense --out " + out("x.csv")).code, 2);
  EXPECT_EQ(run("simulate --model rbergomi --bogus 1 --out " + out("x.csv")).code, 2);
}

TEST(Cli, SamuelsonWritesFourByEightGrid) {
  const auto r = run("samuelson --model rbergomi --a 0,0.5,1,2 --tfut 0.44 --topt 0.05:0.40:8 --n-paths 5000 --out " +
                     out("sam.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = read_csv(kWork / "sam.csv");
  ASSERT_EQ(rows.size(), 33u);
  std::set<std::string> a, t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    a.insert(rows[i][0]);
    t.insert(rows[i][1]);
  }
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(t.size(), 8u);
}

TEST(Cli, SamuelsonWithoutMeanReversionIsFlatForConstantVariance) {
  const auto r = run("samuelson --model rbergomi --eta 0 --xi0 flat:0.04 --a 0 --n-paths 20000 --out " +
                     out("flat.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = read_csv(kWork / "flat.csv");
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NEAR(std::stod(rows[i][5]), 0.2, 0.01) << rows[i][1];
}

TEST(Cli, EmptySpeedListIsAConfigError) {
  EXPECT_EQ(run("samuelson --model rbergomi --a \"\" --out " + out("x.csv")).code, 2);
}

TEST(Cli, PriceStrikeGridGivesNineRows) {
  const auto r = run("price --model rheston --strike-grid 0.8:1.2:9 --n-paths 5000 --out " + out("price.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = read_csv(kWork / "price.csv");
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows.front(), (std::vector<std::string>{"a", "t_opt", "strike", "price", "stderr", "implied_vol"}));
}

TEST(Cli, CalibrateBeatsFixtureThreshold) {
  const auto threshold = json::parse(slurp(kFixtures / "threshold.json"));
  const auto r = run("calibrate --quotes \"" + (kFixtures / "quotes.csv").string() + "\" --config \"" +
                     (kFixtures / "calibrate_config.json").string() + "\" --out " + out("cal.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto result = json::parse(slurp(kWork / "cal.json"));
  EXPECT_LT(result["loss"]["total"].get<double>(), threshold["threshold"].get<double>());
  EXPECT_TRUE(fs::exists(kWork / "cal_smile_SYN1.csv"));
  EXPECT_TRUE(fs::exists(kWork / "cal_smile_SYN2.csv"));
  const auto manifest = json::parse(slurp(kWork / "cal.manifest.json"));
  EXPECT_EQ(manifest["command"], "calibrate");
  EXPECT_EQ(manifest["inputs"].size(), 1u);
  EXPECT_EQ(manifest["config"]["global_budget"], 200);
}

TEST(Cli, HurstRecoversFixtureExponent) {
  const fs::path dir = kFixtures / "intraday";
  const auto r = run("hurst --returns \"" + (dir / "contract_1.csv").string() + "\" --calendar \"" +
                     (dir / "calendar.csv").string() + "\" --q 0.5,1,1.5,2,3 --dmax 31 --pooled --out " + out("h.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto h = json::parse(slurp(kWork / "h.json"))["pooled"]["h"].get<double>();
  EXPECT_GE(h, 0.07);
  EXPECT_LE(h, 0.13);
  const auto scatter = read_csv(kWork / "h_scatter.csv");
  EXPECT_EQ(scatter.front(), (std::vector<std::string>{"q", "delta", "log_delta", "log_m", "contract"}));
  EXPECT_EQ(scatter.size(), 1u + 5u * 31u);
}

TEST(Cli, OutputsIgnoreThreadCountAndReplayFromManifest) {
  const std::string sim = "simulate --model rheston --maturities 0.1,0.5 --mesh 500:100 --n-paths 3000 --seed 3 ";
  ASSERT_EQ(run(sim + "--threads 1 --out " + out("d1.csv")).code, 0);
  ASSERT_EQ(run(sim + "--threads 4 --out " + out("d4.csv")).code, 0);
  const auto first = slurp(kWork / "d1.csv");
  EXPECT_EQ(first, slurp(kWork / "d4.csv"));
  // the manifest's config names its own output, so the replay rewrites d1.csv
  fs::remove(kWork / "d1.csv");
  const auto replay = run("simulate --config " + out("d1.manifest.json"));
  ASSERT_EQ(replay.code, 0) << replay.output;
  EXPECT_EQ(slurp(kWork / "d1.csv"), first);

  const std::string cal = "calibrate --model rbergomi --quotes \"" + (kFixtures / "quotes.csv").string() +
                          "\" --n-paths 800 --budget 6:3 ";
  ASSERT_EQ(run(cal + "--threads 1 --out " + out("c1.json")).code, 0);
  ASSERT_EQ(run(cal + "--threads 4 --out " + out("c4.json")).code, 0);
  EXPECT_EQ(slurp(kWork / "c1.json"), slurp(kWork / "c4.json"));
  EXPECT_EQ(slurp(kWork / "c1_smile_SYN2.csv"), slurp(kWork / "c4_smile_SYN2.csv"));
}

TEST(Cli, SelftestRunsASingleCriterion) {
  const auto r = run("selftest --only loss");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.rfind("PASS  6 loss", 0), 0u) << r.output;
  EXPECT_EQ(r.output.find("martingale"), std::string::npos);
}

TEST(Cli, SelftestFlagsWidenedTolerances) {
  const auto r = run("selftest --only martingale --n-paths 100");
  EXPECT_NE(r.output.find("widened"), std::string::npos) << r.output;
  EXPECT_EQ(run("selftest --only nonexistent").code, 2);
}
