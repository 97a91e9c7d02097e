#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stereofov/image_io.hpp"
#include "stereofov/psychofit.hpp"
#include "temp_dir.hpp"

using stereofov::testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(STEREOFOV_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const auto help = run("--help");
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"gen-stimulus", "run-sim", "fit-surface", "eval", "budget-map", "foveate",
                          "validate", "serve"}) {
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  }
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("eval --theta 0").code, 2);
  EXPECT_EQ(run("eval --theta 0 --sigma 1 --p1-mode other").code, 2);
}

TEST(Cli, EvalPrintsCsv) {
  const auto r = run("eval --theta 0 --sigma 1.35");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "theta,sigma,threshold\n0,1.35,0.16\n");
  const auto grid = run("eval --theta 0 10 --sigma 0 3 6");
  ASSERT_EQ(grid.code, 0);
  EXPECT_EQ(std::count(grid.out.begin(), grid.out.end(), '\n'), 7);
}

TEST(Cli, EvalRangeErrorsExitOne) {
  EXPECT_EQ(run("eval --theta 25 --sigma 3").code, 1);
  EXPECT_EQ(run("eval --theta 25 --sigma 3 --extrapolate").code, 0);
}

TEST(Cli, BudgetMapCenterValue) {
  TempDir dir("cli");
  const auto prefix = (dir / "map").string();
  ASSERT_EQ(run("budget-map --width 64 --height 64 --ppd 10 --gaze-x 32 --gaze-y 32 --out " + prefix)
                .code,
            0);
  const std::string raw = slurp(dir / "map.raw");
  ASSERT_EQ(raw.size(), 64u * 64u * 2u);
  const std::size_t i = (32 * 64 + 32) * 2;
  const int v = static_cast<unsigned char>(raw[i]) | static_cast<unsigned char>(raw[i + 1]) << 8;
  EXPECT_EQ(v, 135);
  const auto side = nlohmann::json::parse(slurp(dir / "map.json"));
  EXPECT_EQ(side.at("width").get<int>(), 64);
  EXPECT_EQ(run("budget-map --width 64 --height 64 --gaze-x 99 --out " + prefix).code, 1);
}

TEST(Cli, GenStimulusZeroDisparity) {
  TempDir dir("cli");
  const auto r = run("gen-stimulus --theta 10 --sigma 5.8 --disparity 0 --ppd 10 --out-dir " +
                     dir.path().string());
  ASSERT_EQ(r.code, 0);
  const auto left = stereofov::io::read_png(dir / "stimulus_left.png");
  const auto right = stereofov::io::read_png(dir / "stimulus_right.png");
  EXPECT_EQ(left, right);
  const auto sbs = stereofov::io::read_png(dir / "stimulus_sbs.png");
  EXPECT_EQ(sbs.width(), 2 * left.width());
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir / "stimulus.json")).is_object());
}

TEST(Cli, GenStimulusRejectsUnmeasuredEccentricity) {
  TempDir dir("cli");
  const std::string out = " --ppd 10 --out-dir " + dir.path().string();
  EXPECT_EQ(run("gen-stimulus --theta 5 --sigma 0 --disparity 1" + out).code, 1);
  EXPECT_EQ(run("gen-stimulus --theta 5 --sigma 0 --disparity 1 --free-theta" + out).code, 0);
  EXPECT_EQ(run("gen-stimulus --theta 0 --sigma 0 --disparity 1 --phase 7" + out).code, 2);
}

TEST(Cli, RunSimIsDeterministicAndFits) {
  TempDir dir("cli");
  const std::string base = "run-sim --observers 3 --n-boot 20 --seed 4 --out ";
  ASSERT_EQ(run(base + (dir / "a.csv").string()).code, 0);
  ASSERT_EQ(run(base + (dir / "b.csv").string()).code, 0);
  const std::string a = slurp(dir / "a.csv");
  EXPECT_EQ(a, slurp(dir / "b.csv"));
  const auto rows = stereofov::psychofit::parse_estimates_csv(a);
  EXPECT_GE(rows.size(), 19u * 3u - 3u);

  const auto fit = run("fit-surface --in " + (dir / "a.csv").string() + " --report " +
                       (dir / "report.txt").string());
  ASSERT_EQ(fit.code, 0);
  const auto model = nlohmann::json::parse(fit.out);
  EXPECT_TRUE(model.contains("p1"));
  EXPECT_FALSE(slurp(dir / "report.txt").empty());
}

TEST(Cli, FitSurfaceNeedsEveryEccentricity) {
  TempDir dir("cli");
  {
    std::ofstream out(dir / "est.csv");
    out << "theta,sigma,T,T_sigma,u,weight,outlier\n";
    for (double s : {0.0, 3.0, 6.0, 9.0}) out << "0," << s << ",1,0.1,0.1,100,0\n";
  }
  EXPECT_EQ(run("fit-surface --in " + (dir / "est.csv").string()).code, 1);
}

TEST(Cli, FoveateWritesSameSizePng) {
  TempDir dir("cli");
  stereofov::GrayImage img(48, 32, 0.5);
  for (int x = 0; x < 48; x += 2) img.at(x, 10) = 1.0;
  stereofov::io::write_png(dir / "in.png", img);
  ASSERT_EQ(run("foveate --ppd 4 --in " + (dir / "in.png").string() + " --out " +
                (dir / "out.png").string())
                .code,
            0);
  const auto out = stereofov::io::read_png(dir / "out.png");
  EXPECT_EQ(out.width(), 48);
  EXPECT_EQ(out.height(), 32);
  EXPECT_EQ(run("foveate --in " + (dir / "in.png").string() + " --out " +
                (dir / "o.png").string() + " --levels 1 2")
                .code,
            1);
}
