#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qvfgm/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "qvfgm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = qvfgm::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"simulate", "--preset", "five-region"}).code, 2);  // missing --out
  EXPECT_EQ(run({"simulate", "--preset", "nowhere", "-o", "x.csv"}).code, 2);
  EXPECT_EQ(run({"summarize", "/definitely/not/here"}).code, 2);
  EXPECT_EQ(run({"check", "--family", "poisson"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, CheckIsDeterministic) {
  const auto a = run({"check", "--family", "gamma", "--seed", "7"});
  const auto b = run({"check", "--family", "gamma", "--seed", "7"});
  EXPECT_EQ(a.code, 0) << a.out << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto dir = oracles::scratch_dir("cli");
  EXPECT_EQ(run({"check", "--family", "beta", "--json", (dir / "r.json").string()}).code, 0);
  const auto j = nlohmann::json::parse(slurp(dir / "r.json"));
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_GT(j["checks"].size(), 10u);
  fs::remove_all(dir);
}

TEST(Cli, Pipeline) {
  const auto dir = oracles::scratch_dir("cli");
  const auto data = (dir / "data.csv").string(), truth = (dir / "truth.txt").string();
  const auto samples = (dir / "samples").string();
  ASSERT_EQ(run({"simulate", "--preset", "five-region", "-n", "60", "--seed", "3", "-o", data, "--truth", truth}).code, 0);
  EXPECT_NE(slurp(truth).find("family = inverse-gamma"), std::string::npos);

  std::ofstream(dir / "run.cfg") << "family = inverse-gamma\niterations = 200\nburn_in = 100\nthinning = 5\n";
  const auto fit = run({"fit", "-c", (dir / "run.cfg").string(), "-d", data, "-o", samples, "--set", "chains=2"});
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_TRUE(fs::exists(fs::path(samples) / "c_4_5.csv"));

  const auto summ = run({"summarize", samples, "--truth", truth});
  EXPECT_EQ(summ.code, 0);
  EXPECT_NE(summ.out.find("cover"), std::string::npos);
  EXPECT_NE(summ.out.find("c_1_3"), std::string::npos);

  const auto prefix = (dir / "net").string();
  EXPECT_EQ(run({"export-graph", "--samples", samples, "-o", prefix}).code, 0);
  EXPECT_TRUE(fs::exists(prefix + ".dot"));
  const auto net = nlohmann::json::parse(slurp(prefix + ".json"));
  double top = 0.0;
  for (const auto& e : net["edges"]) top = std::max(top, e["normalized"].get<double>());
  EXPECT_EQ(top, 100.0);

  const auto mse = run({"mse", samples});
  EXPECT_EQ(mse.code, 0) << mse.err;
  EXPECT_NE(mse.out.find("inverse-gamma"), std::string::npos);

  EXPECT_EQ(run({"export-graph", "--model", truth, "-o", prefix}).code, 0);
  EXPECT_NE(slurp(prefix + ".dot").find("weight=100.00"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, RuntimeErrors) {
  const auto dir = oracles::scratch_dir("cli");
  std::ofstream(dir / "bad.csv") << "1,2\n3,oops\n";
  const auto r = run({"fit", "-d", (dir / "bad.csv").string(), "-o", (dir / "s").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("column 2"), std::string::npos) << r.err;
  EXPECT_EQ(run({"fit", "-d", (dir / "bad.csv").string(), "--set", "colour=red"}).code, 2);
  std::ofstream(dir / "neg.csv") << "1,2\n3,-4\n";
  EXPECT_EQ(run({"fit", "--family", "gamma", "-d", (dir / "neg.csv").string(), "-o", (dir / "s").string()}).code, 1);
  fs::remove_all(dir);
}
