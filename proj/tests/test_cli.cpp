#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "loadscale/cli.hpp"

namespace loadscale {
namespace {

namespace fs = std::filesystem;

struct Run {
  int rc;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "loadscale");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("loadscale_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Cli, Version) {
  const auto r = run({"--version"});
  EXPECT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("loadscale"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).rc, 2);
  EXPECT_EQ(run({"bogus"}).rc, 2);
  const auto dir = scratch("usage");
  const auto r = run({"synth", "--out", (dir / "a.csv").string(), "--no-such-flag"});
  EXPECT_EQ(r.rc, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({"synth"}).rc, 2);
}

TEST(Cli, SynthIsDeterministic) {
  const auto dir = scratch("synth");
  ASSERT_EQ(run({"synth", "--days", "10", "--seed", "4", "--out", (dir / "a.csv").string()}).rc, 0);
  ASSERT_EQ(run({"synth", "--days", "10", "--seed", "4", "--out", (dir / "b.csv").string()}).rc, 0);
  ASSERT_EQ(run({"synth", "--days", "10", "--seed", "5", "--out", (dir / "c.csv").string()}).rc, 0);
  const auto a = slurp(dir / "a.csv");
  EXPECT_EQ(a, slurp(dir / "b.csv"));
  EXPECT_NE(a, slurp(dir / "c.csv"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 241);
}

TEST(Cli, BadConfigExitsOneWithField) {
  const auto dir = scratch("config");
  std::ofstream(dir / "cfg.json") << R"({"model": {"L": "eight"}})";
  const auto r = run({"train", "--config", (dir / "cfg.json").string(), "--out", (dir / "m.json").string()});
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("model.L"), std::string::npos) << r.err;
  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_EQ(run({"train", "--config", (dir / "bad.json").string(), "--out", (dir / "m.json").string()}).rc, 1);
}

TEST(Cli, TrainEvaluateCalibrate) {
  const auto dir = scratch("e2e");
  const auto data = (dir / "data.csv").string();
  ASSERT_EQ(run({"synth", "--days", "60", "--out", data}).rc, 0);
  const auto ck = (dir / "model.json").string();
  const auto t = run({"train", "--data", data, "--region", "SYNTH", "--epochs", "3", "--seed", "2", "--out", ck});
  ASSERT_EQ(t.rc, 0) << t.err;
  EXPECT_TRUE(fs::exists(dir / "model.history.csv"));
  EXPECT_EQ(std::count_if(std::istreambuf_iterator<char>(std::ifstream(dir / "model.history.csv").rdbuf()), {},
                          [](char c) { return c == '\n'; }),
            5);

  const auto report = (dir / "report.json").string();
  const auto e = run({"evaluate", "--checkpoint", ck, "--windows", "10", "--out", report});
  ASSERT_EQ(e.rc, 0) << e.err;
  const auto j = json::parse(slurp(report));
  EXPECT_EQ(j.at("rmse_by_horizon").size(), 24u);
  EXPECT_EQ(j.at("config_hash").get<std::string>().size(), 16u);
  EXPECT_FALSE(j.at("failed").get<bool>());

  const auto c = run({"calibrate", "--checkpoint", ck, "--windows", "10", "--out", (dir / "cal").string()});
  ASSERT_EQ(c.rc, 0) << c.err;
  EXPECT_TRUE(fs::exists(dir / "cal" / "calibration.csv"));
  const auto cj = json::parse(slurp(dir / "cal" / "calibration.json"));
  EXPECT_LE(cj.at("min").get<double>(), cj.at("mean").get<double>());
  EXPECT_LE(cj.at("mean").get<double>(), cj.at("max").get<double>());

  // Too many windows for the test partition is a data error.
  EXPECT_EQ(run({"evaluate", "--checkpoint", ck, "--windows", "500", "--out", report}).rc, 1);
}

TEST(Cli, RefusesToOverwriteInput) {
  const auto dir = scratch("overwrite");
  const auto data = (dir / "data.csv").string();
  ASSERT_EQ(run({"synth", "--days", "20", "--out", data}).rc, 0);
  const auto before = slurp(data);
  const auto r = run({"train", "--data", data, "--epochs", "1", "--out", data});
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(slurp(data), before);
}

TEST(Cli, HierarchyDownscale) {
  const auto dir = scratch("hier");
  const auto data = (dir / "data.csv").string();
  ASSERT_EQ(run({"synth", "--days", "60", "--out", data}).rc, 0);
  std::ofstream(dir / "cfg.json") << R"({"hierarchy": {"stages": [
      {"name": "week-day", "K": 7, "fourier": [{"P": 4.0, "F": 1}]},
      {"name": "day-hour", "K": 24, "fourier": [{"P": 7.0, "F": 2}]}]},
    "model": {"L": 8, "D": 4}, "train": {"epochs": 2}})";
  const auto pipe = (dir / "pipe.json").string();
  const auto t = run({"train", "--config", (dir / "cfg.json").string(), "--data", data, "--hierarchy", "--out", pipe});
  ASSERT_EQ(t.rc, 0) << t.err;
  std::ofstream(dir / "coarse.csv") << "period,value\n3,100\n4,110\n";
  const auto out = (dir / "fine.csv").string();
  const auto d = run({"downscale", "--pipeline", pipe, "--input", (dir / "coarse.csv").string(), "--reconcile", "on",
                      "--out", out});
  ASSERT_EQ(d.rc, 0) << d.err;
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "index,value");
  std::vector<double> vals;
  long first = -1;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (first < 0) first = std::stol(line.substr(0, comma));
    vals.push_back(std::stod(line.substr(comma + 1)));
  }
  EXPECT_EQ(first, 3 * 168);
  ASSERT_EQ(vals.size(), 2u * 168u);
  double m = 0.0;
  for (std::size_t i = 0; i < 168; ++i) m += vals[i];
  EXPECT_NEAR(m / 168.0, 100.0, 1e-9);
}

}  // namespace
}  // namespace loadscale
