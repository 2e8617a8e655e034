#include <cstdlib>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "vcdf/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = 0;
  std::string out;
  std::string err;
};

Run run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(VCDF_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = vcdf::read_file(out);
  r.err = vcdf::read_file(err);
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vcdf_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Cli, Version) {
  const auto dir = scratch("version");
  const auto r = run_cli("--version", dir);
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("vcdf 0.1.0"), std::string::npos);
}

TEST(Cli, UnknownCommandIsConfigError) {
  const auto dir = scratch("unknown");
  const auto r = run_cli("frobnicate", dir);
  EXPECT_EQ(r.status, 2);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"]["code"], "ConfigError");
}

TEST(Cli, MissingInputReportsStructuredError) {
  const auto dir = scratch("noinput");
  const auto r = run_cli("fit --out " + (dir / "o").string(), dir);
  EXPECT_EQ(r.status, 1);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"]["code"], "ConfigError");
  EXPECT_FALSE(fs::exists(dir / "o" / "manifest.json"));
}

TEST(Cli, BadConfigKey) {
  const auto dir = scratch("badkey");
  vcdf::write_file_atomic(dir / "c.json", R"({"simulation": {"subject": 3}})");
  const auto r = run_cli("simulate --config " + (dir / "c.json").string(), dir);
  EXPECT_EQ(r.status, 1);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"]["code"], "ConfigError");
  EXPECT_NE(j["error"]["message"].get<std::string>().find("simulation.subject"), std::string::npos);
}

TEST(Cli, SimulateThenFitAndTest) {
  const auto dir = scratch("pipeline");
  vcdf::write_file_atomic(dir / "c.json", R"({"simulation": {"subjects": 12, "points": 10}, "G": 20,
    "bandwidth": {"h1": 30, "h2": 30}, "covariance": {"error_covariance": false}})");
  const std::string cfg = " --config " + (dir / "c.json").string();
  auto r = run_cli("simulate" + cfg + " --out " + (dir / "sim").string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "sim" / "simulated.json"));
  EXPECT_TRUE(fs::exists(dir / "sim" / "truth.csv"));

  const std::string input = " --input " + (dir / "sim" / "simulated.json").string();
  r = run_cli("fit" + cfg + input + " --out " + (dir / "fit").string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto manifest = nlohmann::json::parse(vcdf::read_file(dir / "fit" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "fit");
  EXPECT_EQ(manifest["files"].size(), 3u);

  r = run_cli("test" + cfg + input + " --test covariate=age --seed 5 --out " + (dir / "t1").string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  r = run_cli("test" + cfg + input + " --test covariate=age --seed 5 --threads 2 --out " + (dir / "t2").string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* f : {"test_global.csv", "test_local.csv", "test_bootstrap.csv"})
    EXPECT_EQ(vcdf::read_file(dir / "t1" / f), vcdf::read_file(dir / "t2" / f)) << f;

  r = run_cli("test" + cfg + input + " --test covariate=height --out " + (dir / "t3").string(), dir);
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["code"], "ValidationError");
  r = run_cli("test" + cfg + input + " --test age --out " + (dir / "t3").string(), dir);
  EXPECT_EQ(r.status, 1);
}
