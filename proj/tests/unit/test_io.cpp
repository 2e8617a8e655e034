#include <filesystem>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "vcdf/commands.hpp"
#include "vcdf/config.hpp"
#include "vcdf/io.hpp"
#include "vcdf/simulation.hpp"

using namespace vcdf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vcdf_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_minimal(const fs::path& dir, const std::string& tensor_rows) {
  write_file_atomic(dir / "t.json", R"({"format": "vcdf-tract/1", "subjects": 2, "points": 2, "covariates": 1,
    "length": 1.0, "units": "mm^2/s", "covariate_names": ["intercept"],
    "blocks": {"grid": "t.grid.csv", "covariates": "t.covariates.csv", "tensors": "t.tensors.csv"}})");
  write_file_atomic(dir / "t.grid.csv", "x\n0\n1\n");
  write_file_atomic(dir / "t.covariates.csv", "intercept\n1\n1\n");
  write_file_atomic(dir / "t.tensors.csv", "subject,point,a11,a21,a22,a31,a32,a33\n" + tensor_rows);
}

const std::string kIdentityRows =
    "0,0,1,0,1,0,0,1\n0,1,1,0,1,0,0,1\n1,0,1,0,1,0,0,1\n1,1,1,0,1,0,0,1\n";

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1e-300), "1e-300");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int t = 0; t < 1000; ++t) {
    const double v = u(rng);
    EXPECT_EQ(parse_number(format_number(v), "x"), v);
  }
  EXPECT_THROW(parse_number("1.5x", "here"), Error);
  EXPECT_THROW(parse_number("", "here"), Error);
  EXPECT_THROW(parse_number("inf", "here"), Error);
}

TEST(Csv, SkipsCommentsAndTracksPositions) {
  const auto rows = parse_csv("# note\nx,yy\n\n1,2\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].line, 2);
  EXPECT_EQ(rows[1].line, 4);
  EXPECT_EQ(rows[0].columns[1], 3);
  EXPECT_EQ(rows[1].fields[1], "2");
  CsvTable t{{"a", "b"}, {}};
  t.add({"1", "2"});
  EXPECT_EQ(t.render({"c"}), "# c\na,b\n1,2\n");
  EXPECT_THROW(t.add({"1"}), Error);
}

TEST(Tract, MinimalFileHasZeroLogs) {
  const auto dir = scratch("minimal");
  write_minimal(dir, kIdentityRows);
  const auto data = load_tract(dir / "t.json");
  EXPECT_EQ(data.subjects(), 2);
  EXPECT_EQ(data.points(), 2);
  for (const auto& v : data.log_response().values) EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Tract, NegativeEigenvalueNamesSubjectAndPoint) {
  const auto dir = scratch("negative");
  write_minimal(dir, "0,0,1,0,1,0,0,1\n0,1,1,0,1,0,0,1\n1,0,1,0,1,0,0,1\n1,1,1,0,1,0,0,-0.5\n");
  try {
    load_tract(dir / "t.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("subject 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("point 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("t.tensors.csv:5"), std::string::npos) << msg;
  }
}

TEST(Tract, ParseErrorsCarryLineAndColumn) {
  const auto dir = scratch("parse");
  write_minimal(dir, "0,0,1,0,1,0,0,1\n0,1,1,0,abc,0,0,1\n1,0,1,0,1,0,0,1\n1,1,1,0,1,0,0,1\n");
  try {
    load_tract(dir / "t.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("t.tensors.csv:3:9"), std::string::npos) << e.what();
  }
}

TEST(Tract, ValidationErrors) {
  const auto dir = scratch("validation");
  write_minimal(dir, kIdentityRows);
  write_file_atomic(dir / "t.grid.csv", "x\n1\n0\n");
  try {
    load_tract(dir / "t.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
  }
  write_minimal(dir, "0,0,1,0,1,0,0,1\n1,0,1,0,1,0,0,1\n0,1,1,0,1,0,0,1\n1,1,1,0,1,0,0,1\n");
  EXPECT_THROW(load_tract(dir / "t.json"), Error);
  write_minimal(dir, kIdentityRows);
  write_file_atomic(dir / "t.covariates.csv", "intercept\n1\n");
  EXPECT_THROW(load_tract(dir / "t.json"), Error);
  EXPECT_THROW(load_tract(dir / "missing.json"), Error);
}

TEST(Tract, ByteIdenticalRoundTrip) {
  SimulationScenario scn;
  scn.subjects = 6;
  scn.points = 7;
  const auto data = generate_dataset(scn);
  const auto dir = scratch("roundtrip");
  save_tract(data, dir / "a.json");
  const auto loaded = load_tract(dir / "a.json");
  const auto first = render_tract(data, "a");
  const auto second = render_tract(loaded, "a");
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t k = 0; k < first.size(); ++k) {
    EXPECT_EQ(first[k], second[k]);
    EXPECT_EQ(read_file(dir / first[k].first), first[k].second);
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 7; ++j) EXPECT_EQ(data.tensor(i, j), loaded.tensor(i, j));
}

TEST(Config, DefaultsRoundTripThroughJson) {
  RunConfig cfg;
  cfg.h1 = 12.5;
  cfg.test_covariates = {"age"};
  const auto back = config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(config_hash(back), config_hash(cfg));
}

TEST(Config, UnknownKeysAndTypes) {
  try {
    config_from_json(nlohmann::json{{"seeed", 3}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
  EXPECT_THROW(config_from_json(nlohmann::json{{"bandwidth", {{"h4", 1.0}}}}), Error);
  EXPECT_THROW(config_from_json(nlohmann::json{{"G", "many"}}), Error);
  EXPECT_THROW(config_from_json(nlohmann::json{{"covariance", {{"divisor", "n-2"}}}}), Error);
  RunConfig bad;
  bad.alpha = {1.5};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Config, FullScaleThenOverrides) {
  const auto cfg = config_from_json(nlohmann::json{{"simulation", {{"paper_scale", true}, {"replicates", 10}}}});
  EXPECT_EQ(cfg.simulation.subjects, 96);
  EXPECT_EQ(cfg.simulation.points, 112);
  EXPECT_EQ(cfg.simulation.replicates, 10);
  EXPECT_EQ(cfg.G, 1000);
}

TEST(Config, HashIgnoresThreadsAndOut) {
  RunConfig a, b;
  b.threads = 7;
  b.out = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(hex64(255), "00000000000000ff");
}

TEST(Commands, FitRecoversLinearTruth) {
  // Noiseless linear-in-x log tensors.
  const int n = 10, ng = 25;
  const Grid grid = Grid::uniform(ng, 48.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd z(n, 3);
  for (int i = 0; i < n; ++i) z.row(i) << 1.0, u(rng), u(rng);
  Eigen::MatrixXd b0(6, 3), b1(6, 3);
  for (int k = 0; k < 6; ++k)
    for (int l = 0; l < 3; ++l) {
      b0(k, l) = 0.3 * u(rng) + (l == 0 && (k == 0 || k == 2 || k == 5) ? -7.0 : 0.0);
      b1(k, l) = 0.01 * u(rng);
    }
  std::vector<std::vector<TractDataset::Tensor>> tensors(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < ng; ++j) {
      const Vector6<double> v = (b0 + b1 * grid[j]) * z.row(i).transpose();
      tensors[static_cast<std::size_t>(i)].push_back(matrix_exp(ivecs(v)));
    }
  const TractDataset data(grid, tensors, z, {"intercept", "g", "a"});
  const auto dir = scratch("fit");
  save_tract(data, dir / "lin.json");

  RunConfig cfg;
  cfg.input = (dir / "lin.json").string();
  cfg.error_covariance = false;
  const auto out = cmd_fit(cfg);
  ASSERT_EQ(out.files.front().first, "coefficients.csv");
  const auto rows = parse_csv(out.files.front().second);
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(ng + 1));
  EXPECT_EQ(rows[0].fields[1], "a11.intercept");
  double worst = 0.0;
  for (int j = 0; j < ng; ++j) {
    const auto& f = rows[static_cast<std::size_t>(j) + 1].fields;
    const double x = parse_number(f[0], "x");
    for (int k = 0; k < 6; ++k)
      for (int l = 0; l < 3; ++l)
        worst = std::max(worst, std::abs(parse_number(f[static_cast<std::size_t>(1 + k * 3 + l)], "b") - (b0(k, l) + b1(k, l) * x)));
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Commands, HypothesisFile) {
  SimulationScenario scn;
  scn.subjects = 10;
  scn.points = 6;
  const auto data = generate_dataset(scn);
  const auto dir = scratch("hyp");
  std::string row;
  for (int c = 0; c < 18; ++c) row += (c == 2 ? "1," : "0,");
  write_file_atomic(dir / "h.csv", "# first a11 age entry\n" + row + "0.5\n");
  RunConfig cfg;
  cfg.hypothesis_file = (dir / "h.csv").string();
  const auto hyp = config_hypothesis(cfg, data);
  EXPECT_EQ(hyp.C(0, 2), 1.0);
  EXPECT_EQ(hyp.b0[0], 0.5);
  write_file_atomic(dir / "h.csv", "1,2\n");
  EXPECT_THROW(config_hypothesis(cfg, data), Error);
  cfg.hypothesis_file.clear();
  cfg.test_covariates = {"age"};
  EXPECT_EQ(config_hypothesis(cfg, data).rows(), 6);
  cfg.test_covariates = {"height"};
  EXPECT_THROW(config_hypothesis(cfg, data), Error);
}
