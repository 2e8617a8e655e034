#include "vcdf/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>

#include <json.hpp>

#include "vcdf/error.hpp"
#include "vcdf/io.hpp"
#include "vcdf/model.hpp"
#include "vcdf/random.hpp"
#include "vcdf/simulation.hpp"
#include "vcdf/version.hpp"

namespace vcdf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kComponentNames[6] = {"a11", "a21", "a22", "a31", "a32", "a33"};

// Seeds derived from the run seed for the band resampler.
constexpr std::uint64_t kBandStream = 0xBA;

std::string num(double v) { return format_number(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

std::string coefficient_name(int k, int l, const std::vector<std::string>& names, int q) {
  const std::string comp = q == 6 ? kComponentNames[k] : "y" + std::to_string(k);
  return comp + "." + names[static_cast<std::size_t>(l)];
}

TractDataset input_dataset(const RunConfig& cfg) {
  if (cfg.input.empty()) throw Error(ErrorCode::ConfigError, "this command needs --input");
  return load_tract(cfg.input);
}

StudyOptions study_options(const RunConfig& cfg) {
  StudyOptions opt;
  opt.replicates = cfg.simulation.replicates;
  opt.G = cfg.G;
  opt.threads = cfg.threads;
  opt.restudentize = cfg.restudentize;
  opt.model = cfg.model_options();
  return opt;
}

// Built-in scenario, or one replaying a fitted input tract.
SimulationScenario study_scenario(const RunConfig& cfg) {
  if (cfg.input.empty()) return cfg.scenario();
  const TractDataset data = load_tract(cfg.input);
  ModelOptions model = cfg.model_options();
  const ModelFit fit = fit_model(data.log_response(), model);
  const int tested = cfg.test_covariates.empty() ? data.covariate_count() - 1
                                                 : data.covariate_index(cfg.test_covariates.front());
  SimulationScenario scn = scenario_from_fit(data, fit, tested, cfg.seed);
  scn.c = cfg.simulation.c;
  return scn;
}

void add_selection(CsvTable& t, const char* criterion, const BandwidthSelection& s) {
  for (std::size_t k = 0; k < s.candidates.size(); ++k) {
    const double score = k < s.scores.size() ? s.scores[k] : std::nan("");
    t.add({criterion, num(s.candidates[k]), num(score), s.candidates[k] == s.selected ? "1" : "0"});
  }
}

Eigen::VectorXd mean_covariates(const TractDataset& data) { return data.covariates().colwise().mean().transpose(); }

std::vector<Eigen::VectorXd> band_vectors(const RunConfig& cfg, int r, const Eigen::VectorXd& fallback) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& z : cfg.band_z) {
    if (static_cast<int>(z.size()) != r) {
      throw Error(ErrorCode::ConfigError, "band z vectors need " + std::to_string(r) + " entries");
    }
    out.push_back(Eigen::Map<const Eigen::VectorXd>(z.data(), r));
  }
  if (out.empty() && fallback.size() == r) out.push_back(fallback);
  return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"fit",   "test",     "band", "simulate",
                                                 "power", "coverage", "bias", "missing"};
  return names;
}

std::vector<std::string> provenance(const std::string& command, const RunConfig& cfg) {
  return {"vcdf " + command + " " + std::string(kVersion), "config_hash=" + hex64(config_hash(cfg)) +
                                                                " seed=" + std::to_string(cfg.seed)};
}

LinearHypothesis config_hypothesis(const RunConfig& cfg, const TractDataset& data) {
  const int q = 6, r = data.covariate_count();
  if (!cfg.test_covariates.empty()) {
    std::vector<int> columns;
    for (const auto& name : cfg.test_covariates) columns.push_back(data.covariate_index(name));
    return covariate_hypothesis(q, r, columns);
  }
  if (cfg.hypothesis_file.empty()) {
    throw Error(ErrorCode::ConfigError, "no hypothesis: use --test covariate=<name> or a hypothesis file");
  }
  const auto records = parse_csv(read_file(cfg.hypothesis_file));
  const std::string file = fs::path(cfg.hypothesis_file).filename().string();
  if (records.empty()) throw Error(ErrorCode::ParseError, file + ": no constraint rows");
  LinearHypothesis hyp{Eigen::MatrixXd(static_cast<Eigen::Index>(records.size()), q * r),
                       Eigen::VectorXd(static_cast<Eigen::Index>(records.size()))};
  for (std::size_t row = 0; row < records.size(); ++row) {
    const auto& rec = records[row];
    if (static_cast<int>(rec.fields.size()) != q * r + 1) {
      throw Error(ErrorCode::ParseError, file + ":" + std::to_string(rec.line) + ":1: expected " +
                                             std::to_string(q * r + 1) + " fields (C row then b0)");
    }
    for (int c = 0; c <= q * r; ++c) {
      const double v = parse_number(rec.fields[static_cast<std::size_t>(c)],
                                    file + ":" + std::to_string(rec.line) + ":" +
                                        std::to_string(rec.columns[static_cast<std::size_t>(c)]));
      if (c < q * r) hyp.C(static_cast<Eigen::Index>(row), c) = v;
      else hyp.b0[static_cast<Eigen::Index>(row)] = v;
    }
  }
  hyp.validate(q, r);
  return hyp;
}

CommandOutput cmd_fit(const RunConfig& cfg) {
  const TractDataset data = input_dataset(cfg);
  const auto& logs = data.log_response();
  const ModelFit fit = fit_model(logs, cfg.model_options());
  const auto prov = provenance("fit", cfg);
  const int q = logs.components(), r = logs.covariate_count();

  CsvTable coef{{"x"}, {}};
  for (int k = 0; k < q; ++k)
    for (int l = 0; l < r; ++l) coef.columns.push_back(coefficient_name(k, l, data.covariate_names(), q));
  for (int j = 0; j < fit.field.size(); ++j) {
    std::vector<std::string> row{num(fit.field.x[static_cast<std::size_t>(j)])};
    for (int k = 0; k < q; ++k)
      for (int l = 0; l < r; ++l) row.push_back(num(fit.field.B[static_cast<std::size_t>(j)](k, l)));
    coef.add(std::move(row));
  }

  CsvTable bw{{"criterion", "bandwidth", "score", "selected"}, {}};
  add_selection(bw, "cv1", fit.h1);
  add_selection(bw, "gcv", fit.h2);
  if (cfg.error_covariance) add_selection(bw, "cv2", fit.h3);

  CsvTable summary{{"subjects", "points", "covariates", "h1", "h2", "h3", "ridge_events"}, {}};
  summary.add({num(data.subjects()), num(data.points()), num(r), num(fit.h1.selected), num(fit.h2.selected),
               cfg.error_covariance ? num(fit.h3.selected) : "nan", num(fit.ridge_events)});

  return {{{"coefficients.csv", coef.render(prov)}, {"bandwidths.csv", bw.render(prov)},
           {"fit_summary.csv", summary.render(prov)}}};
}

CommandOutput cmd_test(const RunConfig& cfg) {
  const TractDataset data = input_dataset(cfg);
  const auto& logs = data.log_response();
  const LinearHypothesis hyp = config_hypothesis(cfg, data);
  const ModelOptions model = cfg.model_options();
  const ModelFit fit = fit_model(logs, model);
  BootstrapOptions boot;
  boot.G = cfg.G;
  boot.seed = cfg.seed;
  boot.threads = cfg.threads;
  boot.restudentize = cfg.restudentize;
  boot.covariance = model.covariance;
  const TestReport report = wild_bootstrap(logs, fit, hyp, boot, model.estimation);
  const auto prov = provenance("test", cfg);

  CsvTable global{{"statistic", "p_value", "G", "seed", "redraws", "ridge_events", "h1", "h2"}, {}};
  global.add({num(report.global_stat), num(report.global_p), num(report.G), num(report.seed), num(report.redraws),
              num(report.ridge_events), num(fit.h1.selected), num(fit.h2.selected)});

  // p-values of zero are floored at 1/G before the log transform.
  CsvTable local{{"x", "statistic", "p_corrected", "neg_log10_p"}, {}};
  for (std::size_t j = 0; j < report.x.size(); ++j) {
    const double p = report.local_p_corrected[j];
    local.add({num(report.x[j]), num(report.local_stats[j]), num(p),
               num(-std::log10(std::max(p, 1.0 / report.G)))});
  }

  CsvTable boots{{"replicate", "global", "max_local"}, {}};
  for (int g = 0; g < report.G; ++g) {
    const auto gg = static_cast<std::size_t>(g);
    boots.add({num(g), num(report.bootstrap_global[gg]), num(report.bootstrap_max[gg])});
  }
  return {{{"test_global.csv", global.render(prov)},
           {"test_local.csv", local.render(prov)},
           {"test_bootstrap.csv", boots.render(prov)}}};
}

CommandOutput cmd_band(const RunConfig& cfg) {
  const TractDataset data = input_dataset(cfg);
  const auto& logs = data.log_response();
  const ModelOptions model = cfg.model_options();
  const ModelFit fit = fit_model(logs, model);
  const int n = logs.subjects(), q = logs.components(), r = logs.covariate_count();
  const double hb = band_bandwidth(logs.grid, fit.h1.selected, cfg.band_shrink, cfg.kernel);
  const CoefficientEstimator estimator(logs.grid, logs.covariates, hb, logs.grid.points(), cfg.kernel);
  const CoefficientField band_fit = estimator.fit(logs.values);
  const auto paths = resample_XB(estimator, fit.residuals, cfg.G, stream_seed(cfg.seed, {kBandStream}), cfg.threads);
  const auto zs = band_vectors(cfg, r, mean_covariates(data));
  const auto prov = provenance("band", cfg);

  CsvTable band{{"alpha", "coefficient", "x", "estimate", "lower", "upper"}, {}};
  CsvTable critical{{"alpha", "target", "critical", "bandwidth"}, {}};
  CsvTable spd{{"alpha", "z", "x", "a11", "a21", "a22", "a31", "a32", "a33", "radius"}, {}};
  for (double alpha : cfg.alpha) {
    for (int k = 0; k < q; ++k)
      for (int l = 0; l < r; ++l) {
        const auto b = coefficient_band(paths, band_fit, k, l, alpha, n);
        const std::string name = coefficient_name(k, l, data.covariate_names(), q);
        critical.add({num(alpha), name, num(b.critical), num(hb)});
        for (int j = 0; j < band_fit.size(); ++j) {
          band.add({num(alpha), name, num(b.x[static_cast<std::size_t>(j)]), num(b.estimate[j]), num(b.lower[j]),
                    num(b.upper[j])});
        }
      }
    for (std::size_t m = 0; m < zs.size(); ++m) {
      const double c = spd_band_critical(paths, zs[m], alpha, n);
      critical.add({num(alpha), "spd_" + std::to_string(m), num(c), num(hb)});
      for (int j = 0; j < band_fit.size(); ++j) {
        const Eigen::VectorXd centre = band_fit.fitted(j, zs[m]);
        std::vector<std::string> row{num(alpha), num(static_cast<int>(m)), num(band_fit.x[static_cast<std::size_t>(j)])};
        for (int k = 0; k < 6; ++k) row.push_back(num(centre[k]));
        row.push_back(num(c));
        spd.add(std::move(row));
      }
    }
  }

  CsvTable zt{{"z"}, {}};
  for (const auto& name : data.covariate_names()) zt.columns.push_back(name);
  for (std::size_t m = 0; m < zs.size(); ++m) {
    std::vector<std::string> row{num(static_cast<int>(m))};
    for (int l = 0; l < r; ++l) row.push_back(num(zs[m][l]));
    zt.add(std::move(row));
  }
  return {{{"band.csv", band.render(prov)},
           {"band_critical.csv", critical.render(prov)},
           {"band_spd.csv", spd.render(prov)},
           {"band_z.csv", zt.render(prov)}}};
}

CommandOutput cmd_simulate(const RunConfig& cfg) {
  const SimulationScenario scn = study_scenario(cfg);
  const TractDataset data = generate_dataset(scn, cfg.simulation.replicate);
  CommandOutput out;
  out.files = render_tract(data, "simulated");
  const auto truth = true_coefficients(scn);
  const auto names = data.covariate_names();
  CsvTable t{{"x"}, {}};
  for (int k = 0; k < 6; ++k)
    for (int l = 0; l < data.covariate_count(); ++l) t.columns.push_back(coefficient_name(k, l, names, 6));
  for (int j = 0; j < data.points(); ++j) {
    std::vector<std::string> row{num(data.grid()[j])};
    for (int k = 0; k < 6; ++k)
      for (int l = 0; l < data.covariate_count(); ++l) row.push_back(num(truth[static_cast<std::size_t>(j)](k, l)));
    t.add(std::move(row));
  }
  out.files.emplace_back("truth.csv", t.render(provenance("simulate", cfg)));
  return out;
}

CommandOutput cmd_power(const RunConfig& cfg) {
  const SimulationScenario scn = study_scenario(cfg);
  std::vector<Pipeline> pipelines;
  for (const auto& p : cfg.simulation.pipelines) pipelines.push_back(parse_pipeline(p));
  const PowerResult res = run_power_study(scn, cfg.simulation.c_values, cfg.alpha, study_options(cfg), pipelines);
  const auto prov = provenance("power", cfg);

  CsvTable rates{{"pipeline", "c", "alpha", "rate", "replicates", "failures"}, {}};
  for (const auto& c : res.cells) {
    rates.add({pipeline_name(c.pipeline), num(c.c), num(c.alpha), num(c.rate), num(c.replicates), num(c.failures)});
  }
  CsvTable pv{{"c", "pipeline", "replicate", "p_value"}, {}};
  for (std::size_t ci = 0; ci < res.c_values.size(); ++ci)
    for (std::size_t pi = 0; pi < res.pipelines.size(); ++pi)
      for (std::size_t rep = 0; rep < res.p_values[ci][pi].size(); ++rep) {
        pv.add({num(res.c_values[ci]), pipeline_name(res.pipelines[pi]), num(static_cast<int>(rep)),
                num(res.p_values[ci][pi][rep])});
      }
  return {{{"power.csv", rates.render(prov)}, {"power_pvalues.csv", pv.render(prov)}}};
}

CommandOutput cmd_coverage(const RunConfig& cfg) {
  const SimulationScenario scn = study_scenario(cfg);
  const int r = static_cast<int>(scenario_covariates(scn).cols());
  const auto zs = band_vectors(cfg, r, Eigen::VectorXd());
  const CoverageResult res = run_coverage_study(scn, cfg.alpha, study_options(cfg), cfg.band_shrink, zs);
  const auto prov = provenance("coverage", cfg);
  CsvTable t{{"target", "k", "l", "alpha", "coverage", "replicates"}, {}};
  for (const auto& c : res.cells) t.add({c.target, num(c.k), num(c.l), num(c.alpha), num(c.coverage), num(c.replicates)});
  CsvTable zt{{"z"}, {}};
  for (int l = 0; l < r; ++l) zt.columns.push_back("z" + std::to_string(l));
  for (std::size_t m = 0; m < res.z_vectors.size(); ++m) {
    std::vector<std::string> row{num(static_cast<int>(m))};
    for (int l = 0; l < r; ++l) row.push_back(num(res.z_vectors[m][l]));
    zt.add(std::move(row));
  }
  return {{{"coverage.csv", t.render(prov)}, {"coverage_z.csv", zt.render(prov)}}};
}

CommandOutput cmd_bias(const RunConfig& cfg) {
  const BiasResult res = run_bias_study(study_scenario(cfg), study_options(cfg));
  const auto prov = provenance("bias", cfg);
  CsvTable curves{{"x", "fa_tensor", "fa_scalar", "md_tensor", "md_scalar"}, {}};
  for (std::size_t j = 0; j < res.x.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    curves.add({num(res.x[j]), num(res.fa_tensor[jj]), num(res.fa_scalar[jj]), num(res.md_tensor[jj]),
                num(res.md_scalar[jj])});
  }
  CsvTable summary{{"quantity", "mab_tensor", "mab_scalar", "ratio"}, {}};
  summary.add({"fa", num(res.fa_tensor.mean()), num(res.fa_scalar.mean()), num(res.fa_tensor.mean() / res.fa_scalar.mean())});
  summary.add({"md", num(res.md_tensor.mean()), num(res.md_scalar.mean()), num(res.md_tensor.mean() / res.md_scalar.mean())});
  return {{{"bias.csv", curves.render(prov)}, {"bias_summary.csv", summary.render(prov)}}};
}

CommandOutput cmd_missing(const RunConfig& cfg) {
  const MissingCovariateResult res = run_missing_covariate_study(study_scenario(cfg), study_options(cfg));
  const auto prov = provenance("missing", cfg);
  CsvTable curves{{"x", "full", "reduced"}, {}};
  for (std::size_t j = 0; j < res.x.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    curves.add({num(res.x[j]), num(res.full[jj]), num(res.reduced[jj])});
  }
  CsvTable summary{{"mean_difference", "ci_low", "ci_high", "fraction_full_smaller", "replicates"}, {}};
  summary.add({num(res.mean_difference), num(res.ci_low), num(res.ci_high), num(res.fraction_full_smaller),
               num(res.replicates)});
  return {{{"missing.csv", curves.render(prov)}, {"missing_summary.csv", summary.render(prov)}}};
}

std::vector<std::string> run_command(const std::string& command, const RunConfig& cfg) {
  static const std::map<std::string, std::function<CommandOutput(const RunConfig&)>> table = {
      {"fit", cmd_fit},     {"test", cmd_test},         {"band", cmd_band}, {"simulate", cmd_simulate},
      {"power", cmd_power}, {"coverage", cmd_coverage}, {"bias", cmd_bias}, {"missing", cmd_missing}};
  const auto it = table.find(command);
  if (it == table.end()) throw Error(ErrorCode::ConfigError, "unknown command '" + command + "'");
  cfg.validate();

  const auto start = std::chrono::steady_clock::now();
  const CommandOutput out = it->second(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir(cfg.out);
  std::vector<std::string> written;
  json files = json::array();
  for (const auto& [name, content] : out.files) {
    write_file_atomic(dir / name, content);
    written.push_back((dir / name).string());
    files.push_back(name);
  }
  const json manifest = {
      {"command", command},     {"version", std::string(kVersion)}, {"config", to_json(cfg)},
      {"config_hash", hex64(config_hash(cfg))}, {"seed", cfg.seed}, {"files", files},
      {"seconds", seconds},     {"threads", cfg.threads > 0 ? cfg.threads : omp_get_max_threads()},
  };
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  written.push_back((dir / "manifest.json").string());
  return written;
}

}  // namespace vcdf
