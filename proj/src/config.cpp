#include "vcdf/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "vcdf/error.hpp"
#include "vcdf/io.hpp"

namespace vcdf {

using nlohmann::json;

namespace {

std::string kernel_name(KernelType k) { return k == KernelType::Uniform ? "uniform" : "epanechnikov"; }

KernelType parse_kernel(const std::string& s) {
  if (s == "epanechnikov") return KernelType::Epanechnikov;
  if (s == "uniform") return KernelType::Uniform;
  throw Error(ErrorCode::ConfigError, "unknown kernel '" + s + "'");
}

std::string divisor_name(CovarianceDivisor d) { return d == CovarianceDivisor::NMinus1 ? "n-1" : "n-6"; }

CovarianceDivisor parse_divisor(const std::string& s) {
  if (s == "n-6") return CovarianceDivisor::NMinus6;
  if (s == "n-1") return CovarianceDivisor::NMinus1;
  throw Error(ErrorCode::ConfigError, "unknown covariance divisor '" + s + "'");
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Reads the keys of one JSON object, rejecting any that are not consumed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::ConfigError, where_ + "." + key + " has the wrong type");
    }
  }

  void get_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    if (!j_.at(key).is_number()) throw Error(ErrorCode::ConfigError, where_ + "." + key + " must be a number or null");
    out = j_.at(key).get<double>();
  }

  const json* object(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw Error(ErrorCode::ConfigError, "unknown key " + where_ + "." + item.key());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check_bandwidths(const std::vector<double>& grid, const char* name) {
  for (double h : grid) {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::ConfigError, std::string(name) + " has a non-positive entry");
  }
}

}  // namespace

void use_paper_scale(RunConfig& cfg) {
  cfg.simulation.paper_scale = true;
  cfg.simulation.subjects = 96;
  cfg.simulation.points = 112;
  cfg.simulation.replicates = 3000;
  cfg.G = 1000;
}

void RunConfig::validate() const {
  if (G < 1) throw Error(ErrorCode::ConfigError, "G must be at least 1");
  if (threads < 0) throw Error(ErrorCode::ConfigError, "threads must be non-negative");
  if (alpha.empty()) throw Error(ErrorCode::ConfigError, "alpha list is empty");
  for (double a : alpha) {
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::ConfigError, "alpha values must lie in (0, 1)");
  }
  for (const auto* h : {&h1, &h2, &h3}) {
    if (*h && !(**h > 0.0 && std::isfinite(**h))) throw Error(ErrorCode::ConfigError, "fixed bandwidths must be positive");
  }
  check_bandwidths(h1_grid, "h1_grid");
  check_bandwidths(h2_grid, "h2_grid");
  check_bandwidths(h3_grid, "h3_grid");
  if (!test_covariates.empty() && !hypothesis_file.empty()) {
    throw Error(ErrorCode::ConfigError, "give either hypothesis covariates or a hypothesis file, not both");
  }
  if (!(band_shrink > 0.0)) throw Error(ErrorCode::ConfigError, "band shrink must be positive");
  const auto& s = simulation;
  if (s.replicates < 1) throw Error(ErrorCode::ConfigError, "replicates must be at least 1");
  if (s.c_values.empty()) throw Error(ErrorCode::ConfigError, "c_values is empty");
  for (const auto& p : s.pipelines) parse_pipeline(p);
  scenario().validate();
}

ModelOptions RunConfig::model_options() const {
  ModelOptions m;
  m.estimation.kernel = kernel;
  m.covariance.kernel = kernel;
  m.covariance.divisor = divisor;
  m.covariance.gcv_grid_normalization = gcv_grid_normalization;
  m.h1 = h1;
  m.h2 = h2;
  m.h3 = h3;
  m.h1_candidates = h1_grid;
  m.h2_candidates = h2_grid;
  m.h3_candidates = h3_grid;
  m.estimate_error_covariance = error_covariance;
  return m;
}

SimulationScenario RunConfig::scenario() const {
  SimulationScenario scn;
  scn.subjects = simulation.subjects;
  scn.points = simulation.points;
  scn.length = simulation.length;
  scn.c = simulation.c;
  scn.seed = seed;
  scn.deviation_scale = simulation.deviation_scale;
  scn.deviation_length = simulation.deviation_length;
  scn.error_scale = simulation.error_scale;
  scn.group_probability = simulation.group_probability;
  scn.age_effect = simulation.age_effect;
  return scn;
}

Pipeline parse_pipeline(const std::string& name) {
  for (Pipeline p : {Pipeline::Tensor, Pipeline::FA, Pipeline::MD, Pipeline::FAandMD})
    if (pipeline_name(p) == name) return p;
  throw Error(ErrorCode::ConfigError, "unknown pipeline '" + name + "'");
}

json to_json(const RunConfig& cfg) {
  const auto& s = cfg.simulation;
  return json{
      {"input", cfg.input},
      {"out", cfg.out},
      {"threads", cfg.threads},
      {"seed", cfg.seed},
      {"G", cfg.G},
      {"alpha", cfg.alpha},
      {"kernel", kernel_name(cfg.kernel)},
      {"bandwidth",
       {{"h1", optional_number(cfg.h1)},
        {"h2", optional_number(cfg.h2)},
        {"h3", optional_number(cfg.h3)},
        {"h1_grid", cfg.h1_grid},
        {"h2_grid", cfg.h2_grid},
        {"h3_grid", cfg.h3_grid}}},
      {"covariance",
       {{"error_covariance", cfg.error_covariance},
        {"divisor", divisor_name(cfg.divisor)},
        {"gcv_grid_normalization", cfg.gcv_grid_normalization}}},
      {"bootstrap", {{"restudentize", cfg.restudentize}}},
      {"hypothesis", {{"covariates", cfg.test_covariates}, {"file", cfg.hypothesis_file}}},
      {"band", {{"shrink", cfg.band_shrink}, {"z", cfg.band_z}}},
      {"simulation",
       {{"paper_scale", s.paper_scale},
        {"subjects", s.subjects},
        {"points", s.points},
        {"length", s.length},
        {"c", s.c},
        {"c_values", s.c_values},
        {"replicates", s.replicates},
        {"deviation_scale", s.deviation_scale},
        {"deviation_length", s.deviation_length},
        {"error_scale", s.error_scale},
        {"age_effect", s.age_effect},
        {"group_probability", s.group_probability},
        {"pipelines", s.pipelines},
        {"replicate", s.replicate}}},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  Reader top(j, "config");
  if (const json* sim = top.object("simulation"); sim && sim->is_object() && sim->contains("paper_scale")) {
    if (sim->at("paper_scale").is_boolean() && sim->at("paper_scale").get<bool>()) use_paper_scale(cfg);
  }
  top.get("input", cfg.input);
  top.get("out", cfg.out);
  top.get("threads", cfg.threads);
  top.get("seed", cfg.seed);
  top.get("G", cfg.G);
  top.get("alpha", cfg.alpha);
  std::string kernel = kernel_name(cfg.kernel);
  top.get("kernel", kernel);
  cfg.kernel = parse_kernel(kernel);

  if (const json* b = top.object("bandwidth")) {
    Reader r(*b, "bandwidth");
    r.get_optional("h1", cfg.h1);
    r.get_optional("h2", cfg.h2);
    r.get_optional("h3", cfg.h3);
    r.get("h1_grid", cfg.h1_grid);
    r.get("h2_grid", cfg.h2_grid);
    r.get("h3_grid", cfg.h3_grid);
    r.finish();
  }
  if (const json* c = top.object("covariance")) {
    Reader r(*c, "covariance");
    r.get("error_covariance", cfg.error_covariance);
    std::string divisor = divisor_name(cfg.divisor);
    r.get("divisor", divisor);
    cfg.divisor = parse_divisor(divisor);
    r.get("gcv_grid_normalization", cfg.gcv_grid_normalization);
    r.finish();
  }
  if (const json* b = top.object("bootstrap")) {
    Reader r(*b, "bootstrap");
    r.get("restudentize", cfg.restudentize);
    r.finish();
  }
  if (const json* h = top.object("hypothesis")) {
    Reader r(*h, "hypothesis");
    r.get("covariates", cfg.test_covariates);
    r.get("file", cfg.hypothesis_file);
    r.finish();
  }
  if (const json* b = top.object("band")) {
    Reader r(*b, "band");
    r.get("shrink", cfg.band_shrink);
    r.get("z", cfg.band_z);
    r.finish();
  }
  if (const json* sim = top.object("simulation")) {
    auto& s = cfg.simulation;
    Reader r(*sim, "simulation");
    r.get("paper_scale", s.paper_scale);
    r.get("subjects", s.subjects);
    r.get("points", s.points);
    r.get("length", s.length);
    r.get("c", s.c);
    r.get("c_values", s.c_values);
    r.get("replicates", s.replicates);
    r.get("deviation_scale", s.deviation_scale);
    r.get("deviation_length", s.deviation_length);
    r.get("error_scale", s.error_scale);
    r.get("age_effect", s.age_effect);
    r.get("group_probability", s.group_probability);
    r.get("pipelines", s.pipelines);
    r.get("replicate", s.replicate);
    r.finish();
  }
  top.finish();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("threads");
  j.erase("out");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace vcdf
