#pragma once

// Run configuration: a plain `key = value` file, one setting per line.
//
//   # comment
//   seed = 42
//   cohort.source = generate        # or csv, with cohort.path = <file>
//   methods = bart,pcr
//   bart.n_trees = 50               # <method>.<param> overrides
//
// Unknown keys, repeated keys and bad values are rejected with the line
// number. Command-line flags go through the same setter afterwards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/text.hpp"
#include "ews/course_data.hpp"
#include "ews/harness.hpp"
#include "ews/learners/learner.hpp"
#include "ews/staging.hpp"

namespace ews {

enum class CohortSource { generate, csv };

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::string out = "ews_out";
  CohortSource source = CohortSource::generate;
  std::string cohort_path;
  CohortGenConfig generate;

  std::vector<Stage> stages = stage_schedule();
  std::vector<FeatureSet> feature_sets = all_feature_sets();
  std::vector<Method> methods = benchmark_methods();
  int folds = 10;
  int threads = 0;
  int cluster_k_max = 9;
  Stage cluster_stage{5};
  double optimal_tolerance = 0.10;
  std::vector<Stage> scatter_stages{Stage{5}, Stage{6}};
  Method scatter_method = Method::bart;
  FeatureSet scatter_feature_set = FeatureSet::cluster;

  // method -> (param -> value), applied on top of the method defaults
  std::map<Method, std::map<std::string, std::string>> overrides;

  std::uint64_t resolved_seed() const {
    if (!seed) throw ConfigError("seed is required (set `seed = <u64>` or pass --seed)");
    return *seed;
  }
};

namespace detail {

inline std::string source_name(CohortSource s) { return s == CohortSource::csv ? "csv" : "generate"; }

inline std::string stage_list(const std::vector<Stage>& v) {
  std::vector<std::string> s;
  for (auto& x : v) s.push_back(x.label());
  return text::join(s, ",");
}

template <class T, class F>
std::vector<T> parse_items(const std::string& value, F&& one) {
  auto parts = text::split_list(value);
  if (parts.empty()) throw ConfigError("empty list");
  std::vector<T> out;
  for (auto& p : parts) {
    T v = one(p);
    for (auto& seen : out)
      if (seen == v) throw ConfigError("'" + p + "' listed twice");
    out.push_back(v);
  }
  return out;
}

inline std::vector<Stage> parse_stages(const std::string& value) {
  if (text::trim(value) == "all") return stage_schedule();
  auto v = parse_items<Stage>(value, [](const std::string& s) { return parse_stage(s); });
  std::sort(v.begin(), v.end(), [](Stage a, Stage b) { return a.index < b.index; });
  return v;
}

inline int config_int(const std::string& v, int lo, int hi) {
  auto x = text::parse_int(v);
  if (!x || *x < lo || *x > hi)
    throw ConfigError("expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got '" + v + "'");
  return static_cast<int>(*x);
}

inline double config_double(const std::string& v) {
  auto x = text::parse_double(v);
  if (!x || !std::isfinite(*x)) throw ConfigError("expected a number, got '" + v + "'");
  return *x;
}

inline void apply_setting_raw(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "seed") {
    auto s = text::parse_u64(value);
    if (!s) throw ConfigError("seed must be an unsigned 64-bit integer, got '" + value + "'");
    cfg.seed = *s;
  } else if (key == "out") {
    if (value.empty()) throw ConfigError("out must not be empty");
    cfg.out = value;
  } else if (key == "cohort.source") {
    if (value == "generate") cfg.source = CohortSource::generate;
    else if (value == "csv") cfg.source = CohortSource::csv;
    else throw ConfigError("cohort.source must be 'generate' or 'csv', got '" + value + "'");
  } else if (key == "cohort.path") {
    cfg.cohort_path = value;
  } else if (key == "generate.n_students") {
    cfg.generate.n_students = static_cast<std::size_t>(config_int(value, 20, 1000000));
  } else if (key == "generate.proportions") {
    std::vector<double> p;
    for (auto& s : text::split_list(value)) p.push_back(config_double(s));
    cfg.generate.archetype_proportions = p;
  } else if (key == "generate.noise_sd") {
    cfg.generate.noise_sd = config_double(value);
  } else if (key == "generate.activity_scale") {
    cfg.generate.activity_scale = config_double(value);
  } else if (key == "generate.count_shape") {
    cfg.generate.count_shape = config_double(value);
  } else if (key == "generate.intensity_sd") {
    cfg.generate.intensity_sd = config_double(value);
  } else if (key == "stages") {
    cfg.stages = parse_stages(value);
  } else if (key == "feature_sets") {
    cfg.feature_sets = parse_items<FeatureSet>(value, [](const std::string& s) { return parse_feature_set(s); });
  } else if (key == "methods") {
    cfg.methods = parse_items<Method>(value, [](const std::string& s) { return parse_method(s); });
  } else if (key == "folds") {
    cfg.folds = config_int(value, 2, 1000);
  } else if (key == "threads") {
    cfg.threads = config_int(value, 0, 1024);
  } else if (key == "cluster.k_max") {
    cfg.cluster_k_max = config_int(value, 1, 50);
  } else if (key == "cluster.stage") {
    cfg.cluster_stage = parse_stage(value);
  } else if (key == "optimal.tolerance") {
    cfg.optimal_tolerance = config_double(value);
    if (cfg.optimal_tolerance < 0.0) throw ConfigError("optimal.tolerance must be nonnegative");
  } else if (key == "scatter.stages") {
    cfg.scatter_stages = parse_stages(value);
  } else if (key == "scatter.method") {
    cfg.scatter_method = parse_method(value);
  } else if (key == "scatter.feature_set") {
    cfg.scatter_feature_set = parse_feature_set(value);
  } else if (auto dot = key.find('.'); dot != std::string::npos) {
    Method m;
    try {
      m = parse_method(key.substr(0, dot));
    } catch (const Error&) {
      throw ConfigError("unknown key '" + key + "'");
    }
    std::string param = key.substr(dot + 1);
    LearnerConfig probe = LearnerConfig::defaults(m);
    for (auto& [p, v] : cfg.overrides[m]) apply_override(probe, p, v);
    apply_override(probe, param, value);  // validates now
    cfg.overrides[m][param] = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

}  // namespace detail

// Applies one setting; every failure is a ConfigError (callers add location).
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    detail::apply_setting_raw(cfg, key, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

inline RunConfig parse_config(std::istream& is, const std::string& source = "config") {
  RunConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view t = line;
    if (auto hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
    t = text::trim(t);
    if (t.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected `key = value`");
    std::string key(text::trim(t.substr(0, eq))), value(text::trim(t.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      throw ConfigError(where + "'" + key + "' already set on line " + std::to_string(it->second));
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

// Checks that need the whole config: seed present, paths exist, generator
// settings consistent.
inline void validate(const RunConfig& cfg, const CourseSchedule& schedule) {
  cfg.resolved_seed();
  if (cfg.source == CohortSource::csv) {
    if (cfg.cohort_path.empty()) throw ConfigError("cohort.source = csv needs cohort.path");
    if (!std::filesystem::is_regular_file(cfg.cohort_path))
      throw ConfigError("cohort file not found: '" + cfg.cohort_path + "'");
  } else {
    if (!cfg.cohort_path.empty()) throw ConfigError("cohort.path is only used with cohort.source = csv");
    CohortGenConfig g = cfg.generate;
    g.seed = *cfg.seed;
    validate_config(g, schedule);
  }
  if (cfg.cluster_stage.index == 0) throw ConfigError("cluster.stage must be a week with activity (not initial)");
}

inline CohortGenConfig generator_config(const RunConfig& cfg) {
  CohortGenConfig g = cfg.generate;
  g.seed = cfg.resolved_seed();
  return g;
}

inline std::map<Method, LearnerConfig> learner_configs(const RunConfig& cfg) {
  std::map<Method, LearnerConfig> out;
  for (auto& [m, params] : cfg.overrides) {
    LearnerConfig c = LearnerConfig::defaults(m);
    for (auto& [p, v] : params) apply_override(c, p, v);
    out[m] = c;
  }
  return out;
}

// Canonical settings that determine results. Output paths and thread counts
// are left out so replays elsewhere are byte-identical.
inline std::vector<std::string> config_echo(const RunConfig& cfg) {
  using namespace detail;
  std::vector<std::string> e;
  e.push_back("seed=" + std::to_string(cfg.resolved_seed()));
  e.push_back("cohort.source=" + source_name(cfg.source));
  if (cfg.source == CohortSource::csv) {
    e.push_back("cohort.path=" + std::filesystem::path(cfg.cohort_path).filename().string());
  } else {
    const auto& g = cfg.generate;
    std::vector<std::string> p;
    for (double x : g.archetype_proportions) p.push_back(text::format_double(x));
    e.push_back("generate.n_students=" + std::to_string(g.n_students));
    e.push_back("generate.proportions=" + text::join(p, ","));
    e.push_back("generate.noise_sd=" + text::format_double(g.noise_sd));
    e.push_back("generate.activity_scale=" + text::format_double(g.activity_scale));
    e.push_back("generate.count_shape=" + text::format_double(g.count_shape));
    e.push_back("generate.intensity_sd=" + text::format_double(g.intensity_sd));
  }
  e.push_back("stages=" + stage_list(cfg.stages));
  std::vector<std::string> fs, ms;
  for (auto f : cfg.feature_sets) fs.push_back(feature_set_name(f));
  for (auto m : cfg.methods) ms.push_back(method_name(m));
  e.push_back("feature_sets=" + text::join(fs, ","));
  e.push_back("methods=" + text::join(ms, ","));
  e.push_back("folds=" + std::to_string(cfg.folds));
  e.push_back("cluster.k_max=" + std::to_string(cfg.cluster_k_max));
  for (auto& [m, params] : cfg.overrides)
    for (auto& [p, v] : params) e.push_back(method_name(m) + "." + p + "=" + v);
  return e;
}

inline SweepSpec sweep_spec(const RunConfig& cfg) {
  SweepSpec s;
  s.stages = cfg.stages;
  s.feature_sets = cfg.feature_sets;
  s.methods = cfg.methods;
  s.seed = cfg.resolved_seed();
  s.folds = cfg.folds;
  s.threads = cfg.threads;
  s.cluster_k_max = cfg.cluster_k_max;
  s.configs = learner_configs(cfg);
  s.config_echo = config_echo(cfg);
  return s;
}

}  // namespace ews
