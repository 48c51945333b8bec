// ews: generate cohorts, run benchmark sweeps, cluster, re-render reports.
// Exit codes: 0 ok, 1 validation/config error, 2 runtime or model error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ews/ews.hpp"

namespace fs = std::filesystem;
using namespace ews;

namespace {

struct Flags {
  std::string config;
  std::string seed, out, stages, methods, feature_sets, stage, report;
  bool quiet = false;
};

RunConfig resolve(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  auto flag = [&](const std::string& value, const std::string& key, const std::string& name) {
    if (value.empty()) return;
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what());
    }
  };
  flag(f.seed, "seed", "--seed");
  flag(f.out, "out", "--out");
  flag(f.stages, "stages", "--stages");
  flag(f.methods, "methods", "--methods");
  flag(f.feature_sets, "feature_sets", "--feature-sets");
  flag(f.stage, "cluster.stage", "--stage");
  return cfg;
}

// Write to a sibling temp file, then rename, so readers never see a torn file.
void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write '" + tmp.string() + "'");
    body(os);
    if (!os) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::vector<StudentRecord> obtain_cohort(const RunConfig& cfg, const CourseSchedule& sched) {
  if (cfg.source == CohortSource::csv) return load_cohort(cfg.cohort_path, sched);
  return generate_cohort(generator_config(cfg), sched).records;
}

void write_manifest(std::ostream& os, const RunConfig& cfg) {
  detail::write_echo(os, config_echo(cfg));
  auto g = generator_config(cfg);
  os << "seed=" << g.seed << '\n';
  os << "n_students=" << g.n_students << '\n';
  os << "noise_sd=" << text::format_double(g.noise_sd) << '\n';
  os << "activity_scale=" << text::format_double(g.activity_scale) << '\n';
  os << "count_shape=" << text::format_double(g.count_shape) << '\n';
  os << "intensity_sd=" << text::format_double(g.intensity_sd) << '\n';
  os << "\n[archetypes]\nname,proportion,weekday_multiplier,sunday_multiplier,ability_shift\n";
  for (std::size_t i = 0; i < g.archetypes.size(); ++i) {
    auto& a = g.archetypes[i];
    os << a.name << ',' << text::format_double(g.archetype_proportions[i]) << ','
       << text::format_double(a.weekday_multiplier) << ',' << text::format_double(a.sunday_multiplier) << ','
       << text::format_double(a.ability_shift) << '\n';
  }
  os << "\n[signal]\nitem,mean,loading,noise_sd\n";
  for (auto& s : g.signal.ca)
    os << s.item << ',' << text::format_double(s.mean) << ',' << text::format_double(s.loading) << ','
       << text::format_double(s.noise_sd) << '\n';
  os << "\n[exam]\nexam_mean=" << text::format_double(g.signal.exam_mean)
     << "\nexam_ability_loading=" << text::format_double(g.signal.exam_ability_loading)
     << "\nexam_ca_loading=" << text::format_double(g.signal.exam_ca_loading) << '\n';
  os << "\n[background_effects]\nfield,level,shift\n";
  for (auto& e : g.signal.background_effects) os << e.field << ',' << e.level << ',' << text::format_double(e.shift) << '\n';
}

int cmd_generate(const Flags& f) {
  auto sched = default_schedule();
  RunConfig cfg = resolve(f);
  if (cfg.source != CohortSource::generate) throw ConfigError("generate needs cohort.source = generate");
  validate(cfg, sched);
  auto g = generate_cohort(generator_config(cfg), sched);
  fs::create_directories(cfg.out);
  auto echo = config_echo(cfg);
  write_file(fs::path(cfg.out) / "cohort.csv", [&](std::ostream& os) { write_cohort(os, g.records, sched, echo); });
  write_file(fs::path(cfg.out) / "cohort_manifest.txt", [&](std::ostream& os) { write_manifest(os, cfg); });
  write_file(fs::path(cfg.out) / "activity.csv",
             [&](std::ostream& os) { export_activity(os, g.records, sched, echo); });
  std::cout << "wrote " << g.records.size() << " students to " << (fs::path(cfg.out) / "cohort.csv").string() << '\n';
  return 0;
}

void write_summaries(const EvaluationReport& rep, const RunConfig& cfg, std::vector<std::string>& notes) {
  const fs::path out(cfg.out);
  for (auto fset : rep.feature_sets)
    write_file(out / ("curve_" + feature_set_name(fset) + ".csv"),
               [&](std::ostream& os) { write_curve_csv(os, rep, fset); });
  write_file(out / "optimal_stages.csv",
             [&](std::ostream& os) { write_optimal_summary(os, rep, cfg.optimal_tolerance); });
  for (auto s : cfg.scatter_stages) {
    auto* c = rep.find(s, cfg.scatter_feature_set, cfg.scatter_method);
    if (!c || c->status != CellStatus::ok) {
      notes.push_back("no scatter for " + s.label() + " (" + method_name(cfg.scatter_method) + "/" +
                      feature_set_name(cfg.scatter_feature_set) + " not evaluated)");
      continue;
    }
    write_file(out / ("scatter_" + s.label() + "_" + method_name(cfg.scatter_method) + "_" +
                      feature_set_name(cfg.scatter_feature_set) + ".csv"),
               [&](std::ostream& os) { export_scatter(os, rep, s, cfg.scatter_method, cfg.scatter_feature_set); });
  }
}

int cmd_evaluate(const Flags& f) {
  auto sched = default_schedule();
  RunConfig cfg = resolve(f);
  validate(cfg, sched);
  auto cohort = obtain_cohort(cfg, sched);
  SweepSpec spec = sweep_spec(cfg);
  if (!f.quiet)
    spec.progress = [](const CellKey& k, const CellResult& c, std::size_t done, std::size_t total) {
      std::cerr << "[" << done << "/" << total << "] " << Stage{k.stage}.label() << ' ' << feature_set_name(k.feature_set)
                << ' ' << method_name(k.method) << ": " << status_name(c.status);
      if (c.status == CellStatus::ok) std::cerr << " mae=" << text::format_double(c.mae);
      if (!c.message.empty()) std::cerr << " (" << c.message << ")";
      std::cerr << '\n';
    };
  auto rep = sweep(cohort, sched, spec);

  fs::create_directories(cfg.out);
  write_file(fs::path(cfg.out) / "report.txt", [&](std::ostream& os) { write_report(os, rep); });
  std::vector<std::string> notes;
  write_summaries(rep, cfg, notes);
  for (auto& n : notes) std::cerr << "note: " << n << '\n';

  std::size_t failed = rep.count(CellStatus::failed);
  std::cout << "evaluated " << rep.cells.size() << " cells (" << rep.count(CellStatus::ok) << " ok, "
            << rep.count(CellStatus::skipped) << " skipped, " << failed << " failed) in "
            << text::format_double(std::round(rep.total_seconds * 10.0) / 10.0) << " s; outputs in " << cfg.out << '\n';
  if (failed) {
    for (auto& [k, c] : rep.cells)
      if (c.status == CellStatus::failed)
        std::cerr << "failed: " << Stage{k.stage}.label() << ' ' << feature_set_name(k.feature_set) << ' '
                  << method_name(k.method) << ": " << c.message << '\n';
    return 2;
  }
  return 0;
}

int cmd_cluster(const Flags& f) {
  auto sched = default_schedule();
  RunConfig cfg = resolve(f);
  validate(cfg, sched);
  auto cohort = obtain_cohort(cfg, sched);
  Stage stage = cfg.cluster_stage;
  auto sc = memberships_at_stage(cohort, sched, stage, cluster_seed(cfg.resolved_seed(), stage), cfg.cluster_k_max);
  fs::create_directories(cfg.out);
  auto echo = config_echo(cfg);
  echo.push_back("cluster.stage=" + stage.label());
  fs::path path = fs::path(cfg.out) / ("clusters_" + stage.label() + ".csv");
  write_file(path, [&](std::ostream& os) { write_cluster_report(os, sc, stage, cohort, echo); });
  std::cout << stage.label() << ": K=" << sc.model.k << " (" << family_name(sc.model.family) << "), written to "
            << path.string() << '\n';
  return 0;
}

int cmd_report(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (!f.out.empty()) apply_setting(cfg, "out", f.out);
  std::ifstream in(f.report);
  if (!in) throw ConfigError("cannot open report '" + f.report + "'");
  auto rep = parse_report(in);
  fs::create_directories(cfg.out);
  std::vector<std::string> notes;
  write_summaries(rep, cfg, notes);
  for (auto& n : notes) std::cerr << "note: " << n << '\n';
  std::cout << "re-rendered summaries for " << rep.cells.size() << " cells into " << cfg.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-warning-system benchmark toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "key = value run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "master seed (overrides config)");
    sub->add_option("--out", f.out, "output directory (overrides config)");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic cohort CSV and its manifest");
  common(gen);
  auto* eval = app.add_subcommand("evaluate", "run the stage x feature set x method sweep");
  common(eval);
  eval->add_option("--stages", f.stages, "comma list of stages, e.g. initial,week1,week5");
  eval->add_option("--methods", f.methods, "comma list of methods");
  eval->add_option("--feature-sets", f.feature_sets, "comma list of feature sets");
  eval->add_flag("--quiet", f.quiet, "no per-cell progress");
  auto* clus = app.add_subcommand("cluster", "fit the activity mixture model at one stage");
  common(clus);
  clus->add_option("--stage", f.stage, "stage label (default week5)");
  auto* rep = app.add_subcommand("report", "re-render curves, optimal stages and scatters from a stored report");
  rep->add_option("--report", f.report, "report.txt written by evaluate")->required()->check(CLI::ExistingFile);
  rep->add_option("--config", f.config, "config for scatter/optimal settings")->check(CLI::ExistingFile);
  rep->add_option("--out", f.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(f);
    if (*eval) return cmd_evaluate(f);
    if (*clus) return cmd_cluster(f);
    if (*rep) return cmd_report(f);
  } catch (const ValidationFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
