#pragma once

// Fixed-fold cross-validation, the stage x feature-set x method sweep, and
// the report / curve / scatter / cluster exports.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/core/text.hpp"
#include "ews/course_data.hpp"
#include "ews/learners/learner.hpp"
#include "ews/mixture.hpp"
#include "ews/staging.hpp"

namespace ews {

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
  std::vector<int> fold;  // 1..k per row
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<Eigen::Index> test_rows(int f) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) out.push_back(static_cast<Eigen::Index>(i));
    return out;
  }
  std::vector<Eigen::Index> train_rows(int f) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) out.push_back(static_cast<Eigen::Index>(i));
    return out;
  }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(static_cast<std::size_t>(k), 0);
    for (int f : fold) s[static_cast<std::size_t>(f - 1)]++;
    return s;
  }
  // Hash of the fold's test rows; equal fingerprints mean identical splits.
  std::uint64_t fingerprint(int f) const {
    Fnv1a h;
    h.update_value(static_cast<std::uint64_t>(fold.size()));
    for (auto r : test_rows(f)) h.update_value(static_cast<std::int64_t>(r));
    return h.digest();
  }
};

inline FoldAssignment assign_folds(std::size_t n, int k = 10, std::uint64_t seed = 1) {
  if (k < 1) throw ArgumentError("fold count must be positive");
  if (n < static_cast<std::size_t>(k))
    throw ArgumentError("cannot split " + std::to_string(n) + " rows into " + std::to_string(k) + " folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed, {0x666f6c6473ULL});
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) fa.fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k)) + 1;
  return fa;
}

// ---------------------------------------------------------------------------
// Metrics

inline double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size()) throw ArgumentError("mae: length mismatch");
  if (pred.size() < 1) throw ArgumentError("mae: empty input");
  return (pred - actual).cwiseAbs().sum() / static_cast<double>(pred.size());
}

// Squared sample correlation. Constant predictions carry no linear
// information and score 0.
inline double r_squared(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size()) throw ArgumentError("r_squared: length mismatch");
  if (pred.size() < 2) throw ArgumentError("r_squared: need at least 2 values");
  Eigen::ArrayXd a = actual.array() - actual.mean(), p = pred.array() - pred.mean();
  double saa = (a * a).sum(), spp = (p * p).sum();
  if (!(saa > 0.0)) throw ArgumentError("r_squared: actual values have zero variance");
  if (!(spp > 0.0)) return 0.0;
  double sap = (a * p).sum();
  return sap * sap / (saa * spp);
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvResult {
  Eigen::VectorXd predictions;  // clamped to [0, 100], original row order
  std::vector<double> fold_mae;
  std::vector<std::uint64_t> fold_fingerprints;
};

inline std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  return derive_seed(seed, {0x63765f666f6c64ULL, static_cast<std::uint64_t>(fold)});
}

inline CvResult run_cv(const DesignMatrix& m, const Eigen::VectorXd& y, const LearnerConfig& cfg,
                       const FoldAssignment& folds) {
  if (folds.fold.size() != static_cast<std::size_t>(m.rows()) || y.size() != m.rows())
    throw ArgumentError("fold assignment does not match the matrix rows");
  CvResult res;
  res.predictions = Eigen::VectorXd::Zero(m.rows());
  for (int f = 1; f <= folds.k; ++f) {
    auto tr = folds.train_rows(f), te = folds.test_rows(f);
    Eigen::VectorXd ytr(static_cast<Eigen::Index>(tr.size()));
    for (std::size_t i = 0; i < tr.size(); ++i) ytr(static_cast<Eigen::Index>(i)) = y(tr[i]);
    LearnerConfig c = cfg;
    c.seed = fold_seed(cfg.seed, f);
    Eigen::VectorXd p;
    try {
      auto model = fit(m.select_rows(tr), ytr, c);
      p = model.predict(m.select_rows(te));
    } catch (const std::exception& e) {
      throw TrainingError("fold " + std::to_string(f) + ", method " + method_name(cfg.method) + ": " + e.what());
    }
    double err = 0.0;
    for (std::size_t i = 0; i < te.size(); ++i) {
      double v = std::clamp(p(static_cast<Eigen::Index>(i)), 0.0, 100.0);
      res.predictions(te[i]) = v;
      err += std::abs(v - y(te[i]));
    }
    res.fold_mae.push_back(te.empty() ? 0.0 : err / static_cast<double>(te.size()));
    res.fold_fingerprints.push_back(folds.fingerprint(f));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Sweep

enum class CellStatus { ok, skipped, failed };

inline std::string status_name(CellStatus s) {
  return s == CellStatus::ok ? "ok" : s == CellStatus::skipped ? "skipped" : "failed";
}

struct CellKey {
  int stage;
  FeatureSet feature_set;
  Method method;
  auto operator<=>(const CellKey&) const = default;
};

struct CellResult {
  CellStatus status = CellStatus::ok;
  std::string message;
  Eigen::VectorXd predictions;
  double mae = std::nan("");
  double r2 = std::nan("");
  std::vector<double> fold_mae;
  int n_columns = 0;
  std::uint64_t seed = 0;
};

struct StageClusterSummary {
  int k = 0;
  std::string family;
  double bic = 0.0;
  std::string error;
};

struct EvaluationReport {
  std::uint64_t cohort_fingerprint = 0;
  std::uint64_t seed = 0;
  FoldAssignment folds;
  std::vector<std::string> student_codes;
  Eigen::VectorXd actual;
  std::vector<Stage> stages;
  std::vector<FeatureSet> feature_sets;
  std::vector<Method> methods;
  std::vector<std::string> config_echo;  // "key=value" lines
  std::map<int, StageClusterSummary> clusters;
  std::map<CellKey, CellResult> cells;
  std::map<CellKey, double> seconds;  // wall time per cell; not serialized
  double total_seconds = 0.0;

  const CellResult* find(Stage s, FeatureSet fs, Method m) const {
    auto it = cells.find({s.index, fs, m});
    return it == cells.end() ? nullptr : &it->second;
  }
  std::size_t count(CellStatus st) const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [&](auto& kv) { return kv.second.status == st; }));
  }
};

struct SweepSpec {
  std::vector<Stage> stages = stage_schedule();
  std::vector<FeatureSet> feature_sets = all_feature_sets();
  std::vector<Method> methods = benchmark_methods();
  std::uint64_t seed = 1;
  int folds = 10;
  int threads = 0;  // 0: EWS_THREADS, else hardware concurrency
  int cluster_k_max = 9;
  std::map<Method, LearnerConfig> configs;  // overrides; seeds are re-derived per cell
  std::vector<std::string> config_echo;
  std::function<void(const CellKey&, const CellResult&, std::size_t done, std::size_t total)> progress;
};

inline int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EWS_THREADS")) {
    auto v = text::parse_int(env);
    if (v && *v > 0) return static_cast<int>(*v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Runs jobs 0..n-1 on up to `threads` workers.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < t; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) job(i);
    });
  for (auto& th : pool) th.join();
}

inline std::uint64_t cell_seed(std::uint64_t seed, const CellKey& key) {
  return derive_seed(seed, {static_cast<std::uint64_t>(key.stage), static_cast<std::uint64_t>(key.feature_set),
                            static_cast<std::uint64_t>(key.method)});
}

inline std::uint64_t cluster_seed(std::uint64_t seed, Stage s) {
  return derive_seed(seed, {0x636c7573ULL, static_cast<std::uint64_t>(s.index)});
}

inline std::uint64_t folds_seed(std::uint64_t seed) { return derive_seed(seed, {0x666f6c64ULL}); }

inline EvaluationReport sweep(const std::vector<StudentRecord>& cohort, const CourseSchedule& schedule,
                              const SweepSpec& spec) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  EvaluationReport rep;
  rep.cohort_fingerprint = cohort_fingerprint(cohort, schedule);
  rep.seed = spec.seed;
  rep.stages = spec.stages;
  rep.feature_sets = spec.feature_sets;
  rep.methods = spec.methods;
  rep.config_echo = spec.config_echo;
  rep.folds = assign_folds(cohort.size(), spec.folds, folds_seed(spec.seed));
  rep.actual.resize(static_cast<Eigen::Index>(cohort.size()));
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    rep.student_codes.push_back(cohort[i].student_code);
    rep.actual(static_cast<Eigen::Index>(i)) = cohort[i].final_grade;
  }
  const int threads = worker_count(spec.threads);

  // Cluster memberships per stage, from predictors only.
  const bool want_cluster =
      std::find(spec.feature_sets.begin(), spec.feature_sets.end(), FeatureSet::cluster) != spec.feature_sets.end();
  std::vector<Stage> cluster_stages;
  if (want_cluster)
    for (auto s : spec.stages)
      if (s.index >= 1) cluster_stages.push_back(s);
  std::vector<std::optional<ClusterMembership>> memberships(cluster_stages.size());
  std::vector<StageClusterSummary> summaries(cluster_stages.size());
  parallel_for(cluster_stages.size(), threads, [&](std::size_t i) {
    try {
      auto sc = memberships_at_stage(cohort, schedule, cluster_stages[i], cluster_seed(spec.seed, cluster_stages[i]),
                                     spec.cluster_k_max);
      summaries[i] = {sc.model.k, family_name(sc.model.family), sc.model.bic, ""};
      memberships[i] = std::move(sc.membership);
    } catch (const std::exception& e) {
      summaries[i].error = e.what();
    }
  });
  std::map<int, std::size_t> cluster_index;
  for (std::size_t i = 0; i < cluster_stages.size(); ++i) {
    cluster_index[cluster_stages[i].index] = i;
    rep.clusters[cluster_stages[i].index] = summaries[i];
  }

  // Matrices per (stage, feature set).
  struct MatrixJob {
    Stage stage;
    FeatureSet fs;
    std::optional<StageFeatureMatrix> matrix;
    std::string skip_reason;
    bool failed = false;
  };
  std::vector<MatrixJob> mats;
  for (auto s : spec.stages)
    for (auto fs : spec.feature_sets) {
      MatrixJob mj{s, fs, std::nullopt, "", false};
      if (fs == FeatureSet::cluster) {
        if (s.index == 0) {
          mj.skip_reason = "no activity data at the initial stage";
        } else {
          auto i = cluster_index.at(s.index);
          if (!memberships[i]) {
            mj.skip_reason = "clustering failed: " + summaries[i].error;
            mj.failed = true;
          } else {
            mj.matrix = build_matrix(cohort, schedule, s, fs, &*memberships[i]);
          }
        }
      } else {
        mj.matrix = build_matrix(cohort, schedule, s, fs);
      }
      mats.push_back(std::move(mj));
    }

  struct Job {
    std::size_t mat;
    Method method;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < mats.size(); ++i)
    for (auto m : spec.methods) jobs.push_back({i, m});
  std::vector<CellResult> results(jobs.size());
  std::vector<double> secs(jobs.size(), 0.0);
  std::mutex progress_mu;
  std::size_t done = 0;
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto& mj = mats[jobs[j].mat];
    CellKey key{mj.stage.index, mj.fs, jobs[j].method};
    CellResult& cr = results[j];
    cr.seed = cell_seed(spec.seed, key);
    auto c0 = clock::now();
    if (!mj.matrix) {
      cr.status = mj.failed ? CellStatus::failed : CellStatus::skipped;
      cr.message = mj.skip_reason;
    } else {
      auto it = spec.configs.find(jobs[j].method);
      LearnerConfig cfg = it != spec.configs.end() ? it->second : LearnerConfig::defaults(jobs[j].method);
      cfg.seed = cr.seed;
      cr.n_columns = static_cast<int>(mj.matrix->design.cols());
      try {
        auto cv = run_cv(mj.matrix->design, mj.matrix->response, cfg, rep.folds);
        cr.predictions = std::move(cv.predictions);
        cr.fold_mae = std::move(cv.fold_mae);
        cr.mae = mae(cr.predictions, rep.actual);
        cr.r2 = r_squared(cr.predictions, rep.actual);
      } catch (const std::exception& e) {
        cr.status = CellStatus::failed;
        cr.message = "stage " + mj.stage.label() + ", feature set " + feature_set_name(mj.fs) + ": " + e.what();
      }
    }
    secs[j] = std::chrono::duration<double>(clock::now() - c0).count();
    if (spec.progress) {
      std::lock_guard<std::mutex> lk(progress_mu);
      spec.progress(key, cr, ++done, jobs.size());
    }
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    CellKey key{mats[jobs[j].mat].stage.index, mats[jobs[j].mat].fs, jobs[j].method};
    rep.cells[key] = std::move(results[j]);
    rep.seconds[key] = secs[j];
  }
  rep.total_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Optimal stage

// Earliest teaching week whose MAE is within `tolerance_fraction` of the
// minimum over teaching weeks 1..12.
inline Stage detect_optimal_stage(const std::map<int, double>& curve, double tolerance_fraction = 0.10) {
  if (!(tolerance_fraction >= 0.0)) throw ArgumentError("tolerance fraction must be nonnegative");
  double best = std::numeric_limits<double>::infinity();
  for (int w = 1; w <= kTeachingWeeks; ++w) {
    auto it = curve.find(w);
    if (it == curve.end() || !std::isfinite(it->second))
      throw ArgumentError("MAE curve lacks teaching week " + std::to_string(w));
    best = std::min(best, it->second);
  }
  const double limit = (1.0 + tolerance_fraction) * best;
  for (int w = 1; w <= kTeachingWeeks; ++w)
    if (curve.at(w) <= limit) return Stage{w};
  return Stage{kTeachingWeeks};
}

inline std::map<int, double> mae_curve(const EvaluationReport& rep, Method m, FeatureSet fs) {
  std::map<int, double> c;
  for (auto& [key, cell] : rep.cells)
    if (key.method == m && key.feature_set == fs && cell.status == CellStatus::ok) c[key.stage] = cell.mae;
  return c;
}

inline Stage detect_optimal_stage(const EvaluationReport& rep, Method m, FeatureSet fs,
                                  double tolerance_fraction = 0.10) {
  return detect_optimal_stage(mae_curve(rep, m, fs), tolerance_fraction);
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void write_echo(std::ostream& os, const std::vector<std::string>& echo) {
  for (auto& line : echo) os << "# " << line << '\n';
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::vector<std::string> s;
  for (double d : v) s.push_back(text::format_double(d));
  return text::join(s, ";");
}

}  // namespace detail

inline void write_report(std::ostream& os, const EvaluationReport& rep) {
  os << "# early-warning evaluation report\n";
  detail::write_echo(os, rep.config_echo);
  os << "format=1\n";
  os << "cohort_fingerprint=" << rep.cohort_fingerprint << '\n';
  os << "seed=" << rep.seed << '\n';
  os << "fold_seed=" << rep.folds.seed << '\n';
  os << "n=" << rep.actual.size() << '\n';
  os << "folds=" << rep.folds.k << '\n';
  {
    std::vector<std::string> f, s, fs, m;
    for (int v : rep.folds.fold) f.push_back(std::to_string(v));
    for (auto st : rep.stages) s.push_back(st.label());
    for (auto x : rep.feature_sets) fs.push_back(feature_set_name(x));
    for (auto x : rep.methods) m.push_back(method_name(x));
    os << "fold_assignment=" << text::join(f, ";") << '\n';
    os << "stages=" << text::join(s, ";") << '\n';
    os << "feature_sets=" << text::join(fs, ";") << '\n';
    os << "methods=" << text::join(m, ";") << '\n';
  }
  for (auto& [stage, c] : rep.clusters) {
    os << "cluster." << Stage{stage}.label() << '=';
    if (c.error.empty()) os << "K=" << c.k << ";family=" << c.family << ";bic=" << text::format_double(c.bic) << '\n';
    else os << "error=" << c.error << '\n';
  }
  os << "\n[actual]\nstudent_code,actual\n";
  for (Eigen::Index i = 0; i < rep.actual.size(); ++i)
    os << rep.student_codes[static_cast<std::size_t>(i)] << ',' << text::format_double(rep.actual(i)) << '\n';
  for (auto& [key, c] : rep.cells) {
    os << "\n[cell stage=" << Stage{key.stage}.label() << " feature_set=" << feature_set_name(key.feature_set)
       << " method=" << method_name(key.method) << "]\n";
    os << "status=" << status_name(c.status) << '\n';
    os << "seed=" << c.seed << '\n';
    if (!c.message.empty()) os << "message=" << c.message << '\n';
    if (c.status != CellStatus::ok) continue;
    os << "columns=" << c.n_columns << '\n';
    os << "mae=" << text::format_double(c.mae) << '\n';
    os << "r2=" << text::format_double(c.r2) << '\n';
    os << "fold_mae=" << detail::join_doubles(c.fold_mae) << '\n';
    os << "student_code,predicted\n";
    for (Eigen::Index i = 0; i < c.predictions.size(); ++i)
      os << rep.student_codes[static_cast<std::size_t>(i)] << ',' << text::format_double(c.predictions(i)) << '\n';
  }
}

inline EvaluationReport parse_report(std::istream& is) {
  EvaluationReport rep;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { return ParseError(lineno, "", what); };
  auto num = [&](const std::string& s) {
    auto v = text::parse_double(s);
    if (!v) {
      if (s == "nan") return std::nan("");
      throw fail("bad number '" + s + "'");
    }
    return *v;
  };
  auto u64 = [&](const std::string& s) {
    auto v = text::parse_u64(s);
    if (!v) throw fail("bad integer '" + s + "'");
    return static_cast<std::uint64_t>(*v);
  };
  enum { header, actual, cell } section = header;
  CellKey key{};
  CellResult* cur = nullptr;
  std::vector<double> actual_values;
  bool table = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (section == header && lineno > 1) rep.config_echo.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    if (line[0] == '[') {
      table = false;
      if (line == "[actual]") {
        section = actual;
        continue;
      }
      if (line.rfind("[cell ", 0) != 0 || line.back() != ']') throw fail("unknown section " + line);
      section = cell;
      std::map<std::string, std::string> kv;
      for (auto& tok : text::split(line.substr(6, line.size() - 7), ' ')) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw fail("bad cell header");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      key = {parse_stage(kv["stage"]).index, parse_feature_set(kv["feature_set"]), parse_method(kv["method"])};
      cur = &rep.cells[key];
      continue;
    }
    if (section == header) {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw fail("expected key=value");
      std::string k = line.substr(0, eq), v = line.substr(eq + 1);
      if (k == "cohort_fingerprint") rep.cohort_fingerprint = u64(v);
      else if (k == "seed") rep.seed = u64(v);
      else if (k == "fold_seed") rep.folds.seed = u64(v);
      else if (k == "folds") rep.folds.k = static_cast<int>(u64(v));
      else if (k == "fold_assignment") {
        for (auto& s : text::split(v, ';')) rep.folds.fold.push_back(static_cast<int>(u64(s)));
      } else if (k == "stages") {
        for (auto& s : text::split(v, ';')) rep.stages.push_back(parse_stage(s));
      } else if (k == "feature_sets") {
        for (auto& s : text::split(v, ';')) rep.feature_sets.push_back(parse_feature_set(s));
      } else if (k == "methods") {
        for (auto& s : text::split(v, ';')) rep.methods.push_back(parse_method(s));
      } else if (k.rfind("cluster.", 0) == 0) {
        StageClusterSummary c;
        if (v.rfind("error=", 0) == 0) c.error = v.substr(6);
        else
          for (auto& part : text::split(v, ';')) {
            auto e = part.find('=');
            std::string pk = part.substr(0, e), pv = part.substr(e + 1);
            if (pk == "K") c.k = static_cast<int>(u64(pv));
            else if (pk == "family") c.family = pv;
            else if (pk == "bic") c.bic = num(pv);
          }
        rep.clusters[parse_stage(k.substr(8)).index] = c;
      }
      continue;
    }
    if (section == actual) {
      if (line == "student_code,actual") continue;
      auto parts = text::split(line, ',');
      if (parts.size() != 2) throw fail("expected student_code,actual");
      rep.student_codes.push_back(parts[0]);
      actual_values.push_back(num(parts[1]));
      continue;
    }
    // cell section
    if (line == "student_code,predicted") {
      table = true;
      cur->predictions.resize(0);
      continue;
    }
    if (table) {
      auto parts = text::split(line, ',');
      if (parts.size() != 2) throw fail("expected student_code,predicted");
      cur->predictions.conservativeResize(cur->predictions.size() + 1);
      cur->predictions(cur->predictions.size() - 1) = num(parts[1]);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected key=value");
    std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "status") cur->status = v == "ok" ? CellStatus::ok : v == "skipped" ? CellStatus::skipped : CellStatus::failed;
    else if (k == "seed") cur->seed = u64(v);
    else if (k == "message") cur->message = v;
    else if (k == "columns") cur->n_columns = static_cast<int>(u64(v));
    else if (k == "mae") cur->mae = num(v);
    else if (k == "r2") cur->r2 = num(v);
    else if (k == "fold_mae") {
      for (auto& s : text::split(v, ';')) cur->fold_mae.push_back(num(s));
    }
  }
  rep.actual = Eigen::Map<Eigen::VectorXd>(actual_values.data(), static_cast<Eigen::Index>(actual_values.size()));
  return rep;
}

// Stage x method MAE matrix for one feature set; empty cells are skipped or
// failed.
inline void write_curve_csv(std::ostream& os, const EvaluationReport& rep, FeatureSet fs) {
  detail::write_echo(os, rep.config_echo);
  os << "# feature_set=" << feature_set_name(fs) << '\n';
  os << "method";
  for (auto s : rep.stages) os << ',' << s.label();
  os << '\n';
  for (auto m : rep.methods) {
    os << method_name(m);
    for (auto s : rep.stages) {
      os << ',';
      auto* c = rep.find(s, fs, m);
      if (c && c->status == CellStatus::ok) os << text::format_double(c->mae);
    }
    os << '\n';
  }
}

inline void write_optimal_summary(std::ostream& os, const EvaluationReport& rep, double tolerance_fraction = 0.10) {
  detail::write_echo(os, rep.config_echo);
  os << "# tolerance_fraction=" << text::format_double(tolerance_fraction) << '\n';
  os << "method,feature_set,optimal_stage,mae_at_stage,min_teaching_mae\n";
  for (auto fs : rep.feature_sets)
    for (auto m : rep.methods) {
      auto curve = mae_curve(rep, m, fs);
      os << method_name(m) << ',' << feature_set_name(fs) << ',';
      try {
        Stage s = detect_optimal_stage(curve, tolerance_fraction);
        double best = std::numeric_limits<double>::infinity();
        for (int w = 1; w <= kTeachingWeeks; ++w) best = std::min(best, curve.at(w));
        os << s.label() << ',' << text::format_double(curve.at(s.index)) << ',' << text::format_double(best) << '\n';
      } catch (const ArgumentError&) {
        os << "unavailable,,\n";
      }
    }
}

inline void export_scatter(std::ostream& os, const EvaluationReport& rep, Stage s, Method m, FeatureSet fs) {
  auto* c = rep.find(s, fs, m);
  if (!c || c->status != CellStatus::ok)
    throw ArgumentError("no completed cell for stage " + s.label() + ", " + feature_set_name(fs) + ", " + method_name(m));
  detail::write_echo(os, rep.config_echo);
  os << "# stage=" << s.label() << " feature_set=" << feature_set_name(fs) << " method=" << method_name(m) << '\n';
  os << "# identity_line: predicted = actual over [0, 100]\n";
  os << "# mae=" << text::format_double(c->mae) << " r2=" << text::format_double(c->r2) << '\n';
  os << "student_code,actual,predicted\n";
  for (Eigen::Index i = 0; i < rep.actual.size(); ++i)
    os << rep.student_codes[static_cast<std::size_t>(i)] << ',' << text::format_double(rep.actual(i)) << ','
       << text::format_double(c->predictions(i)) << '\n';
}

// Cohort-wide view totals per (week, day class).
inline void export_activity(std::ostream& os, const std::vector<StudentRecord>& cohort, const CourseSchedule& schedule,
                            const std::vector<std::string>& echo = {}) {
  detail::write_echo(os, echo);
  os << "week,day_class,total_views,mean_views_per_student\n";
  auto cells = activity_cells(schedule);
  for (int w = 1; w <= kActivityWeeks; ++w)
    for (auto d : {DayClass::weekday, DayClass::sunday}) {
      double total = 0.0;
      for (auto& c : cells)
        if (c.week == w && c.day == d)
          for (auto& r : cohort) total += r.activity.at(c.folder, c.week, c.day);
      os << w << ',' << day_class_tag(d) << ',' << text::format_double(total) << ','
         << text::format_double(cohort.empty() ? 0.0 : total / static_cast<double>(cohort.size())) << '\n';
    }
}

inline void write_cluster_report(std::ostream& os, const StageClustering& sc, Stage stage,
                                 const std::vector<StudentRecord>& cohort, const std::vector<std::string>& echo = {}) {
  detail::write_echo(os, echo);
  const auto& m = sc.model;
  os << "# stage=" << stage.label() << " K=" << m.k << " family=" << family_name(m.family)
     << " bic=" << text::format_double(m.bic) << " loglik=" << text::format_double(m.loglik) << '\n';
  os << "[memberships]\nstudent_code,label";
  for (int c = 0; c < m.k; ++c) os << ",p" << c + 1;
  os << '\n';
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    os << cohort[i].student_code << ",c" << sc.membership.labels[i] + 1;
    for (int c = 0; c < m.k; ++c) os << ',' << text::format_double(sc.membership.soft(static_cast<Eigen::Index>(i), c));
    os << '\n';
  }
  std::vector<int> sizes(static_cast<std::size_t>(m.k), 0);
  for (int l : sc.membership.labels) sizes[static_cast<std::size_t>(l)]++;
  os << "\n[clusters]\ncluster,weight,size,proportion\n";
  for (int c = 0; c < m.k; ++c)
    os << 'c' << c + 1 << ',' << text::format_double(m.weights(c)) << ',' << sizes[static_cast<std::size_t>(c)] << ','
       << text::format_double(static_cast<double>(sizes[static_cast<std::size_t>(c)]) / static_cast<double>(cohort.size()))
       << '\n';
  os << "\n[standardized_means]\ncluster,column,mean\n";
  for (int c = 0; c < m.k; ++c)
    for (std::size_t j = 0; j < sc.input.columns.size(); ++j)
      os << 'c' << c + 1 << ',' << sc.input.columns[j] << ','
         << text::format_double(m.means(c, static_cast<Eigen::Index>(j))) << '\n';
  os << "\n[bic]\nK,family,n_params,bic,error\n";
  for (auto& e : sc.table)
    os << e.k << ',' << family_name(e.family) << ',' << e.n_params << ','
       << (e.bic ? text::format_double(*e.bic) : std::string()) << ',' << (e.error.empty() ? "" : "collapsed") << '\n';
  if (!sc.input.dropped.empty()) os << "\n[dropped_constant_columns]\n" << text::join(sc.input.dropped, ",") << '\n';
}

}  // namespace ews
