#pragma once

// Semester stages, feature sets, and the cohort -> design matrix transform.

#include <Eigen/Dense>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ews/course_data.hpp"
#include "ews/design_matrix.hpp"

namespace ews {

inline constexpr int kStageCount = 15;

// Stage index doubles as the last activity week it may see: 0 = initial
// (background only), 1..12 = end of teaching week, 13 = revision week,
// 14 = final (examination period).
struct Stage {
  int index = 0;

  std::string label() const {
    if (index == 0) return "initial";
    if (index == kRevisionWeek) return "revision";
    if (index == kExamPeriodWeek) return "final";
    return "week" + std::to_string(index);
  }
  int last_activity_week() const { return index; }
  bool is_teaching_week() const { return index >= 1 && index <= kTeachingWeeks; }

  auto operator<=>(const Stage&) const = default;
};

inline std::vector<Stage> stage_schedule() {
  std::vector<Stage> s;
  for (int i = 0; i < kStageCount; ++i) s.push_back({i});
  return s;
}

inline Stage parse_stage(std::string_view label) {
  for (auto& s : stage_schedule())
    if (s.label() == label) return s;
  throw ArgumentError("unknown stage '" + std::string(label) + "'");
}

enum class FeatureSet { initial, no_lms, cumulative, cluster };

inline const std::vector<FeatureSet>& all_feature_sets() {
  static const std::vector<FeatureSet> v{FeatureSet::initial, FeatureSet::no_lms, FeatureSet::cumulative,
                                         FeatureSet::cluster};
  return v;
}

inline std::string feature_set_name(FeatureSet f) {
  switch (f) {
    case FeatureSet::initial: return "initial";
    case FeatureSet::no_lms: return "nolms";
    case FeatureSet::cumulative: return "cumulative";
    case FeatureSet::cluster: return "cluster";
  }
  return "?";
}

inline FeatureSet parse_feature_set(std::string_view s) {
  for (auto f : all_feature_sets())
    if (feature_set_name(f) == s) return f;
  throw ArgumentError("unknown feature set '" + std::string(s) + "'");
}

// Per-student cluster membership for one stage. Labels are 0-based.
struct ClusterMembership {
  std::vector<int> labels;
  Eigen::MatrixXd soft;  // n x K, rows sum to 1

  int k() const { return static_cast<int>(soft.cols()); }
};

struct BuildOptions {
  // Adds one numeric soft-membership column per cluster to the Cluster set.
  // Off by default so the Cluster set counts its membership as a single
  // explanatory variable.
  bool soft_memberships = false;
};

struct StageFeatureMatrix {
  DesignMatrix design;
  Eigen::VectorXd response;
  std::vector<std::string> student_codes;
  Stage stage;
  FeatureSet feature_set = FeatureSet::initial;
};

namespace detail {

struct MatrixBuilder {
  std::size_t n;
  std::vector<ColumnInfo> columns;
  std::vector<std::vector<double>> data;

  void add(ColumnInfo info, std::vector<double> column) {
    columns.push_back(std::move(info));
    data.push_back(std::move(column));
  }

  DesignMatrix finish() {
    DesignMatrix m;
    m.columns = std::move(columns);
    m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(data.size()));
    for (std::size_t j = 0; j < data.size(); ++j)
      for (std::size_t i = 0; i < n; ++i) m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[j][i];
    return m;
  }
};

}  // namespace detail

inline StageFeatureMatrix build_matrix(const std::vector<StudentRecord>& cohort, const CourseSchedule& schedule,
                                       Stage stage, FeatureSet feature_set,
                                       const ClusterMembership* clusters = nullptr, BuildOptions opts = {}) {
  if (stage.index < 0 || stage.index >= kStageCount) throw ArgumentError("stage index out of range");
  const std::size_t n = cohort.size();
  if (feature_set == FeatureSet::cluster) {
    if (!clusters) throw ArgumentError("Cluster feature set requires cluster memberships for stage " + stage.label());
    if (clusters->labels.size() != n || static_cast<std::size_t>(clusters->soft.rows()) != n)
      throw ArgumentError("cluster memberships do not match cohort size");
  }

  detail::MatrixBuilder b{n, {}, {}};
  const auto& fields = background_fields();
  for (std::size_t f = 0; f < fields.size(); ++f) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& lv = fields[f].levels;
      auto it = std::find(lv.begin(), lv.end(), cohort[i].background[f]);
      if (it == lv.end())
        throw ValidationError("student " + cohort[i].student_code + ": invalid " + fields[f].name);
      col[i] = static_cast<double>(it - lv.begin());
    }
    b.add({fields[f].name, ColumnKind::categorical, fields[f].levels, {"background", fields[f].name, 0, 0, "", "level_index"}},
          std::move(col));
  }

  const int week_limit = stage.last_activity_week();
  for (auto& item : schedule.ca_items) {
    if (item.model_inclusion_week > week_limit) continue;
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto it = cohort[i].ca_results.find(item.name);
      col[i] = it == cohort[i].ca_results.end() ? 0.0 : it->second;  // missed submission scores 0
    }
    b.add({ca_column_name(item), ColumnKind::numeric, {}, {"ca", item.name, 0, item.model_inclusion_week, "", "running_score"}},
          std::move(col));
  }

  if (feature_set == FeatureSet::initial) {
    for (auto& c : activity_cells(schedule, week_limit)) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = cohort[i].activity.at(c.folder, c.week, c.day);
      b.add({activity_column_name(c.folder, c.week, c.day), ColumnKind::numeric, {},
             {"activity", schedule.folders[c.folder - 1].name, c.folder, c.week, day_class_tag(c.day), "count"}},
            std::move(col));
    }
  }

  if (feature_set == FeatureSet::cumulative || feature_set == FeatureSet::cluster) {
    for (auto& folder : schedule.folders) {
      if (folder.release_week > week_limit) continue;
      for (auto d : {DayClass::weekday, DayClass::sunday}) {
        std::vector<double> col(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (int w = folder.release_week; w <= week_limit; ++w) col[i] += cohort[i].activity.at(folder.number, w, d);
        b.add({"CUM_F" + std::to_string(folder.number) + "_" + day_class_tag(d), ColumnKind::numeric, {},
               {"cumulative", folder.name, folder.number, week_limit, day_class_tag(d), "cumulative_count"}},
              std::move(col));
      }
    }
  }

  if (feature_set == FeatureSet::cluster) {
    std::vector<std::string> levels;
    for (int k = 0; k < clusters->k(); ++k) levels.push_back("c" + std::to_string(k + 1));
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = clusters->labels[i];
    b.add({"CLUSTER", ColumnKind::categorical, levels, {"cluster_label", "", 0, week_limit, "", "level_index"}},
          std::move(col));
    if (opts.soft_memberships) {
      for (int k = 0; k < clusters->k(); ++k) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = clusters->soft(static_cast<Eigen::Index>(i), k);
        b.add({"CLUSTER_P" + std::to_string(k + 1), ColumnKind::numeric, {},
               {"cluster_prob", "c" + std::to_string(k + 1), 0, week_limit, "", "probability"}},
              std::move(p));
      }
    }
  }

  StageFeatureMatrix m;
  m.design = b.finish();
  m.response.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    m.response(static_cast<Eigen::Index>(i)) = cohort[i].final_grade;
    m.student_codes.push_back(cohort[i].student_code);
  }
  m.stage = stage;
  m.feature_set = feature_set;
  return m;
}

// ---------------------------------------------------------------------------
// One-hot encoding

struct OneHotSource {
  std::size_t source_column = 0;
  int level = -1;  // -1: numeric pass-through
};

struct OneHotResult {
  DesignMatrix numeric;
  std::vector<OneHotSource> column_map;
  std::vector<ColumnInfo> source_columns;
};

// k-level categorical -> k-1 indicators, first level as reference.
inline OneHotResult one_hot(const DesignMatrix& m) {
  OneHotResult r;
  r.source_columns = m.columns;
  std::vector<Eigen::Index> src;
  for (std::size_t j = 0; j < m.columns.size(); ++j) {
    const auto& c = m.columns[j];
    if (c.kind == ColumnKind::numeric) {
      r.numeric.columns.push_back(c);
      r.column_map.push_back({j, -1});
    } else {
      for (int lv = 1; lv < c.n_levels(); ++lv) {
        ColumnInfo info{c.name + "=" + c.levels[lv], ColumnKind::numeric, {}, c.provenance};
        info.provenance.encoding = "indicator";
        r.numeric.columns.push_back(std::move(info));
        r.column_map.push_back({j, lv});
      }
    }
  }
  r.numeric.values.resize(m.rows(), static_cast<Eigen::Index>(r.column_map.size()));
  for (std::size_t k = 0; k < r.column_map.size(); ++k) {
    const auto& s = r.column_map[k];
    auto col = static_cast<Eigen::Index>(k);
    auto sc = static_cast<Eigen::Index>(s.source_column);
    if (s.level < 0) {
      r.numeric.values.col(col) = m.values.col(sc);
    } else {
      for (Eigen::Index i = 0; i < m.rows(); ++i) r.numeric.values(i, col) = m.values(i, sc) == s.level ? 1.0 : 0.0;
    }
  }
  return r;
}

// Recovers the original (level-index) matrix from an encoded one.
inline Eigen::MatrixXd invert_one_hot(const OneHotResult& enc, const Eigen::MatrixXd& encoded) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(encoded.rows(), static_cast<Eigen::Index>(enc.source_columns.size()));
  for (std::size_t k = 0; k < enc.column_map.size(); ++k) {
    const auto& s = enc.column_map[k];
    auto sc = static_cast<Eigen::Index>(s.source_column);
    for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
      double v = encoded(i, static_cast<Eigen::Index>(k));
      if (s.level < 0) out(i, sc) = v;
      else if (v == 1.0) out(i, sc) = s.level;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

inline void export_matrix(const StageFeatureMatrix& m, std::ostream& csv, std::ostream& manifest) {
  csv << "student_code";
  for (auto& c : m.design.columns) csv << ',' << c.name;
  csv << ",FINAL\n";
  for (Eigen::Index i = 0; i < m.design.rows(); ++i) {
    csv << m.student_codes[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.design.cols(); ++j) {
      const auto& c = m.design.columns[static_cast<std::size_t>(j)];
      csv << ',';
      if (c.kind == ColumnKind::categorical) csv << c.levels[static_cast<std::size_t>(m.design.values(i, j))];
      else csv << text::format_double(m.design.values(i, j));
    }
    csv << ',' << text::format_double(m.response(i)) << '\n';
  }

  manifest << "# stage=" << m.stage.label() << " feature_set=" << feature_set_name(m.feature_set) << '\n';
  manifest << "column,kind,source,field,folder,week,day_class,encoding,levels\n";
  for (auto& c : m.design.columns) {
    const auto& p = c.provenance;
    manifest << c.name << ',' << (c.kind == ColumnKind::numeric ? "numeric" : "categorical") << ',' << p.source << ','
             << p.field << ',' << p.folder << ',' << p.week << ',' << p.day_class << ',' << p.encoding << ','
             << text::join(c.levels, "|") << '\n';
  }
}

}  // namespace ews
