#pragma once

// Student/course data model: the course schedule, per-student records,
// validation, the cohort CSV format and a seeded synthetic cohort generator
// with planted engagement archetypes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/random.hpp"
#include "ews/core/text.hpp"

namespace ews {

inline constexpr int kFolderCount = 15;
inline constexpr int kTeachingWeeks = 12;
inline constexpr int kRevisionWeek = 13;
inline constexpr int kExamPeriodWeek = 14;
// Activity is recorded for the 12 teaching weeks, revision week and the
// examination period.
inline constexpr int kActivityWeeks = 14;

enum class DayClass : int { weekday = 0, sunday = 1 };

inline const char* day_class_tag(DayClass d) { return d == DayClass::weekday ? "WD" : "SU"; }

struct Folder {
  int number = 0;  // 1-based
  std::string name;
  int release_week = 1;
};

struct CaItem {
  std::string name;
  double weight_percent = 0.0;
  std::vector<int> active_weeks;
  int model_inclusion_week = 0;
};

struct CourseSchedule {
  int teaching_weeks = kTeachingWeeks;
  std::vector<Folder> folders;
  std::vector<CaItem> ca_items;

  const CaItem* find_item(std::string_view name) const {
    for (auto& item : ca_items)
      if (item.name == name) return &item;
    return nullptr;
  }

  double total_ca_weight() const {
    double s = 0.0;
    for (auto& item : ca_items) s += item.weight_percent;
    return s;
  }

  bool folder_released(int folder, int week) const { return folders.at(folder - 1).release_week <= week; }
};

inline CourseSchedule default_schedule() {
  CourseSchedule s;
  for (int k = 1; k <= kTeachingWeeks; ++k) {
    // Course material is posted two weeks ahead of the lecture week.
    s.folders.push_back({k, "week" + std::to_string(k) + "_material", std::max(1, k - 2)});
  }
  s.folders.push_back({13, "lecture_question_solutions", 1});
  s.folders.push_back({14, "course_information", 1});
  s.folders.push_back({15, "past_exam_solutions", 1});

  std::vector<int> all_weeks(kTeachingWeeks);
  std::iota(all_weeks.begin(), all_weeks.end(), 1);
  s.ca_items = {
      {"lecture_questions", 6.0, all_weeks, 3},
      {"videos", 2.0, all_weeks, 12},
      {"minitab_labs", 3.0, {3, 4, 5}, 5},
      {"r_labs", 4.0, {7, 9, 10, 11}, 11},
      {"minitab_exam", 10.0, {6}, 6},
      {"r_exam", 15.0, {12}, 12},
  };
  return s;
}

// ---------------------------------------------------------------------------
// Background fields

struct BackgroundField {
  std::string name;
  std::vector<std::string> levels;
};

// Fixed vocabularies. The first level of each field is the reference level
// dropped by one-hot encoding (1 + 2 + 2 + 3 + 9 + 1 = 18 indicators).
inline const std::vector<BackgroundField>& background_fields() {
  static const std::vector<BackgroundField> fields = {
      {"gender", {"female", "male"}},
      {"course_type", {"core", "option", "elective"}},
      {"registration_status", {"first_attempt", "repeat", "visiting"}},
      {"year_of_study", {"year1", "year2", "year3", "year4"}},
      {"programme",
       {"science", "agricultural_science", "commerce", "arts", "engineering", "economics", "computer_science",
        "actuarial", "health_science", "other"}},
      {"nationality", {"irish", "non_irish"}},
  };
  return fields;
}

inline constexpr int kBackgroundFieldCount = 6;

class ActivityGrid {
 public:
  ActivityGrid() : counts_(kFolderCount * kActivityWeeks * 2, 0) {}

  int at(int folder, int week, DayClass day) const { return counts_[index(folder, week, day)]; }
  int& at(int folder, int week, DayClass day) { return counts_[index(folder, week, day)]; }

  int total(int folder, int week) const {
    return at(folder, week, DayClass::weekday) + at(folder, week, DayClass::sunday);
  }

  bool operator==(const ActivityGrid&) const = default;

 private:
  static std::size_t index(int folder, int week, DayClass day) {
    if (folder < 1 || folder > kFolderCount || week < 1 || week > kActivityWeeks)
      throw ArgumentError("activity cell out of range: folder " + std::to_string(folder) + ", week " +
                          std::to_string(week));
    return (static_cast<std::size_t>(folder - 1) * kActivityWeeks + (week - 1)) * 2 + static_cast<int>(day);
  }

  std::vector<int> counts_;
};

struct StudentRecord {
  std::string student_code;
  // Values for background_fields(), same order.
  std::array<std::string, kBackgroundFieldCount> background;
  std::map<std::string, double> ca_results;  // absent key = no result
  ActivityGrid activity;
  double final_grade = 0.0;

  bool operator==(const StudentRecord&) const = default;
};

inline std::string activity_column_name(int folder, int week, DayClass day) {
  return "F" + std::to_string(folder) + "_W" + std::to_string(week) + "_" + day_class_tag(day);
}

inline std::string ca_column_name(const CaItem& item) { return "CA_" + item.name; }

struct ActivityCell {
  int folder;
  int week;
  DayClass day;
};

// (folder, week, day) cells that can carry activity: the folder must have
// been released by that week.
inline std::vector<ActivityCell> activity_cells(const CourseSchedule& schedule, int max_week = kActivityWeeks) {
  std::vector<ActivityCell> cells;
  for (auto& f : schedule.folders)
    for (int w = 1; w <= max_week; ++w)
      if (f.release_week <= w)
        for (auto d : {DayClass::weekday, DayClass::sunday}) cells.push_back({f.number, w, d});
  return cells;
}

// Never throws; an empty result means the record is valid.
inline std::vector<std::string> validate_record(const StudentRecord& r, const CourseSchedule& schedule) {
  std::vector<std::string> out;
  if (r.student_code.empty()) out.push_back("missing student_code");
  const auto& fields = background_fields();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& v = r.background[i];
    if (v.empty()) {
      out.push_back("missing " + fields[i].name);
    } else if (std::find(fields[i].levels.begin(), fields[i].levels.end(), v) == fields[i].levels.end()) {
      out.push_back("unknown " + fields[i].name + " level '" + v + "'");
    }
  }
  for (auto& [name, score] : r.ca_results) {
    if (!schedule.find_item(name)) {
      out.push_back("CA result for unknown item '" + name + "'");
    } else if (!std::isfinite(score) || score < 0.0 || score > 100.0) {
      out.push_back("CA score for '" + name + "' outside [0,100]");
    }
  }
  bool negative = false;
  for (int f = 1; f <= kFolderCount && !negative; ++f)
    for (int w = 1; w <= kActivityWeeks && !negative; ++w)
      for (auto d : {DayClass::weekday, DayClass::sunday})
        if (r.activity.at(f, w, d) < 0) {
          out.push_back("negative activity count at " + activity_column_name(f, w, d));
          negative = true;
          break;
        }
  if (!std::isfinite(r.final_grade) || r.final_grade < 0.0 || r.final_grade > 100.0)
    out.push_back("final grade outside [0,100]");
  return out;
}

// ---------------------------------------------------------------------------
// Cohort CSV

inline std::vector<std::string> cohort_header(const CourseSchedule& schedule) {
  std::vector<std::string> h{"student_code"};
  for (auto& f : background_fields()) h.push_back(f.name);
  for (auto& item : schedule.ca_items) h.push_back(ca_column_name(item));
  for (auto& c : activity_cells(schedule)) h.push_back(activity_column_name(c.folder, c.week, c.day));
  h.push_back("FINAL");
  return h;
}

// `comments` become leading '#' lines, which load_cohort skips.
inline void write_cohort(std::ostream& os, const std::vector<StudentRecord>& records, const CourseSchedule& schedule,
                         const std::vector<std::string>& comments = {}) {
  for (auto& c : comments) os << "# " << c << '\n';
  os << text::join(cohort_header(schedule), ",") << '\n';
  auto cells = activity_cells(schedule);
  for (auto& r : records) {
    os << r.student_code;
    for (auto& b : r.background) os << ',' << b;
    for (auto& item : schedule.ca_items) {
      os << ',';
      if (auto it = r.ca_results.find(item.name); it != r.ca_results.end()) os << text::format_double(it->second);
    }
    for (auto& c : cells) os << ',' << r.activity.at(c.folder, c.week, c.day);
    os << ',' << text::format_double(r.final_grade) << '\n';
  }
}

inline std::vector<StudentRecord> parse_cohort(std::istream& is, const CourseSchedule& schedule) {
  enum class Kind { code, background, ca, activity, final };
  struct Slot {
    Kind kind;
    int index = 0;  // background field / CA item
    ActivityCell cell{};
  };

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++line_no;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    header = text::split(t, ',');
    have_header = true;
    break;
  }
  if (!have_header) throw ParseError(line_no, "<header>", "missing header row");

  std::map<std::string, Slot> expected;
  expected["student_code"] = {Kind::code};
  for (std::size_t i = 0; i < background_fields().size(); ++i)
    expected[background_fields()[i].name] = {Kind::background, static_cast<int>(i)};
  for (std::size_t i = 0; i < schedule.ca_items.size(); ++i)
    expected[ca_column_name(schedule.ca_items[i])] = {Kind::ca, static_cast<int>(i)};
  for (auto& c : activity_cells(schedule))
    expected[activity_column_name(c.folder, c.week, c.day)] = {Kind::activity, 0, c};
  expected["FINAL"] = {Kind::final};

  std::vector<Slot> slots;
  std::set<std::string> seen;
  for (auto& raw : header) {
    std::string name(text::trim(raw));
    auto it = expected.find(name);
    if (it == expected.end()) throw ParseError(line_no, name, "unknown column");
    if (!seen.insert(name).second) throw ParseError(line_no, name, "duplicate column");
    slots.push_back(it->second);
  }
  for (auto& [name, slot] : expected)
    if (!seen.count(name)) throw ParseError(line_no, name, "missing column");

  std::vector<StudentRecord> records;
  std::set<std::string> codes;
  while (std::getline(is, line)) {
    ++line_no;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = text::split(t, ',');
    if (fields.size() != slots.size()) {
      std::string col = fields.size() < slots.size() ? header[fields.size()] : "<extra>";
      throw ParseError(line_no, std::string(text::trim(col)),
                       "expected " + std::to_string(slots.size()) + " fields, found " + std::to_string(fields.size()));
    }
    StudentRecord r;
    bool have_final = false;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      auto value = text::trim(fields[i]);
      std::string col(text::trim(header[i]));
      const auto& slot = slots[i];
      switch (slot.kind) {
        case Kind::code:
          r.student_code = std::string(value);
          break;
        case Kind::background:
          r.background[slot.index] = std::string(value);
          break;
        case Kind::ca: {
          if (value.empty()) break;
          auto v = text::parse_double(value);
          if (!v) throw ParseError(line_no, col, "not a number: '" + std::string(value) + "'");
          r.ca_results[schedule.ca_items[slot.index].name] = *v;
          break;
        }
        case Kind::activity: {
          auto v = text::parse_double(value);
          if (!v) throw ParseError(line_no, col, "not a number: '" + std::string(value) + "'");
          if (*v < 0.0 || std::floor(*v) != *v)
            throw ValidationError("row " + std::to_string(line_no) + ", column '" + col +
                                  "': activity count must be a nonnegative integer");
          r.activity.at(slot.cell.folder, slot.cell.week, slot.cell.day) = static_cast<int>(*v);
          break;
        }
        case Kind::final: {
          if (value.empty())
            throw ValidationError("row " + std::to_string(line_no) + ": missing final grade");
          auto v = text::parse_double(value);
          if (!v) throw ParseError(line_no, col, "not a number: '" + std::string(value) + "'");
          r.final_grade = *v;
          have_final = true;
          break;
        }
      }
    }
    (void)have_final;
    auto violations = validate_record(r, schedule);
    if (!violations.empty())
      throw ValidationError("row " + std::to_string(line_no) + " (" + r.student_code + "): " +
                            text::join(violations, "; "));
    if (!codes.insert(r.student_code).second)
      throw ValidationError("row " + std::to_string(line_no) + ": duplicate student_code '" + r.student_code + "'");
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<StudentRecord> load_cohort(const std::string& path, const CourseSchedule& schedule) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open cohort file '" + path + "'");
  return parse_cohort(in, schedule);
}

// Content hash of the canonical CSV serialization.
inline std::uint64_t cohort_fingerprint(const std::vector<StudentRecord>& records, const CourseSchedule& schedule) {
  std::ostringstream os;
  write_cohort(os, records, schedule);
  Fnv1a h;
  auto s = os.str();
  h.update(s.data(), s.size());
  return h.digest();
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct ArchetypeProfile {
  std::string name;
  double weekday_multiplier = 1.0;
  double sunday_multiplier = 1.0;
  double ability_shift = 0.0;
};

inline std::vector<ArchetypeProfile> default_archetypes() {
  return {
      {"above_average", 1.5, 1.7, 0.15},
      {"weekday_average_sunday_low", 1.0, 0.4, -0.05},
      {"minimal", 0.06, 0.04, -1.0},
  };
}

// score = clamp(mean + loading * ability + N(0, noise_sd^2), 0, 100)
struct CaSignal {
  std::string item;
  double mean = 65.0;
  double loading = 10.0;
  double noise_sd = 5.0;
};

struct SignalSpec {
  std::vector<CaSignal> ca;
  // exam = exam_mean + exam_ability_loading * ability
  //        + exam_ca_loading * (weighted_ca - 50) + N(0, noise_sd^2)
  double exam_mean = 55.0;
  double exam_ability_loading = 12.0;
  double exam_ca_loading = 0.0;
  // Additive ability shifts for background levels (field, level, shift).
  struct BackgroundEffect {
    std::string field;
    std::string level;
    double shift;
  };
  std::vector<BackgroundEffect> background_effects;
};

inline SignalSpec default_signal() {
  SignalSpec s;
  s.ca = {
      {"lecture_questions", 68.0, 12.0, 5.0}, {"videos", 75.0, 5.0, 15.0},  {"minitab_labs", 70.0, 14.0, 2.5},
      {"r_labs", 66.0, 10.0, 8.0},             {"minitab_exam", 62.0, 12.0, 6.0}, {"r_exam", 60.0, 12.0, 6.0},
  };
  s.background_effects = {
      {"course_type", "core", 0.2}, {"course_type", "elective", -0.2}, {"registration_status", "repeat", -0.3}};
  return s;
}

struct CohortGenConfig {
  std::size_t n_students = 136;
  std::vector<double> archetype_proportions{0.45, 0.51, 0.04};
  std::vector<ArchetypeProfile> archetypes = default_archetypes();
  double noise_sd = 10.0;
  std::uint64_t seed = 1;
  SignalSpec signal = default_signal();
  // Per-student engagement intensity: lognormal sd; count overdispersion:
  // gamma shape of the Poisson-gamma mixture.
  double intensity_sd = 0.0;
  double count_shape = 50.0;
  // Multiplier on every expected view count.
  double activity_scale = 3.0;
};

inline void validate_config(const CohortGenConfig& cfg, const CourseSchedule& schedule) {
  if (cfg.n_students < 20) throw ConfigError("n_students must be at least 20");
  if (cfg.archetype_proportions.empty() || cfg.archetype_proportions.size() != cfg.archetypes.size())
    throw ConfigError("archetype_proportions must have one entry per archetype (" +
                      std::to_string(cfg.archetypes.size()) + ")");
  double sum = 0.0;
  for (double p : cfg.archetype_proportions) {
    if (!(p >= 0.0)) throw ConfigError("archetype proportions must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("archetype proportions sum to " + text::format_double(sum) + ", not 1");
  if (!(cfg.noise_sd >= 0.0)) throw ConfigError("noise_sd must be nonnegative");
  if (!(cfg.activity_scale > 0.0)) throw ConfigError("activity_scale must be positive");
  if (!(cfg.count_shape > 0.0) || !(cfg.intensity_sd >= 0.0)) throw ConfigError("invalid count dispersion settings");
  for (auto& s : cfg.signal.ca)
    if (!schedule.find_item(s.item)) throw ConfigError("signal references unknown CA item '" + s.item + "'");
}

struct GeneratedCohort {
  std::vector<StudentRecord> records;
  std::vector<int> archetype;  // planted label per record, 0-based
  std::vector<double> ability;
};

inline double weighted_ca(const StudentRecord& r, const CourseSchedule& schedule) {
  double num = 0.0;
  for (auto& item : schedule.ca_items) {
    auto it = r.ca_results.find(item.name);
    num += item.weight_percent * (it == r.ca_results.end() ? 0.0 : it->second);
  }
  return num / schedule.total_ca_weight();
}

namespace detail {

// Expected weekday view count for a (folder, week) cell before archetype and
// student multipliers. Exam weeks (6 and 12) and revision week spike.
inline double base_activity(const CourseSchedule& schedule, int folder, int week) {
  const auto& f = schedule.folders.at(folder - 1);
  if (week < f.release_week) return 0.0;
  double rate = 0.0;
  if (folder <= kTeachingWeeks) {
    if (week < folder) rate = 0.8;
    else if (week == folder) rate = 5.0;
    else if (week == folder + 1) rate = 2.5;
    else if (week == kRevisionWeek) rate = 1.5;
    else if (week == kExamPeriodWeek) rate = 1.0;
    else rate = 0.6;
  } else if (f.name == "lecture_question_solutions") {
    rate = week <= kTeachingWeeks ? 1.5 : 2.0;
  } else if (f.name == "course_information") {
    rate = week == 1 ? 4.0 : week == 2 ? 2.0 : 0.5;
  } else {
    rate = week <= 10 ? 0.2 : week <= kTeachingWeeks ? 1.0 : week == kRevisionWeek ? 4.0 : 3.0;
  }
  if (week == 6) rate *= 1.8;
  if (week == 12) rate *= 2.0;
  return rate;
}

inline int overdispersed_count(Rng& rng, double mean, double shape) {
  if (mean <= 0.0) return 0;
  std::gamma_distribution<double> gamma(shape, 1.0 / shape);
  std::poisson_distribution<int> pois(mean * gamma(rng));
  return pois(rng);
}

template <class T>
std::size_t draw_category(Rng& rng, const T& weights) {
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

}  // namespace detail

// Deterministic in cfg. Each student gets a planted archetype, a latent
// ability and background; CA scores and the exam load on ability; activity
// counts follow archetype-specific Poisson-gamma rates.
inline GeneratedCohort generate_cohort(const CohortGenConfig& cfg, const CourseSchedule& schedule) {
  validate_config(cfg, schedule);
  Rng rng = make_rng(cfg.seed, {0x636f686f7274ULL});
  std::normal_distribution<double> std_normal(0.0, 1.0);

  static const std::vector<std::vector<double>> background_probs = {
      {0.45, 0.55},
      {0.5, 0.3, 0.2},
      {0.85, 0.1, 0.05},
      {0.7, 0.15, 0.1, 0.05},
      {0.3, 0.15, 0.12, 0.08, 0.08, 0.07, 0.06, 0.05, 0.05, 0.04},
      {0.8, 0.2},
  };

  // Exact planted proportions (largest remainder), then shuffled.
  std::vector<int> labels;
  {
    std::size_t k = cfg.archetype_proportions.size();
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double exact = cfg.archetype_proportions[i] * static_cast<double>(cfg.n_students);
      counts[i] = static_cast<std::size_t>(std::floor(exact));
      assigned += counts[i];
      rema.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(rema.begin(), rema.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < cfg.n_students; ++j, ++assigned) counts[rema[j % k].second]++;
    for (std::size_t i = 0; i < k; ++i) labels.insert(labels.end(), counts[i], static_cast<int>(i));
    std::shuffle(labels.begin(), labels.end(), rng);
  }

  GeneratedCohort out;
  out.records.reserve(cfg.n_students);
  const auto& fields = background_fields();
  for (std::size_t s = 0; s < cfg.n_students; ++s) {
    StudentRecord r;
    char code[32];
    std::snprintf(code, sizeof(code), "S%04zu", s + 1);
    r.student_code = code;
    const auto& arch = cfg.archetypes[labels[s]];

    double ability = arch.ability_shift;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      r.background[i] = fields[i].levels[detail::draw_category(rng, background_probs[i])];
      for (auto& e : cfg.signal.background_effects)
        if (e.field == fields[i].name && e.level == r.background[i]) ability += e.shift;
    }
    ability += std_normal(rng);

    for (auto& sig : cfg.signal.ca) {
      double eps = std_normal(rng);
      double score = sig.mean + sig.loading * ability + sig.noise_sd * eps;
      r.ca_results[sig.item] = std::clamp(score, 0.0, 100.0);
    }

    double intensity = std::exp(cfg.intensity_sd * std_normal(rng));
    for (int f = 1; f <= kFolderCount; ++f)
      for (int w = 1; w <= kActivityWeeks; ++w) {
        double base = cfg.activity_scale * detail::base_activity(schedule, f, w);
        r.activity.at(f, w, DayClass::weekday) =
            detail::overdispersed_count(rng, base * arch.weekday_multiplier * intensity, cfg.count_shape);
        r.activity.at(f, w, DayClass::sunday) =
            detail::overdispersed_count(rng, 0.6 * base * arch.sunday_multiplier * intensity, cfg.count_shape);
      }

    double wca = weighted_ca(r, schedule);
    double exam = cfg.signal.exam_mean + cfg.signal.exam_ability_loading * ability +
                  cfg.signal.exam_ca_loading * (wca - 50.0) + cfg.noise_sd * std_normal(rng);
    exam = std::clamp(exam, 0.0, 100.0);
    r.final_grade = std::clamp(0.4 * wca + 0.6 * exam, 0.0, 100.0);

    out.records.push_back(std::move(r));
    out.archetype.push_back(labels[s]);
    out.ability.push_back(ability);
  }
  return out;
}

}  // namespace ews
