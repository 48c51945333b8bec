#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace ews;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& s) {
  std::istringstream in(s);
  return parse_config(in, "t.cfg");
}

std::string error_of(const std::string& s) {
  try {
    parse(s);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Scratch directory per test, removed afterwards.
class Cli : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / ("ews_cli_" + std::string(info->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  int run(const std::string& args) {
    std::string cmd = std::string(EWS_CLI_PATH) + " " + args + " >" + (dir / "stdout").string() + " 2>" +
                      (dir / "stderr").string();
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  std::string stderr_text() const { return slurp(dir / "stderr"); }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }
  fs::path write(const std::string& name, const std::string& body) {
    auto p = dir / name;
    std::ofstream(p) << body;
    return p;
  }
  std::string small_config() const {
    return "seed = 5\n"
           "generate.n_students = 40\n"
           "stages = initial,week3,week5\n"
           "methods = pcr,knn\n"
           "folds = 5\n"
           "cluster.k_max = 3\n"
           "scatter.stages = week5\n"
           "scatter.method = pcr\n";
  }
};

}  // namespace

// ------------------------------------------------------------------ parser

TEST(Config, DefaultsAndComments) {
  auto c = parse("# comment\nseed = 42   # trailing\n\n");
  EXPECT_EQ(c.resolved_seed(), 42u);
  EXPECT_EQ(c.folds, 10);
  EXPECT_EQ(c.stages.size(), 15u);
  EXPECT_EQ(c.methods.size(), 8u);
  EXPECT_EQ(c.cluster_stage.index, 5);
}

TEST(Config, ListsAndOverrides) {
  auto c = parse("seed=1\nstages=week5, initial\nmethods=bart,knn\nbart.n_trees=30\nknn.kmax=9\n");
  ASSERT_EQ(c.stages.size(), 2u);
  EXPECT_EQ(c.stages[0].index, 0);  // sorted
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::bart, Method::knn}));
  auto lc = learner_configs(c);
  EXPECT_EQ(std::get<learners::BartConfig>(lc.at(Method::bart).params).n_trees, 30);
  EXPECT_EQ(std::get<learners::KnnConfig>(lc.at(Method::knn).params).kmax, 9);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_of("seed=1\nbart.n_treez=5\n"), "t.cfg:2: unknown parameter 'bart.n_treez'");
  EXPECT_NE(error_of("seed=1\nseed=2\n").find("t.cfg:2: 'seed' already set on line 1"), std::string::npos);
  EXPECT_NE(error_of("folds\n").find("t.cfg:1:"), std::string::npos);
  EXPECT_NE(error_of("colour=blue\n").find("unknown key"), std::string::npos);
  EXPECT_NE(error_of("stages=week13\n").find("t.cfg:1:"), std::string::npos);
  EXPECT_NE(error_of("methods=lasso\n").find("t.cfg:1:"), std::string::npos);
  EXPECT_NE(error_of("seed=-3\n").find("t.cfg:1:"), std::string::npos);
  EXPECT_NE(error_of("folds=1\n").find("t.cfg:1:"), std::string::npos);
}

TEST(Config, WholeConfigValidation) {
  auto sched = default_schedule();
  EXPECT_THROW(validate(parse("folds=5\n"), sched), ConfigError);  // no seed
  EXPECT_THROW(validate(parse("seed=1\ncohort.source=csv\n"), sched), ConfigError);
  EXPECT_THROW(validate(parse("seed=1\ncohort.source=csv\ncohort.path=/no/such/file.csv\n"), sched), ConfigError);
  EXPECT_THROW(validate(parse("seed=1\ncohort.path=x.csv\n"), sched), ConfigError);
  EXPECT_THROW(validate(parse("seed=1\ngenerate.proportions=0.9,0.05,0.04\n"), sched), ConfigError);
  EXPECT_THROW(validate(parse("seed=1\ncluster.stage=initial\n"), sched), ConfigError);
  EXPECT_NO_THROW(validate(parse("seed=1\n"), sched));
}

TEST(Config, EchoIgnoresOutputLocationAndThreads) {
  auto a = config_echo(parse("seed=3\nout=/tmp/a\nthreads=4\n"));
  auto b = config_echo(parse("seed=3\nout=/tmp/b\n"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.front(), "seed=3");
  EXPECT_NE(a, config_echo(parse("seed=4\n")));
}

// --------------------------------------------------------------------- CLI

TEST_F(Cli, MissingSeedIsValidationFailure) {
  EXPECT_EQ(run("generate --out " + (dir / "o").string()), 1);
  EXPECT_NE(stderr_text().find("seed"), std::string::npos);
}

TEST_F(Cli, BadConfigExitsOneWithoutOutput) {
  auto cfg = write("bad.cfg", "seed=1\ngenerate.proportions=0.9,0.05,0.04\n");
  EXPECT_EQ(run("generate --config " + cfg.string() + " --out " + (dir / "o").string()), 1);
  EXPECT_FALSE(fs::exists(dir / "o"));
  auto unknown = write("bad2.cfg", "seed=1\nbart.n_treez=5\n");
  EXPECT_EQ(run("evaluate --config " + unknown.string() + " --out " + (dir / "o").string()), 1);
  EXPECT_NE(stderr_text().find("bad2.cfg:2"), std::string::npos);
}

TEST_F(Cli, UnknownFlagExitsOne) { EXPECT_EQ(run("generate --frobnicate"), 1); }

TEST_F(Cli, GenerateIsDeterministic) {
  ASSERT_EQ(run("generate --seed 9 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("generate --seed 9 --out " + (dir / "b").string()), 0);
  for (auto f : {"cohort.csv", "cohort_manifest.txt", "activity.csv"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  // the written cohort loads back and validates
  auto sched = default_schedule();
  std::ifstream in(dir / "a" / "cohort.csv");
  EXPECT_EQ(parse_cohort(in, sched).size(), 136u);
}

TEST_F(Cli, EvaluateTwiceIsByteIdentical) {
  auto cfg = write("run.cfg", small_config());
  ASSERT_EQ(run("evaluate --quiet --config " + cfg.string() + " --out " + (dir / "a").string()), 0) << stderr_text();
  ASSERT_EQ(run("evaluate --quiet --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
  int files = 0;
  for (auto& e : fs::directory_iterator(dir / "a")) {
    ++files;
    auto name = e.path().filename();
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / name)) << name;
  }
  EXPECT_GE(files, 7);  // report, 4 curves, optimal summary, scatter
  EXPECT_TRUE(fs::exists(dir / "a" / "scatter_week5_pcr_cluster.csv"));
}

TEST_F(Cli, ReportRerendersSummaries) {
  auto cfg = write("run.cfg", small_config());
  ASSERT_EQ(run("evaluate --quiet --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("report --report " + (dir / "a" / "report.txt").string() + " --out " + (dir / "r").string()), 0)
      << stderr_text();
  EXPECT_EQ(slurp(dir / "a" / "curve_cumulative.csv"), slurp(dir / "r" / "curve_cumulative.csv"));
  EXPECT_EQ(slurp(dir / "a" / "optimal_stages.csv"), slurp(dir / "r" / "optimal_stages.csv"));
}

TEST_F(Cli, ClusterCommand) {
  EXPECT_EQ(run("cluster --seed 1 --stage initial --out " + (dir / "c").string()), 1);
  ASSERT_EQ(run("cluster --seed 1 --stage week5 --out " + (dir / "c").string()), 0) << stderr_text();
  auto text = slurp(dir / "c" / "clusters_week5.csv");
  EXPECT_NE(text.find("K=3"), std::string::npos);
}

TEST_F(Cli, CsvSourceAndMissingFile) {
  ASSERT_EQ(run("generate --seed 2 --out " + (dir / "g").string()), 0);
  auto cfg = write("csv.cfg", "seed=2\ncohort.source=csv\ncohort.path=" + (dir / "g" / "cohort.csv").string() +
                                  "\nstages=week3\nfeature_sets=nolms\nmethods=pcr\nscatter.stages=week3\n"
                                  "scatter.method=pcr\nscatter.feature_set=nolms\n");
  EXPECT_EQ(run("evaluate --quiet --config " + cfg.string() + " --out " + (dir / "e").string()), 0) << stderr_text();
  auto missing = write("missing.cfg", "seed=2\ncohort.source=csv\ncohort.path=" + (dir / "nope.csv").string() + "\n");
  EXPECT_EQ(run("evaluate --quiet --config " + missing.string() + " --out " + (dir / "f").string()), 1);
  EXPECT_NE(stderr_text().find("cohort file not found"), std::string::npos);
}

TEST_F(Cli, MalformedCohortNamesRowAndColumn) {
  ASSERT_EQ(run("generate --seed 2 --out " + (dir / "g").string()), 0);
  auto text = slurp(dir / "g" / "cohort.csv");
  // corrupt the final grade of the first data row
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  bool done = false;
  while (std::getline(in, line)) {
    if (!done && !line.empty() && line[0] != '#' && line.rfind("student_code", 0) != 0) {
      line = line.substr(0, line.rfind(',')) + ",abc";
      done = true;
    }
    out << line << '\n';
  }
  auto bad = write("bad.csv", out.str());
  auto cfg = write("c.cfg", "seed=2\ncohort.source=csv\ncohort.path=" + bad.string() + "\n");
  EXPECT_EQ(run("evaluate --quiet --config " + cfg.string() + " --out " + (dir / "e").string()), 1);
  EXPECT_NE(stderr_text().find("FINAL"), std::string::npos) << stderr_text();
}
