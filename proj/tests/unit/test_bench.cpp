#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sampa/bench/config.hpp"
#include "sampa/bench/experiment.hpp"
#include "sampa/bench/presets.hpp"
#include "sampa/errors.hpp"

namespace sampa::bench {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("sampa_" + tag + "_" + info->name());
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

constexpr std::string_view kMinimal = R"(
[problem]
name = toy_quadratic

[method]
name = sampa_lambda
)";

TEST(ConfigParse, MinimalDefaults) {
  const ExperimentConfig c = parse_config(kMinimal);
  ASSERT_EQ(c.methods.size(), 1u);
  EXPECT_EQ(c.methods[0].spec.method, Method::sampa_lambda);
  EXPECT_EQ(c.methods[0].spec.lambda, kDefaultLambda);
  EXPECT_EQ(c.methods[0].spec.rho, 0.1);
  EXPECT_EQ(c.methods[0].label, "sampa_lambda");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{42}));
  EXPECT_EQ(c.mode, Mode::serial);
  EXPECT_EQ(c.problem.dim, 2u);
}

TEST(ConfigParse, DefaultRho) {
  EXPECT_EQ(default_rho(Method::sam, 0.0), 0.05);
  EXPECT_EQ(default_rho(Method::sampa_lambda, 0.0), 0.05);
  EXPECT_EQ(default_rho(Method::sampa_lambda, 0.2), 0.1);
}

TEST(ConfigParse, DuplicateKeyNamesBothLines) {
  const std::string err = config_error("[problem]\nname = toy_quadratic\n[method]\nname = sam\nrho = 0.1\nrho = 0.2\n");
  EXPECT_NE(err.find("line 6"), std::string::npos) << err;
  EXPECT_NE(err.find("line 5"), std::string::npos) << err;
  EXPECT_NE(err.find("rho"), std::string::npos) << err;
}

TEST(ConfigParse, NegativeRho) {
  const std::string err = config_error("[problem]\nname = toy_quadratic\n[method]\nname = sam\nrho = -0.1\n");
  EXPECT_NE(err.find("rho must be >= 0"), std::string::npos) << err;
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}

TEST(ConfigParse, UnknownKeyAndSection) {
  const std::string err = config_error("[problem]\nname = toy_quadratic\nsize = 3\n[method]\nname = sam\n");
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
  EXPECT_NE(err.find("size"), std::string::npos) << err;
  EXPECT_NE(config_error("[problem]\nname = toy_quadratic\n[methods]\nname = sam\n"), "");
}

TEST(ConfigParse, UnknownNames) {
  EXPECT_NE(config_error("[problem]\nname = rosenbrock\n[method]\nname = sam\n").find("rosenbrock"),
            std::string::npos);
  EXPECT_NE(config_error("[problem]\nname = toy_quadratic\n[method]\nname = adam\n").find("adam"), std::string::npos);
}

TEST(ConfigParse, MissingSections) {
  EXPECT_NE(config_error("[method]\nname = sam\n").find("[problem]"), std::string::npos);
  EXPECT_NE(config_error("[problem]\nname = toy_quadratic\n").find("[method]"), std::string::npos);
}

TEST(ConfigParse, ParallelNeedsSampa) {
  const std::string err = config_error("[problem]\nname = toy_quadratic\n[method]\nname = sam\n[run]\nmode = parallel\n");
  EXPECT_NE(err.find("mode = parallel requires method sampa_lambda, got 'sam'"), std::string::npos) << err;
}

TEST(ConfigParse, EmptyAndDuplicateMethods) {
  ExperimentConfig c = parse_config(kMinimal);
  c.methods.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = parse_config(kMinimal);
  c.methods.push_back(c.methods[0]);
  EXPECT_THROW(c.validate(), ConfigError);
  c = parse_config(kMinimal);
  c.seeds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ConfigParse, SeedLists) {
  EXPECT_EQ(parse_seed_list("1,3-5, 9"), (std::vector<std::uint64_t>{1, 3, 4, 5, 9}));
  EXPECT_THROW(parse_seed_list("x"), ConfigError);
  EXPECT_THROW(parse_seed_list("5-3"), ConfigError);
}

TEST(ConfigParse, TextRoundTrip) {
  for (auto name : preset_names()) {
    const ExperimentConfig c = load_preset(name);
    const std::string text = to_config_text(c);
    const ExperimentConfig back = parse_config(text);
    EXPECT_EQ(to_config_text(back), text) << name;
    EXPECT_EQ(config_hash(back), config_hash(c)) << name;
    EXPECT_EQ(config_hash(c).size(), 16u);
  }
}

TEST(Presets, AllParse) {
  EXPECT_EQ(preset_names().size(), 6u);
  for (auto name : preset_names()) EXPECT_NO_THROW(load_preset(name)) << name;
  EXPECT_THROW(preset_text("fig2"), ConfigError);
  const ExperimentConfig fig1 = load_preset("fig1");
  EXPECT_EQ(fig1.methods.size(), 4u);
  EXPECT_EQ(fig1.seeds.size(), 5u);
  EXPECT_EQ(fig1.T, 2000u);
}

TEST(Experiment, Fig1WritesTracesAndSummary) {
  TempDir dir("fig1");
  ExperimentConfig c = load_preset("fig1");
  c.out_dir = dir.path();
  const ExperimentResult r = run_experiment(c, 4);
  ASSERT_TRUE(r.all_ok());
  std::size_t traces = 0;
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    if (entry.path().filename().string().rfind("trace_", 0) == 0) ++traces;
  }
  EXPECT_EQ(traces, 20u);
  EXPECT_TRUE(fs::exists(dir.path() / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "plot_vs_step.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "plot_vs_time.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "MANIFEST"));
  EXPECT_FALSE(fs::exists(dir.path() / "failures.csv"));
  const auto* sam = r.summary.find("sam");
  const auto* sampa0 = r.summary.find("sampa0");
  ASSERT_TRUE(sam && sampa0);
  EXPECT_EQ(sam->runs, 5u);
  EXPECT_LE(sam->final_f_mean, 1e-3);
  EXPECT_LE(sampa0->final_f_mean, 1e-3);
}

TEST(Experiment, SummaryMatchesTraceFiles) {
  TempDir dir("recompute");
  ExperimentConfig c = load_preset("timing");
  c.T = 60;
  c.seeds = {1, 2, 3};
  c.out_dir = dir.path();
  const ExperimentResult r = run_experiment(c, 2);
  ASSERT_TRUE(r.all_ok());
  for (const auto& m : r.summary.methods) {
    std::vector<double> finals;
    for (std::uint64_t s : c.seeds) {
      const auto rows = read_trace_csv(dir.path() / ("trace_" + m.label + "_seed" + std::to_string(s) + ".csv"));
      ASSERT_FALSE(rows.empty());
      EXPECT_EQ(rows.back().t, c.T);
      finals.push_back(rows.back().f);
    }
    double mean = 0.0;
    for (double v : finals) mean += v;
    mean /= double(finals.size());
    double var = 0.0;
    for (double v : finals) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / double(finals.size() - 1));
    EXPECT_NEAR(m.final_f_mean, mean, 1e-14 * std::max(1.0, std::abs(mean))) << m.label;
    EXPECT_NEAR(m.final_f_std, sd, 1e-12 * std::max(1.0, sd)) << m.label;
  }
  const auto* sampa = r.summary.find("sampa");
  ASSERT_TRUE(sampa);
  EXPECT_NEAR(sampa->speedup_vs_sam, 2.0 / (1.0 + c.timing.t_comm), 1e-12);
}

TEST(Experiment, RerunIsByteIdentical) {
  TempDir a("rerun_a");
  TempDir b("rerun_b");
  ExperimentConfig c = load_preset("alignment");
  c.T = 50;
  c.out_dir = a.path();
  run_experiment(c, 1);
  c.out_dir = b.path();
  run_experiment(c, 3);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a.path())) {
    const auto name = entry.path().filename();
    if (name == "config.ini" || name == "MANIFEST") continue;  // these name the output directory
    EXPECT_EQ(slurp(entry.path()), slurp(b.path() / name)) << name;
    ++compared;
  }
  EXPECT_GT(compared, 5u);
}

TEST(Experiment, ParallelModeMatchesSerial) {
  TempDir a("serial");
  TempDir b("parallel");
  ExperimentConfig c = load_preset("alignment");
  c.T = 40;
  c.seeds = {4};
  c.analysis = Analysis::none;
  c.out_dir = a.path();
  run_experiment(c);
  c.mode = Mode::parallel;
  c.out_dir = b.path();
  run_experiment(c);
  EXPECT_EQ(slurp(a.path() / "trace_sampa_seed4.csv"), slurp(b.path() / "trace_sampa_seed4.csv"));
}

TEST(Experiment, FailuresAreRecordedPerPair) {
  TempDir dir("diverge");
  ExperimentConfig c = parse_config(
      "[problem]\nname = toy_quadratic\n[method]\nname = sgd\n[method]\nname = sam\n"
      "[schedule]\nkind = constant\neta0 = 1e154\n[run]\nT = 50\nseeds = 1,2\n");
  c.methods[0].spec.rho = 0.0;
  c.out_dir = dir.path();
  const ExperimentResult r = run_experiment(c);
  EXPECT_FALSE(r.all_ok());
  for (const auto& p : r.pairs) {
    EXPECT_FALSE(p.ok);
    EXPECT_TRUE(p.failed_step.has_value());
  }
  EXPECT_TRUE(fs::exists(dir.path() / "failures.csv"));
  EXPECT_EQ(r.summary.find("sam")->failures, 2u);
}

TEST(LambdaSweep, ElevenPointsAndEndpoints) {
  TempDir dir("sweep");
  ExperimentConfig c = load_preset("lambda-sweep");
  c.T = 40;
  c.seeds = {1};
  c.out_dir = dir.path();
  const SweepResult r = lambda_sweep(c, c.sweep_lambdas, 4);
  ASSERT_EQ(r.points.size(), 11u);
  EXPECT_TRUE(fs::exists(dir.path() / "lambda_sweep.csv"));
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    EXPECT_NEAR(r.points[i].lambda, 0.1 * double(i), 1e-12);
    EXPECT_EQ(r.points[i].summary.runs, 1u);
  }
  EXPECT_THROW(lambda_sweep(c, {0.5, 1.5}), ConfigError);
}

TEST(LambdaSweep, LambdaOneFollowsOptGd) {
  TempDir dir("optgd");
  ExperimentConfig c = parse_config(
      "[problem]\nname = logistic_regression\nn = 100\ndim = 5\n"
      "[method]\nname = sampa_lambda\nlabel = s1\nlambda = 1\n"
      "[method]\nname = optgd\nrho = 0\n"
      "[schedule]\nkind = constant\neta0 = 0.3\n[run]\nT = 80\nbatch_size = 10\nseeds = 3\n");
  c.out_dir = dir.path();
  ASSERT_TRUE(run_experiment(c).all_ok());
  const auto a = read_trace_csv(dir.path() / "trace_s1_seed3.csv");
  const auto b = read_trace_csv(dir.path() / "trace_optgd_seed3.csv");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].f, b[i].f) << i;
}

#ifdef SAMPA_BENCH_EXE
int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SAMPA_BENCH_EXE + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  fs::create_directories(dir.path());
  EXPECT_EQ(run_cli("--list-presets"), 0);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("--preset fig1 --print-config"), 0);
  EXPECT_EQ(run_cli("--preset nope"), 2);
  EXPECT_EQ(run_cli(""), 2);

  const fs::path bad = dir.path() / "bad.ini";
  std::ofstream(bad) << "[problem]\nname = toy_quadratic\n[method]\nname = sam\nrho = -0.1\n";
  EXPECT_EQ(run_cli("--config " + bad.string()), 2);

  const fs::path diverge = dir.path() / "diverge.ini";
  std::ofstream(diverge) << "[problem]\nname = toy_quadratic\n[method]\nname = sam\n"
                            "[schedule]\nkind = constant\neta0 = 1e154\n[run]\nT = 20\n";
  EXPECT_EQ(run_cli("--config " + diverge.string() + " --out " + (dir.path() / "d").string()), 3);

  const fs::path ok = dir.path() / "ok.ini";
  std::ofstream(ok) << "[problem]\nname = toy_quadratic\n[method]\nname = sampa_lambda\n[run]\nT = 20\n";
  EXPECT_EQ(run_cli("--config " + ok.string() + " --out " + (dir.path() / "o").string() + " --mode parallel"), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "o" / "summary.csv"));
}
#endif

}  // namespace
}  // namespace sampa::bench
