#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "nnlsgd/problem.hpp"
#include "nnlsgd/solvers.hpp"
#include "nnlsgd/table.hpp"
#include "nnlsgd/textdoc.hpp"
#include "nnlsgd_cli/cli.hpp"

namespace {

namespace fs = std::filesystem;
using namespace nnlsgd;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run nnls(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"nnls"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    ::setenv(name, value, 1);
  }
  ~ScopedEnv() { ::unsetenv(name_); }
  ScopedEnv(const ScopedEnv&) = delete;
  ScopedEnv& operator=(const ScopedEnv&) = delete;

 private:
  const char* name_;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nnlsgd_cli_" + std::string(::testing::UnitTest::GetInstance()
                                            ->current_test_info()
                                            ->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string clamp_instance() const {
    NnlsProblem p;
    p.A = DenseMatrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    p.y = {1.0, -1.0};
    p.label = "clamp";
    const auto f = path("clamp.txt");
    save_problem(p, f);
    return f;
  }

  fs::path dir_;
};

std::string slurp(const std::string& f) {
  std::ifstream in(f, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(CliHelp, MatchesSnapshots) {
  for (const std::string cmd : {"", "generate", "solve", "check", "experiment"}) {
    const std::string file = std::string(NNLSGD_SNAPSHOT_DIR) + "/help_" +
                             (cmd.empty() ? "nnls" : cmd) + ".txt";
    const std::string text = cli::help_text(cmd);
    if (std::getenv("NNLSGD_UPDATE_SNAPSHOTS") != nullptr) {
      std::ofstream(file, std::ios::binary) << text;
    }
    EXPECT_EQ(text, slurp(file)) << "snapshot " << file;
  }
}

TEST(CliHelp, HelpFlagExitsZero) {
  const auto r = nnls({"solve", "--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_EQ(r.out, cli::help_text("solve"));
  EXPECT_EQ(nnls({"--version"}).code, cli::kExitOk);
}

TEST(CliUsage, BadInvocationsExitTwo) {
  EXPECT_EQ(nnls({}).code, cli::kExitUsage);
  EXPECT_EQ(nnls({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(nnls({"generate"}).code, cli::kExitUsage);
  EXPECT_EQ(nnls({"generate", "--out", "x", "--q", "1.5"}).code, cli::kExitUsage);
  EXPECT_EQ(nnls({"solve", "--input", "x", "--method", "simplex"}).code,
            cli::kExitUsage);
  EXPECT_EQ(nnls({"experiment"}).code, cli::kExitUsage);
  EXPECT_EQ(nnls({"experiment", "--kind", "timing", "--spec", "f"}).code,
            cli::kExitUsage);
  EXPECT_EQ(nnls({"experiment", "--kind", "timing", "--full-scale"}).code,
            cli::kExitUsage);
}

TEST(CliParseStep, Forms) {
  EXPECT_EQ(std::get<ConstantStep>(cli::parse_step("const:0.5")).eta, 0.5);
  EXPECT_EQ(std::get<BarzilaiBorweinStep>(cli::parse_step("bb")).eta0, 1e-2);
  EXPECT_EQ(std::get<LipschitzOracleStep>(cli::parse_step("lipschitz:7")).refresh_every,
            7u);
  EXPECT_EQ(std::get<NesterovStep>(cli::parse_step("nesterov:0.1")).eta, 0.1);
  for (const char* bad : {"const", "const:-1", "const:abc", "lipschitz:2.5",
                          "nesterov", "newton"}) {
    EXPECT_THROW(cli::parse_step(bad), std::invalid_argument) << bad;
  }
}

TEST_F(CliTest, ActiveSetClampsNegativeTarget) {
  const auto in = clamp_instance();
  const auto rep = path("rep.txt");
  const auto r = nnls({"solve", "--input", in, "--method", "lh", "--out-report", rep});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto doc = TextDocument::read_file(rep);
  EXPECT_EQ(doc.required_reals("x"), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(doc.required("kkt_certified"), "1");
  EXPECT_EQ(doc.required("rank_deficient"), "0");
  EXPECT_NE(r.out.find("# nnls solve\n"), std::string::npos);

  const auto c = nnls({"check", "--input", in, "--solution", rep});
  EXPECT_EQ(c.code, cli::kExitOk);
  EXPECT_NE(c.out.find("certified = yes"), std::string::npos);
}

TEST_F(CliTest, CheckRejectsNonOptimalPoint) {
  const auto in = clamp_instance();
  const auto sol = path("bad.txt");
  std::ofstream(sol) << "x = 1 -1\n";
  const auto c = nnls({"check", "--input", in, "--solution", sol});
  EXPECT_EQ(c.code, cli::kExitFailure);
  EXPECT_NE(c.out.find("certified = no"), std::string::npos);
}

TEST_F(CliTest, SolveArgumentErrors) {
  const auto in = clamp_instance();
  const auto r = nnls({"solve", "--input", in, "--layers", "1"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("layers must be ≥ 2"), std::string::npos);
  EXPECT_EQ(nnls({"solve", "--input", in, "--method", "lh", "--step", "bb"}).code,
            cli::kExitUsage);
  EXPECT_EQ(nnls({"solve", "--input", in, "--seed", "3"}).code, cli::kExitUsage);
  EXPECT_EQ(nnls({"solve", "--input", in, "--step", "warp"}).code, cli::kExitUsage);
  EXPECT_EQ(nnls({"solve", "--input", path("missing.txt")}).code, cli::kExitFailure);
}

TEST_F(CliTest, DivergenceReportsLastTraceRow) {
  const auto in = clamp_instance();
  const auto r = nnls({"solve", "--input", in, "--step", "const:1000", "--alpha", "2"});
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("error: "), std::string::npos);
  EXPECT_NE(r.err.find("last trace row: "), std::string::npos);
}

TEST_F(CliTest, GenerateSolveRoundTrip) {
  const auto prob = path("p.txt");
  ASSERT_EQ(nnls({"generate", "--m", "12", "--n", "20", "--sparsity", "2", "--seed",
                  "4", "--out", prob})
                .code,
            cli::kExitOk);
  const auto p = load_problem(prob);
  EXPECT_EQ(p.A, gen_gaussian_matrix(12, 20, 4));
  const auto rep = path("r.txt");
  const auto trace = path("t.csv");
  const auto r = nnls({"solve", "--input", prob, "--method", "pgd", "--out-report", rep,
                       "--out-trace", trace, "--trace-every", "10"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto t = read_csv(trace);
  EXPECT_EQ(t.columns().front().name, "iter");
  EXPECT_GT(t.num_rows(), 0u);
  EXPECT_EQ(nnls({"check", "--input", prob, "--solution", rep, "--tol", "1e-6"}).code,
            cli::kExitOk);
}

TEST_F(CliTest, OutputIsByteDeterministic) {
  const auto a = path("a.txt"), b = path("b.txt");
  nnls({"generate", "--seed", "8", "--q", "0.3", "--out", a});
  nnls({"generate", "--seed", "8", "--q", "0.3", "--out", b});
  EXPECT_EQ(slurp(a), slurp(b));
  const auto s1 = nnls({"solve", "--input", a, "--method", "sgd", "--seed", "2",
                        "--max-iters", "500"});
  const auto s2 = nnls({"solve", "--input", a, "--method", "sgd", "--seed", "2",
                        "--max-iters", "500"});
  ASSERT_EQ(s1.code, cli::kExitOk) << s1.err;
  EXPECT_EQ(s1.out, s2.out);
  const auto e1 = nnls({"experiment", "--kind", "timing", "--no-wall-time", "--trials",
                        "1", "--format", "text"});
  ASSERT_EQ(e1.code, cli::kExitOk) << e1.err;
  EXPECT_EQ(e1.out.find("wall_seconds"), std::string::npos);
}

TEST_F(CliTest, EnvironmentSeedOverridesFlag) {
  const auto a = path("a.txt"), b = path("b.txt");
  {
    ScopedEnv env("NNLS_SEED", "17");
    EXPECT_EQ(nnls({"generate", "--seed", "1", "--out", a}).code, cli::kExitOk);
  }
  nnls({"generate", "--seed", "17", "--out", b});
  EXPECT_EQ(slurp(a), slurp(b));
  ScopedEnv bad("NNLS_SEED", "-3");
  EXPECT_EQ(nnls({"generate", "--out", a}).code, cli::kExitUsage);
}

TEST_F(CliTest, ExperimentSpecFileRerunsFromOutput) {
  const auto spec = path("spec.txt");
  std::ofstream(spec) << "kind = stability\nq_grid = 0 0.5\nmethods = lh pgd\n"
                         "trials = 2\nmax_iters = 500\n";
  const auto out1 = path("o1.csv");
  ASSERT_EQ(nnls({"experiment", "--spec", spec, "--out", out1, "--no-wall-time"}).code,
            cli::kExitOk);
  const auto t = read_csv(out1);
  EXPECT_EQ(t.meta("spec.q_grid"), "0 0.5");
  std::ofstream bad(path("bad.txt"));
  bad << "kind = stability\ntrials = 0\n";
  bad.close();
  EXPECT_EQ(nnls({"experiment", "--spec", path("bad.txt")}).code, cli::kExitUsage);
}

TEST_F(CliTest, InstalledBinaryRuns) {
  const std::string cmd = std::string(NNLSGD_CLI_PATH) + " generate --m 3 --n 4 --sparsity 1 --out " +
                          path("bin.txt") + " > " + path("stdout.txt");
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(path("bin.txt")));
  const std::string bad = std::string(NNLSGD_CLI_PATH) + " solve 2> /dev/null";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), cli::kExitUsage);
}

}  // namespace
