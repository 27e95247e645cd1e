#include <gtest/gtest.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <unistd.h>

#include "commands.hpp"
#include "run_config.hpp"

using namespace eqstop;
using namespace eqstop::cli;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// CSV data rows (comment and header dropped) split into fields.
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& l : lines(text)) {
    if (l.empty() || l[0] == '#' || std::isalpha(static_cast<unsigned char>(l[0]))) continue;
    rows.push_back(split(l, ','));
  }
  return rows;
}

int run(std::vector<const char*> args, std::string* out = nullptr, std::string* err = nullptr) {
  args.insert(args.begin(), "eqstop");
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(args.size()), args.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& content) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("eqstop_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".cfg");
    std::ofstream(path) << content;
  }
  ~TempFile() { std::filesystem::remove(path); }
  std::string str() const { return path.string(); }
};

RunConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RunConfig c;
  c.problem = {0.05 + u(rng), 0.5 + 10 * u(rng), 0.05 + 0.9 * u(rng), 0.1 * u(rng) + 0.01,
               0.2 + 3 * u(rng)};
  c.grid = 3 + rng() % 5000;
  if (u(rng) < 0.5) c.x_min = u(rng) * 1e-2;
  if (u(rng) < 0.5) c.x_max = 1 + u(rng) * 10;
  if (u(rng) < 0.5) c.dt = std::ldexp(u(rng), -10);
  c.paths = 1 + rng() % 100000;
  c.seed = rng();
  c.t_max = u(rng) < 0.5 ? 0.0 : 50 * u(rng);
  c.tail_mode = u(rng) < 0.5 ? pathsim::TailMode::Truncate : pathsim::TailMode::AnalyticCorrection;
  for (int i = 0, n = static_cast<int>(rng() % 4); i < n; ++i) c.eval_states.push_back(5 * u(rng));
  c.h_list.clear();
  for (int i = 0, n = 1 + static_cast<int>(rng() % 3); i < n; ++i) c.h_list.push_back(u(rng) / (i + 1));
  c.x = 0.1 + u(rng);
  c.format = u(rng) < 0.5 ? OutputFormat::Json : OutputFormat::Kv;
  if (u(rng) < 0.3) c.out = "out_" + std::to_string(rng() % 1000) + ".txt";
  c.candidate = static_cast<Candidate>(rng() % 3);
  return c;
}

}  // namespace

TEST(Config, DefaultsDescribeTheMixedFigure) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.problem, (RealOptionProblem{0.2, 3.0, 0.5, 0.2, 2.0}));
  EXPECT_EQ(c.grid, 2001u);
  EXPECT_EQ(c.seed, 20240611u);
  EXPECT_EQ(c.candidate, Candidate::Equilibrium);
}

TEST(Config, ParsesEntriesCommentsAndLists) {
  const auto c = parse_config(
      "# comment\n"
      "sigma2: 0.3   # trailing\n"
      "\n"
      "  K : 4\n"
      "r2: 0.8\n"
      "eval_states: 1, 2.5,3\n"
      "h_list: 0.1,0.05\n"
      "tail_mode: truncate\n"
      "format: json\n"
      "candidate: pure\n"
      "regime: mixed\n"
      "xlow: 2.7\n");
  EXPECT_EQ(c.problem.sigma2, 0.3);
  EXPECT_EQ(c.problem.strike, 4.0);
  EXPECT_EQ(c.problem.r2, 0.8);
  EXPECT_EQ(c.eval_states, (std::vector<double>{1.0, 2.5, 3.0}));
  EXPECT_EQ(c.h_list, (std::vector<double>{0.1, 0.05}));
  EXPECT_EQ(c.tail_mode, pathsim::TailMode::Truncate);
  EXPECT_EQ(c.format, OutputFormat::Json);
  EXPECT_EQ(c.candidate, Candidate::ForcePure);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("sigma: 0.2\n"), ConfigError);
  EXPECT_THROW(parse_config("K: 3\nK: 4\n"), ConfigError);
  EXPECT_THROW(parse_config("K 3\n"), ConfigError);
  EXPECT_THROW(parse_config("K: 3x\n"), ConfigError);
  EXPECT_THROW(parse_config("K:\n"), ConfigError);
  EXPECT_THROW(parse_config("grid: -5\n"), ConfigError);
  EXPECT_THROW(parse_config("seed: 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("tail_mode: fast\n"), ConfigError);
  EXPECT_THROW(parse_config("eval_states: 1,,2\n"), ConfigError);
  EXPECT_THROW(parse_config("format: yaml\n"), ConfigError);
}

TEST(Config, ParseErrorsNameTheKey) {
  try {
    parse_config("p: half\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("p"), std::string::npos);
  }
}

TEST(Config, WriteParseRoundTripOverRandomConfigs) {
  std::mt19937_64 rng(0xc0f1);
  for (int i = 0; i < 300; ++i) {
    const RunConfig c = random_config(rng);
    EXPECT_EQ(parse_config(write_config(c)), c) << write_config(c);
  }
}

TEST(Config, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    double v;
    const std::uint64_t bits = rng();
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(parse_double(format_double(v), "v"), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(3.0), "3");
  EXPECT_THROW(parse_double("nan", "v"), ConfigError);
  EXPECT_THROW(parse_double("", "v"), ConfigError);
}

TEST(Solve, DocumentForTheMixedFigure) {
  const auto doc = cmd_solve(RunConfig{});
  const auto j = nlohmann::json::parse(doc.render(OutputFormat::Json));
  EXPECT_EQ(j["regime"], "mixed");
  EXPECT_NEAR(j["xlow"].get<double>(), 30.0 / 11.0, 1e-12);
  EXPECT_NEAR(j["xbar"].get<double>(), 3.3, 1e-12);
  EXPECT_NEAR(j["push"].get<double>(), 121.0 / 126.0, 1e-12);
  EXPECT_NEAR(j["lambda_at_xlow"].get<double>(), 22.0 / 7.0, 1e-10);
  EXPECT_NEAR(j["a1"].get<double>(), -10.0 / 9.0, 1e-12);
  EXPECT_NEAR(j["b2"].get<double>(), -2.0 / 3.0, 1e-12);
  EXPECT_FALSE(j.contains("threshold"));
}

TEST(Solve, PureFigureReportsThreshold) {
  RunConfig c;
  c.problem.r2 = 0.8;
  const auto j = nlohmann::json::parse(cmd_solve(c).render(OutputFormat::Json));
  EXPECT_EQ(j["regime"], "pure");
  EXPECT_NEAR(j["threshold"].get<double>(), 2.0233687939614087, 1e-12);
  EXPECT_FALSE(j.contains("push"));
}

TEST(Solve, OutputFedBackAsConfigReproducesItself) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    RunConfig c;
    c.problem = {0.05 + u(rng), 0.5 + 9.5 * u(rng), 0.05 + 0.9 * u(rng), 0.05 + u(rng), 0.0};
    c.problem.r2 = c.problem.r1 + 0.05 + 3 * u(rng);
    const std::string first = cmd_solve(c).render(OutputFormat::Kv);
    const RunConfig back = parse_config(first);
    EXPECT_EQ(back.problem, c.problem);
    EXPECT_EQ(cmd_solve(back).render(OutputFormat::Kv), first);
  }
}

TEST(Classify, ReportsTheRegimeInequality) {
  const auto j = nlohmann::json::parse(cmd_classify(RunConfig{}).render(OutputFormat::Json));
  EXPECT_EQ(j["regime"], "mixed");
  EXPECT_NEAR(j["regime_lhs"].get<double>(), 3.5, 1e-12);
  EXPECT_NEAR(j["regime_rhs"].get<double>(), 3.85, 1e-12);
}

TEST(Verify, ExitCodes) {
  EXPECT_EQ(run_command("verify", RunConfig{}).exit_code, kExitOk);
  RunConfig b;
  b.problem.r2 = 0.8;
  EXPECT_EQ(run_command("verify", b).exit_code, kExitOk);
  RunConfig forced;
  forced.candidate = Candidate::ForcePure;
  const auto res = run_command("verify", forced);
  EXPECT_EQ(res.exit_code, kExitCheckFailed);
  EXPECT_NE(res.output.find("cond_III: false"), std::string::npos);
  EXPECT_NE(res.output.find("verified: false"), std::string::npos);
}

TEST(Verify, InvalidProblemIsInvalidInput) {
  RunConfig c;
  c.problem.p = 1.0;
  const auto res = run_command("verify", c);
  EXPECT_EQ(res.exit_code, kExitInvalidInput);
  EXPECT_NE(res.error.find("p"), std::string::npos);
  c = {};
  c.problem.r2 = 0.1;
  EXPECT_EQ(run_command("solve", c).exit_code, kExitInvalidInput);
  EXPECT_EQ(run_command("nonsense", RunConfig{}).exit_code, kExitInvalidInput);
}

TEST(Simulate, DeterministicCsvWithExactUpperRows) {
  RunConfig c;
  c.paths = 300;
  c.eval_states = {1.0, 3.4, 4.0};
  const auto first = run_command("simulate", c);
  ASSERT_EQ(first.exit_code, kExitOk) << first.error;
  EXPECT_EQ(run_command("simulate", c).output, first.output);
  const auto ls = lines(first.output);
  ASSERT_GE(ls.size(), 2u);
  EXPECT_EQ(ls[0].rfind("# eqstop simulate master_seed=20240611", 0), 0u);
  EXPECT_EQ(ls[1], "x,J_closed,J_mc,J_se,w1_mc,w2_mc,tail_bias_bound,n_paths,dt");
  const auto rows = csv_rows(first.output);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 1; i < 3; ++i) {
    EXPECT_EQ(std::stod(rows[i][2]), 3.0);
    EXPECT_EQ(std::stod(rows[i][3]), 0.0);
  }
  EXPECT_LE(std::abs(std::stod(rows[0][2]) - std::stod(rows[0][1])),
            std::max(3.0 * std::stod(rows[0][3]), 0.03));
  c.seed = 1;
  EXPECT_NE(run_command("simulate", c).output, first.output);
}

TEST(Figure, ShapeOfTheCurves) {
  RunConfig c;
  c.grid = 401;
  const auto res = run_command("figure", c);
  ASSERT_EQ(res.exit_code, kExitOk);
  const auto s = closedform::solve(c.problem).strategy;
  double prev_lambda = -1.0;
  for (const auto& r : csv_rows(res.output)) {
    const double x = std::stod(r[0]), J = std::stod(r[1]), lambda = std::stod(r[4]);
    if (x >= s.lower) {
      EXPECT_NEAR(J, 3.0, 1e-12) << x;
    }
    if (x < s.lower) {
      EXPECT_LT(J, 3.0);
      EXPECT_EQ(lambda, 0.0);
      EXPECT_EQ(r[5], "continue");
    } else if (x < s.upper) {
      EXPECT_GT(lambda, prev_lambda);
      prev_lambda = lambda;
      EXPECT_EQ(r[5], "randomize");
    } else {
      EXPECT_EQ(r[5], "stop");
    }
  }
  c.problem.r2 = 0.8;
  for (const auto& r : csv_rows(run_command("figure", c).output)) EXPECT_EQ(std::stod(r[4]), 0.0);
}

TEST(Diagnostics, CsvRows) {
  RunConfig c;
  c.paths = 200;
  c.h_list = {0.2, 0.1};
  const auto res = run_command("diagnostics", c);
  ASSERT_EQ(res.exit_code, kExitOk) << res.error;
  EXPECT_EQ(csv_rows(res.output).size(), 2u);
  c.x = 0.1;
  EXPECT_EQ(run_command("diagnostics", c).exit_code, kExitInvalidInput);
}

TEST(Document, KvAndJsonRendering) {
  Document d;
  d.add("a", 1.5).add("b", true).add("c", std::int64_t{7}).add("d", "text");
  EXPECT_EQ(d.render(OutputFormat::Kv), "a: 1.5\nb: true\nc: 7\nd: text\n");
  const auto j = nlohmann::json::parse(d.render(OutputFormat::Json));
  EXPECT_EQ(j["a"], 1.5);
  EXPECT_EQ(j["b"], true);
  EXPECT_EQ(j["c"], 7);
  EXPECT_EQ(j["d"], "text");
  EXPECT_EQ(j.begin().key(), "a");
}

TEST(CommandLine, ExitCodes) {
  std::string out, err;
  EXPECT_EQ(run({"solve"}, &out), 0);
  EXPECT_NE(out.find("regime: mixed"), std::string::npos);
  EXPECT_EQ(run({"--help"}, &out), 0);
  EXPECT_NE(out.find("simulate"), std::string::npos);
  EXPECT_EQ(run({}, nullptr, &err), 2);
  EXPECT_EQ(run({"solve", "--bogus"}), 2);
  EXPECT_EQ(run({"solve", "--config", "/nonexistent/eqstop.cfg"}, nullptr, &err), 2);
  EXPECT_NE(err.find("cannot read"), std::string::npos);
  EXPECT_EQ(run({"verify", "--force-pure"}, &out), 1);
  EXPECT_EQ(run({"verify", "--force-pure", "--force-mixed"}), 2);
  EXPECT_EQ(run({"verify", "--grid", "1001"}), 0);
}

TEST(CommandLine, ConfigFileAndOverrides) {
  TempFile cfg("r2: 0.8\nformat: json\n");
  std::string out;
  ASSERT_EQ(run({"solve", "--config", cfg.str().c_str()}, &out), 0);
  EXPECT_EQ(nlohmann::json::parse(out)["regime"], "pure");

  TempFile bad("r2: 0.1\n");
  std::string err;
  EXPECT_EQ(run({"solve", "--config", bad.str().c_str()}, nullptr, &err), 2);
  EXPECT_NE(err.find("r2"), std::string::npos);

  TempFile unknown("colour: blue\n");
  EXPECT_EQ(run({"solve", "--config", unknown.str().c_str()}), 2);
}

TEST(CommandLine, OutputFileAndSeedOverride) {
  const auto path = std::filesystem::temp_directory_path() / "eqstop_test_sim.csv";
  std::string out;
  ASSERT_EQ(run({"simulate", "--paths", "50", "--seed", "9", "--out", path.string().c_str()}, &out), 0);
  EXPECT_TRUE(out.empty());
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.rfind("# eqstop simulate master_seed=9", 0), 0u);
  std::filesystem::remove(path);
  EXPECT_EQ(run({"solve", "--out", "/nonexistent/dir/x.txt"}), 2);
}
