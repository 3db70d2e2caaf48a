#include <krein/cli.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace krein;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "krein");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string sample(const std::string& name) { return std::string(KREIN_SAMPLES_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> r;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) r.push_back(c);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Cli, PsiSingleAtom) {
  auto r = run({"psi", "--string", sample("atom1.json"), "--lambda", "1", "--route", "ode"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["psi"].get<double>(), 1.0 / 3, 1e-15);
  EXPECT_GE(j["error_estimate"].get<double>(), 0.0);
  EXPECT_EQ(j["meta"]["version"], version);
  EXPECT_EQ(j["meta"]["config"]["lambda"], "1");
}

TEST(Cli, PsiRoutesAgree) {
  for (const std::string route : {"ode", "triple", "closed"}) {
    auto r = run({"psi", "--string", sample("linear_half.json"), "--lambda", "4", "--route", route});
    ASSERT_EQ(r.code, 0) << route << r.err;
    EXPECT_NEAR(nlohmann::json::parse(r.out)["psi"].get<double>(), 1.0, 1e-9) << route;
  }
}

TEST(Cli, PsiCsv) {
  auto r = run({"psi", "--string", sample("atom1.json"), "--lambda", "1", "--format", "csv"});
  ASSERT_EQ(r.code, 0);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"lambda", "psi", "route", "error_estimate"}));
  EXPECT_NEAR(std::stod(rows[1][1]), 1.0 / 3, 1e-15);
}

TEST(Cli, MalformedStringNamesTheProperty) {
  auto r = run({"psi", "--string", std::string(KREIN_TEST_DATA_DIR) + "/bad_order.json", "--lambda", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("non-decreasing"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("right-continuous"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"psi", "--string", sample("atom1.json"), "--lambda", "1", "--bogus"}).code, 1);
  EXPECT_EQ(run({"psi", "--string", sample("atom1.json"), "--lambda", "1", "--tol", "0"}).code, 1);
  EXPECT_EQ(run({"psi", "--string", "/nonexistent.json", "--lambda", "1"}).code, 1);
  EXPECT_EQ(run({"psi", "--string", sample("atom1.json"), "--lambda", "-1"}).code, 1);
  EXPECT_EQ(run({"mc", "knight", "--string", sample("atom1.json")}).code, 1);
  EXPECT_EQ(run({"stability", "--sigmas", "0.3,0.1"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"--version"}).out, std::string(version) + "\n");
}

TEST(Cli, ConvergenceFailureExitCode) {
  auto r = run({"psi", "--string", sample("fractional_075.json"), "--lambda", "2", "--route", "triple", "--tol", "1e-300"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("estimate"), std::string::npos);
}

TEST(Cli, ApplyHeavisideIsA) {
  auto r = run({"apply", "--op", "laplacian1d", "--n", "8", "--h", "1", "--string", sample("heaviside1.json"), "--route",
                "dtw", "--f", sample("ones8.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"index", "value", "error_estimate"}));
  // tridiag(-1, 2, -1) applied to the ones vector
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(std::stod(rows[i + 1][1]), (i == 0 || i == 7) ? 1.0 : 0.0, 1e-14);
}

TEST(Cli, ApplyRoutesAgree) {
  std::vector<double> ref;
  for (const std::string route : {"spectral", "phillips", "dtw"}) {
    auto r = run({"apply", "--op", "diag", "--diag", "1,4", "--string", sample("atom1.json"), "--route", route});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = csv_rows(r.out);
    EXPECT_NEAR(std::stod(rows[1][1]), 1.0 / 3, 1e-13) << route;
    EXPECT_NEAR(std::stod(rows[2][1]), 4.0 / 9, 1e-13) << route;
  }
  auto p = run({"apply", "--op", "diag", "--diag", "1,4", "--string", sample("atom1.json"), "--route", "poisson", "--z", "1"});
  const auto rows = csv_rows(p.out);
  EXPECT_NEAR(std::stod(rows[2][1]), 1.0 / 9, 1e-14);
  EXPECT_EQ(run({"apply", "--op", "diag", "--diag", "1,-4", "--string", sample("atom1.json")}).code, 1);
  EXPECT_EQ(run({"apply", "--string", sample("atom1.json"), "--route", "subordinate", "--mode", "mc"}).code, 1);
}

TEST(Cli, ContinuousDtwCarriesErrorEstimate) {
  auto r = run({"apply", "--op", "diag", "--diag", "1,4", "--string", sample("fractional_half.json"), "--route", "dtw",
                "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["rows"][0]["value"].get<double>(), 0.5, 1e-4);
  EXPECT_NEAR(j["rows"][1]["value"].get<double>(), 1.0, 1e-4);
  EXPECT_GT(j["rows"][1]["error_estimate"].get<double>(), 0.0);
  EXPECT_LT(j["meta"]["max_error_estimate"].get<double>(), 1e-4);
  EXPECT_EQ(j["meta"]["route"], "dtw");
}

TEST(Cli, OutputFileWithSidecar) {
  const std::string path = ::testing::TempDir() + "krein_cli_density.csv";
  auto r = run({"density", "--string", sample("atom1.json"), "--z", "2", "--t", "2", "--out", path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto rows = csv_rows(slurp(path));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(std::stod(rows[1][2]), 0.5 * std::exp(-1.0), 1e-15);
  const auto meta = nlohmann::json::parse(slurp(path + ".json"));
  EXPECT_EQ(meta["command"], "density");
  EXPECT_EQ(meta["config"]["out"], path);
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}

TEST(Cli, Spectrum) {
  auto r = run({"spectrum", "--string", sample("atom1.json")});
  ASSERT_EQ(r.code, 0);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(std::stod(rows[1][0]), 0.5, 1e-15);
  EXPECT_NEAR(std::stod(rows[1][1]), 0.25, 1e-15);
}

TEST(Cli, McSubcommands) {
  auto k = run({"mc", "knight", "--string", sample("atom1.json"), "--seed", "3", "--paths", "20000"});
  EXPECT_EQ(k.code, 0) << k.out;
  auto h = run({"mc", "hitting", "--string", sample("atoms3.json"), "--z", "1.5", "--seed", "4", "--paths", "20000",
                "--t-check", "0.5,2"});
  EXPECT_EQ(h.code, 0) << h.out;
  EXPECT_EQ(csv_rows(h.out).size(), 5u);
  auto p = run({"mc", "poisson", "--string", sample("atom1.json"), "--op", "diag", "--diag", "1,4", "--z", "1", "--seed",
                "5", "--paths", "20000"});
  EXPECT_EQ(p.code, 0) << p.out;
}

TEST(Cli, McFailureExitCode) {
  // a unit step factor overshoots the squared Bessel path, so the law is visibly wrong
  auto r = run({"mc", "bessel", "--sigma", "0.5", "--y0", "1", "--step-factor", "1", "--eps", "0.5", "--paths", "2000",
                "--seed", "1"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find(",fail"), std::string::npos);
  EXPECT_EQ(run({"mc", "hitting", "--string", sample("atom1.json"), "--z", "0.5", "--seed", "1"}).code, 1);
}

TEST(Cli, StabilityTable) {
  auto r = run({"stability", "--sigmas", "0.5,0.9", "--op", "diag", "--diag", "1,4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(std::stod(rows[1][1]), 0.5, 1e-15);
  EXPECT_NEAR(std::stod(rows[1][4]), 1.0 / 6, 1e-12);
  auto b = run({"stability", "--builtin", "2,4", "--op", "diag", "--diag", "1,4"});
  EXPECT_EQ(csv_rows(b.out)[2][0], "0.75");
}

TEST(Cli, ValidateIsDeterministic) {
  auto a = run({"validate", "--suite", "quick", "--seed", "7", "--threads", "1"});
  auto b = run({"validate", "--suite", "quick", "--seed", "7", "--threads", "3"});
  auto c = run({"validate", "--suite", "quick", "--seed", "7"});
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  EXPECT_EQ(a.code, b.code);
  EXPECT_FALSE(a.out.empty());
  // every check line is pass or fail with its value and threshold
  const auto rows = csv_rows(a.out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 4u);
    EXPECT_TRUE(rows[i][1] == "pass" || rows[i][1] == "fail");
  }
  EXPECT_EQ(a.code, std::any_of(rows.begin() + 1, rows.end(), [](const auto& r) { return r[1] == "fail"; }) ? 4 : 0);
}
