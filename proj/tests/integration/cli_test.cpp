#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rocsurf/simlab.hpp"

using namespace rocsurf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("rocsurf_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    StudyConfig c = default_config(Study::s1);
    c.n = 250;
    write(dir_ / "partial.csv", generate(c, 0));
    std::vector<Subject> rows;
    for (const auto& s : generate(c, 1)) {
      Subject x = s;
      if (!x.v) x.d = static_cast<int>(rows.size() % 3) + 1;
      x.v = true;
      rows.push_back(x);
    }
    write(dir_ / "full.csv", Dataset(std::move(rows)));
    std::ofstream(dir_ / "broken.csv") << "t,a1,v,d\n1,1,1,1\n2,oops,1,2\n";
    // Verified classes are perfectly separated by t.
    std::ofstream sep(dir_ / "separated.csv");
    sep << "t,v,d\n";
    for (int i = 0; i < 30; ++i) sep << i << ",1," << (i / 10 + 1) << "\n";
    for (int i = 0; i < 10; ++i) sep << i * 3 + 0.5 << ",0,\n";
  }

  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static void write(const fs::path& p, const Dataset& ds) {
    std::ofstream out(p);
    write_csv(out, ds);
  }

  static fs::path path(const std::string& name) { return dir_ / name; }

  static Outcome run(const std::string& args, const std::string& env = "") {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = env + " '" + std::string(ROCSURF_CLI) + "' " + args + " 2>'" + err.string() + "'";
    Outcome r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, TcfHappyPath) {
  const Outcome r = run("tcf --method spe --cut 2,4 " + path("partial.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  const json& e = j["estimates"][0];
  EXPECT_EQ(e["method"], "SPE");
  EXPECT_EQ(e["tcf"].size(), 3u);
  EXPECT_EQ(e["asy_sd"].size(), 3u);
  EXPECT_EQ(e["ci"].size(), 3u);
  EXPECT_DOUBLE_EQ(e["ci_level"].get<double>(), 0.95);
  EXPECT_EQ(j["n"], 250);
}

TEST_F(Cli, VusTableAcrossMethods) {
  const Outcome r = run("vus --method all --boot 20 --seed 7 --format csv " + path("partial.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "method,estimate,asy_sd,boot_sd,ci_lo,ci_hi");
  std::vector<std::string> methods;
  for (std::string line; std::getline(in, line);) methods.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(methods, (std::vector<std::string>{"FI", "MSI", "IPW", "SPE"}));
  EXPECT_NE(r.err.find("FULL requires complete verification"), std::string::npos) << r.err;
}

TEST_F(Cli, AllListsExactlyTheFeasibleMethods) {
  const Outcome partial = run("vus --method all " + path("partial.csv").string());
  ASSERT_EQ(partial.code, 0) << partial.err;
  const json p = json::parse(partial.out);
  ASSERT_EQ(p["skipped"].size(), 1u);
  EXPECT_EQ(p["skipped"][0]["method"], "FULL");
  EXPECT_NE(p["skipped"][0]["reason"].get<std::string>().find("complete verification"), std::string::npos);

  const Outcome full = run("tcf --method all --cut 2,4 " + path("full.csv").string());
  ASSERT_EQ(full.code, 0) << full.err;
  const json f = json::parse(full.out);
  std::vector<std::string> names;
  for (const auto& e : f["estimates"]) names.push_back(e["method"]);
  EXPECT_EQ(names, (std::vector<std::string>{"FULL", "FI", "MSI"}));
  std::vector<std::string> skipped;
  for (const auto& s : f["skipped"]) skipped.push_back(s["method"]);
  EXPECT_EQ(skipped, (std::vector<std::string>{"IPW", "SPE"}));
}

TEST_F(Cli, FullOnPartialDataIsAValidationError) {
  const Outcome r = run("tcf --method full --cut 2,4 " + path("partial.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("FULL requires complete verification"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrorsExitTwoAndNameTheProblem) {
  Outcome r = run("tcf --cut 4,2 " + path("partial.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--cut"), std::string::npos) << r.err;
  r = run("tcf --cut 2,4 " + path("broken.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("row 3"), std::string::npos) << r.err;
  r = run("tcf --cut 2,4 " + path("missing.csv").string());
  EXPECT_EQ(r.code, 2);
  r = run("tcf --method bogus --cut 2,4 " + path("partial.csv").string());
  EXPECT_EQ(r.code, 2);
  r = run("tcf " + path("partial.csv").string());
  EXPECT_EQ(r.code, 2);
  r = run("vus --level 1.5 " + path("partial.csv").string());
  EXPECT_EQ(r.code, 2);
  r = run("");
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, NumericalFailureExitsThree) {
  const Outcome r = run("tcf --method fi --cut 9.5,19.5 " + path("separated.csv").string());
  EXPECT_EQ(r.code, 3) << r.out << r.err;
  EXPECT_NE(r.err.find("FI"), std::string::npos) << r.err;
}

TEST_F(Cli, ValidateReportsDiagnostics) {
  const Outcome r = run("validate " + path("partial.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["fully_verified"], false);
  EXPECT_GT(j["verification_rate"].get<double>(), 0.5);
  EXPECT_TRUE(j["models"].contains("disease"));
  EXPECT_TRUE(j["models"]["verification"].contains("clipped"));
}

TEST_F(Cli, SurfaceAndCurveGrids) {
  const Outcome s = run("surface --method msi --grid quantile:5 --format csv " + path("partial.csv").string());
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.out.rfind("c1,c2,tcf1,tcf2,tcf3", 0), 0u) << s.out;
  EXPECT_EQ(std::count(s.out.begin(), s.out.end(), '\n'), 1 + 10);

  const Outcome c = run("curve --method spe --pair 1,3 --at 2,3,4 " + path("partial.csv").string());
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NO_THROW((void)json::parse(c.out));
}

TEST_F(Cli, OutputFileAndFormatInference) {
  const fs::path out = path("vus.csv");
  const Outcome r = run("vus --method msi -o " + out.string() + " " + path("partial.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(slurp(out).rfind("method,estimate", 0), 0u);
}

TEST_F(Cli, ByteIdenticalAcrossRunsAndThreadCounts) {
  const std::string data = path("partial.csv").string();
  const std::string vus = "vus --method all --boot 30 --seed 11 " + data;
  const Outcome a = run(vus + " --threads 1");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(run(vus + " --threads 1").out, a.out);
  EXPECT_EQ(run(vus + " --threads 4").out, a.out);
  EXPECT_EQ(run(vus, "ROC_SURFACE_THREADS=3").out, a.out);

  const std::string tcf = "tcf --method all --cut 2,4 --cut 4,7 --boot 25 --seed 5 " + data;
  EXPECT_EQ(run(tcf + " --threads 1").out, run(tcf + " --threads 0").out);

  const std::string sim = "simulate --study s2 --lambda 2 --n 200 --reps 6 --boot 4 --seed 9 --format csv";
  const Outcome s1 = run(sim + " --threads 1");
  ASSERT_EQ(s1.code, 0) << s1.err;
  EXPECT_EQ(run(sim + " --threads 5").out, s1.out);

  const std::string vsim = "simulate --study vus3 --n 80 --reps 4 --seed 2";
  EXPECT_EQ(run(vsim + " --threads 1").out, run(vsim + " --threads 3").out);
}
