#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out, err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("arsgeo_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + ARSGEO_CLI_PATH + "\" " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST(Cli, CutMembershipOnAxis) {
  const CliRun r = cli("cut --sigma 0 --point 0,0,1");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(r.out);
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0], "sigma,x,y,z,member");
  EXPECT_EQ(l[1].substr(l[1].rfind(',') + 1), "true");
}

TEST(Cli, SphereGridContract) {
  const CliRun r = cli("sphere --sigma 1 --r 1 --na 64 --ntheta 128");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(r.out);
  EXPECT_EQ(l.size(), 8193u);
  EXPECT_EQ(l[0], "a,theta,t,x,y,z");
}

TEST(Cli, HeatKernelAtOrigin) {
  const CliRun r = cli("heat kernel --sigma 0 --t 1 --source 0,0,0 --target 0,0,0");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(r.out);
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0], "sigma,t,x,y,z,xb,yb,zb,K,err_est");
  std::vector<double> v;
  std::stringstream ss(l[1]);
  for (std::string c; std::getline(ss, c, ',');) v.push_back(std::stod(c));
  ASSERT_EQ(v.size(), 10u);
  EXPECT_NEAR(v[8], 0.0625, 1e-10);
}

TEST(Cli, ClassifyAndValidate) {
  const CliRun r = cli("classify --frame \"alpha=1; beta=x; nu=z+x^2+y^2\" --point 0,0,0 --point 1,0,0");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(r.out);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_NE(l[1].find(",type2,"), std::string::npos);
  EXPECT_NE(l[2].find(",riemannian,"), std::string::npos);
  const CliRun v = cli("validate --frame \"alpha=1; beta=0; nu=x; kind=type1\"");
  EXPECT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.err.find("passed"), std::string::npos);
  // dx(beta)^2 + dx(nu)^2 = 2 breaks the type-1 normalization
  const CliRun w = cli("validate --frame \"alpha=1; beta=x; nu=x; kind=type1\"");
  EXPECT_EQ(w.code, 0) << w.err;
  EXPECT_NE(w.err.find("FAILED"), std::string::npos);
  EXPECT_NE(w.out.find(",false,false"), std::string::npos);
}

TEST(Cli, JsonOutputAndManifest) {
  const fs::path out = scratch() / "sphere.json";
  const CliRun r = cli("sphere --sigma 0.5 --na 3 --ntheta 4 --format json -o " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(doc["command"], "sphere");
  EXPECT_EQ(doc["rows"].size(), 12u);
  const auto man = nlohmann::json::parse(slurp(fs::path(out.string() + ".manifest.json")));
  for (const char* key : {"command", "parameters", "versions", "wall_time_seconds"}) EXPECT_TRUE(man.contains(key)) << key;
  EXPECT_EQ(man["parameters"]["--sigma"], "0.5");
}

TEST(Cli, DeterministicCsv) {
  const std::string args = "geodesic --sigma 0.7 --theta 0.3 --a 1.2 --T 2 --stride 50";
  const CliRun a = cli(args), b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(lines(a.out)[0], "t,x,y,z,px,py,pz");
}

TEST(Cli, ArgumentAndPreconditionErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("sphere --sigma 1 --bogus 3").code, 2);
  EXPECT_EQ(cli("heat kernel --sigma 0 --t 1 --source 0,0").code, 2);
  EXPECT_EQ(cli("classify --frame \"alpha=1; beta=x*(\" --point 0,0,0").code, 2);
  const CliRun pre = cli("heat kernel --sigma 0 --t -1");
  EXPECT_EQ(pre.code, 2);
  EXPECT_NE(pre.err.find("positive"), std::string::npos);
  EXPECT_EQ(cli("abnormal field --frame \"alpha=1; beta=0; nu=1\" --point 0,0,0").code, 2);
  EXPECT_EQ(cli("heat barrier --n 201").code, 2);
}

TEST(Cli, ComputationFailureExitsOne) {
  const CliRun r = cli("abnormal trace --frame \"alpha=1; beta=x; nu=z+x^2+y^2\" --from 0,0,0");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("vanishes"), std::string::npos);
  EXPECT_EQ(cli("geodesic --frame \"alpha=1; beta=0; nu=1; box=-1,1,-1,1,-1,1\" --theta 0 --T 3").code, 1);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(cli("--help").code, 0); }
