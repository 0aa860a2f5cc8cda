#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "cli.hpp"
#include "hamflow/counterexample.hpp"
#include "hamflow/field_io.hpp"

using namespace hamflow;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(HAMFLOW_TEST_DATA) + "/" + name; }

struct Run {
  int code;
  std::string out, err;
};

Run hamflow_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::path("cli_scratch") / name;
  fs::create_directories(d);
  return d;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    if (!l.empty() && l[0] != '#') out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string f; std::getline(in, f, sep);) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("exit codes for malformed invocations") {
  CHECK(hamflow_run({}).code == cli::config_error);
  CHECK(hamflow_run({"teleport"}).code == cli::config_error);
  CHECK(hamflow_run({"example"}).code == cli::config_error);
  CHECK(hamflow_run({"flow", "--t", "1"}).code == cli::config_error);
  auto r = hamflow_run({"flow", "--field", data("missing.json")});
  CHECK(r.code == cli::config_error);
  CHECK(r.err.find("missing.json") != std::string::npos);
  CHECK(hamflow_run({"flow", "--field", data("rotation.json"), "--grid", "63"}).code == cli::config_error);
  CHECK(hamflow_run({"example", "ladder", "--n", "31"}).code == cli::config_error);
  CHECK(hamflow_run({"--version"}).code == cli::ok);
}

TEST_CASE("ladder CSV") {
  auto d = scratch("ladder");
  auto r = hamflow_run({"example", "ladder", "--n", "20", "--out", (d / "l.csv").string()});
  REQUIRE(r.code == cli::ok);
  std::string s = slurp(d / "l.csv");
  CHECK(s.rfind("# hamflow ", 0) == 0);
  CHECK(s.find(" config=") != std::string::npos);
  auto rows = lines_of(s);
  REQUIRE(rows.size() == 21);
  CHECK(rows[0] == "n,T1,Ts,Tf,T,sigma_partial");
  CHECK(rows[1].rfind("1,0.5,", 0) == 0);
  CHECK(rows[2].rfind("2,0.078125,", 0) == 0);
}

TEST_CASE("config file values are overridden by flags") {
  auto d = scratch("config");
  {
    std::ofstream cfg(d / "cfg.json");
    cfg << R"({"n": 3, "method": "analytic"})";
  }
  REQUIRE(hamflow_run({"example", "ladder", "--config", (d / "cfg.json").string(), "--out", (d / "a.csv").string()})
              .code == cli::ok);
  CHECK(lines_of(slurp(d / "a.csv")).size() == 4);
  REQUIRE(hamflow_run({"example", "ladder", "--config", (d / "cfg.json").string(), "--n", "5", "--out",
                       (d / "b.csv").string()})
              .code == cli::ok);
  CHECK(lines_of(slurp(d / "b.csv")).size() == 6);
  CHECK(hamflow_run({"example", "ladder", "--config", (d / "nope.json").string()}).code == cli::config_error);
}

TEST_CASE("example build round trips through the field loader") {
  auto d = scratch("build");
  auto path = (d / "g.json").string();
  REQUIRE(hamflow_run({"example", "build", "--n", "3", "--grid", "64", "--out", path}).code == cli::ok);
  auto f = load_field(path);
  CHECK(f.kind == "grid");
  auto tree = std::make_shared<const CantorTree>(build_tree(3, 0));
  CantorField ref(tree, 3);
  const auto& G = dynamic_cast<const GridField&>(*f.H).grid();
  CHECK(G.nx == 64);
  for (int j = 0; j < G.ny; j += 7)
    for (int i = 0; i < G.nx; i += 5) {
      Point p = G.node(i, j);
      CHECK(f.H->value(p) == doctest::Approx(-ref.value(p)).epsilon(1e-15));
    }
}

TEST_CASE("flow at t = 0 is the identity") {
  auto d = scratch("flow0");
  auto base = (d / "f").string();
  REQUIRE(hamflow_run({"flow", "--field", data("rotation.json"), "--t", "0", "--grid", "8", "--method", "both",
                       "--out", base})
              .code == cli::ok);
  for (const char* m : {"_levelset.csv", "_rk.csv"}) {
    auto rows = lines_of(slurp(base + m));
    REQUIRE(rows.size() == 65);
    CHECK(rows[0] == "ix,iy,x0,y0,x1,y1,flag");
    for (std::size_t k = 1; k < rows.size(); ++k) {
      auto c = split(rows[k], ',');
      REQUIRE(c.size() == 7);
      CHECK(c[2] == c[4]);
      CHECK(c[3] == c[5]);
    }
  }
  auto summary = nlohmann::json::parse(slurp(base + ".json"));
  CHECK(summary["max_discrepancy"].get<double>() == 0.0);
  CHECK(summary["meta"]["tool"] == "hamflow");
}

TEST_CASE("rotation flow agrees across methods") {
  auto d = scratch("flowrot");
  auto base = (d / "f").string();
  REQUIRE(hamflow_run({"flow", "--field", data("rotation.json"), "--t", "1.5708", "--grid", "8", "--method",
                       "both", "--out", base})
              .code == cli::ok);
  auto summary = nlohmann::json::parse(slurp(base + ".json"));
  CHECK(summary["max_discrepancy"].get<double>() <= 1e-6);
}

TEST_CASE("outputs do not depend on the thread count") {
  auto d = scratch("threads");
  for (const char* th : {"1", "3"}) {
    REQUIRE(hamflow_run({"verify", "lipschitz", "--field", data("shear.json"), "--pairs", "60", "--threads", th,
                         "--out", (d / (std::string("lip") + th + ".json")).string()})
                .code == cli::ok);
    REQUIRE(hamflow_run({"flow", "--field", data("shear.json"), "--t", "0.5", "--grid", "8", "--method", "rk",
                         "--threads", th, "--out", (d / (std::string("fl") + th)).string()})
                .code == cli::ok);
  }
  CHECK(slurp(d / "lip1.json") == slurp(d / "lip3.json"));
  CHECK(slurp(d / "fl1_rk.csv") == slurp(d / "fl3_rk.csv"));
  CHECK(slurp(d / "fl1.json") == slurp(d / "fl3.json"));
}

TEST_CASE("verify commands report violations through the exit code") {
  auto d = scratch("verify");
  auto r = hamflow_run({"verify", "global", "--field", data("smooth.json"), "--k", "4", "--pairs", "100", "--out",
                        (d / "g.json").string()});
  CHECK(r.code == cli::ok);
  auto j = nlohmann::json::parse(slurp(d / "g.json"));
  CHECK(j["violations"] == 0);
  CHECK(j["pairs_tested"] == 100);
  CHECK(r.out.find("0 violations") != std::string::npos);
}

TEST_CASE("tv command dominates every bound") {
  auto d = scratch("tv");
  auto base = (d / "tv").string();
  REQUIRE(hamflow_run({"example", "tv", "--n", "4", "--samples", "64", "--out", base}).code == cli::ok);
  auto j = nlohmann::json::parse(slurp(base + ".json"));
  CHECK(j["tv_dominates_bounds"] == true);
  CHECK(j["levels"].size() == 3);
  CHECK(lines_of(slurp(base + ".csv"))[0] == "y,T");
}
