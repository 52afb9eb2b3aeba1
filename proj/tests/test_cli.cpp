#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdqac/cli.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdqac;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cdqac_test_cli_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"solve", "--instance", "x", "--method", "y", "--bogus"}).code == 2);
  CHECK(cli({"solve", "--method", "pdr:MOR-SPT"}).code == 2);
  const Run r = cli({"solve", "--instance", testing::fixture("tiny1.fjs"), "--method", "pdr:XYZ"});
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown job rule") != std::string::npos);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("runtime failures exit with 1") {
  CHECK(cli({"solve", "--instance", "/nonexistent/file.fjs", "--method", "random"}).code == 1);
}

TEST_CASE("solve writes the expected trace") {
  const fs::path dir = scratch("solve");
  const fs::path trace = dir / "tiny1.trace";
  const Run r = cli({"solve", "--instance", testing::fixture("tiny1.fjs"), "--method", "pdr:MOR-SPT", "--out", trace.string()});
  CHECK(r.code == 0);
  CHECK(r.out == "makespan 8\n");
  CHECK(slurp(trace) == "0 0 0 0 3\n1 0 0 3 5\n0 1 1 3 7\n1 1 0 5 8\n");
  CHECK(fs::exists(dir / "tiny1.trace.run_manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("gradcheck subcommand") {
  const Run r = cli({"gradcheck", "--seed", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("all primitives within tolerance") != std::string::npos);
  CHECK(cli({"gradcheck", "--tol", "1e-30"}).code == 1);
}

TEST_CASE("generate, build, train, evaluate, analyze") {
  const fs::path dir = scratch("pipeline");
  const std::string inst = (dir / "inst").string(), data = (dir / "data").string(), rnd = (dir / "rnd").string(),
                    run = (dir / "run").string();
  Run r = cli({"gen-instances", "--kind", "fjsp", "--n", "3", "--m", "2", "--count", "3", "--seed", "4", "--out", inst});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(fs::path(inst) / "fjsp_3x2_0000.fjs"));
  CHECK(load_instance_dir(inst).size() == 3);

  REQUIRE(cli({"gen-dataset", "--recipe", "pdr", "--instances", inst, "--out", data}).code == 0);
  REQUIRE(cli({"gen-dataset", "--recipe", "random", "--per-instance", "10", "--instances", inst, "--out", rnd,
               "--no-features"}).code == 0);

  std::ofstream(dir / "cfg.json") << R"({"hidden_dim": 8, "out_dim": 4, "mlp_width": 16, "num_quantiles": 4, "steps": 100})";
  r = cli({"train", "--dataset", data, "--config", (dir / "cfg.json").string(), "--steps", "6", "--batch-size", "4",
           "--out", run});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("actor updates 1") != std::string::npos);
  CHECK(fs::exists(fs::path(run) / "bundle.json"));
  CHECK(fs::exists(fs::path(run) / "run_manifest.json"));

  std::ofstream(dir / "ub.txt") << "fjsp_3x2_0000 10\n";
  r = cli({"eval", "--bundle", run, "--instances", inst, "--ub", (dir / "ub.txt").string(), "--methods",
           "pdr:MOR-SPT,random", "--out", (dir / "report").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("greedy: mean makespan") != std::string::npos);
  CHECK(r.out.find("mean gap") != std::string::npos);
  CHECK(fs::exists(dir / "report.jsonl"));

  r = cli({"solve", "--instance", (fs::path(inst) / "fjsp_3x2_0001.fjs").string(), "--method", "sampling", "--bundle",
           run, "--k", "3", "--repeats", "1"});
  CHECK(r.code == 0);

  r = cli({"analyze-dataset", "--reference", rnd, "--target", data, "--out", (dir / "cov.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("saco ", 0) == 0);
  CHECK(fs::exists(dir / "cov.json"));

  CHECK(cli({"train", "--dataset", rnd, "--steps", "2"}).code == 2);
  fs::remove_all(dir);
}
