#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clusterfx/cli.hpp"
#include "clusterfx/config.hpp"
#include "clusterfx/standardize.hpp"

using namespace clusterfx;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "clusterfx_test_cli";
  fs::create_directories(p);
  return p;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

const char* kValidate = R"json({
  "name": "cli",
  "generator": {"family": "iid_uniform"},
  "standardization": {"mode": "shifted", "target_v": 0.01},
  "ladder": [{"n": 20000, "r": 20, "l": 2}],
  "functionals": ["tail_indicator(0)"],
  "replications": 40,
  "seed": 3,
  "tolerances": {"covariance": COV}
})json";

std::string validate_config(const std::string& tol) {
  std::string s = kValidate;
  return s.replace(s.find("COV"), 3, tol);
}

}  // namespace

TEST_CASE("oracle prints closed forms") {
  Result r = run({"oracle", "--model", "armax", "--alpha", "0.5", "--quantity", "theta"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "0.5\n");
  r = run({"oracle", "--model", "mm", "--weights", "0.2,0.5,0.3", "--quantity", "theta"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "0.5\n");
  r = run({"oracle", "--model", "armax", "--alpha", "0.5", "--quantity", "covariance",
           "--scale", "uniform", "--functional", "tail_indicator(0)", "--functional",
           "tail_indicator(0)"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "3\n");
  r = run({"oracle", "--model", "iid_pareto", "--quantity", "cluster_size", "--kmax", "2"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "1 1\n2 0\n>2 0\n");
}

TEST_CASE("usage and configuration errors exit with 2") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"oracle", "--no-such-flag"}).code == kExitUsage);

  Result r = run({"validate", "--config", (scratch() / "missing.json").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("i/o error") != std::string::npos);

  r = run({"oracle", "--model", "armax", "--alpha", "1.5", "--quantity", "theta"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("configuration error") != std::string::npos);

  r = run({"oracle", "--quantity", "nonsense"});
  CHECK(r.code == kExitUsage);

  const fs::path bad = write_file("bad.json", R"json({
    "generator": {"family": "iid_uniform"},
    "ladder": [{"n": 10, "r": 20, "l": 1}],
    "functionals": ["tail_indicator(0)"]
  })json");
  r = run({"validate", "--config", bad.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("ladder[0]") != std::string::npos);

  // Window chains exist for i.i.d. models only.
  r = run({"oracle", "--model", "armax", "--alpha", "0.5", "--quantity", "theta", "--window",
           "2"});
  CHECK(r.code == kExitUsage);
}

TEST_CASE("help exits with 0") {
  const Result r = run({"--help"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("validate") != std::string::npos);
}

TEST_CASE("simulate writes a reproducible series") {
  const fs::path a = scratch() / "a.csv", b = scratch() / "b.csv";
  const std::vector<std::string> base = {"simulate", "--model", "armax", "--alpha", "0.5",
                                         "--n", "500", "--seed", "11"};
  std::vector<std::string> args = base;
  args.insert(args.end(), {"--out", a.string()});
  REQUIRE(run(args).code == kExitOk);
  args = base;
  args.insert(args.end(), {"--out", b.string()});
  REQUIRE(run(args).code == kExitOk);
  const RawSeries sa = read_series_csv(a), sb = read_series_csv(b);
  CHECK(sa.values.size() == 500);
  CHECK(sa.values == sb.values);
  // Same bytes on stdout.
  const Result r = run(base);
  std::ifstream in(a, std::ios::binary);
  std::stringstream file;
  file << in.rdbuf();
  CHECK(r.out == file.str());
}

TEST_CASE("analyze a simulated series") {
  const fs::path s = scratch() / "series.csv";
  REQUIRE(run({"simulate", "--model", "armax", "--alpha", "0.5", "--n", "20000", "--out",
               s.string()})
              .code == kExitOk);
  const Result r = run({"analyze", "--model", "armax", "--alpha", "0.5", "--input", s.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.rfind("# clusterfx analyze schema v1\n", 0) == 0);
  CHECK(r.out.find("\nn,,20000\n") != std::string::npos);
  CHECK(r.out.find("zn,tail_indicator(0),") != std::string::npos);
  CHECK(r.out.find("theta_hat,,") != std::string::npos);

  const fs::path shortfile = write_file("short.csv", "value\n1\n2\n3\n");
  CHECK(run({"analyze", "--input", shortfile.string()}).code == kExitUsage);
}

TEST_CASE("bootstrap needs ratio excesses") {
  CHECK(run({"bootstrap", "--model", "iid_pareto"}).code == kExitUsage);
  const fs::path cfg = write_file("ratio.json", R"json({
    "generator": {"family": "iid_pareto", "gamma": 1.0},
    "standardization": {"mode": "ratio", "target_v": 0.01},
    "ladder": [{"n": 20000, "r": 10, "l": 1}],
    "functionals": ["hill_log()", "hill_count()"],
    "hill": true
  })json");
  const Result r = run({"bootstrap", "--config", cfg.string(), "--resamples", "20"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.rfind("# clusterfx ", 0) == 0);
  // Header, column names and one line per resample.
  std::size_t lines = 0;
  for (char ch : r.out) lines += ch == '\n';
  CHECK(lines == 22);
}

TEST_CASE("validate maps tolerance outcomes to exit codes") {
  const fs::path pass_cfg = write_file("pass.json", validate_config("10.0"));
  const fs::path out_dir = scratch() / "validate_out";
  Result r = run({"validate", "--config", pass_cfg.string(), "--output", out_dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(out_dir / "report.csv"));

  // A sample variance does not hit its limit to nine digits.
  const fs::path fail_cfg = write_file("fail.json", validate_config("1e-9"));
  r = run({"validate", "--config", fail_cfg.string(), "--output", out_dir.string()});
  CHECK(r.code == kExitValidationFailed);
}

TEST_CASE("shipped configs parse") {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(CLUSTERFX_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++count;
  }
  CHECK(count > 0);
}
