#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "clusterfx/blocks.hpp"
#include "clusterfx/config.hpp"
#include "clusterfx/errors.hpp"
#include "clusterfx/experiment.hpp"
#include "clusterfx/functional.hpp"

using namespace clusterfx;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"json({
  "name": "small",
  "generator": {"family": "iid_uniform"},
  "standardization": {"mode": "shifted", "target_v": 0.01},
  "ladder": [{"n": 20000, "r": 20, "l": 2}, {"n": 40000, "r": 25, "l": 3}],
  "functionals": ["tail_indicator(0)", "tail_indicator(0.5)"],
  "replications": 30,
  "seed": 99,
  "oracle": {"draws": 20000},
  "lag_sum": {"max_lag": 3},
  "cluster_size": {"kmax": 4},
  "tolerances": {"covariance": 0.3, "theta": 0.3, "normality_level": 0.01,
                 "skewness": 1.0, "excess_kurtosis": 2.0, "cluster_tv": 0.3,
                 "lag_sum": 0.5}
})json";

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("clusterfx_test_experiment_" + tag);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

ValidationReport run_into(const ExperimentConfig& c, const fs::path& dir,
                          std::optional<std::size_t> threads = std::nullopt) {
  RunOptions o;
  o.output_dir = dir;
  o.threads = threads;
  return run_experiment(c, o);
}

// Block mean of a functional over simulated rows, with its standard error.
std::pair<double, double> block_mean_mc(const ExperimentConfig& c, const FunctionalSpec& spec,
                                        std::size_t reps) {
  const ClusterFunctional f = make_functional(spec);
  const LadderEntry& e = c.ladder.at(0);
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < reps; ++k) {
    const PreparedRow prep = prepare_row(c, simulate_replication(c, 0, k));
    const Blocking b = Blocking::make(prep.row.size(), e.r, e.l);
    for (const BlockView& block : segment_blocks(prep.row.view(), b).blocks) {
      const double x = f(block);
      sum += x;
      sum2 += x * x;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double var = sum2 / static_cast<double>(count) - mean * mean;
  return {mean, std::sqrt(var / static_cast<double>(count))};
}

}  // namespace

TEST_CASE("one replication reports insufficient sample rows") {
  ExperimentConfig c = parse_config(kSmall);
  c.replications = 1;
  const fs::path dir = fresh_dir("n1");
  const ValidationReport rep = run_into(c, dir);
  CHECK(rep.insufficient_sample);
  const CheckRow* cov = rep.find("covariance");
  REQUIRE(cov != nullptr);
  CHECK(cov->rule == "insufficient_sample");
  CHECK_FALSE(cov->pass.has_value());
  const CheckRow* ad = rep.find("anderson_darling");
  REQUIRE(ad != nullptr);
  CHECK(ad->rule == "insufficient_sample");
  fs::remove_all(dir);
}

TEST_CASE("same seed gives byte-identical outputs for any thread count") {
  const ExperimentConfig c = parse_config(kSmall);
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b"), t = fresh_dir("det_t");
  const ValidationReport ra = run_into(c, a, 1);
  run_into(c, b, 1);
  run_into(c, t, 4);
  REQUIRE_FALSE(ra.files.empty());
  for (const fs::path& file : ra.files) {
    const fs::path name = file.filename();
    INFO(name.string());
    const std::string bytes = slurp(a / name);
    CHECK(bytes == slurp(b / name));
    CHECK(bytes == slurp(t / name));
  }
  // A different seed changes the simulated values.
  ExperimentConfig other = c;
  other.seed = 100;
  const fs::path o = fresh_dir("det_o");
  run_into(other, o, 1);
  CHECK(slurp(a / "zn_values.csv") != slurp(o / "zn_values.csv"));
  for (const auto& d : {a, b, t, o}) fs::remove_all(d);
}

TEST_CASE("output files carry a schema header") {
  const ExperimentConfig c = parse_config(kSmall);
  const fs::path dir = fresh_dir("schema");
  const ValidationReport rep = run_into(c, dir);
  for (const char* name : {"zn_values.csv", "diagnostics.csv", "report.csv"}) {
    INFO(name);
    REQUIRE(fs::exists(dir / name));
    const std::string line = first_line(dir / name);
    CHECK(line.rfind("# clusterfx ", 0) == 0);
    CHECK(line.find(" schema v1") != std::string::npos);
  }
  REQUIRE(fs::exists(dir / "config.json"));
  // The written config reproduces the run.
  const ExperimentConfig again = load_config(dir / "config.json");
  CHECK(dump_config(again) == dump_config(c));
  CHECK(rep.files.size() >= 4);
  fs::remove_all(dir);
}

TEST_CASE("output directory precedence") {
  ExperimentConfig c = parse_config(kSmall);
  c.replications = 2;
  c.ladder.resize(1);
  const fs::path env_dir = fresh_dir("env");
  const fs::path opt_dir = fresh_dir("opt");
  REQUIRE(setenv(kOutputDirEnv, env_dir.c_str(), 1) == 0);
  run_experiment(c);
  CHECK(fs::exists(env_dir / "report.csv"));
  RunOptions o;
  o.output_dir = opt_dir;
  run_experiment(c, o);
  CHECK(fs::exists(opt_dir / "report.csv"));
  unsetenv(kOutputDirEnv);
  fs::remove_all(env_dir);
  fs::remove_all(opt_dir);
}

TEST_CASE("no outputs when writing is disabled") {
  ExperimentConfig c = parse_config(kSmall);
  c.replications = 2;
  const fs::path dir = fresh_dir("nowrite");
  RunOptions o;
  o.output_dir = dir;
  o.write_outputs = false;
  const ValidationReport rep = run_experiment(c, o);
  CHECK_FALSE(fs::exists(dir));
  CHECK(rep.files.empty());
  CHECK_FALSE(rep.rows.empty());
}

TEST_CASE("report lists every functional once per ladder entry") {
  const ExperimentConfig c = parse_config(kSmall);
  const fs::path dir = fresh_dir("complete");
  const ValidationReport rep = run_into(c, dir);
  for (const char* quantity : {"mean", "centering", "skewness", "anderson_darling"}) {
    std::map<std::pair<std::size_t, std::string>, int> seen;
    for (const CheckRow& row : rep.rows) {
      if (row.quantity == quantity) ++seen[{row.ladder, row.item}];
    }
    INFO(quantity);
    CHECK(seen.size() == c.ladder.size() * c.functionals.size());
    for (const auto& [key, count] : seen) CHECK(count == 1);
  }
  // Covariance covers every unordered pair, diagonal included.
  std::size_t cov = 0;
  for (const CheckRow& row : rep.rows) cov += row.quantity == "covariance" && row.ladder == 0;
  CHECK(cov == 3);
  CHECK(rep.find("theta", "", 1) != nullptr);
  CHECK(rep.find("cluster_size_tv", "", 0) != nullptr);
  CHECK(rep.find("lag_sum", "", 0) != nullptr);
  for (const CheckRow& row : rep.rows) {
    CHECK(row.n == c.ladder.at(row.ladder).n);
    CHECK(row.r == c.ladder.at(row.ladder).r);
  }
  fs::remove_all(dir);
}

TEST_CASE("pass flags follow from the reported numbers") {
  const ExperimentConfig c = parse_config(kSmall);
  const fs::path dir = fresh_dir("flags");
  const ValidationReport rep = run_into(c, dir);
  std::size_t judged = 0, failed = 0;
  for (const CheckRow& row : rep.rows) {
    INFO(row.quantity << " " << row.item);
    if (row.rule == "info" || row.rule == "insufficient_sample") {
      CHECK_FALSE(row.pass.has_value());
      continue;
    }
    REQUIRE(row.pass.has_value());
    ++judged;
    failed += !*row.pass;
    if (row.rule == "abs_diff_le") {
      CHECK(*row.pass == (std::abs(row.empirical - row.oracle) <= row.tolerance));
    } else if (row.rule == "abs_le") {
      CHECK(*row.pass == (std::abs(row.empirical) <= row.tolerance));
    } else if (row.rule == "less_than") {
      CHECK(*row.pass == (row.empirical < row.oracle));
    } else {
      FAIL("unknown rule " << row.rule);
    }
  }
  CHECK(judged > 10);
  CHECK(rep.failures() == failed);
  CHECK(rep.all_pass() == (failed == 0));
  fs::remove_all(dir);
}

TEST_CASE("i.i.d. covariance and theta land near their limits") {
  // The tolerance is three standard errors of a sample variance over 200 replications.
  ExperimentConfig c = parse_config(kSmall);
  c.replications = 200;
  const fs::path dir = fresh_dir("smoke");
  const ValidationReport rep = run_into(c, dir);
  const CheckRow* cov = rep.find("covariance", "tail_indicator(0)|tail_indicator(0)");
  REQUIRE(cov != nullptr);
  CHECK(cov->oracle == doctest::Approx(1.0));
  INFO(cov->empirical << " vs " << cov->oracle << " tol " << cov->tolerance);
  CHECK(cov->pass.value());
  const CheckRow* cross = rep.find("covariance", "tail_indicator(0)|tail_indicator(0.5)");
  REQUIRE(cross != nullptr);
  CHECK(cross->oracle == doctest::Approx(0.5));
  const CheckRow* theta = rep.find("theta", "theta_hat");
  REQUIRE(theta != nullptr);
  CHECK(theta->oracle == doctest::Approx(1.0));
  CHECK(theta->pass.value());
  fs::remove_all(dir);
}

TEST_CASE("known centering needs a closed-form block expectation") {
  ExperimentConfig c = parse_config(kSmall);
  c.functionals = {parse_functional("cluster_length")};
  try {
    run_experiment(c, RunOptions{fresh_dir("nocenter"), std::nullopt, false});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("centering") != std::string::npos);
  }
  c.centering = CenteringMode::kPlugin;
  c.replications = 2;
  CHECK_NOTHROW(run_experiment(c, RunOptions{fresh_dir("plugin"), std::nullopt, false}));
}

TEST_CASE("prepared rows on the marginal threshold") {
  ExperimentConfig c = parse_config(kSmall);
  c.standardization.target_v = 0.05;
  c.ladder[0] = {2000, 50, 5};
  const PreparedRow prep = prepare_row(c, simulate_replication(c, 0, 0));
  CHECK(prep.threshold == doctest::Approx(0.95));
  CHECK(prep.scale == doctest::Approx(0.05));
  REQUIRE(prep.known_v.has_value());
  CHECK(*prep.known_v == doctest::Approx(0.05));
  CHECK(prep.row.size() == 2000);

  c.standardization.mode = ExcessMode::kWindow;
  c.standardization.window = 3;
  const RawSeries s = simulate_replication(c, 0, 0);
  CHECK(s.values.size() == 2002);
  const PreparedRow w = prepare_row(c, s);
  CHECK(w.row.size() == 2000);
  CHECK(w.row.dim() == 3);
  // P(some coordinate of the window exceeds) = 1 - (1 - v)^3.
  CHECK(*w.known_v == doctest::Approx(1.0 - std::pow(0.95, 3)));
}

TEST_CASE("closed-form block expectations by hand") {
  ExperimentConfig c = parse_config(kSmall);
  c.standardization.target_v = 0.05;
  const double v = 0.05, r = 50;
  CHECK(*known_block_expectation(c, parse_functional("tail_indicator(0.5)"), 50) ==
        doctest::Approx(r * v * 0.5));
  CHECK(*known_block_expectation(c, parse_functional("excess_claims(0.25)"), 50) ==
        doctest::Approx(r * v * 0.75 * 0.75 / 2.0));
  CHECK_FALSE(known_block_expectation(c, parse_functional("cluster_length"), 50));

  c.standardization.mode = ExcessMode::kWindow;
  c.standardization.window = 2;
  // φ = 1{x1 < 0.25, x2 > 0.5}: P(X1 <= u + a/4) P(X2 > u + a/2).
  CHECK(*known_block_expectation(c, parse_functional("upcrossing(0.25,0.5)"), 50) ==
        doctest::Approx(r * (1.0 - v * 0.75) * v * 0.5));

  ExperimentConfig h = parse_config(kSmall);
  h.standardization.target_v = 0.05;
  h.generator.family = Family::kIidPareto;
  h.generator.gamma = 0.5;
  h.standardization.mode = ExcessMode::kRatio;
  CHECK(*known_block_expectation(h, parse_functional("hill_count()"), 50) ==
        doctest::Approx(r * v));
  CHECK(*known_block_expectation(h, parse_functional("hill_log()"), 50) ==
        doctest::Approx(r * v * 0.5));

  ExperimentConfig e = parse_config(kSmall);
  e.standardization.threshold = ThresholdMode::kEmpirical;
  CHECK_FALSE(known_block_expectation(e, parse_functional("tail_indicator(0)"), 50));
}

TEST_CASE("closed-form block expectations against simulation") {
  struct Case {
    std::string family;
    std::string mode;
    std::size_t window;
    std::string functional;
  };
  const std::vector<Case> cases = {
      {"iid_uniform", "shifted", 1, "tail_indicator(0.3)"},
      {"armax", "shifted", 1, "tail_indicator(0.6)"},
      {"armax", "shifted", 1, "excess_claims(0.2)"},
      {"iid_pareto", "shifted", 1, "tail_indicator(0.5)"},
      {"iid_uniform", "window", 2, "upcrossing(0.25,0.5)"},
      {"iid_pareto", "window", 2, "tail_indicator(0.2,0.5)"},
      {"iid_pareto", "ratio", 1, "hill_log()"},
      {"armax", "ratio", 1, "hill_count()"},
  };
  for (const Case& k : cases) {
    INFO(k.family << " " << k.mode << " " << k.functional);
    ExperimentConfig c = parse_config(kSmall);
    c.generator.family = k.family == "armax"        ? Family::kArmaxFrechet
                         : k.family == "iid_pareto" ? Family::kIidPareto
                                                    : Family::kIidUniform;
    c.generator.alpha = 0.5;
    c.generator.gamma = 1.0;
    c.standardization.mode = k.mode == "window" ? ExcessMode::kWindow
                             : k.mode == "ratio" ? ExcessMode::kRatio
                                                 : ExcessMode::kShifted;
    c.standardization.window = k.window;
    c.standardization.margin = k.family == "armax" && k.mode != "ratio"
                                   ? MarginMode::kUniform
                                   : MarginMode::kNative;
    const FunctionalSpec spec = parse_functional(k.functional);
    const auto known = known_block_expectation(c, spec, c.ladder[0].r);
    REQUIRE(known.has_value());
    const auto [mean, se] = block_mean_mc(c, spec, 300);
    CHECK(std::abs(mean - *known) <= 4.0 * se);
  }
}

TEST_CASE("oracle model follows the standardization") {
  ExperimentConfig c = parse_config(kSmall);
  REQUIRE(oracle_model(c).has_value());
  CHECK(theta_true(*oracle_model(c)).value == doctest::Approx(1.0));
  c.generator.family = Family::kArmaxFrechet;
  c.generator.alpha = 0.3;
  REQUIRE(oracle_model(c).has_value());
  CHECK(theta_true(*oracle_model(c)).value == doctest::Approx(0.7));
  c.oracle.enabled = false;
  CHECK_FALSE(oracle_model(c).has_value());
}
