#pragma once

// Experiment configuration: a JSON document describing the generator, the
// standardization, a ladder of blocking schemes, the functionals, and the
// tolerances the validation report is judged against.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clusterfx/empirical.hpp"
#include "clusterfx/functional.hpp"
#include "clusterfx/processes.hpp"
#include "clusterfx/standardize.hpp"

namespace clusterfx {

enum class ThresholdMode {
  kMarginal,   // true quantile of the known margin
  kEmpirical,  // type-7 sample quantile of each replication
  kExplicit,   // fixed u_n, a_n from the config
};

enum class MarginMode {
  kNative,   // analyze the simulated values
  kUniform,  // apply the known marginal cdf first
};

enum class ScalingMode {
  kTrueV,      // configured v whenever the generator determines it
  kEstimated,  // v̂_n of each row
};

struct StandardizationConfig {
  ExcessMode mode = ExcessMode::kShifted;  // shifted, window or ratio
  MarginMode margin = MarginMode::kNative;
  ThresholdMode threshold = ThresholdMode::kMarginal;
  double target_v = 0.02;
  double u = 0.0;  // explicit mode
  double a = 1.0;  // explicit mode
  std::size_t window = 1;
};

struct LadderEntry {
  std::size_t n = 0;
  std::size_t r = 0;
  std::size_t l = 0;
};

struct OracleConfig {
  bool enabled = true;  // "tail_chain" vs "none"
  std::size_t draws = 1'000'000;
  std::uint64_t seed = 0x5EEDC4A1ULL;
  bool closed_form = true;  // false: Monte Carlo even where closed forms exist
  std::string cache;        // optional cache file
};

struct BootstrapConfig {
  bool enabled = false;
  std::size_t resamples = 1000;
  std::uint64_t seed = 1;
};

struct DiagnosticsConfig {
  bool enabled = true;
  double epsilon = 0.1;
  std::vector<std::pair<double, double>> moment_grid{{0.0, 1.0}, {0.0, 0.5}, {0.5, 1.0}};
};

// Every tolerance is optional; an absent tolerance makes the matching
// quantity informational.
struct Tolerances {
  std::optional<double> covariance;       // |Cov_emp - c| per entry
  std::optional<double> theta;            // |mean θ̂ - θ|
  std::optional<double> normality_level;  // Anderson-Darling level
  std::optional<double> skewness;         // |G1| bound
  std::optional<double> excess_kurtosis;  // |G2| bound
  std::optional<double> cluster_tv;       // TV(empirical, μ_{L,W})
  std::optional<double> bootstrap_ks;     // KS(bootstrap law, MC law)
  std::optional<double> lag_sum;          // pairwise triangle tolerance
  std::optional<double> sigma;            // |mean σ_kl - σ_kl| per entry
  std::optional<double> hill_variance;    // |Var - σ11 + γ²σ22 - 2γσ12|
};

struct ExperimentConfig {
  std::string name = "experiment";
  GeneratorSpec generator;
  StandardizationConfig standardization;
  std::vector<LadderEntry> ladder;
  std::vector<FunctionalSpec> functionals;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = all cores
  CenteringMode centering = CenteringMode::kKnown;
  ScalingMode scaling = ScalingMode::kTrueV;
  OracleConfig oracle;
  bool hill = false;
  BootstrapConfig bootstrap;
  std::optional<std::size_t> lag_sum_max_lag;
  std::optional<std::size_t> cluster_kmax;
  DiagnosticsConfig diagnostics;
  Tolerances tolerances;
  std::string output_dir = "clusterfx_out";

  // Cross-field checks; throws ConfigError naming the field.
  void validate() const;
};

// Parses JSON text; errors name the offending field, e.g.
// "config field 'ladder[0].r': must satisfy l < r <= n".
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical JSON (sorted keys, explicit defaults).
std::string dump_config(const ExperimentConfig& config);

// "tail_indicator(0.5)", "survival(0.5,0.25)", "all_values(j=2,0.5,0.5)",
// "cluster_max(component=0)", "hill_log()", "cluster_length" ...
FunctionalSpec parse_functional(const std::string& text);

const char* to_string(ThresholdMode mode);
const char* to_string(MarginMode mode);
const char* to_string(ScalingMode mode);

}  // namespace clusterfx
