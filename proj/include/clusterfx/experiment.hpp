#pragma once

// Replicated Monte Carlo runs: simulate -> standardize -> block -> estimate,
// then aggregate and compare against tail-chain oracles.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clusterfx/config.hpp"
#include "clusterfx/standardize.hpp"
#include "clusterfx/tail_chain.hpp"

namespace clusterfx {

// One line of report.csv. `rule` says how `pass` follows from the numbers:
//   abs_diff_le  |empirical - oracle| <= tolerance
//   abs_le       |empirical| <= tolerance
//   less_than    empirical < oracle (oracle holds the critical value,
//                tolerance the test level)
//   info         reported only
//   insufficient_sample  not computable from the replications at hand
struct CheckRow {
  std::size_t ladder = 0;
  std::size_t n = 0, r = 0, l = 0;
  std::string quantity;
  std::string item;
  double empirical = 0.0;
  double oracle = 0.0;
  double std_error = 0.0;
  double tolerance = 0.0;
  std::string rule = "info";
  std::optional<bool> pass;
};

struct ValidationReport {
  std::string name;
  std::size_t replications = 0;
  bool insufficient_sample = false;
  std::vector<CheckRow> rows;
  std::vector<std::filesystem::path> files;

  bool all_pass() const;
  std::size_t failures() const;
  // First row matching quantity and item (any item if empty) at a ladder index.
  const CheckRow* find(const std::string& quantity, const std::string& item = "",
                       std::size_t ladder = 0) const;
};

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;  // beats env and config
  std::optional<std::size_t> threads;
  bool write_outputs = true;
};

// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "CLUSTERFX_OUTPUT_DIR";

ValidationReport run_experiment(const ExperimentConfig& config,
                                const RunOptions& options = {});

// ---- Pipeline pieces shared with the CLI ---------------------------------

// The row prepared from one series, with the exceedance probability the
// scaling should use when the generator determines it.
struct PreparedRow {
  ExcessArray row;
  std::optional<double> known_v;
  double threshold = 0.0;
  double scale = 1.0;
};

// Simulated series for (ladder entry, replication); its length is n plus
// the d - 1 extra observations a window row of length n needs.
RawSeries simulate_replication(const ExperimentConfig& config, std::size_t ladder,
                               std::size_t replication);

// Applies the margin transform and the standardization of the config.
PreparedRow prepare_row(const ExperimentConfig& config, const RawSeries& series);

// E f(Y_n) per block for a functional under the config's known margin and
// marginal threshold, when it is available in closed form.
std::optional<double> known_block_expectation(const ExperimentConfig& config,
                                              const FunctionalSpec& spec,
                                              std::size_t block_length);

// Tail-chain model matching the config's standardization, if one exists.
std::optional<TailChainModel> oracle_model(const ExperimentConfig& config);

}  // namespace clusterfx
