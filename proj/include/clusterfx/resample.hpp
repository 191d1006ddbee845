#pragma once

// Hill estimator on ratio-standardized rows, its block covariance matrix,
// and the block bootstrap.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "clusterfx/blocks.hpp"
#include "clusterfx/functional.hpp"
#include "clusterfx/matrix.hpp"
#include "clusterfx/standardize.hpp"

namespace clusterfx {

struct HillResult {
  double gamma_hat = 0.0;
  std::size_t exceedances = 0;
  std::optional<double> gamma_target;  // γ_n when the generator is known
  std::optional<Matrix> sigma;         // (σ_kl), when requested
  std::optional<double> asymptotic_var;  // σ11 + γ̂² σ22 - 2γ̂ σ12
  std::optional<double> asymptotic_sd;   // sqrt(asymptotic_var / (n v̂))
};

// γ̂_n = Σ φ_1(X_{n,i}) / Σ φ_2(X_{n,i}) over the whole row, with
// φ_1 = log(s) 1{s>1}, φ_2 = 1{s>1}. Throws UndefinedError without exceedances.
HillResult hill_estimate(const ExcessArray& row);

// Same, plus sigma_matrix and the implied standard deviation.
HillResult hill_estimate(const ExcessArray& row, const Blocking& blocking);

// σ_kl = (m_n r_n v̂_n)^{-1} Σ_j S_k(Y_{n,j}) S_l(Y_{n,j}), S_k the block sum
// of φ_k. Symmetric and positive semidefinite. Throws UndefinedError if v̂_n = 0.
Matrix sigma_matrix(const ExcessArray& row, const Blocking& blocking);

double hill_asymptotic_variance(const Matrix& sigma, double gamma);

enum class BootstrapStatistic {
  kHill,        // Σ_j S_1(Y*_j) / Σ_j S_2(Y*_j)
  kFunctional,  // Σ_j f(Y*_j) / (n v̂_n)
};

struct BootstrapSpec {
  std::size_t resamples = 1000;  // B
  std::uint64_t seed = 0;
  BootstrapStatistic statistic = BootstrapStatistic::kHill;
  std::optional<ClusterFunctional> functional;  // required for kFunctional
  std::size_t threads = 0;                      // 0 = all cores
};

struct BootstrapDraw {
  double statistic = 0.0;
  double centered_scaled = 0.0;  // sqrt(n v̂_n) (statistic* - statistic)
  bool valid = true;             // false: Hill resample without exceedances
};

struct BootstrapResult {
  // Statistic on the first r_n m_n observations: the bootstrap centering.
  double statistic = 0.0;
  // Statistic on the full row (Hill only; equals `statistic` otherwise).
  double full_row_statistic = 0.0;
  double scaling = 0.0;  // sqrt(n v̂_n)
  std::vector<BootstrapDraw> draws;
  std::size_t missing = 0;

  std::vector<double> valid_values() const;  // centered_scaled of valid draws
};

// Block indices for resample `b`: m draws uniform on {0..m-1} from the
// stream stream_seed(seed, b).
std::vector<std::size_t> resample_indices(std::size_t num_blocks, std::uint64_t seed,
                                          std::size_t b);

// Throws ConfigError if m_n < 2 or B < 1; UndefinedError if the statistic is
// undefined on the data itself.
BootstrapResult block_bootstrap(const ExcessArray& row, const Blocking& blocking,
                                const BootstrapSpec& spec);

// Columns: resample_index, statistic, centered_scaled, valid.
void write_bootstrap_csv(std::ostream& out, const BootstrapResult& result);

}  // namespace clusterfx
