#pragma once

// Summary statistics and goodness-of-fit tools for the Monte Carlo harness.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "clusterfx/matrix.hpp"

namespace clusterfx {

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;         // unbiased
  double std_error_mean = 0.0;
  double std_error_variance = 0.0;  // sqrt((m4 - s^4 (n-3)/(n-1)) / n)
  double skewness = 0.0;         // bias-corrected G1 (NaN if n < 3 or constant)
  double excess_kurtosis = 0.0;  // bias-corrected G2 (NaN if n < 4 or constant)
};

Moments sample_moments(std::span<const double> x);

double normal_cdf(double z);

struct NormalityResult {
  std::size_t count = 0;
  bool degenerate = false;  // constant sample: nothing to test
  double a2 = 0.0;          // Anderson-Darling A² against N(mean, s²)
  double a2_star = 0.0;     // A²(1 + 0.75/n + 2.25/n²)
  double p_value = 0.0;     // D'Agostino-Stephens approximation
  std::string p_band;       // e.g. "0.05<p<=0.10", from the critical-value table
  double skewness = 0.0;
  double excess_kurtosis = 0.0;

  // A* below the critical value at `level` ∈ {0.10, 0.05, 0.025, 0.01, 0.005}.
  // Degenerate samples never pass.
  bool passes(double level) const;
};

// Anderson-Darling test with estimated mean and variance plus moment checks.
// Throws ConfigError for fewer than 20 samples.
NormalityResult normality_test(std::span<const double> x);

// Case-3 critical value of A* at one of the tabulated levels.
double anderson_darling_critical(double level);

// sup |F_n - F| for a continuous F.
double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf);
// sup |F_n - G_m|.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// 0.5 Σ |p_k - q_k|; throws ConfigError on length mismatch.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

struct CovarianceEstimate {
  Matrix value;      // unbiased sample covariance
  Matrix std_error;  // MC standard error of each entry
};

// columns[k][i]: observation i of variable k. All columns equal length >= 2.
CovarianceEstimate sample_covariance(const std::vector<std::vector<double>>& columns);

struct CompareResult {
  Matrix difference;        // empirical - oracle
  std::vector<bool> pass;   // row-major, |difference| <= tol (inclusive)
  double max_abs = 0.0;
  bool all_pass = true;
};

// Inclusive comparison; a relative guard of 1e-12 absorbs the rounding of
// the subtraction itself. Throws StructuralError on shape mismatch.
CompareResult covariance_compare(const Matrix& empirical, const Matrix& oracle,
                                 double tol);

}  // namespace clusterfx
