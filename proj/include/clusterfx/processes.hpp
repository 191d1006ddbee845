#pragma once

// Stationary test-bed generators with known marginals and extremal behaviour.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "clusterfx/standardize.hpp"

namespace clusterfx {

enum class Family {
  kIidUniform,     // U(0,1) i.i.d.
  kIidPareto,      // U^{-gamma}, survival x^{-1/gamma} on [1, inf)
  kArmaxFrechet,   // X_{i+1} = max(alpha X_i, (1-alpha) Z_{i+1}), Z standard Frechet
  kMovingMaxima,   // X_i = max_j w_j Z_{i-j}, Z standard Frechet
};

const char* to_string(Family family);
// Accepts the canonical names plus the short aliases "iid", "pareto", "armax", "mm".
Family parse_family(const std::string& name);

struct GeneratorSpec {
  Family family = Family::kIidUniform;
  double gamma = 1.0;           // iid_pareto
  double alpha = 0.5;           // armax_frechet
  std::vector<double> weights;  // moving_maxima
  std::size_t length = 0;
  std::uint64_t seed = 0;

  // Throws ConfigError: alpha ∈ (0,1), gamma > 0, weights nonnegative,
  // nonempty and summing to 1 (within 1e-9), length >= 1.
  void validate() const;
  // e.g. "armax_frechet(alpha=0.5)"; stored as RawSeries::declared_model.
  std::string model_tag() const;
};

// Deterministic in (spec, seed). ARMAX and moving maxima start from the exact
// stationary marginal and then discard 1000 burn-in steps.
RawSeries simulate(const GeneratorSpec& spec);

inline constexpr std::size_t kBurnIn = 1000;

// Marginal law of X_1.
double marginal_cdf(const GeneratorSpec& spec, double x);
double marginal_survival(const GeneratorSpec& spec, double x);
// u with P{X_1 > u} = v, for v ∈ (0,1).
double upper_quantile(const GeneratorSpec& spec, double v);
// Extreme value index of the margin (tail of x^{-1/gamma}); 1 for Frechet.
// Throws ConfigError for the uniform family (light tail).
double tail_index(const GeneratorSpec& spec);

// Probability integral transform X_i -> F(X_i) with the known marginal.
RawSeries to_uniform_margins(const GeneratorSpec& spec, const RawSeries& series);

// gamma_n = E(log(X_1/u) | X_1 > u) for the true threshold u = upper_quantile(v).
// Exact: gamma for Pareto; for Frechet margins the series
// Ein(1/u)/v with Ein(z) = Σ_{k>=1} (-1)^{k+1} z^k/(k k!).
double hill_target(const GeneratorSpec& spec, double v);

}  // namespace clusterfx
