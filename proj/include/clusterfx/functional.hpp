#pragma once

// Cluster functionals: maps f on blocks of arbitrary length with
// f(x) = f(x^c) and f(0) = 0.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusterfx/blocks.hpp"

namespace clusterfx {

// φ: E -> R, applied to single points.
using PointFunction = std::function<double(std::span<const double>)>;

enum class FunctionalFamily {
  kTailIndicator,  // g_φ with φ = 1_{(x,1]}, x ∈ [0,1]^d
  kExcessClaims,   // g_φ with φ_t(s) = (s - t) 1{s > t}
  kUpcrossing,     // g_φ with φ = 1_{[0,x) x (y,1]} on d = 2 windows
  kHillLog,        // g_φ with φ_1(s) = log(s) 1{s > 1}
  kHillCount,      // g_φ with φ_2(s) = 1{s > 1}
  kTailArray,      // g_φ for a caller-supplied φ
  kSurvival,       // 1_C, C = C_{t_1..t_k}
  kOrderStat,      // 1_D, D = D_{t_1..t_k}
  kAllValues,      // 1_C, C = C_{j, t_1..t_j}
  kClusterMax,     // max of one coordinate over the core
  kClusterLength,  // L(x)
  kCustom,
};

const char* to_string(FunctionalFamily family);
// Inverse of to_string; throws ConfigError for unknown names.
FunctionalFamily parse_functional_family(const std::string& name);

// Declarative description of a built-in functional. Oracles and the
// experiment runner use it to find closed forms; evaluation never does.
struct FunctionalSpec {
  FunctionalFamily family = FunctionalFamily::kCustom;
  std::vector<double> params;
  std::size_t index = 0;  // j for kAllValues, coordinate for kClusterMax
  std::size_t dim = 1;    // dimension of E the functional expects

  bool is_tail_array() const;
  // Stable textual form, e.g. "survival(0.5,0.25)"; also the default name.
  std::string canonical() const;
};

class ClusterFunctional {
 public:
  using Evaluator = std::function<double(const BlockView&)>;

  ClusterFunctional(std::string name, Evaluator evaluate);

  const std::string& name() const { return name_; }
  double operator()(const BlockView& block) const { return (*evaluate_)(block); }
  // Same as operator() but skips core extraction; `core` must be a core
  // (or empty). Used on hot paths that have the core already.
  double on_core(const BlockView& core) const {
    return core.empty() ? 0.0 : (*evaluate_)(core);
  }

  const std::optional<FunctionalSpec>& spec() const { return spec_; }
  // φ when this functional is a tail-array sum g_φ.
  const std::optional<PointFunction>& kernel() const { return kernel_; }

  ClusterFunctional with_name(std::string name) const;

 private:
  friend ClusterFunctional describe(ClusterFunctional, FunctionalSpec,
                                    std::optional<PointFunction>);
  std::string name_;
  std::shared_ptr<const Evaluator> evaluate_;
  std::optional<FunctionalSpec> spec_;
  std::optional<PointFunction> kernel_;
};

// Attaches a descriptor (and kernel) to a functional.
ClusterFunctional describe(ClusterFunctional f, FunctionalSpec spec,
                           std::optional<PointFunction> kernel = std::nullopt);

// g_φ(x) = Σ_i φ(x_i). Throws ConfigError if |φ(0)| > 1e-12 at construction.
// Zero points are skipped, so g_φ is core-invariant by construction.
ClusterFunctional make_tail_array_functional(std::string name, PointFunction phi,
                                             std::size_t dim = 1);

// g_φ for φ = 1_{(x,1]} (every coordinate in (x_l, 1]).
ClusterFunctional make_tail_indicator(std::vector<double> lower);
// g_φ for the standardized claim above deductible t: φ_t(s) = (s-t) 1{s>t}.
ClusterFunctional make_excess_claims(double deductible);
// Upcrossings of [low, high] on d = 2 windows: φ = 1_{[0,low) x (high,1]}.
ClusterFunctional make_upcrossing_functional(double low, double high);
// Hill kernels on ratio-standardized data: φ_1 = log(s) 1{s>1}, φ_2 = 1{s>1}.
PointFunction hill_log_kernel();
PointFunction hill_count_kernel();
ClusterFunctional make_hill_log_sum();
ClusterFunctional make_hill_count();

// 1 iff, after the leading zeros, the next k values exist and the i-th of
// them is strictly greater than t_i. Univariate only; t_i ∈ [0,1].
ClusterFunctional make_survival_indicator(std::vector<double> thresholds);
// 1 iff for every j <= k at least j values are strictly greater than t_j,
// i.e. the j-th largest value exceeds t_j.
ClusterFunctional make_order_stat_indicator(std::vector<double> thresholds);
// 1 iff L(x) = j and the i-th core value lies in the closed interval [0, t_i].
ClusterFunctional make_allvalues_indicator(std::size_t core_length,
                                           std::vector<double> thresholds);
// Maximum of coordinate `component` over the core; 0 for the zero block.
ClusterFunctional make_cluster_max(std::size_t component = 0,
                                   std::size_t dim = 1);
// L(x) as a real-valued functional.
ClusterFunctional make_cluster_length();

// Builds the functional described by `spec` (any family but kTailArray/kCustom).
ClusterFunctional make_functional(const FunctionalSpec& spec);

}  // namespace clusterfx
