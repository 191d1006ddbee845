#pragma once

// Empirical processes of cluster functionals over one row, the blocks
// estimator of the extremal index, lag-sum covariance estimates, and
// finite-sample diagnostics.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clusterfx/blocks.hpp"
#include "clusterfx/functional.hpp"
#include "clusterfx/standardize.hpp"

namespace clusterfx {

enum class CenteringMode {
  kKnown,   // analytic E f(Y_n)
  kPlugin,  // grand block mean pooled over all replications (first pass)
};

const char* to_string(CenteringMode mode);

// E f(Y_n) per functional, in functional order.
struct Centering {
  CenteringMode mode = CenteringMode::kKnown;
  std::vector<double> values;

  static Centering known(std::vector<double> values) {
    return {CenteringMode::kKnown, std::move(values)};
  }
  static Centering plugin(std::vector<double> values) {
    return {CenteringMode::kPlugin, std::move(values)};
  }
};

struct ProcessResult {
  std::vector<std::string> names;
  std::vector<double> values;     // Z_n(f)
  std::vector<double> raw_sums;   // Σ_j f(Y_{n,j}) (or Σ_i φ(X_{n,i}) for Z̃_n)
  std::vector<double> centering;  // per block (per observation for Z̃_n)
  CenteringMode centering_mode = CenteringMode::kKnown;
  double v_used = 0.0;
  double v_hat = 0.0;
  bool v_configured = false;      // v_used is the configured true v
  double scaling = 0.0;           // sqrt(n v_used)
  Blocking blocking;
};

// f(Y_{n,j}) for j = 1..m_n, one vector per functional. Cores are extracted
// once per block and shared by all functionals.
std::vector<std::vector<double>> block_values(
    const ExcessArray& row, const Blocking& blocking,
    const std::vector<ClusterFunctional>& functionals);

// Z_n(f) = (n v)^{-1/2} Σ_j (f(Y_{n,j}) - E f(Y_n)); remainder excluded.
// v is `true_v` when given, v̂_n otherwise. Throws UndefinedError if v = 0,
// ConfigError for an empty list or a centering of the wrong length.
ProcessResult compute_zn(const ExcessArray& row, const Blocking& blocking,
                         const std::vector<ClusterFunctional>& functionals,
                         const Centering& centering,
                         std::optional<double> true_v = std::nullopt);

struct NamedKernel {
  std::string name;
  PointFunction phi;
};

struct TildeResult {
  ProcessResult tilde;   // Z̃_n(φ), centering per observation E φ(X_{n,1})
  ProcessResult blocks;  // Z_n(g_φ) with centering r_n E φ
  // (n v)^{-1/2} Σ_{i > r_n m_n} (φ(X_{n,i}) - E φ), per kernel.
  std::vector<double> remainder;
};

// Z̃_n(φ) = (n v)^{-1/2} Σ_{i=1}^n (φ(X_{n,i}) - E φ) together with the
// block process of g_φ, computed through the cluster-functional path.
TildeResult compute_tilde_zn(const ExcessArray& row, const Blocking& blocking,
                             const std::vector<NamedKernel>& kernels,
                             const Centering& per_observation,
                             std::optional<double> true_v = std::nullopt);

// Z_n over g_{1_{(x,1]}} for each grid point x ∈ [0,1]^d, in grid order.
// The row must be in window or shifted mode with dimension d.
std::vector<ClusterFunctional> tail_indicator_family(
    const std::vector<std::vector<double>>& grid, std::size_t dim);
ProcessResult tail_empirical_process(const ExcessArray& row, const Blocking& blocking,
                                     const std::vector<std::vector<double>>& grid,
                                     const Centering& centering,
                                     std::optional<double> true_v = std::nullopt);

struct ThetaEstimate {
  double value = 0.0;      // clamped to [0,1]
  double unclamped = 0.0;
  std::size_t nonzero_blocks = 0;
  std::size_t nonzero_observations = 0;  // within the first r_n m_n entries
};

// θ̂_n = (#nonzero blocks / m_n) / (r_n v̂_n), where v̂_n is taken over the
// blocked part of the row, so θ̂_n = #nonzero blocks / #nonzero observations.
// Throws UndefinedError when that part has no nonzero observation.
ThetaEstimate theta_hat(const ExcessArray& row, const Blocking& blocking);

struct LagSum {
  double value = 0.0;            // d̂_0 + Σ_{k=1}^K (d̂_k(φ,ψ) + d̂_k(ψ,φ))
  std::vector<double> forward;   // d̂_k(φ,ψ), k = 0..K
  std::vector<double> backward;  // d̂_k(ψ,φ), k = 0..K
  double normalizer = 0.0;       // n v̂_n
};

// d̂_k(φ,ψ) = (n v̂_n)^{-1} Σ_{i=1}^{n-k} φ(X_{n,i}) ψ(X_{n,i+k}).
// Throws ConfigError if max_lag >= n, UndefinedError if v̂_n = 0.
LagSum lag_sum_covariance(const ExcessArray& row, const PointFunction& phi,
                          const PointFunction& psi, std::size_t max_lag);

struct MomentPoint {
  double x = 0.0;
  double y = 1.0;
  double value = 0.0;  // E(Σ_{i in block} 1_{(x,y]}(X_{n,i}))^2 / (r_n v̂_n)
};

struct DiagnosticsReport {
  std::vector<std::string> names;
  std::vector<double> delta_var_ratio;  // Var(Δ_n(f)) / (r_n v̂_n)
  std::vector<double> lindeberg_tail;   // E f(Y)^2 1{|f(Y)| > ε sqrt(n v̂)} / (r_n v̂_n)
  std::vector<MomentPoint> moment_curve;
  std::optional<ThetaEstimate> theta;   // absent when undefined
  double epsilon = 0.0;
  double v_hat = 0.0;
};

// Block averages are taken over the m_n blocks of the row. The moment curve
// uses the first coordinate of each point. Never throws on degenerate data:
// with v̂_n = 0 every ratio is reported as 0.
DiagnosticsReport diagnostics(const ExcessArray& row, const Blocking& blocking,
                              const std::vector<ClusterFunctional>& functionals,
                              double epsilon,
                              const std::vector<std::pair<double, double>>& moment_grid);

// Piecewise-constant kernel on [-1,1]: value heights[j] on
// (breaks[j], breaks[j+1]], zero elsewhere (left-continuous).
struct StepKernel {
  std::vector<double> breaks;   // -1 = y_0 < y_1 < ... < y_k = 1
  std::vector<double> heights;  // k values

  // Throws ConfigError on malformed breakpoints.
  void validate() const;
  double operator()(double z) const;
  // Atoms of K(dy): +heights[0] at y_0, jumps at interior breaks, -heights[k-1] at y_k.
  std::vector<double> atoms() const;

  static StepKernel rectangular();  // 1/2 on (-1, 1]
};

// ĥ_n(x0) = (n b_n)^{-1} Σ_i K((X_i - x0)/b_n), evaluated directly.
double kernel_density_estimate(const RawSeries& series, double x0, double bandwidth,
                               const StepKernel& kernel);

struct KernelIdentityRow {
  double h_hat = 0.0;
  double lhs = 0.0;  // Σ_j w_j Z̄_n(y_j) through the local excess row
  double rhs = 0.0;  // sqrt(n/v) b_n (ĥ_n - mean ĥ_n)
  double abs_diff = 0.0;
};

// Both sides of ∫ Z̄_n(y) K(dy) = sqrt(n/v) b_n (ĥ_n(x0) - E ĥ_n(x0)) for each
// replication. Expectations are replaced by the cross-replication means and
// v by the pooled v̂. Throws ConfigError if b_n <= 0, UndefinedError if no
// observation falls in the window.
std::vector<KernelIdentityRow> kernel_density_identity_check(
    const std::vector<RawSeries>& replications, double x0, double bandwidth,
    const StepKernel& kernel);

}  // namespace clusterfx
