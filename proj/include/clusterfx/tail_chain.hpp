#pragma once

// Tail chains W = (W_1, W_2, ...) of the test-bed generators and the limit
// quantities they determine: the extremal index, limit covariances c(f,g),
// and the cluster-size law.
//
// Chains are sampled on the unit-Pareto exceedance scale R_i (R_1 ~ Pareto(1),
// R_i <= 1 meaning "no exceedance") and then mapped to the scale of the
// excess array under study.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clusterfx/blocks.hpp"
#include "clusterfx/functional.hpp"
#include "clusterfx/matrix.hpp"
#include "clusterfx/processes.hpp"
#include "clusterfx/rng.hpp"

namespace clusterfx {

enum class ChainScale {
  kUniform,       // shifted excesses after the uniform transform: W = 1 - 1/R
  kRatio,         // X/u: W = R^gamma
  kShiftedRatio,  // (X - u)/u: W = R^gamma - 1
};

const char* to_string(ChainScale scale);

class TailChainModel {
 public:
  // window > 1 describes the chain of d-dimensional excess windows; it is
  // available for the i.i.d. families only (ConfigError otherwise).
  TailChainModel(GeneratorSpec generator, ChainScale scale, std::size_t window = 1);

  // (W_1, ..., W_{m_W}); W_1 != 0 and m_W < inf always.
  Vector sample(Rng& rng) const;

  const GeneratorSpec& generator() const { return generator_; }
  Family family() const { return generator_.family; }
  ChainScale scale() const { return scale_; }
  std::size_t window() const { return window_; }
  std::string tag() const;

 private:
  double to_scale(double r) const;

  GeneratorSpec generator_;
  ChainScale scale_;
  std::size_t window_;
  double gamma_ = 1.0;
};

// ARMAX chain on the ratio scale from a given R_1 = y: y, y*alpha, ...
// while the value stays above 1.
std::vector<double> armax_ratio_chain(double y, double alpha);

// W^{(2;∞)}: the chain without its first component, re-trimmed to its core.
Vector shifted_chain(const Vector& w);

struct OracleValue {
  double value = 0.0;
  double std_error = 0.0;
  bool closed_form = false;
};

struct OracleOptions {
  std::size_t draws = 1'000'000;
  std::uint64_t seed = 0x5EEDC4A1ULL;
  // false forces Monte Carlo even where a closed form is implemented.
  bool closed_form = true;
};

// θ = P{W_i = 0 for all i >= 2}.
// Closed forms: 1 (i.i.d.), 1 - alpha (ARMAX),
// Σ_j (w_j - max_{h>j} w_h)_+ (moving maxima). Monte Carlo otherwise.
OracleValue theta_true(const TailChainModel& model, const OracleOptions& opt = {});
OracleValue theta_monte_carlo(const TailChainModel& model, const OracleOptions& opt = {});

// c(f,g) = E((fg)(W) - (fg)(W^{(2;∞)})), closed form when known.
OracleValue limit_covariance(const TailChainModel& model, const ClusterFunctional& f,
                             const ClusterFunctional& g, const OracleOptions& opt = {});
// Closed form for c(f,g) if one is implemented for this model/functional pair.
std::optional<double> closed_form_covariance(const TailChainModel& model,
                                             const ClusterFunctional& f,
                                             const ClusterFunctional& g);

struct CovarianceOracle {
  Matrix value;
  Matrix std_error;
  std::vector<bool> closed_form;  // row-major flags
};
// All pairs from one set of draws; closed forms substituted entrywise.
CovarianceOracle limit_covariance_matrix(const TailChainModel& model,
                                         const std::vector<ClusterFunctional>& fs,
                                         const OracleOptions& opt = {});

enum class SurvivalVariant { kSurvival, kOrderStat, kAllValues };

// Limit covariance of the indicator processes: survival sets C and order
// statistic sets D at the componentwise maximum of s and t; for all-values
// sets C_{j,s} and C_{k,t} it is zero unless j = k, and otherwise uses the
// componentwise minimum of s and t in both terms.
OracleValue limit_survival_covariance(const TailChainModel& model,
                                      const std::vector<double>& s,
                                      const std::vector<double>& t,
                                      SurvivalVariant variant,
                                      const OracleOptions& opt = {});

// μ_{L,W}({k}) = θ^{-1}(P{L(W)=k} - P{L(W^{(2;∞)})=k, m_W >= 2}), k = 1..kmax,
// plus the mass beyond kmax in the last slot.
struct ClusterSizeLaw {
  std::vector<double> mass;       // size kmax + 1; mass[k-1] for k <= kmax
  std::vector<double> std_error;  // zero for closed forms
  bool closed_form = false;
};
ClusterSizeLaw cluster_size_law(const TailChainModel& model, std::size_t kmax,
                                const OracleOptions& opt = {});

// Persistent oracle values keyed by a hash of a canonical description of
// (model, quantity, functionals, parameters). File format: one entry per
// line, tab-separated: key, value, std_error, closed_form flag, canonical text.
class OracleCache {
 public:
  OracleCache() = default;
  explicit OracleCache(std::filesystem::path path);  // loads if the file exists

  static std::string key(const std::string& canonical);  // FNV-1a 64, hex

  std::optional<OracleValue> find(const std::string& canonical) const;
  void store(const std::string& canonical, const OracleValue& value);
  void save() const;  // no-op without a path
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    OracleValue value;
    std::string canonical;
  };
  std::filesystem::path path_;
  std::map<std::string, Entry> entries_;
};

}  // namespace clusterfx
