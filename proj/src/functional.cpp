#include "clusterfx/functional.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"

namespace clusterfx {

namespace {

void require_dim(const BlockView& block, std::size_t dim, const char* what) {
  if (block.dim() != dim) {
    throw StructuralError(std::string(what) + " expects points of dimension " +
                          std::to_string(dim) + ", got " +
                          std::to_string(block.dim()));
  }
}

void require_unit_interval(const std::vector<double>& t, const char* what) {
  for (double x : t) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw ConfigError(std::string(what) + ": threshold " + format_double(x) +
                        " outside [0,1]");
    }
  }
}

}  // namespace

const char* to_string(FunctionalFamily f) {
  switch (f) {
    case FunctionalFamily::kTailIndicator: return "tail_indicator";
    case FunctionalFamily::kExcessClaims: return "excess_claims";
    case FunctionalFamily::kUpcrossing: return "upcrossing";
    case FunctionalFamily::kHillLog: return "hill_log";
    case FunctionalFamily::kHillCount: return "hill_count";
    case FunctionalFamily::kTailArray: return "tail_array";
    case FunctionalFamily::kSurvival: return "survival";
    case FunctionalFamily::kOrderStat: return "order_stat";
    case FunctionalFamily::kAllValues: return "all_values";
    case FunctionalFamily::kClusterMax: return "cluster_max";
    case FunctionalFamily::kClusterLength: return "cluster_length";
    case FunctionalFamily::kCustom: return "custom";
  }
  return "custom";
}

FunctionalFamily parse_functional_family(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(FunctionalFamily::kCustom); ++k) {
    const auto f = static_cast<FunctionalFamily>(k);
    if (name == to_string(f)) return f;
  }
  throw ConfigError("unknown functional family '" + name + "'");
}

bool FunctionalSpec::is_tail_array() const {
  switch (family) {
    case FunctionalFamily::kTailIndicator:
    case FunctionalFamily::kExcessClaims:
    case FunctionalFamily::kUpcrossing:
    case FunctionalFamily::kHillLog:
    case FunctionalFamily::kHillCount:
    case FunctionalFamily::kTailArray:
      return true;
    default:
      return false;
  }
}

std::string FunctionalSpec::canonical() const {
  std::string out = to_string(family);
  out += '(';
  bool first = true;
  auto add = [&](const std::string& s) {
    if (!first) out += ',';
    out += s;
    first = false;
  };
  if (family == FunctionalFamily::kAllValues) add("j=" + std::to_string(index));
  if (family == FunctionalFamily::kClusterMax) {
    add("component=" + std::to_string(index));
  }
  for (double p : params) add(format_double(p));
  out += ')';
  return out;
}

ClusterFunctional::ClusterFunctional(std::string name, Evaluator evaluate)
    : name_(std::move(name)),
      evaluate_(std::make_shared<const Evaluator>(std::move(evaluate))) {}

ClusterFunctional ClusterFunctional::with_name(std::string name) const {
  ClusterFunctional copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

ClusterFunctional describe(ClusterFunctional f, FunctionalSpec spec,
                           std::optional<PointFunction> kernel) {
  f.spec_ = std::move(spec);
  if (kernel) f.kernel_ = std::move(kernel);
  return f;
}

ClusterFunctional make_tail_array_functional(std::string name, PointFunction phi,
                                             std::size_t dim) {
  if (dim == 0) throw ConfigError("tail-array kernel dimension must be >= 1");
  const std::vector<double> origin(dim, 0.0);
  const double at_zero = phi(origin);
  if (!(std::abs(at_zero) <= 1e-12)) {
    throw ConfigError("tail-array kernel '" + name + "' has phi(0) = " +
                      format_double(at_zero) + " != 0");
  }
  auto eval = [phi, dim](const BlockView& block) {
    require_dim(block, dim, "tail-array functional");
    double sum = 0.0;
    for (std::size_t i = 0; i < block.size(); ++i) {
      if (!block.is_zero(i)) sum += phi(block.point(i));
    }
    return sum;
  };
  FunctionalSpec spec{FunctionalFamily::kTailArray, {}, 0, dim};
  return describe(ClusterFunctional(std::move(name), std::move(eval)), spec, phi);
}

namespace {

// Shared construction path for the built-in tail-array families.
ClusterFunctional tail_array_builtin(FunctionalSpec spec, PointFunction phi) {
  ClusterFunctional f =
      make_tail_array_functional(spec.canonical(), phi, spec.dim);
  return describe(std::move(f), std::move(spec), std::move(phi));
}

}  // namespace

ClusterFunctional make_tail_indicator(std::vector<double> lower) {
  if (lower.empty()) throw ConfigError("tail indicator needs a point x in [0,1]^d");
  require_unit_interval(lower, "tail indicator");
  const std::size_t dim = lower.size();
  PointFunction phi = [lower](std::span<const double> p) {
    for (std::size_t l = 0; l < lower.size(); ++l) {
      if (!(p[l] > lower[l] && p[l] <= 1.0)) return 0.0;
    }
    return 1.0;
  };
  return tail_array_builtin(
      FunctionalSpec{FunctionalFamily::kTailIndicator, std::move(lower), 0, dim},
      std::move(phi));
}

ClusterFunctional make_excess_claims(double deductible) {
  if (!(deductible >= 0.0)) throw ConfigError("claim deductible t must be >= 0");
  PointFunction phi = [deductible](std::span<const double> p) {
    return p[0] > deductible ? p[0] - deductible : 0.0;
  };
  return tail_array_builtin(
      FunctionalSpec{FunctionalFamily::kExcessClaims, {deductible}, 0, 1},
      std::move(phi));
}

ClusterFunctional make_upcrossing_functional(double low, double high) {
  if (!(low <= high)) {
    throw ConfigError("upcrossing functional needs x <= y, got x = " +
                      format_double(low) + ", y = " + format_double(high));
  }
  require_unit_interval({low, high}, "upcrossing functional");
  PointFunction phi = [low, high](std::span<const double> p) {
    const bool below = p[0] >= 0.0 && p[0] < low;
    const bool above = p[1] > high && p[1] <= 1.0;
    return below && above ? 1.0 : 0.0;
  };
  return tail_array_builtin(
      FunctionalSpec{FunctionalFamily::kUpcrossing, {low, high}, 0, 2},
      std::move(phi));
}

PointFunction hill_log_kernel() {
  return [](std::span<const double> p) {
    return p[0] > 1.0 ? std::log(p[0]) : 0.0;
  };
}

PointFunction hill_count_kernel() {
  return [](std::span<const double> p) { return p[0] > 1.0 ? 1.0 : 0.0; };
}

ClusterFunctional make_hill_log_sum() {
  return tail_array_builtin(FunctionalSpec{FunctionalFamily::kHillLog, {}, 0, 1},
                            hill_log_kernel());
}

ClusterFunctional make_hill_count() {
  return tail_array_builtin(
      FunctionalSpec{FunctionalFamily::kHillCount, {}, 0, 1}, hill_count_kernel());
}

ClusterFunctional make_survival_indicator(std::vector<double> thresholds) {
  if (thresholds.empty()) throw ConfigError("survival indicator needs k >= 1");
  require_unit_interval(thresholds, "survival indicator");
  FunctionalSpec spec{FunctionalFamily::kSurvival, thresholds, 0, 1};
  auto eval = [t = std::move(thresholds)](const BlockView& block) {
    require_dim(block, 1, "survival indicator");
    const Core core = extract_core(block);
    if (core.length < t.size()) return 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(core.values[i] > t[i])) return 0.0;
    }
    return 1.0;
  };
  return describe(ClusterFunctional(spec.canonical(), std::move(eval)), spec);
}

ClusterFunctional make_order_stat_indicator(std::vector<double> thresholds) {
  if (thresholds.empty()) throw ConfigError("order-statistic indicator needs k >= 1");
  require_unit_interval(thresholds, "order-statistic indicator");
  FunctionalSpec spec{FunctionalFamily::kOrderStat, thresholds, 0, 1};
  auto eval = [t = std::move(thresholds)](const BlockView& block) {
    require_dim(block, 1, "order-statistic indicator");
    for (std::size_t j = 0; j < t.size(); ++j) {
      std::size_t above = 0;
      for (std::size_t i = 0; i < block.size(); ++i) {
        if (block[i] > t[j]) ++above;
      }
      if (above < j + 1) return 0.0;
    }
    return 1.0;
  };
  return describe(ClusterFunctional(spec.canonical(), std::move(eval)), spec);
}

ClusterFunctional make_allvalues_indicator(std::size_t core_length,
                                           std::vector<double> thresholds) {
  if (core_length < 1) throw ConfigError("all-values indicator needs j >= 1");
  if (thresholds.size() != core_length) {
    throw ConfigError("all-values indicator needs exactly j = " +
                      std::to_string(core_length) + " thresholds, got " +
                      std::to_string(thresholds.size()));
  }
  for (double x : thresholds) {
    if (!(x >= 0.0)) throw ConfigError("all-values thresholds must be >= 0");
  }
  FunctionalSpec spec{FunctionalFamily::kAllValues, thresholds, core_length, 1};
  auto eval = [t = std::move(thresholds)](const BlockView& block) {
    require_dim(block, 1, "all-values indicator");
    const Core core = extract_core(block);
    if (core.length != t.size()) return 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x = core.values[i];
      if (!(x >= 0.0 && x <= t[i])) return 0.0;
    }
    return 1.0;
  };
  return describe(ClusterFunctional(spec.canonical(), std::move(eval)), spec);
}

ClusterFunctional make_cluster_max(std::size_t component, std::size_t dim) {
  if (component >= dim) throw ConfigError("cluster max component out of range");
  FunctionalSpec spec{FunctionalFamily::kClusterMax, {}, component, dim};
  auto eval = [component, dim](const BlockView& block) {
    require_dim(block, dim, "cluster max");
    const Core core = extract_core(block);
    if (core.empty()) return 0.0;
    double m = core.values.point(0)[component];
    for (std::size_t i = 1; i < core.length; ++i) {
      m = std::max(m, core.values.point(i)[component]);
    }
    return m;
  };
  return describe(ClusterFunctional(spec.canonical(), std::move(eval)), spec);
}

ClusterFunctional make_cluster_length() {
  FunctionalSpec spec{FunctionalFamily::kClusterLength, {}, 0, 0};
  auto eval = [](const BlockView& block) {
    return static_cast<double>(extract_core(block).length);
  };
  return describe(ClusterFunctional(spec.canonical(), std::move(eval)), spec);
}

ClusterFunctional make_functional(const FunctionalSpec& spec) {
  switch (spec.family) {
    case FunctionalFamily::kTailIndicator: return make_tail_indicator(spec.params);
    case FunctionalFamily::kExcessClaims:
      if (spec.params.size() != 1) throw ConfigError("excess_claims takes one deductible");
      return make_excess_claims(spec.params[0]);
    case FunctionalFamily::kUpcrossing:
      if (spec.params.size() != 2) throw ConfigError("upcrossing takes (x, y)");
      return make_upcrossing_functional(spec.params[0], spec.params[1]);
    case FunctionalFamily::kHillLog: return make_hill_log_sum();
    case FunctionalFamily::kHillCount: return make_hill_count();
    case FunctionalFamily::kSurvival: return make_survival_indicator(spec.params);
    case FunctionalFamily::kOrderStat: return make_order_stat_indicator(spec.params);
    case FunctionalFamily::kAllValues:
      return make_allvalues_indicator(spec.index, spec.params);
    case FunctionalFamily::kClusterMax:
      return make_cluster_max(spec.index, spec.dim == 0 ? 1 : spec.dim);
    case FunctionalFamily::kClusterLength: return make_cluster_length();
    case FunctionalFamily::kTailArray:
    case FunctionalFamily::kCustom:
      break;
  }
  throw ConfigError("functional family '" + std::string(to_string(spec.family)) +
                    "' cannot be built from a declaration");
}

}  // namespace clusterfx
