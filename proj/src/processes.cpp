#include "clusterfx/processes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"
#include "clusterfx/rng.hpp"

namespace clusterfx {

namespace {

inline double frechet(Rng& rng) { return -1.0 / std::log(rng.uniform()); }

}  // namespace

const char* to_string(Family family) {
  switch (family) {
    case Family::kIidUniform: return "iid_uniform";
    case Family::kIidPareto: return "iid_pareto";
    case Family::kArmaxFrechet: return "armax_frechet";
    case Family::kMovingMaxima: return "moving_maxima";
  }
  return "iid_uniform";
}

Family parse_family(const std::string& name) {
  if (name == "iid_uniform" || name == "iid" || name == "uniform") {
    return Family::kIidUniform;
  }
  if (name == "iid_pareto" || name == "pareto") return Family::kIidPareto;
  if (name == "armax_frechet" || name == "armax") return Family::kArmaxFrechet;
  if (name == "moving_maxima" || name == "mm") return Family::kMovingMaxima;
  throw ConfigError("unknown generator family '" + name + "'");
}

void GeneratorSpec::validate() const {
  if (length < 1) throw ConfigError("generator length must be >= 1");
  switch (family) {
    case Family::kIidUniform:
      break;
    case Family::kIidPareto:
      if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw ConfigError("pareto gamma must be > 0, got " + format_double(gamma));
      }
      break;
    case Family::kArmaxFrechet:
      if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("armax alpha must lie in (0,1), got " + format_double(alpha));
      }
      break;
    case Family::kMovingMaxima: {
      if (weights.empty()) throw ConfigError("moving maxima needs at least one weight");
      double sum = 0.0;
      for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
          throw ConfigError("moving maxima weights must be nonnegative");
        }
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("moving maxima weights must sum to 1, got " +
                          format_double(sum));
      }
      break;
    }
  }
}

std::string GeneratorSpec::model_tag() const {
  std::string tag = to_string(family);
  switch (family) {
    case Family::kIidUniform: break;
    case Family::kIidPareto: tag += "(gamma=" + format_double(gamma) + ")"; break;
    case Family::kArmaxFrechet: tag += "(alpha=" + format_double(alpha) + ")"; break;
    case Family::kMovingMaxima: {
      tag += "(weights=";
      for (std::size_t j = 0; j < weights.size(); ++j) {
        if (j) tag += ':';
        tag += format_double(weights[j]);
      }
      tag += ")";
      break;
    }
  }
  return tag;
}

RawSeries simulate(const GeneratorSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.length;
  RawSeries out;
  out.declared_model = spec.model_tag();
  out.values.resize(n);
  switch (spec.family) {
    case Family::kIidUniform:
      for (auto& x : out.values) x = rng.uniform();
      break;
    case Family::kIidPareto:
      for (auto& x : out.values) x = std::pow(rng.uniform(), -spec.gamma);
      break;
    case Family::kArmaxFrechet: {
      const double a = spec.alpha;
      const double b = 1.0 - spec.alpha;
      double x = frechet(rng);
      for (std::size_t i = 0; i < kBurnIn; ++i) x = std::max(a * x, b * frechet(rng));
      for (std::size_t i = 0; i < n; ++i) {
        x = std::max(a * x, b * frechet(rng));
        out.values[i] = x;
      }
      break;
    }
    case Family::kMovingMaxima: {
      const std::size_t q = spec.weights.size();
      // Ring buffer of the last q shocks; shocks[(t - j) mod q] = Z_{t-j}.
      std::vector<double> shocks(q);
      for (auto& z : shocks) z = frechet(rng);
      std::size_t head = q - 1;  // position of the newest shock
      auto step = [&]() {
        head = (head + 1) % q;
        shocks[head] = frechet(rng);
        double m = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
          m = std::max(m, spec.weights[j] * shocks[(head + q - j) % q]);
        }
        return m;
      };
      for (std::size_t i = 0; i < kBurnIn; ++i) step();
      for (std::size_t i = 0; i < n; ++i) out.values[i] = step();
      break;
    }
  }
  return out;
}

double marginal_cdf(const GeneratorSpec& spec, double x) {
  switch (spec.family) {
    case Family::kIidUniform: return std::clamp(x, 0.0, 1.0);
    case Family::kIidPareto: return x <= 1.0 ? 0.0 : 1.0 - std::pow(x, -1.0 / spec.gamma);
    case Family::kArmaxFrechet:
    case Family::kMovingMaxima: return x <= 0.0 ? 0.0 : std::exp(-1.0 / x);
  }
  return 0.0;
}

double marginal_survival(const GeneratorSpec& spec, double x) {
  switch (spec.family) {
    case Family::kIidUniform: return 1.0 - std::clamp(x, 0.0, 1.0);
    case Family::kIidPareto: return x <= 1.0 ? 1.0 : std::pow(x, -1.0 / spec.gamma);
    case Family::kArmaxFrechet:
    case Family::kMovingMaxima: return x <= 0.0 ? 1.0 : -std::expm1(-1.0 / x);
  }
  return 1.0;
}

double upper_quantile(const GeneratorSpec& spec, double v) {
  if (!(v > 0.0 && v < 1.0)) {
    throw ConfigError("exceedance probability must lie in (0,1), got " + format_double(v));
  }
  switch (spec.family) {
    case Family::kIidUniform: return 1.0 - v;
    case Family::kIidPareto: return std::pow(v, -spec.gamma);
    case Family::kArmaxFrechet:
    case Family::kMovingMaxima: return -1.0 / std::log1p(-v);
  }
  return 1.0 - v;
}

double tail_index(const GeneratorSpec& spec) {
  switch (spec.family) {
    case Family::kIidUniform:
      throw ConfigError("uniform margins have no positive extreme value index");
    case Family::kIidPareto: return spec.gamma;
    case Family::kArmaxFrechet:
    case Family::kMovingMaxima: return 1.0;
  }
  return 1.0;
}

RawSeries to_uniform_margins(const GeneratorSpec& spec, const RawSeries& series) {
  RawSeries out;
  out.declared_model = series.declared_model;
  out.values.resize(series.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = marginal_cdf(spec, series.values[i]);
  }
  return out;
}

double hill_target(const GeneratorSpec& spec, double v) {
  switch (spec.family) {
    case Family::kIidUniform:
      throw ConfigError("the Hill estimator needs heavy-tailed margins");
    case Family::kIidPareto:
      return spec.gamma;
    case Family::kArmaxFrechet:
    case Family::kMovingMaxima: {
      // ∫_u^∞ P{X > t}/t dt = Ein(1/u); the series converges fast for 1/u < 1.
      const double z = 1.0 / upper_quantile(spec, v);
      double term = z;  // z^k / k!
      double sum = 0.0;
      for (int k = 1; k < 200; ++k) {
        if (k > 1) term *= z / k;
        const double add = (k % 2 ? 1.0 : -1.0) * term / k;
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      }
      return sum / v;
    }
  }
  return 1.0;
}

}  // namespace clusterfx
