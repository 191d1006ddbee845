#include "clusterfx/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"

namespace clusterfx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Critical {
  double level;
  double value;
  const char* band_above;  // band label when A* falls just below this value
};

// Case 3 (mean and variance estimated), D'Agostino and Stephens (1986).
constexpr std::array<Critical, 5> kCritical{{
    {0.10, 0.631, "p>0.10"},
    {0.05, 0.752, "0.05<p<=0.10"},
    {0.025, 0.873, "0.025<p<=0.05"},
    {0.01, 1.035, "0.01<p<=0.025"},
    {0.005, 1.159, "0.005<p<=0.01"},
}};

double ad_p_value(double a) {
  if (a >= 0.6) return std::exp(1.2937 - 5.709 * a + 0.0186 * a * a);
  if (a >= 0.34) return std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
  if (a >= 0.2) return 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
  return 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
}

// log Φ(z) and log(1 - Φ(z)) without cancellation in the tails.
double log_cdf(double z) { return std::log(0.5 * std::erfc(-z / std::sqrt(2.0))); }
double log_sf(double z) { return std::log(0.5 * std::erfc(z / std::sqrt(2.0))); }

}  // namespace

Moments sample_moments(std::span<const double> x) {
  Moments m;
  m.count = x.size();
  if (x.empty()) {
    m.mean = m.variance = m.skewness = m.excess_kurtosis = kNaN;
    return m;
  }
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  m.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.variance = x.size() > 1 ? m2 * n / (n - 1.0) : kNaN;
  m.std_error_mean = x.size() > 1 ? std::sqrt(m.variance / n) : kNaN;
  m.std_error_variance =
      x.size() > 3
          ? std::sqrt(std::max(m4 - m.variance * m.variance * (n - 3.0) / (n - 1.0), 0.0) / n)
          : kNaN;
  if (m2 == 0.0) {
    m.skewness = m.excess_kurtosis = kNaN;
    return m;
  }
  const double g1 = m3 / std::pow(m2, 1.5);
  const double g2 = m4 / (m2 * m2) - 3.0;
  m.skewness = x.size() > 2 ? g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0) : kNaN;
  m.excess_kurtosis =
      x.size() > 3 ? ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0)) : kNaN;
  return m;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

bool NormalityResult::passes(double level) const {
  if (degenerate) return false;
  return a2_star < anderson_darling_critical(level);
}

double anderson_darling_critical(double level) {
  for (const auto& c : kCritical) {
    if (std::abs(c.level - level) < 1e-12) return c.value;
  }
  throw ConfigError("no Anderson-Darling critical value tabulated for level " +
                    format_double(level));
}

NormalityResult normality_test(std::span<const double> x) {
  if (x.size() < 20) {
    throw ConfigError("normality test needs at least 20 samples, got " +
                      std::to_string(x.size()));
  }
  NormalityResult out;
  out.count = x.size();
  const Moments m = sample_moments(x);
  out.skewness = m.skewness;
  out.excess_kurtosis = m.excess_kurtosis;
  if (!(m.variance > 0.0)) {
    out.degenerate = true;
    out.a2 = out.a2_star = out.p_value = kNaN;
    out.p_band = "degenerate";
    return out;
  }
  std::vector<double> z(x.begin(), x.end());
  std::sort(z.begin(), z.end());
  const double sd = std::sqrt(m.variance);
  for (double& v : z) v = (v - m.mean) / sd;
  const std::size_t n = z.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += (2.0 * static_cast<double>(i) + 1.0) * (log_cdf(z[i]) + log_sf(z[n - 1 - i]));
  }
  const double dn = static_cast<double>(n);
  out.a2 = -dn - s / dn;
  out.a2_star = out.a2 * (1.0 + 0.75 / dn + 2.25 / (dn * dn));
  out.p_value = std::clamp(ad_p_value(out.a2_star), 0.0, 1.0);
  out.p_band = "p<=0.005";
  for (const auto& c : kCritical) {
    if (out.a2_star < c.value) {
      out.p_band = c.band_above;
      break;
    }
  }
  return out;
}

double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw ConfigError("KS statistic of an empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS statistic of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ConfigError("total variation of unequal supports");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

CovarianceEstimate sample_covariance(const std::vector<std::vector<double>>& columns) {
  const std::size_t k = columns.size();
  if (k == 0) throw ConfigError("no variables supplied");
  const std::size_t n = columns[0].size();
  for (const auto& c : columns) {
    if (c.size() != n) throw StructuralError("columns differ in length");
  }
  if (n < 2) throw ConfigError("covariance needs at least two observations");
  std::vector<double> mean(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (double v : columns[a]) mean[a] += v;
    mean[a] /= static_cast<double>(n);
  }
  CovarianceEstimate out{Matrix(k, k), Matrix(k, k)};
  const double dn = static_cast<double>(n);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = (columns[a][i] - mean[a]) * (columns[b][i] - mean[b]);
        s += p;
        s2 += p * p;
      }
      const double cov = s / (dn - 1.0);
      const double mp = s / dn;
      const double se = std::sqrt(std::max(s2 / dn - mp * mp, 0.0) / dn);
      out.value(a, b) = out.value(b, a) = cov;
      out.std_error(a, b) = out.std_error(b, a) = se;
    }
  }
  return out;
}

CompareResult covariance_compare(const Matrix& empirical, const Matrix& oracle,
                                 double tol) {
  if (empirical.rows != oracle.rows || empirical.cols != oracle.cols) {
    throw StructuralError("covariance_compare: shape mismatch");
  }
  CompareResult out;
  out.difference = Matrix(empirical.rows, empirical.cols);
  out.pass.resize(empirical.data.size());
  for (std::size_t e = 0; e < empirical.data.size(); ++e) {
    const double a = empirical.data[e], b = oracle.data[e];
    const double d = a - b;
    const double guard = 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    out.difference.data[e] = d;
    out.pass[e] = std::abs(d) <= tol + guard;
    out.max_abs = std::max(out.max_abs, std::abs(d));
    if (!out.pass[e]) out.all_pass = false;
  }
  return out;
}

}  // namespace clusterfx
