#include "clusterfx/standardize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"

namespace clusterfx {

namespace {

inline double positive_part_excess(double x, double u, double a) {
  const double e = (x - u) / a;
  return e > 0.0 ? e : 0.0;
}

void check_scale(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw ConfigError("scale a_n must be a positive finite number, got " +
                      format_double(a));
  }
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

void validate_series(const RawSeries& series) {
  if (series.values.empty()) throw ConfigError("series is empty");
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (!std::isfinite(series.values[i])) {
      throw ConfigError("series value " + std::to_string(i + 1) + " is not finite");
    }
  }
}

const char* to_string(ExcessMode mode) {
  switch (mode) {
    case ExcessMode::kShifted: return "shifted";
    case ExcessMode::kWindow: return "window";
    case ExcessMode::kRatio: return "ratio";
    case ExcessMode::kLocal: return "local";
  }
  return "shifted";
}

ExcessArray::ExcessArray(std::vector<double> flat, std::size_t dim,
                         double threshold, double scale, ExcessMode mode)
    : flat_(std::move(flat)),
      dim_(dim),
      threshold_(threshold),
      scale_(scale),
      mode_(mode) {
  const BlockView v = view();  // validates the shape
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v.is_zero(i)) ++nonzero_;
  }
}

ExcessArray univariate_excesses(const RawSeries& series, double threshold,
                                double scale) {
  check_scale(scale);
  std::vector<double> out(series.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = positive_part_excess(series.values[i], threshold, scale);
  }
  return ExcessArray(std::move(out), 1, threshold, scale, ExcessMode::kShifted);
}

ExcessArray window_excesses(const RawSeries& series, double threshold,
                            double scale, std::size_t width) {
  check_scale(scale);
  if (width < 1) throw ConfigError("window width d must be >= 1");
  const std::size_t n = series.values.size();
  if (n < width) {
    throw ConfigError("series of length " + std::to_string(n) +
                      " is shorter than the window width " + std::to_string(width));
  }
  std::vector<double> single(n);
  for (std::size_t i = 0; i < n; ++i) {
    single[i] = positive_part_excess(series.values[i], threshold, scale);
  }
  const std::size_t rows = n - width + 1;
  std::vector<double> out(rows * width);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(single.begin() + i, width, out.begin() + i * width);
  }
  return ExcessArray(std::move(out), width, threshold, scale, ExcessMode::kWindow);
}

ExcessArray ratio_excesses(const RawSeries& series, double threshold) {
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw ConfigError("ratio standardization needs u_n > 0, got " +
                      format_double(threshold));
  }
  std::vector<double> out(series.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = series.values[i];
    out[i] = x > threshold ? x / threshold : 0.0;
  }
  return ExcessArray(std::move(out), 1, threshold, threshold, ExcessMode::kRatio);
}

ExcessArray local_excesses(const RawSeries& series, double center,
                           double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ConfigError("bandwidth b_n must be positive, got " +
                      format_double(bandwidth));
  }
  std::vector<double> out(series.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = series.values[i];
    const bool inside = x >= center - bandwidth && x <= center + bandwidth;
    out[i] = inside ? 2.0 + (x - center) / bandwidth : 0.0;
  }
  return ExcessArray(std::move(out), 1, center, bandwidth, ExcessMode::kLocal);
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Threshold threshold_from_quantile(const RawSeries& series, double target_v,
                                  MarginScale scale) {
  if (!(target_v > 0.0 && target_v < 1.0)) {
    throw ConfigError("target exceedance probability must lie in (0,1), got " +
                      format_double(target_v));
  }
  validate_series(series);
  const auto [mn, mx] =
      std::minmax_element(series.values.begin(), series.values.end());
  if (*mn == *mx) throw ConfigError("degenerate sample: all values are equal");
  Threshold t;
  t.u = quantile_type7(series.values, 1.0 - target_v);
  t.a = scale == MarginScale::kUniform ? 1.0 - t.u : t.u;
  check_scale(t.a);
  return t;
}

RawSeries read_series_csv(std::istream& in) {
  RawSeries series;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string cell = trim(line);
    if (cell.empty() || cell[0] == '#') continue;
    if (!seen_data && cell == "value") {
      seen_data = true;
      continue;
    }
    seen_data = true;
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(line_no) + ": cannot parse '" +
                        cell + "' as a number");
    }
    if (used != cell.size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected one column, got '" +
                        cell + "'");
    }
    if (!std::isfinite(x)) {
      throw ConfigError("line " + std::to_string(line_no) + ": non-finite value '" +
                        cell + "'");
    }
    series.values.push_back(x);
  }
  if (series.values.empty()) throw ConfigError("series file contains no values");
  return series;
}

RawSeries read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open series file " + path.string());
  return read_series_csv(in);
}

void write_series_csv(std::ostream& out, const RawSeries& series) {
  out << "value\n";
  for (double x : series.values) out << format_double(x) << '\n';
}

}  // namespace clusterfx
