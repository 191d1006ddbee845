#pragma once

// Raw series -> rows of standardized excesses.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clusterfx/blocks.hpp"

namespace clusterfx {

struct RawSeries {
  std::vector<double> values;
  // Generator tag for oracle lookup, e.g. "armax_frechet(alpha=0.5)".
  std::optional<std::string> declared_model;
};

// Throws ConfigError for an empty series or a non-finite value.
void validate_series(const RawSeries& series);

enum class ExcessMode {
  kShifted,  // ((X_i - u_n)/a_n)_+
  kWindow,   // d consecutive shifted excesses
  kRatio,    // X_i/u_n 1{X_i > u_n}
  kLocal,    // (2 + (X_i - x0)/b_n) 1{|X_i - x0| <= b_n}
};

const char* to_string(ExcessMode mode);

// One row X_{n,1..n} of standardized excesses with its threshold metadata.
class ExcessArray {
 public:
  ExcessArray(std::vector<double> flat, std::size_t dim, double threshold,
              double scale, ExcessMode mode);

  std::size_t size() const { return flat_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  BlockView view() const { return BlockView(flat_, dim_); }
  std::span<const double> point(std::size_t i) const { return view().point(i); }
  const std::vector<double>& flat() const { return flat_; }

  double threshold() const { return threshold_; }
  double scale() const { return scale_; }
  ExcessMode mode() const { return mode_; }
  std::size_t nonzero_count() const { return nonzero_; }
  // v̂_n = (number of nonzero entries)/(row length).
  double exceed_prob() const {
    return size() == 0 ? 0.0
                       : static_cast<double>(nonzero_) / static_cast<double>(size());
  }

 private:
  std::vector<double> flat_;
  std::size_t dim_;
  double threshold_;
  double scale_;
  ExcessMode mode_;
  std::size_t nonzero_ = 0;
};

// X_{n,i} = ((X_i - u_n)/a_n)_+. Throws ConfigError if a_n <= 0.
ExcessArray univariate_excesses(const RawSeries& series, double threshold,
                                double scale);

// Entry i is (X_{n,i}, ..., X_{n,i+d-1}) for 1 <= i <= n-d+1; windows that
// would run past X_n are dropped. Throws ConfigError if d < 1 or n < d.
ExcessArray window_excesses(const RawSeries& series, double threshold,
                            double scale, std::size_t width);

// X_{n,i} = X_i/u_n if X_i > u_n, else 0. Throws ConfigError if u_n <= 0.
ExcessArray ratio_excesses(const RawSeries& series, double threshold);

// Local excesses around x0 for kernel estimators:
// (2 + (X_i - x0)/b_n) 1_{[x0 - b_n, x0 + b_n]}(X_i). Throws if b_n <= 0.
ExcessArray local_excesses(const RawSeries& series, double center,
                           double bandwidth);

// How a_n follows from u_n when the threshold is read off the data.
enum class MarginScale {
  kUniform,    // a_n = 1 - u_n
  kHeavyTail,  // a_n = u_n
};

struct Threshold {
  double u = 0.0;
  double a = 1.0;
};

// Type-7 (linear interpolation) sample quantile of unsorted data.
double quantile_type7(std::vector<double> values, double p);

// u_n = empirical (1 - target_v)-quantile (type 7), a_n per `scale`.
// Throws ConfigError unless 0 < target_v < 1, or if all values are equal.
Threshold threshold_from_quantile(const RawSeries& series, double target_v,
                                  MarginScale scale);

// Single column `value` with optional header. Blank lines are skipped;
// NaN/Inf or unparsable cells throw ConfigError with the line number.
RawSeries read_series_csv(std::istream& in);
RawSeries read_series_csv(const std::filesystem::path& path);
void write_series_csv(std::ostream& out, const RawSeries& series);

}  // namespace clusterfx
