#include "clusterfx/resample.hpp"

#include <cmath>
#include <limits>

#include "clusterfx/csv.hpp"
#include "clusterfx/errors.hpp"
#include "clusterfx/parallel.hpp"
#include "clusterfx/rng.hpp"

namespace clusterfx {

namespace {

struct HillSums {
  double log_sum = 0.0;
  double count = 0.0;
};

HillSums hill_sums(const BlockView& values) {
  HillSums s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = values.point(i)[0];
    if (x > 1.0) {
      s.log_sum += std::log(x);
      s.count += 1.0;
    }
  }
  return s;
}

}  // namespace

HillResult hill_estimate(const ExcessArray& row) {
  const HillSums s = hill_sums(row.view());
  if (s.count == 0.0) throw UndefinedError("Hill estimate undefined: no exceedances");
  HillResult out;
  out.gamma_hat = s.log_sum / s.count;
  out.exceedances = static_cast<std::size_t>(s.count);
  return out;
}

HillResult hill_estimate(const ExcessArray& row, const Blocking& blocking) {
  HillResult out = hill_estimate(row);
  out.sigma = sigma_matrix(row, blocking);
  out.asymptotic_var = hill_asymptotic_variance(*out.sigma, out.gamma_hat);
  out.asymptotic_sd = std::sqrt(std::max(*out.asymptotic_var, 0.0) /
                                static_cast<double>(row.nonzero_count()));
  return out;
}

Matrix sigma_matrix(const ExcessArray& row, const Blocking& blocking) {
  const double v = row.exceed_prob();
  if (!(v > 0.0)) throw UndefinedError("sigma matrix undefined: v̂ = 0");
  const Segmentation seg = segment_blocks(row.view(), blocking);
  Matrix sigma(2, 2);
  for (const auto& block : seg.blocks) {
    const HillSums s = hill_sums(block);
    sigma(0, 0) += s.log_sum * s.log_sum;
    sigma(0, 1) += s.log_sum * s.count;
    sigma(1, 1) += s.count * s.count;
  }
  const double norm = static_cast<double>(seg.blocks.size()) *
                      static_cast<double>(blocking.block_length()) * v;
  sigma(0, 0) /= norm;
  sigma(0, 1) /= norm;
  sigma(1, 1) /= norm;
  sigma(1, 0) = sigma(0, 1);
  return sigma;
}

double hill_asymptotic_variance(const Matrix& sigma, double gamma) {
  return sigma(0, 0) + gamma * gamma * sigma(1, 1) - 2.0 * gamma * sigma(0, 1);
}

std::vector<double> BootstrapResult::valid_values() const {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) {
    if (d.valid) out.push_back(d.centered_scaled);
  }
  return out;
}

std::vector<std::size_t> resample_indices(std::size_t num_blocks, std::uint64_t seed,
                                          std::size_t b) {
  Rng rng(stream_seed(seed, b));
  std::vector<std::size_t> idx(num_blocks);
  for (auto& i : idx) i = rng.below(num_blocks);
  return idx;
}

BootstrapResult block_bootstrap(const ExcessArray& row, const Blocking& blocking,
                                const BootstrapSpec& spec) {
  if (spec.resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  const std::size_t m = blocking.num_blocks();
  if (m < 2) throw ConfigError("bootstrap needs at least two blocks");
  const bool hill = spec.statistic == BootstrapStatistic::kHill;
  if (!hill && !spec.functional) {
    throw ConfigError("functional bootstrap needs a functional");
  }
  const double v = row.exceed_prob();
  if (!(v > 0.0)) throw UndefinedError("bootstrap undefined: v̂ = 0");
  const double nv = static_cast<double>(row.size()) * v;

  // Per-block summaries; resampling only reshuffles these.
  const Segmentation seg = segment_blocks(row.view(), blocking);
  std::vector<double> first(m, 0.0), second(m, 0.0);
  double total1 = 0.0, total2 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (hill) {
      const HillSums s = hill_sums(seg.blocks[j]);
      first[j] = s.log_sum;
      second[j] = s.count;
    } else {
      first[j] = (*spec.functional)(seg.blocks[j]);
    }
    total1 += first[j];
    total2 += second[j];
  }

  BootstrapResult out;
  out.scaling = std::sqrt(nv);
  if (hill) {
    if (total2 == 0.0) {
      throw UndefinedError("Hill bootstrap undefined: no exceedances in the blocks");
    }
    out.statistic = total1 / total2;
    out.full_row_statistic = hill_estimate(row).gamma_hat;
  } else {
    out.statistic = total1 / nv;
    out.full_row_statistic = out.statistic;
  }

  out.draws.resize(spec.resamples);
  parallel_for(spec.resamples, spec.threads, [&](std::size_t b) {
    const auto idx = resample_indices(m, spec.seed, b);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j : idx) {
      s1 += first[j];
      s2 += second[j];
    }
    BootstrapDraw& d = out.draws[b];
    if (hill && s2 == 0.0) {
      d.valid = false;
      d.statistic = std::numeric_limits<double>::quiet_NaN();
      d.centered_scaled = d.statistic;
      return;
    }
    d.statistic = hill ? s1 / s2 : s1 / nv;
    d.centered_scaled = out.scaling * (d.statistic - out.statistic);
  });
  for (const auto& d : out.draws) {
    if (!d.valid) ++out.missing;
  }
  return out;
}

void write_bootstrap_csv(std::ostream& out, const BootstrapResult& result) {
  CsvWriter csv(out, "bootstrap",
                {"resample_index", "statistic", "centered_scaled", "valid"});
  for (std::size_t b = 0; b < result.draws.size(); ++b) {
    const auto& d = result.draws[b];
    csv.row({CsvWriter::cell(b), CsvWriter::cell(d.statistic),
             CsvWriter::cell(d.centered_scaled), CsvWriter::cell(d.valid)});
  }
}

}  // namespace clusterfx
