#include "clusterfx/empirical.hpp"

#include <algorithm>
#include <cmath>

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"

namespace clusterfx {

namespace {

double scaling_v(const ExcessArray& row, std::optional<double> true_v, bool* configured) {
  *configured = true_v.has_value();
  const double v = true_v ? *true_v : row.exceed_prob();
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw UndefinedError("scaling undefined: v = " + format_double(v) +
                         (true_v ? " (configured)" : " (no nonzero observation)"));
  }
  return v;
}

ProcessResult finish(const ExcessArray& row, const Blocking& blocking,
                     std::vector<std::string> names, std::vector<double> sums,
                     const Centering& centering, double count, double v,
                     bool configured) {
  ProcessResult out;
  out.names = std::move(names);
  out.raw_sums = std::move(sums);
  out.centering = centering.values;
  out.centering_mode = centering.mode;
  out.v_used = v;
  out.v_hat = row.exceed_prob();
  out.v_configured = configured;
  out.scaling = std::sqrt(static_cast<double>(row.size()) * v);
  out.blocking = blocking;
  out.values.resize(out.raw_sums.size());
  // Differences on the mean scale, so centering by the realized mean gives
  // exactly zero.
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const double mean = out.raw_sums[k] / count;
    out.values[k] = count * (mean - centering.values[k]) / out.scaling;
  }
  return out;
}

void check_list(std::size_t functionals, const Centering& centering) {
  if (functionals == 0) throw ConfigError("functional list is empty");
  if (centering.values.size() != functionals) {
    throw ConfigError("centering has " + std::to_string(centering.values.size()) +
                      " values for " + std::to_string(functionals) + " functionals");
  }
}

}  // namespace

const char* to_string(CenteringMode mode) {
  return mode == CenteringMode::kKnown ? "known" : "plugin";
}

std::vector<std::vector<double>> block_values(
    const ExcessArray& row, const Blocking& blocking,
    const std::vector<ClusterFunctional>& functionals) {
  const Segmentation seg = segment_blocks(row.view(), blocking);
  std::vector<std::vector<double>> out(functionals.size(),
                                       std::vector<double>(seg.blocks.size(), 0.0));
  for (std::size_t j = 0; j < seg.blocks.size(); ++j) {
    const Core core = extract_core(seg.blocks[j]);
    if (core.empty()) continue;  // f(0) = 0
    for (std::size_t k = 0; k < functionals.size(); ++k) {
      out[k][j] = functionals[k].on_core(core.values);
    }
  }
  return out;
}

ProcessResult compute_zn(const ExcessArray& row, const Blocking& blocking,
                         const std::vector<ClusterFunctional>& functionals,
                         const Centering& centering, std::optional<double> true_v) {
  check_list(functionals.size(), centering);
  bool configured = false;
  const double v = scaling_v(row, true_v, &configured);
  const auto values = block_values(row, blocking, functionals);
  std::vector<double> sums(functionals.size(), 0.0);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < functionals.size(); ++k) {
    for (double x : values[k]) sums[k] += x;
    names.push_back(functionals[k].name());
  }
  return finish(row, blocking, std::move(names), std::move(sums), centering,
                static_cast<double>(blocking.num_blocks()), v, configured);
}

TildeResult compute_tilde_zn(const ExcessArray& row, const Blocking& blocking,
                             const std::vector<NamedKernel>& kernels,
                             const Centering& per_observation,
                             std::optional<double> true_v) {
  check_list(kernels.size(), per_observation);
  if (row.size() != blocking.row_length()) {
    throw ConfigError("row length " + std::to_string(row.size()) +
                      " differs from blocking row length " +
                      std::to_string(blocking.row_length()));
  }
  const std::size_t n = row.size();
  const std::size_t blocked = blocking.block_length() * blocking.num_blocks();
  const std::size_t r = blocking.block_length();
  const double m = static_cast<double>(blocking.num_blocks());

  std::vector<std::string> names;
  std::vector<ClusterFunctional> functionals;
  for (const auto& k : kernels) {
    names.push_back(k.name);
    functionals.push_back(make_tail_array_functional(k.name, k.phi, row.dim()));
  }
  // Block sums accumulate in the order g_φ uses (zero points skipped, as φ(0)
  // = 0), so with an empty remainder both processes agree bitwise.
  const BlockView view = row.view();
  std::vector<double> blocked_sums(kernels.size(), 0.0);
  std::vector<double> block_sum(kernels.size(), 0.0);
  std::vector<double> tail(kernels.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool zero = view.is_zero(i);
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      const double value = zero ? 0.0 : kernels[k].phi(row.point(i));
      if (i < blocked) {
        if (!zero) block_sum[k] += value;
      } else {
        tail[k] += value - per_observation.values[k];
      }
    }
    if (i < blocked && (i + 1) % r == 0) {
      for (std::size_t k = 0; k < kernels.size(); ++k) {
        blocked_sums[k] += block_sum[k];
        block_sum[k] = 0.0;
      }
    }
  }

  std::vector<double> per_block(kernels.size());
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    per_block[k] = static_cast<double>(r) * per_observation.values[k];
  }
  TildeResult out;
  out.blocks = compute_zn(row, blocking, functionals,
                          Centering{per_observation.mode, per_block}, true_v);
  out.tilde = out.blocks;
  out.tilde.names = names;
  out.tilde.centering = per_observation.values;
  out.remainder.resize(kernels.size());
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    const double centered = m * (blocked_sums[k] / m - per_block[k]);
    out.tilde.raw_sums[k] = blocked_sums[k] + tail[k] +
                            static_cast<double>(n - blocked) * per_observation.values[k];
    out.tilde.values[k] = (centered + tail[k]) / out.tilde.scaling;
    out.remainder[k] = tail[k] / out.tilde.scaling;
  }
  return out;
}

std::vector<ClusterFunctional> tail_indicator_family(
    const std::vector<std::vector<double>>& grid, std::size_t dim) {
  if (grid.empty()) throw ConfigError("grid is empty");
  std::vector<ClusterFunctional> out;
  for (const auto& x : grid) {
    if (x.size() != dim) {
      throw ConfigError("grid point has dimension " + std::to_string(x.size()) +
                        ", row has " + std::to_string(dim));
    }
    for (double c : x) {
      if (!(c >= 0.0 && c <= 1.0)) {
        throw ConfigError("grid coordinate " + format_double(c) + " outside [0,1]");
      }
    }
    out.push_back(make_tail_indicator(x));
  }
  return out;
}

ProcessResult tail_empirical_process(const ExcessArray& row, const Blocking& blocking,
                                     const std::vector<std::vector<double>>& grid,
                                     const Centering& centering,
                                     std::optional<double> true_v) {
  if (row.mode() != ExcessMode::kWindow && row.mode() != ExcessMode::kShifted) {
    throw ConfigError("tail empirical process needs a shifted or window row");
  }
  return compute_zn(row, blocking, tail_indicator_family(grid, row.dim()), centering,
                    true_v);
}

ThetaEstimate theta_hat(const ExcessArray& row, const Blocking& blocking) {
  const Segmentation seg = segment_blocks(row.view(), blocking);
  ThetaEstimate out;
  for (const auto& block : seg.blocks) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < block.size(); ++i) {
      if (!block.is_zero(i)) ++count;
    }
    out.nonzero_observations += count;
    if (count > 0) ++out.nonzero_blocks;
  }
  if (out.nonzero_observations == 0) {
    throw UndefinedError("extremal index undefined: no nonzero observation in the blocks");
  }
  out.unclamped = static_cast<double>(out.nonzero_blocks) /
                  static_cast<double>(out.nonzero_observations);
  out.value = std::clamp(out.unclamped, 0.0, 1.0);
  return out;
}

LagSum lag_sum_covariance(const ExcessArray& row, const PointFunction& phi,
                          const PointFunction& psi, std::size_t max_lag) {
  const std::size_t n = row.size();
  if (max_lag >= n) {
    throw ConfigError("max_lag " + std::to_string(max_lag) + " must be below n = " +
                      std::to_string(n));
  }
  if (row.nonzero_count() == 0) {
    throw UndefinedError("lag-sum covariance undefined: no nonzero observation");
  }
  // φ(0) = ψ(0) = 0, so only nonzero positions contribute.
  std::vector<std::size_t> pos;
  std::vector<double> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    if (row.view().is_zero(i)) continue;
    pos.push_back(i);
    a.push_back(phi(row.point(i)));
    b.push_back(psi(row.point(i)));
  }
  LagSum out;
  out.normalizer = static_cast<double>(row.nonzero_count());  // n v̂_n
  out.forward.assign(max_lag + 1, 0.0);
  out.backward.assign(max_lag + 1, 0.0);
  for (std::size_t s = 0; s < pos.size(); ++s) {
    for (std::size_t t = s; t < pos.size() && pos[t] - pos[s] <= max_lag; ++t) {
      const std::size_t k = pos[t] - pos[s];
      out.forward[k] += a[s] * b[t];
      out.backward[k] += b[s] * a[t];
    }
  }
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out.forward[k] /= out.normalizer;
    out.backward[k] /= out.normalizer;
  }
  out.value = out.forward[0];
  for (std::size_t k = 1; k <= max_lag; ++k) out.value += out.forward[k] + out.backward[k];
  return out;
}

DiagnosticsReport diagnostics(const ExcessArray& row, const Blocking& blocking,
                              const std::vector<ClusterFunctional>& functionals,
                              double epsilon,
                              const std::vector<std::pair<double, double>>& moment_grid) {
  DiagnosticsReport out;
  out.epsilon = epsilon;
  out.v_hat = row.exceed_prob();
  const Segmentation seg = segment_blocks(row.view(), blocking);
  const double m = static_cast<double>(seg.blocks.size());
  const double rv = static_cast<double>(blocking.block_length()) * out.v_hat;
  const double cutoff = epsilon * std::sqrt(static_cast<double>(row.size()) * out.v_hat);
  const std::size_t keep = blocking.block_length() - blocking.small_block_length();

  for (const auto& f : functionals) {
    out.names.push_back(f.name());
    double sum = 0.0, sum2 = 0.0, lind = 0.0;
    for (const auto& block : seg.blocks) {
      const double full = f(block);
      const double delta = full - f(block.prefix(keep));
      sum += delta;
      sum2 += delta * delta;
      if (std::abs(full) > cutoff) lind += full * full;
    }
    const double mean = sum / m;
    const double var = std::max(sum2 / m - mean * mean, 0.0);
    out.delta_var_ratio.push_back(rv > 0.0 ? var / rv : 0.0);
    out.lindeberg_tail.push_back(rv > 0.0 ? lind / m / rv : 0.0);
  }

  for (const auto& [x, y] : moment_grid) {
    double acc = 0.0;
    for (const auto& block : seg.blocks) {
      double count = 0.0;
      for (std::size_t i = 0; i < block.size(); ++i) {
        const double value = block.point(i)[0];
        if (value > x && value <= y) count += 1.0;
      }
      acc += count * count;
    }
    out.moment_curve.push_back({x, y, rv > 0.0 ? acc / m / rv : 0.0});
  }

  try {
    out.theta = theta_hat(row, blocking);
  } catch (const UndefinedError&) {
    out.theta.reset();
  }
  return out;
}

void StepKernel::validate() const {
  if (heights.empty() || breaks.size() != heights.size() + 1) {
    throw ConfigError("step kernel needs k heights and k+1 breakpoints");
  }
  if (breaks.front() != -1.0 || breaks.back() != 1.0) {
    throw ConfigError("step kernel breakpoints must run from -1 to 1");
  }
  for (std::size_t j = 1; j < breaks.size(); ++j) {
    if (!(breaks[j] > breaks[j - 1])) {
      throw ConfigError("step kernel breakpoints must increase strictly");
    }
  }
  for (double h : heights) {
    if (!std::isfinite(h)) throw ConfigError("step kernel heights must be finite");
  }
}

double StepKernel::operator()(double z) const {
  if (!(z > breaks.front()) || z > breaks.back()) return 0.0;
  // First breakpoint >= z closes the interval containing z.
  const auto it = std::lower_bound(breaks.begin(), breaks.end(), z);
  return heights[static_cast<std::size_t>(it - breaks.begin()) - 1];
}

std::vector<double> StepKernel::atoms() const {
  std::vector<double> w(breaks.size());
  w[0] = heights[0];
  for (std::size_t j = 1; j < heights.size(); ++j) w[j] = heights[j] - heights[j - 1];
  w.back() = -heights.back();
  return w;
}

StepKernel StepKernel::rectangular() { return StepKernel{{-1.0, 1.0}, {0.5}}; }

double kernel_density_estimate(const RawSeries& series, double x0, double bandwidth,
                               const StepKernel& kernel) {
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  kernel.validate();
  double sum = 0.0;
  for (double x : series.values) sum += kernel((x - x0) / bandwidth);
  return sum / (static_cast<double>(series.values.size()) * bandwidth);
}

std::vector<KernelIdentityRow> kernel_density_identity_check(
    const std::vector<RawSeries>& replications, double x0, double bandwidth,
    const StepKernel& kernel) {
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  kernel.validate();
  if (replications.empty()) throw ConfigError("no replications supplied");
  const std::vector<double> w = kernel.atoms();
  const std::size_t reps = replications.size();

  // Local excess rows and, per atom y_j, the frequency of X_{n,i} > y_j + 2.
  std::vector<std::vector<double>> counts(reps, std::vector<double>(w.size(), 0.0));
  std::vector<double> h_hat(reps), n_obs(reps);
  double nonzero = 0.0, total = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const ExcessArray local = local_excesses(replications[r], x0, bandwidth);
    n_obs[r] = static_cast<double>(local.size());
    nonzero += static_cast<double>(local.nonzero_count());
    total += n_obs[r];
    for (double value : local.flat()) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (value > kernel.breaks[j] + 2.0) counts[r][j] += 1.0;
      }
    }
    h_hat[r] = kernel_density_estimate(replications[r], x0, bandwidth, kernel);
  }
  if (nonzero == 0.0) {
    throw UndefinedError("no observation falls within the kernel window");
  }
  const double v = nonzero / total;

  std::vector<double> mean_freq(w.size(), 0.0);
  double mean_h = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t j = 0; j < w.size(); ++j) mean_freq[j] += counts[r][j] / n_obs[r];
    mean_h += h_hat[r];
  }
  for (double& p : mean_freq) p /= static_cast<double>(reps);
  mean_h /= static_cast<double>(reps);

  std::vector<KernelIdentityRow> out(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const double scale = std::sqrt(n_obs[r] * v);
    double lhs = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      lhs += w[j] * (counts[r][j] - n_obs[r] * mean_freq[j]) / scale;
    }
    const double rhs = std::sqrt(n_obs[r] / v) * bandwidth * (h_hat[r] - mean_h);
    out[r] = {h_hat[r], lhs, rhs, std::abs(lhs - rhs)};
  }
  return out;
}

}  // namespace clusterfx
