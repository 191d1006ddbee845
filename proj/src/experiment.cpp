#include "clusterfx/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>

#include "clusterfx/csv.hpp"
#include "clusterfx/empirical.hpp"
#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"
#include "clusterfx/parallel.hpp"
#include "clusterfx/resample.hpp"
#include "clusterfx/rng.hpp"
#include "clusterfx/stats.hpp"

namespace clusterfx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool uniform_margin(const ExperimentConfig& c) {
  return c.generator.family == Family::kIidUniform ||
         c.standardization.margin == MarginMode::kUniform;
}

bool iid_family(const ExperimentConfig& c) {
  return c.generator.family == Family::kIidUniform || c.generator.family == Family::kIidPareto;
}

std::size_t row_dim(const ExperimentConfig& c) {
  return c.standardization.mode == ExcessMode::kWindow ? c.standardization.window : 1;
}

// Survival function of the analyzed (possibly transformed) margin.
double analyzed_survival(const ExperimentConfig& c, double x) {
  if (uniform_margin(c)) return std::clamp(1.0 - x, 0.0, 1.0);
  return marginal_survival(c.generator, x);
}

// (u_n, a_n) for thresholds that do not depend on the data.
Threshold fixed_threshold(const ExperimentConfig& c) {
  const auto& st = c.standardization;
  if (st.threshold == ThresholdMode::kExplicit) return {st.u, st.a};
  const double v = st.target_v;
  if (uniform_margin(c)) return {1.0 - v, v};
  const double u = upper_quantile(c.generator, v);
  return {u, u};
}

// P{x < (X - u)/a <= 1}.
double unit_band(const ExperimentConfig& c, const Threshold& t, double x) {
  return analyzed_survival(c, t.u + t.a * x) - analyzed_survival(c, t.u + t.a);
}

struct RepOut {
  bool valid = true;
  std::string error;
  double v_used = kNaN;
  double v_hat = kNaN;
  std::vector<double> raw_sums;
  std::optional<ThetaEstimate> theta;
  std::vector<double> cluster_counts;
  std::vector<double> lag_raw;  // per tail-array functional: Σ-terms before normalizing
  double lag_normalizer = 0.0;  // n v̂_n
  std::optional<double> hill_gamma;
  double hill_scaled = kNaN;
  std::optional<Matrix> sigma;
  std::unique_ptr<BootstrapResult> bootstrap;
  std::optional<DiagnosticsReport> diag;
};

double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

std::string pair_name(const std::string& a, const std::string& b) { return a + "|" + b; }

class OracleSource {
 public:
  OracleSource(const ExperimentConfig& c, std::optional<TailChainModel> model)
      : model_(std::move(model)),
        cache_(c.oracle.cache.empty() ? OracleCache() : OracleCache(c.oracle.cache)),
        options_{c.oracle.draws, c.oracle.seed, c.oracle.closed_form} {}

  bool available() const { return model_.has_value(); }
  const TailChainModel& model() const { return *model_; }

  CovarianceOracle covariance(const std::vector<ClusterFunctional>& fs) {
    const std::size_t k = fs.size();
    CovarianceOracle out{Matrix(k, k), Matrix(k, k), std::vector<bool>(k * k)};
    bool all_cached = true;
    for (std::size_t i = 0; i < k && all_cached; ++i) {
      for (std::size_t j = 0; j < k && all_cached; ++j) {
        all_cached = cache_.find(cov_key(fs[i], fs[j])).has_value();
      }
    }
    if (!all_cached) {
      out = limit_covariance_matrix(*model_, fs, options_);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          cache_.store(cov_key(fs[i], fs[j]),
                       {out.value(i, j), out.std_error(i, j), out.closed_form[i * k + j]});
        }
      }
      return out;
    }
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const OracleValue v = *cache_.find(cov_key(fs[i], fs[j]));
        out.value(i, j) = v.value;
        out.std_error(i, j) = v.std_error;
        out.closed_form[i * k + j] = v.closed_form;
      }
    }
    return out;
  }

  OracleValue theta() {
    const std::string key = "theta|" + suffix();
    if (auto v = cache_.find(key)) return *v;
    const OracleValue v = theta_true(*model_, options_);
    cache_.store(key, v);
    return v;
  }

  ClusterSizeLaw cluster_law(std::size_t kmax) {
    const std::string base = "cluster_size|kmax=" + std::to_string(kmax) + "|";
    ClusterSizeLaw law;
    bool all_cached = true;
    for (std::size_t k = 0; k <= kmax && all_cached; ++k) {
      all_cached = cache_.find(base + "slot=" + std::to_string(k) + "|" + suffix()).has_value();
    }
    if (!all_cached) {
      law = cluster_size_law(*model_, kmax, options_);
      for (std::size_t k = 0; k <= kmax; ++k) {
        cache_.store(base + "slot=" + std::to_string(k) + "|" + suffix(),
                     {law.mass[k], law.std_error[k], law.closed_form});
      }
      return law;
    }
    for (std::size_t k = 0; k <= kmax; ++k) {
      const OracleValue v = *cache_.find(base + "slot=" + std::to_string(k) + "|" + suffix());
      law.mass.push_back(v.value);
      law.std_error.push_back(v.std_error);
      law.closed_form = v.closed_form;
    }
    return law;
  }

  void save() const { cache_.save(); }

 private:
  std::string suffix() const {
    return model_->tag() + "|draws=" + std::to_string(options_.draws) +
           "|seed=" + std::to_string(options_.seed) +
           "|closed_form=" + (options_.closed_form ? "1" : "0");
  }
  std::string cov_key(const ClusterFunctional& f, const ClusterFunctional& g) const {
    return "cov|" + f.name() + "|" + g.name() + "|" + suffix();
  }

  std::optional<TailChainModel> model_;
  OracleCache cache_;
  OracleOptions options_;
};

std::filesystem::path resolve_output_dir(const ExperimentConfig& c, const RunOptions& o) {
  if (o.output_dir) return *o.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return c.output_dir;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

bool ValidationReport::all_pass() const { return failures() == 0; }

std::size_t ValidationReport::failures() const {
  std::size_t n = 0;
  for (const auto& row : rows) {
    if (row.pass && !*row.pass) ++n;
  }
  return n;
}

const CheckRow* ValidationReport::find(const std::string& quantity, const std::string& item,
                                       std::size_t ladder) const {
  for (const auto& row : rows) {
    if (row.ladder == ladder && row.quantity == quantity && (item.empty() || row.item == item)) {
      return &row;
    }
  }
  return nullptr;
}

RawSeries simulate_replication(const ExperimentConfig& config, std::size_t ladder,
                               std::size_t replication) {
  GeneratorSpec g = config.generator;
  g.length = config.ladder.at(ladder).n + row_dim(config) - 1;
  g.seed = stream_seed(stream_seed(config.seed, ladder), replication);
  return simulate(g);
}

PreparedRow prepare_row(const ExperimentConfig& config, const RawSeries& series) {
  const auto& st = config.standardization;
  const bool transform =
      st.margin == MarginMode::kUniform && config.generator.family != Family::kIidUniform;
  const RawSeries analyzed = transform ? to_uniform_margins(config.generator, series) : series;

  Threshold t;
  if (st.threshold == ThresholdMode::kEmpirical) {
    t = threshold_from_quantile(
        analyzed, st.target_v,
        uniform_margin(config) ? MarginScale::kUniform : MarginScale::kHeavyTail);
  } else {
    t = fixed_threshold(config);
  }

  std::optional<double> known_v;
  if (st.threshold != ThresholdMode::kEmpirical) {
    const double v1 = analyzed_survival(config, t.u);
    const std::size_t d = row_dim(config);
    if (d == 1) {
      known_v = v1;
    } else if (iid_family(config)) {
      known_v = -std::expm1(static_cast<double>(d) * std::log1p(-v1));
    }
  }

  switch (st.mode) {
    case ExcessMode::kWindow:
      return {window_excesses(analyzed, t.u, t.a, st.window), known_v, t.u, t.a};
    case ExcessMode::kRatio:
      return {ratio_excesses(analyzed, t.u), known_v, t.u, t.u};
    default:
      return {univariate_excesses(analyzed, t.u, t.a), known_v, t.u, t.a};
  }
}

std::optional<double> known_block_expectation(const ExperimentConfig& config,
                                              const FunctionalSpec& spec,
                                              std::size_t block_length) {
  const auto& st = config.standardization;
  if (st.threshold == ThresholdMode::kEmpirical) return std::nullopt;
  const Threshold t = fixed_threshold(config);
  const double r = static_cast<double>(block_length);
  const std::size_t d = row_dim(config);
  using FF = FunctionalFamily;

  if (st.mode == ExcessMode::kRatio) {
    const double v = analyzed_survival(config, t.u);
    if (spec.family == FF::kHillCount) return r * v;
    if (spec.family == FF::kHillLog) return r * v * hill_target(config.generator, v);
    return std::nullopt;
  }
  if (d == 1) {
    if (spec.family == FF::kTailIndicator) return r * unit_band(config, t, spec.params.at(0));
    if (spec.family == FF::kExcessClaims && uniform_margin(config)) {
      // ∫_c^top (1 - u - a s) ds with top = (1 - u)/a.
      const double top = (1.0 - t.u) / t.a;
      const double c = spec.params.at(0);
      if (!(top > c)) return 0.0;
      return r * t.a * (top - c) * (top - c) / 2.0;
    }
    return std::nullopt;
  }
  if (!iid_family(config)) return std::nullopt;
  if (spec.family == FF::kTailIndicator) {
    double p = 1.0;
    for (double x : spec.params) p *= unit_band(config, t, x);
    return r * p;
  }
  if (spec.family == FF::kUpcrossing && d == 2) {
    const double x = spec.params.at(0), y = spec.params.at(1);
    const double below = x > 0.0 ? 1.0 - analyzed_survival(config, t.u + t.a * x) : 0.0;
    return r * below * unit_band(config, t, y);
  }
  return std::nullopt;
}

std::optional<TailChainModel> oracle_model(const ExperimentConfig& config) {
  if (!config.oracle.enabled) return std::nullopt;
  ChainScale scale = ChainScale::kShiftedRatio;
  if (config.standardization.mode == ExcessMode::kRatio) {
    scale = ChainScale::kRatio;
  } else if (uniform_margin(config)) {
    scale = ChainScale::kUniform;
  }
  try {
    return TailChainModel(config.generator, scale, row_dim(config));
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

ValidationReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const std::size_t threads = options.threads.value_or(config.threads);
  const std::size_t reps = config.replications;

  std::vector<ClusterFunctional> functionals;
  std::vector<std::string> names;
  for (const auto& spec : config.functionals) {
    functionals.push_back(make_functional(spec));
    names.push_back(functionals.back().name());
  }
  // Tail-array functionals take part in the lag-sum estimate.
  std::vector<std::size_t> lag_index;
  if (config.lag_sum_max_lag) {
    for (std::size_t k = 0; k < functionals.size(); ++k) {
      if (functionals[k].kernel()) lag_index.push_back(k);
    }
  }
  if (config.centering == CenteringMode::kKnown) {
    for (std::size_t k = 0; k < config.functionals.size(); ++k) {
      if (!known_block_expectation(config, config.functionals[k], config.ladder[0].r)) {
        throw ConfigError("config field 'centering': no known expectation for " + names[k] +
                          " under this standardization; use \"plugin\"");
      }
    }
  }

  OracleSource oracle(config, oracle_model(config));
  std::optional<CovarianceOracle> cov_oracle;
  if (oracle.available() && !functionals.empty()) cov_oracle = oracle.covariance(functionals);
  std::optional<OracleValue> theta_oracle;
  if (oracle.available()) theta_oracle = oracle.theta();
  std::optional<ClusterSizeLaw> law_oracle;
  if (oracle.available() && config.cluster_kmax)
    law_oracle = oracle.cluster_law(*config.cluster_kmax);
  std::optional<double> hill_var_oracle;
  std::optional<Matrix> sigma_oracle;
  double gamma_limit = 0.0;
  if (config.hill) {
    gamma_limit = tail_index(config.generator);
    if (oracle.available()) {
      const std::vector<ClusterFunctional> kernels{make_hill_log_sum(), make_hill_count()};
      sigma_oracle = oracle.covariance(kernels).value;
      hill_var_oracle = hill_asymptotic_variance(*sigma_oracle, gamma_limit);
    }
  }

  const std::filesystem::path out_dir = resolve_output_dir(config, options);
  std::ofstream zn_file, diag_file;
  std::unique_ptr<CsvWriter> zn_csv, diag_csv;
  ValidationReport report;
  report.name = config.name;
  report.replications = reps;
  report.insufficient_sample = reps < 2;
  if (options.write_outputs) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());
    {
      auto cfg = open_output(out_dir / "config.json");
      cfg << dump_config(config) << '\n';
    }
    report.files.push_back(out_dir / "config.json");
    zn_file = open_output(out_dir / "zn_values.csv");
    zn_csv = std::make_unique<CsvWriter>(
        zn_file, "zn_values",
        std::vector<std::string>{"ladder", "replication", "quantity", "item", "value"});
    diag_file = open_output(out_dir / "diagnostics.csv");
    diag_csv = std::make_unique<CsvWriter>(
        diag_file, "diagnostics",
        std::vector<std::string>{"ladder", "n", "r", "l", "quantity", "item", "mean", "std_error"});
  }

  for (std::size_t li = 0; li < config.ladder.size(); ++li) {
    const LadderEntry& entry = config.ladder[li];
    const Blocking blocking = Blocking::make(entry.n, entry.r, entry.l);
    const double m = static_cast<double>(blocking.num_blocks());
    const double n = static_cast<double>(entry.n);
    auto add = [&](CheckRow row) {
      row.ladder = li;
      row.n = entry.n;
      row.r = entry.r;
      row.l = entry.l;
      report.rows.push_back(std::move(row));
    };
    auto judged = [&](std::string quantity, std::string item, double emp, double orc, double se,
                      std::optional<double> tol) {
      CheckRow row{0, 0, 0, 0, std::move(quantity), std::move(item), emp, orc, se, 0.0, "info", {}};
      if (tol && std::isfinite(orc)) {
        row.tolerance = *tol;
        row.rule = "abs_diff_le";
        const double guard = 1e-12 * std::max({1.0, std::abs(emp), std::abs(orc)});
        row.pass = std::abs(emp - orc) <= *tol + guard;
      }
      add(std::move(row));
    };
    auto bounded = [&](std::string quantity, std::string item, double emp, double se,
                       std::optional<double> tol) {
      CheckRow row{0, 0, 0, 0, std::move(quantity), std::move(item), emp, 0.0, se, 0.0, "info", {}};
      if (tol) {
        row.tolerance = *tol;
        row.rule = "abs_le";
        row.pass = std::abs(emp) <= *tol;
      }
      add(std::move(row));
    };
    auto insufficient = [&](std::string quantity, std::string item) {
      add(CheckRow{0,
                   0,
                   0,
                   0,
                   std::move(quantity),
                   std::move(item),
                   kNaN,
                   kNaN,
                   kNaN,
                   0.0,
                   "insufficient_sample",
                   {}});
    };

    // ---- replications -------------------------------------------------------
    std::vector<RepOut> out(reps);
    parallel_for(reps, threads, [&](std::size_t k) {
      RepOut& o = out[k];
      const RawSeries series = simulate_replication(config, li, k);
      const PreparedRow prep = prepare_row(config, series);
      const ExcessArray& row = prep.row;
      o.v_hat = row.exceed_prob();
      o.v_used = config.scaling == ScalingMode::kTrueV && prep.known_v ? *prep.known_v : o.v_hat;
      if (!(o.v_used > 0.0)) {
        o.valid = false;
        o.error = "v = 0";
      }
      if (!functionals.empty()) {
        const auto values = block_values(row, blocking, functionals);
        o.raw_sums.assign(functionals.size(), 0.0);
        for (std::size_t f = 0; f < functionals.size(); ++f) {
          for (double x : values[f]) o.raw_sums[f] += x;
        }
      }
      try {
        o.theta = theta_hat(row, blocking);
      } catch (const UndefinedError&) {
      }
      if (config.cluster_kmax) {
        const std::size_t kmax = *config.cluster_kmax;
        o.cluster_counts.assign(kmax + 1, 0.0);
        for (const auto& block : segment_blocks(row.view(), blocking).blocks) {
          const std::size_t len = extract_core(block).length;
          if (len > 0) o.cluster_counts[std::min(len, kmax + 1) - 1] += 1.0;
        }
      }
      if (!lag_index.empty() && row.nonzero_count() > 0) {
        for (std::size_t f : lag_index) {
          const auto& phi = *functionals[f].kernel();
          const LagSum ls = lag_sum_covariance(row, phi, phi, *config.lag_sum_max_lag);
          o.lag_raw.push_back(ls.value * ls.normalizer);
          o.lag_normalizer = ls.normalizer;
        }
      }
      if (config.hill && row.nonzero_count() > 0) {
        o.hill_gamma = hill_estimate(row).gamma_hat;
        o.sigma = sigma_matrix(row, blocking);
        const double target = prep.known_v
                                  ? hill_target(config.generator, *prep.known_v)
                                  : hill_target(config.generator, config.standardization.target_v);
        o.hill_scaled = std::sqrt(n * o.v_used) * (*o.hill_gamma - target);
        if (config.bootstrap.enabled && k == 0) {
          BootstrapSpec bs;
          bs.resamples = config.bootstrap.resamples;
          bs.seed = stream_seed(config.bootstrap.seed, li);
          bs.threads = 1;
          o.bootstrap = std::make_unique<BootstrapResult>(block_bootstrap(row, blocking, bs));
        }
      }
      if (config.diagnostics.enabled) {
        o.diag = diagnostics(row, blocking, functionals, config.diagnostics.epsilon,
                             config.diagnostics.moment_grid);
      }
    });

    // ---- reduction, in replication order ------------------------------------
    std::vector<std::size_t> valid;
    for (std::size_t k = 0; k < reps; ++k) {
      if (out[k].valid) valid.push_back(k);
    }
    if (valid.size() != reps) {
      add(CheckRow{0,
                   0,
                   0,
                   0,
                   "undefined_replications",
                   "v=0",
                   static_cast<double>(reps - valid.size()),
                   0.0,
                   0.0,
                   0.0,
                   "info",
                   {}});
    }

    std::vector<double> centering(functionals.size(), 0.0);
    for (std::size_t f = 0; f < functionals.size(); ++f) {
      if (config.centering == CenteringMode::kKnown) {
        centering[f] = *known_block_expectation(config, config.functionals[f], entry.r);
      } else {
        double s = 0.0;
        for (std::size_t k : valid) s += out[k].raw_sums[f];
        centering[f] = valid.empty() ? 0.0 : s / (static_cast<double>(valid.size()) * m);
      }
    }
    std::vector<std::vector<double>> z(functionals.size());
    for (std::size_t f = 0; f < functionals.size(); ++f) {
      for (std::size_t k : valid) {
        z[f].push_back((out[k].raw_sums[f] - m * centering[f]) / std::sqrt(n * out[k].v_used));
      }
    }

    for (std::size_t f = 0; f < functionals.size(); ++f) {
      add(CheckRow{0, 0, 0, 0, "centering", names[f], centering[f], kNaN, 0.0, 0.0, "info", {}});
      const Moments mo = sample_moments(z[f]);
      add(CheckRow{0, 0, 0, 0, "mean", names[f], mo.mean, 0.0, mo.std_error_mean, 0.0, "info", {}});
    }

    if (!functionals.empty()) {
      if (valid.size() < 2) {
        for (std::size_t i = 0; i < functionals.size(); ++i) {
          for (std::size_t j = i; j < functionals.size(); ++j) {
            insufficient("covariance", pair_name(names[i], names[j]));
          }
        }
      } else {
        const CovarianceEstimate cov = sample_covariance(z);
        for (std::size_t i = 0; i < functionals.size(); ++i) {
          for (std::size_t j = i; j < functionals.size(); ++j) {
            const double orc = cov_oracle ? cov_oracle->value(i, j) : kNaN;
            const double ose = cov_oracle ? cov_oracle->std_error(i, j) : 0.0;
            judged("covariance", pair_name(names[i], names[j]), cov.value(i, j), orc,
                   combined_se(cov.std_error(i, j), ose), config.tolerances.covariance);
          }
        }
      }
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        if (z[f].size() < 20) {
          insufficient("anderson_darling", names[f]);
          continue;
        }
        const NormalityResult nr = normality_test(z[f]);
        const double level = config.tolerances.normality_level.value_or(0.01);
        CheckRow ad{0,
                    0,
                    0,
                    0,
                    "anderson_darling",
                    names[f],
                    nr.a2_star,
                    anderson_darling_critical(level),
                    0.0,
                    level,
                    "info",
                    {}};
        if (config.tolerances.normality_level) {
          ad.rule = "less_than";
          ad.pass = nr.passes(level);
        }
        add(ad);
        add(CheckRow{0, 0, 0, 0, "ad_p_value", names[f], nr.p_value, kNaN, 0.0, 0.0, "info", {}});
        bounded("skewness", names[f], nr.skewness,
                std::sqrt(6.0 / static_cast<double>(z[f].size())), config.tolerances.skewness);
        bounded("excess_kurtosis", names[f], nr.excess_kurtosis,
                std::sqrt(24.0 / static_cast<double>(z[f].size())),
                config.tolerances.excess_kurtosis);
      }
    }

    // θ̂
    {
      std::vector<double> th, th_raw;
      for (std::size_t k = 0; k < reps; ++k) {
        if (out[k].theta) {
          th.push_back(out[k].theta->value);
          th_raw.push_back(out[k].theta->unclamped);
        }
      }
      if (!th.empty()) {
        const Moments mo = sample_moments(th);
        const double orc = theta_oracle ? theta_oracle->value : kNaN;
        const double ose = theta_oracle ? theta_oracle->std_error : 0.0;
        judged("theta", "theta_hat", mo.mean, orc,
               combined_se(th.size() > 1 ? mo.std_error_mean : 0.0, ose), config.tolerances.theta);
        const Moments mr = sample_moments(th_raw);
        add(CheckRow{0,
                     0,
                     0,
                     0,
                     "theta_unclamped",
                     "theta_hat",
                     mr.mean,
                     orc,
                     th.size() > 1 ? mr.std_error_mean : 0.0,
                     0.0,
                     "info",
                     {}});
      } else {
        add(CheckRow{0, 0, 0, 0, "theta", "theta_hat", kNaN, kNaN, kNaN, 0.0, "info", {}});
      }
    }

    // Cluster-size law, pooled over replications.
    if (config.cluster_kmax) {
      const std::size_t kmax = *config.cluster_kmax;
      std::vector<double> pooled(kmax + 1, 0.0);
      double total = 0.0;
      for (std::size_t k = 0; k < reps; ++k) {
        for (std::size_t s = 0; s <= kmax; ++s) {
          pooled[s] += out[k].cluster_counts[s];
          total += out[k].cluster_counts[s];
        }
      }
      if (total > 0.0) {
        for (double& p : pooled) p /= total;
      }
      for (std::size_t s = 0; s <= kmax; ++s) {
        const std::string item =
            s < kmax ? "k=" + std::to_string(s + 1) : "k>" + std::to_string(kmax);
        const double se = total > 0.0 ? std::sqrt(pooled[s] * (1.0 - pooled[s]) / total) : kNaN;
        add(CheckRow{0,
                     0,
                     0,
                     0,
                     "cluster_size",
                     item,
                     pooled[s],
                     law_oracle ? law_oracle->mass[s] : kNaN,
                     se,
                     0.0,
                     "info",
                     {}});
      }
      if (law_oracle && total > 0.0) {
        bounded("cluster_size_tv", "L", total_variation(pooled, law_oracle->mass), kNaN,
                config.tolerances.cluster_tv);
      } else {
        add(CheckRow{0, 0, 0, 0, "cluster_size_tv", "L", kNaN, kNaN, kNaN, 0.0, "info", {}});
      }
    }

    // Lag-sum covariance pooled over replications, against the
    // cross-replication variance and the tail-chain oracle.
    for (std::size_t q = 0; q < lag_index.size(); ++q) {
      const std::size_t f = lag_index[q];
      double raw = 0.0, norm = 0.0;
      for (std::size_t k = 0; k < reps; ++k) {
        if (out[k].lag_raw.empty()) continue;
        raw += out[k].lag_raw[q];
        norm += out[k].lag_normalizer;
      }
      const double lag = norm > 0.0 ? raw / norm : kNaN;
      double resid = 0.0;
      for (std::size_t k = 0; k < reps; ++k) {
        if (out[k].lag_raw.empty()) continue;
        const double e = out[k].lag_raw[q] - lag * out[k].lag_normalizer;
        resid += e * e;
      }
      const double lag_se = norm > 0.0 ? std::sqrt(resid) / norm : kNaN;
      const double orc = cov_oracle ? cov_oracle->value(f, f) : kNaN;
      const double ose = cov_oracle ? cov_oracle->std_error(f, f) : 0.0;
      judged("lag_sum", names[f], lag, orc, combined_se(lag_se, ose), config.tolerances.lag_sum);
      if (z[f].size() >= 2) {
        const Moments mo = sample_moments(z[f]);
        judged("lag_sum_vs_variance", names[f], lag, mo.variance,
               combined_se(lag_se, mo.std_error_variance), config.tolerances.lag_sum);
        judged("variance_vs_oracle", names[f], mo.variance, orc,
               combined_se(mo.std_error_variance, ose), config.tolerances.lag_sum);
      } else {
        insufficient("lag_sum_vs_variance", names[f]);
      }
    }

    // Hill estimator and bootstrap.
    if (config.hill) {
      std::vector<double> scaled;
      Matrix sigma_mean(2, 2);
      std::vector<double> s11, s12, s22;
      for (std::size_t k = 0; k < reps; ++k) {
        if (!out[k].hill_gamma) continue;
        scaled.push_back(out[k].hill_scaled);
        s11.push_back((*out[k].sigma)(0, 0));
        s12.push_back((*out[k].sigma)(0, 1));
        s22.push_back((*out[k].sigma)(1, 1));
      }
      if (scaled.size() != reps) {
        add(CheckRow{0,
                     0,
                     0,
                     0,
                     "hill_missing",
                     "gamma_hat",
                     static_cast<double>(reps - scaled.size()),
                     0.0,
                     0.0,
                     0.0,
                     "info",
                     {}});
      }
      if (scaled.size() >= 2) {
        const Moments mo = sample_moments(scaled);
        add(CheckRow{0,
                     0,
                     0,
                     0,
                     "hill_mean",
                     "scaled_error",
                     mo.mean,
                     0.0,
                     mo.std_error_mean,
                     0.0,
                     "info",
                     {}});
        judged("hill_variance", "scaled_error", mo.variance,
               hill_var_oracle ? *hill_var_oracle : kNaN, mo.std_error_variance,
               config.tolerances.hill_variance);
        const std::vector<std::pair<const char*, std::vector<double>*>> entries{
            {"11", &s11}, {"12", &s12}, {"22", &s22}};
        const std::size_t idx[3][2] = {{0, 0}, {0, 1}, {1, 1}};
        for (std::size_t e = 0; e < entries.size(); ++e) {
          const Moments ms = sample_moments(*entries[e].second);
          judged("sigma", entries[e].first, ms.mean,
                 sigma_oracle ? (*sigma_oracle)(idx[e][0], idx[e][1]) : kNaN, ms.std_error_mean,
                 config.tolerances.sigma);
        }
      } else {
        insufficient("hill_variance", "scaled_error");
      }
      if (config.bootstrap.enabled) {
        const BootstrapResult* boot = out[0].bootstrap.get();
        if (boot != nullptr && !boot->valid_values().empty() && scaled.size() >= 2) {
          bounded("bootstrap_ks", "hill", ks_two_sample(boot->valid_values(), scaled), kNaN,
                  config.tolerances.bootstrap_ks);
          add(CheckRow{0,
                       0,
                       0,
                       0,
                       "bootstrap_missing",
                       "hill",
                       static_cast<double>(boot->missing),
                       0.0,
                       0.0,
                       0.0,
                       "info",
                       {}});
        } else {
          insufficient("bootstrap_ks", "hill");
        }
        if (boot != nullptr && options.write_outputs) {
          const std::string file =
              li == 0 ? "bootstrap.csv" : "bootstrap_" + std::to_string(li) + ".csv";
          auto bf = open_output(out_dir / file);
          write_bootstrap_csv(bf, *boot);
          report.files.push_back(out_dir / file);
        }
      }
    }

    // ---- per-replication and diagnostic outputs -----------------------------
    if (options.write_outputs) {
      const std::string lstr = std::to_string(li);
      for (std::size_t k = 0; k < reps; ++k) {
        const RepOut& o = out[k];
        const std::string kstr = std::to_string(k);
        auto put = [&](const char* quantity, const std::string& item, double value) {
          zn_csv->row({lstr, kstr, quantity, CsvWriter::cell(item), CsvWriter::cell(value)});
        };
        for (std::size_t f = 0; f < functionals.size(); ++f) {
          const double zv =
              o.valid ? (o.raw_sums[f] - m * centering[f]) / std::sqrt(n * o.v_used) : kNaN;
          put("zn", names[f], zv);
          put("raw_sum", names[f], o.raw_sums[f]);
        }
        put("v_used", "", o.v_used);
        put("v_hat", "", o.v_hat);
        put("theta_hat", "", o.theta ? o.theta->value : kNaN);
        put("theta_unclamped", "", o.theta ? o.theta->unclamped : kNaN);
        for (std::size_t q = 0; q < o.lag_raw.size(); ++q) {
          put("lag_sum", names[lag_index[q]], o.lag_raw[q] / o.lag_normalizer);
        }
        if (config.hill) {
          put("hill_gamma_hat", "", o.hill_gamma.value_or(kNaN));
          put("hill_scaled", "", o.hill_scaled);
          if (o.sigma) {
            put("sigma", "11", (*o.sigma)(0, 0));
            put("sigma", "12", (*o.sigma)(0, 1));
            put("sigma", "22", (*o.sigma)(1, 1));
          }
        }
      }
      if (config.diagnostics.enabled) {
        auto emit = [&](const std::string& quantity, const std::string& item,
                        const std::vector<double>& xs) {
          const Moments mo = sample_moments(xs);
          diag_csv->row({lstr, std::to_string(entry.n), std::to_string(entry.r),
                         std::to_string(entry.l), quantity, CsvWriter::cell(item),
                         CsvWriter::cell(mo.mean),
                         CsvWriter::cell(xs.size() > 1 ? mo.std_error_mean : kNaN)});
        };
        std::vector<double> xs;
        for (std::size_t f = 0; f < functionals.size(); ++f) {
          xs.clear();
          for (const auto& o : out) xs.push_back(o.diag->delta_var_ratio[f]);
          emit("delta_var_ratio", names[f], xs);
          xs.clear();
          for (const auto& o : out) xs.push_back(o.diag->lindeberg_tail[f]);
          emit("lindeberg_tail", names[f], xs);
        }
        for (std::size_t g = 0; g < config.diagnostics.moment_grid.size(); ++g) {
          xs.clear();
          for (const auto& o : out) xs.push_back(o.diag->moment_curve[g].value);
          const auto& [x, y] = config.diagnostics.moment_grid[g];
          emit("moment_curve", "(" + format_double(x) + "," + format_double(y) + "]", xs);
        }
        xs.clear();
        for (const auto& o : out) {
          if (o.diag->theta) xs.push_back(o.diag->theta->value);
        }
        if (!xs.empty()) emit("theta_hat", "", xs);
      }
    }
  }

  if (options.write_outputs) {
    auto rf = open_output(out_dir / "report.csv");
    CsvWriter csv(rf, "report",
                  {"ladder", "n", "r", "l", "quantity", "item", "empirical", "oracle", "std_error",
                   "tolerance", "rule", "pass"});
    for (const auto& row : report.rows) {
      csv.row({std::to_string(row.ladder), std::to_string(row.n), std::to_string(row.r),
               std::to_string(row.l), row.quantity, CsvWriter::cell(row.item),
               CsvWriter::cell(row.empirical), CsvWriter::cell(row.oracle),
               CsvWriter::cell(row.std_error), CsvWriter::cell(row.tolerance), row.rule,
               row.pass ? CsvWriter::cell(*row.pass) : std::string()});
    }
    report.files.push_back(out_dir / "zn_values.csv");
    report.files.push_back(out_dir / "report.csv");
    report.files.push_back(out_dir / "diagnostics.csv");
  }
  oracle.save();
  return report;
}

}  // namespace clusterfx
