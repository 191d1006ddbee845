#include "clusterfx/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "clusterfx/config.hpp"
#include "clusterfx/csv.hpp"
#include "clusterfx/empirical.hpp"
#include "clusterfx/errors.hpp"
#include "clusterfx/experiment.hpp"
#include "clusterfx/format.hpp"
#include "clusterfx/resample.hpp"
#include "clusterfx/tail_chain.hpp"

namespace clusterfx {

namespace {

struct GeneratorFlags {
  std::string model;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::vector<double> weights;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Generator family (iid_uniform, iid_pareto, armax, mm)");
    app->add_option("--alpha", alpha, "ARMAX coefficient");
    app->add_option("--gamma", gamma, "Pareto tail index");
    app->add_option("--weights", weights, "Moving-maxima weights")->delimiter(',');
  }

  void apply(GeneratorSpec& g) const {
    if (!model.empty()) g.family = parse_family(model);
    if (alpha) g.alpha = *alpha;
    if (gamma) g.gamma = *gamma;
    if (!weights.empty()) g.weights = weights;
  }
};

std::string describe_value(const OracleValue& v) {
  if (v.closed_form) return format_double(v.value);
  return format_double(v.value) + " se=" + format_double(v.std_error);
}

ExperimentConfig config_or_default(const std::string& path) {
  if (!path.empty()) return load_config(path);
  ExperimentConfig c;
  c.ladder.push_back({10000, 100, 10});
  c.functionals.push_back(parse_functional("tail_indicator(0)"));
  return c;
}

RawSeries obtain_series(const ExperimentConfig& c, const std::string& input) {
  if (!input.empty()) {
    RawSeries s = read_series_csv(std::filesystem::path(input));
    validate_series(s);
    return s;
  }
  return simulate_replication(c, 0, 0);
}

int cmd_simulate(const ExperimentConfig& c, std::size_t replication, const std::string& out_path,
                 std::ostream& out) {
  GeneratorSpec g = c.generator;
  g.length = c.ladder.at(0).n;
  g.seed = stream_seed(stream_seed(c.seed, 0), replication);
  const RawSeries s = simulate(g);
  if (out_path.empty()) {
    write_series_csv(out, s);
    return kExitOk;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + out_path);
  write_series_csv(f, s);
  return kExitOk;
}

int cmd_analyze(const ExperimentConfig& c, const std::string& input, std::ostream& out) {
  const RawSeries series = obtain_series(c, input);
  const PreparedRow prep = prepare_row(c, series);
  const ExcessArray& row = prep.row;
  const LadderEntry& e = c.ladder.at(0);
  if (row.size() < e.r) {
    throw ConfigError("row of length " + std::to_string(row.size()) +
                      " is shorter than the block length " + std::to_string(e.r));
  }
  const Blocking blocking = Blocking::make(row.size(), e.r, std::min(e.l, e.r - 1));
  CsvWriter csv(out, "analyze", {"quantity", "item", "value"});
  auto put = [&](const std::string& q, const std::string& item, double v) {
    csv.row({q, CsvWriter::cell(item), CsvWriter::cell(v)});
  };
  put("n", "", static_cast<double>(row.size()));
  put("block_length", "", static_cast<double>(blocking.block_length()));
  put("num_blocks", "", static_cast<double>(blocking.num_blocks()));
  put("threshold", "", prep.threshold);
  put("scale", "", prep.scale);
  put("v_hat", "", row.exceed_prob());
  for (const auto& w : blocking.warnings()) csv.row({"warning", CsvWriter::cell(w), ""});

  std::vector<ClusterFunctional> fs;
  for (const auto& spec : c.functionals) fs.push_back(make_functional(spec));
  if (!fs.empty()) {
    const auto values = block_values(row, blocking, fs);
    const std::optional<double> v =
        c.scaling == ScalingMode::kTrueV && prep.known_v ? prep.known_v
                                                         : std::optional<double>(row.exceed_prob());
    for (std::size_t k = 0; k < fs.size(); ++k) {
      double sum = 0.0;
      for (double x : values[k]) sum += x;
      put("block_sum", fs[k].name(), sum);
      const auto mean = known_block_expectation(c, c.functionals[k], blocking.block_length());
      if (mean && *v > 0.0) {
        const double z = (sum - static_cast<double>(blocking.num_blocks()) * *mean) /
                         std::sqrt(static_cast<double>(row.size()) * *v);
        put("zn", fs[k].name(), z);
      }
    }
    const DiagnosticsReport d = diagnostics(row, blocking, fs, c.diagnostics.epsilon,
                                            c.diagnostics.moment_grid);
    for (std::size_t k = 0; k < fs.size(); ++k) {
      put("delta_var_ratio", fs[k].name(), d.delta_var_ratio[k]);
      put("lindeberg_tail", fs[k].name(), d.lindeberg_tail[k]);
    }
    for (const auto& p : d.moment_curve) {
      put("moment_curve", "(" + format_double(p.x) + "," + format_double(p.y) + "]", p.value);
    }
  }
  try {
    const ThetaEstimate t = theta_hat(row, blocking);
    put("theta_hat", "", t.value);
    put("theta_unclamped", "", t.unclamped);
  } catch (const UndefinedError&) {
    csv.row({"theta_hat", "", "undefined"});
  }
  if (row.mode() == ExcessMode::kRatio && row.nonzero_count() > 0) {
    const HillResult h = hill_estimate(row, blocking);
    put("hill_gamma_hat", "", h.gamma_hat);
    put("hill_asymptotic_sd", "", *h.asymptotic_sd);
  }
  return kExitOk;
}

int cmd_bootstrap(const ExperimentConfig& c, const std::string& input, std::size_t resamples,
                  std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const RawSeries series = obtain_series(c, input);
  const PreparedRow prep = prepare_row(c, series);
  if (prep.row.mode() != ExcessMode::kRatio) {
    throw ConfigError("bootstrap needs standardization.mode \"ratio\"");
  }
  const LadderEntry& e = c.ladder.at(0);
  const Blocking blocking = Blocking::make(prep.row.size(), e.r, std::min(e.l, e.r - 1));
  BootstrapSpec spec;
  spec.resamples = resamples;
  spec.seed = seed;
  spec.threads = c.threads;
  const BootstrapResult res = block_bootstrap(prep.row, blocking, spec);
  if (out_path.empty()) {
    write_bootstrap_csv(out, res);
    return kExitOk;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + out_path);
  write_bootstrap_csv(f, res);
  out << "gamma_hat " << format_double(res.statistic) << " (full row "
      << format_double(res.full_row_statistic) << "), resamples " << res.draws.size()
      << ", missing " << res.missing << '\n';
  return kExitOk;
}

int cmd_validate(const ExperimentConfig& c, const RunOptions& opt, std::ostream& out) {
  const ValidationReport report = run_experiment(c, opt);
  std::size_t judged = 0;
  for (const auto& row : report.rows) {
    if (!row.pass) continue;
    ++judged;
    if (*row.pass) continue;
    out << "FAIL ladder " << row.ladder << " " << row.quantity << " " << row.item
        << ": empirical " << format_double(row.empirical) << ", oracle "
        << format_double(row.oracle) << ", tolerance " << format_double(row.tolerance) << " ("
        << row.rule << ")\n";
  }
  out << report.name << ": " << (judged - report.failures()) << "/" << judged
      << " checks passed";
  if (report.insufficient_sample) out << " (insufficient sample for variance checks)";
  out << '\n';
  for (const auto& f : report.files) out << "wrote " << f.string() << '\n';
  return report.all_pass() ? kExitOk : kExitValidationFailed;
}

struct OracleFlags {
  std::string quantity = "theta";
  std::string scale = "uniform";
  std::size_t window = 1;
  std::vector<std::string> functionals;
  std::size_t kmax = 12;
  std::vector<double> s, t;
  std::string variant = "survival";
  std::size_t draws = 1'000'000;
  std::uint64_t seed = 0x5EEDC4A1ULL;
  bool monte_carlo = false;
};

int cmd_oracle(const ExperimentConfig& c, const OracleFlags& f, std::ostream& out) {
  ChainScale scale = ChainScale::kUniform;
  if (f.scale == "ratio") {
    scale = ChainScale::kRatio;
  } else if (f.scale == "shifted_ratio") {
    scale = ChainScale::kShiftedRatio;
  } else if (f.scale != "uniform") {
    throw ConfigError("--scale must be uniform, ratio or shifted_ratio");
  }
  const TailChainModel model(c.generator, scale, f.window);
  const OracleOptions opt{f.draws, f.seed, !f.monte_carlo};
  if (f.quantity == "theta") {
    out << describe_value(theta_true(model, opt)) << '\n';
    return kExitOk;
  }
  if (f.quantity == "covariance") {
    if (f.functionals.empty() || f.functionals.size() > 2) {
      throw ConfigError("--quantity covariance takes one or two --functional values");
    }
    const ClusterFunctional a = make_functional(parse_functional(f.functionals[0]));
    const ClusterFunctional b =
        make_functional(parse_functional(f.functionals[f.functionals.size() - 1]));
    out << describe_value(limit_covariance(model, a, b, opt)) << '\n';
    return kExitOk;
  }
  if (f.quantity == "cluster_size") {
    const ClusterSizeLaw law = cluster_size_law(model, f.kmax, opt);
    for (std::size_t k = 0; k < law.mass.size(); ++k) {
      out << (k < f.kmax ? std::to_string(k + 1) : ">" + std::to_string(f.kmax)) << ' '
          << format_double(law.mass[k]);
      if (!law.closed_form) out << " se=" << format_double(law.std_error[k]);
      out << '\n';
    }
    return kExitOk;
  }
  if (f.quantity == "survival") {
    SurvivalVariant v = SurvivalVariant::kSurvival;
    if (f.variant == "orderstat") {
      v = SurvivalVariant::kOrderStat;
    } else if (f.variant == "allvalues") {
      v = SurvivalVariant::kAllValues;
    } else if (f.variant != "survival") {
      throw ConfigError("--variant must be survival, orderstat or allvalues");
    }
    out << describe_value(limit_survival_covariance(model, f.s, f.t, v, opt)) << '\n';
    return kExitOk;
  }
  throw ConfigError("--quantity must be theta, covariance, cluster_size or survival");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Empirical processes of cluster functionals: simulation, estimation, validation"};
  app.name("clusterfx");
  app.require_subcommand(1);

  std::string config_path, input, out_path, output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications, threads, n;
  std::size_t replication = 0;
  std::size_t resamples = 1000;
  std::uint64_t boot_seed = 1;
  GeneratorFlags gen;
  OracleFlags oracle;

  auto* sim = app.add_subcommand("simulate", "Write one simulated raw series as CSV");
  auto* ana = app.add_subcommand("analyze", "Process one row: Z_n, theta, diagnostics");
  auto* boot = app.add_subcommand("bootstrap", "Block bootstrap of the Hill estimator");
  auto* val = app.add_subcommand("validate", "Run a replicated experiment and its checks");
  auto* orc = app.add_subcommand("oracle", "Print tail-chain limit quantities");

  for (auto* sub : {sim, ana, boot, val, orc}) {
    sub->add_option("--config", config_path, "Experiment config (JSON)");
    sub->add_option("--seed", seed, "Override the experiment seed");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
    gen.attach(sub);
  }
  sim->add_option("--n", n, "Series length (default: first ladder entry)");
  sim->add_option("--replication", replication, "Replication stream index");
  sim->add_option("--out", out_path, "Output CSV (default stdout)");
  for (auto* sub : {ana, boot}) {
    sub->add_option("--input", input, "Raw series CSV (default: simulate)");
  }
  boot->add_option("--resamples", resamples, "Number of bootstrap resamples B");
  boot->add_option("--bootstrap-seed", boot_seed, "Bootstrap seed");
  boot->add_option("--out", out_path, "Output CSV (default stdout)");
  val->add_option("--replications", replications, "Override the replication count");
  val->add_option("--output", output_dir, "Output directory");
  orc->add_option("--quantity", oracle.quantity, "theta, covariance, cluster_size, survival");
  orc->add_option("--scale", oracle.scale, "uniform, ratio, shifted_ratio");
  orc->add_option("--window", oracle.window, "Window width d (i.i.d. models)");
  orc->add_option("--functional", oracle.functionals, "Functional, e.g. tail_indicator(0.5)");
  orc->add_option("--kmax", oracle.kmax, "Largest cluster size listed separately");
  orc->add_option("--s", oracle.s, "Thresholds s_1..s_k")->delimiter(',');
  orc->add_option("--t", oracle.t, "Thresholds t_1..t_k")->delimiter(',');
  orc->add_option("--variant", oracle.variant, "survival, orderstat, allvalues");
  orc->add_option("--draws", oracle.draws, "Monte Carlo draws");
  orc->add_option("--oracle-seed", oracle.seed, "Monte Carlo seed");
  orc->add_flag("--monte-carlo", oracle.monte_carlo, "Skip closed forms");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    ExperimentConfig c = config_or_default(config_path);
    gen.apply(c.generator);
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (replications) c.replications = *replications;
    if (n && !c.ladder.empty()) c.ladder[0].n = *n;
    // A raw series needs only a valid generator, which simulate() checks.
    if (*sim) return cmd_simulate(c, replication, out_path, out);
    c.validate();
    if (*ana) return cmd_analyze(c, input, out);
    if (*boot) return cmd_bootstrap(c, input, resamples, boot_seed, out_path, out);
    if (*val) {
      RunOptions opt;
      if (!output_dir.empty()) opt.output_dir = output_dir;
      return cmd_validate(c, opt, out);
    }
    return cmd_oracle(c, oracle, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
  } catch (const StructuralError& e) {
    err << "structural error: " << e.what() << '\n';
  } catch (const UndefinedError& e) {
    err << "undefined: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
  }
  return kExitUsage;
}

}  // namespace clusterfx
