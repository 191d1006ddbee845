#include "clusterfx/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"

namespace clusterfx {

namespace {

using nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

// Typed access to one JSON object with the field path kept for messages.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) field_error(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) const { return j_.at(key); }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& item : j_.items()) {
      if (!known.count(item.key())) field_error(field(item.key()), "unknown field");
    }
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) field_error(field(key), "must be a number");
    return v.get<double>();
  }
  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
      field_error(field(key), "must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(unsigned_int(key, fallback));
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) field_error(field(key), "must be true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) field_error(field(key), "must be a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) field_error(field(key), "must be an array of numbers");
    for (const auto& x : v) {
      if (!x.is_number()) field_error(field(key), "must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  Section child(const std::string& key) const { return Section(j_.at(key), field(key)); }

 private:
  const json& j_;
  std::string path_;
};

template <typename Enum>
Enum choose(const Section& s, const std::string& key, Enum fallback,
            std::initializer_list<std::pair<const char*, Enum>> options) {
  if (!s.has(key)) return fallback;
  const std::string value = s.text(key, "");
  std::string names;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    names += names.empty() ? name : std::string(", ") + name;
  }
  field_error(s.field(key), "'" + value + "' is not one of " + names);
}

std::vector<FunctionalSpec> parse_functional_entry(const json& entry,
                                                   const std::string& path) {
  if (entry.is_string()) {
    try {
      return {parse_functional(entry.get<std::string>())};
    } catch (const ConfigError& e) {
      field_error(path, e.what());
    }
  }
  Section s(entry, path);
  s.allow({"family", "params", "index", "dim", "grid"});
  FunctionalSpec base;
  try {
    base.family = parse_functional_family(s.text("family", ""));
  } catch (const ConfigError& e) {
    field_error(s.field("family"), e.what());
  }
  base.params = s.numbers("params");
  base.index = s.count("index", 0);
  base.dim = s.count("dim", 1);
  if (!s.has("grid")) return {base};
  if (base.family != FunctionalFamily::kTailIndicator) {
    field_error(s.field("grid"), "grids expand tail_indicator only");
  }
  const json& grid = s.raw("grid");
  if (!grid.is_array() || grid.empty()) field_error(s.field("grid"), "must be a nonempty array");
  std::vector<FunctionalSpec> out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    FunctionalSpec f = base;
    const std::string at = s.field("grid") + "[" + std::to_string(k) + "]";
    if (grid[k].is_number()) {
      f.params = {grid[k].get<double>()};
    } else if (grid[k].is_array()) {
      f.params.clear();
      for (const auto& x : grid[k]) {
        if (!x.is_number()) field_error(at, "must hold numbers");
        f.params.push_back(x.get<double>());
      }
    } else {
      field_error(at, "must be a number or an array of numbers");
    }
    f.dim = f.params.size();
    out.push_back(f);
  }
  return out;
}

std::optional<double> tolerance(const Section& s, const std::string& key) {
  if (!s.has(key)) return std::nullopt;
  const double v = s.number(key, 0.0);
  if (!(v > 0.0)) field_error(s.field(key), "must be > 0");
  return v;
}

}  // namespace

const char* to_string(ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::kMarginal: return "marginal";
    case ThresholdMode::kEmpirical: return "empirical";
    case ThresholdMode::kExplicit: return "explicit";
  }
  return "marginal";
}

const char* to_string(MarginMode mode) {
  return mode == MarginMode::kNative ? "native" : "uniform";
}

const char* to_string(ScalingMode mode) {
  return mode == ScalingMode::kTrueV ? "true_v" : "estimated";
}

FunctionalSpec parse_functional(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  const auto open = s.find('(');
  FunctionalSpec spec;
  spec.family = parse_functional_family(s.substr(0, open));
  if (open == std::string::npos) return spec;
  if (s.back() != ')') throw ConfigError("functional '" + text + "': missing ')'");
  std::stringstream args(s.substr(open + 1, s.size() - open - 2));
  std::string arg;
  while (std::getline(args, arg, ',')) {
    if (arg.empty()) continue;
    const auto eq = arg.find('=');
    try {
      if (eq == std::string::npos) {
        spec.params.push_back(std::stod(arg));
        continue;
      }
      const std::string key = arg.substr(0, eq);
      const std::size_t value = std::stoul(arg.substr(eq + 1));
      if (key == "j" || key == "component") {
        spec.index = value;
      } else if (key == "dim") {
        spec.dim = value;
      } else {
        throw ConfigError("functional '" + text + "': unknown argument '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("functional '" + text + "': cannot parse '" + arg + "'");
    }
  }
  if (spec.family == FunctionalFamily::kTailIndicator) spec.dim = spec.params.size();
  if (spec.family == FunctionalFamily::kUpcrossing) spec.dim = 2;
  return spec;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const Section s(root, "");
  s.allow({"name", "generator", "standardization", "ladder", "functionals",
           "replications", "seed", "threads", "centering", "scaling", "oracle", "hill",
           "bootstrap", "lag_sum", "cluster_size", "diagnostics", "tolerances",
           "outputs"});
  ExperimentConfig c;
  c.name = s.text("name", c.name);

  if (!s.has("generator")) field_error("generator", "is required");
  {
    const Section g = s.child("generator");
    g.allow({"family", "gamma", "alpha", "weights"});
    try {
      c.generator.family = parse_family(g.text("family", ""));
    } catch (const ConfigError& e) {
      field_error(g.field("family"), e.what());
    }
    c.generator.gamma = g.number("gamma", c.generator.gamma);
    c.generator.alpha = g.number("alpha", c.generator.alpha);
    c.generator.weights = g.numbers("weights");
  }

  if (s.has("standardization")) {
    const Section t = s.child("standardization");
    t.allow({"mode", "margin", "threshold", "target_v", "u", "a", "window"});
    auto& st = c.standardization;
    st.mode = choose(t, "mode", st.mode,
                     {{"shifted", ExcessMode::kShifted},
                      {"window", ExcessMode::kWindow},
                      {"ratio", ExcessMode::kRatio}});
    st.margin = choose(t, "margin", st.margin,
                       {{"native", MarginMode::kNative}, {"uniform", MarginMode::kUniform}});
    st.threshold = choose(t, "threshold", st.threshold,
                          {{"marginal", ThresholdMode::kMarginal},
                           {"empirical", ThresholdMode::kEmpirical},
                           {"explicit", ThresholdMode::kExplicit}});
    st.target_v = t.number("target_v", st.target_v);
    st.u = t.number("u", st.u);
    st.a = t.number("a", st.a);
    st.window = t.count("window", st.window);
  }

  if (!s.has("ladder")) field_error("ladder", "is required");
  {
    const json& ladder = s.raw("ladder");
    if (!ladder.is_array()) field_error("ladder", "must be an array");
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      const Section e(ladder[k], "ladder[" + std::to_string(k) + "]");
      e.allow({"n", "r", "l"});
      c.ladder.push_back({e.count("n", 0), e.count("r", 0), e.count("l", 0)});
    }
  }

  if (s.has("functionals")) {
    const json& fs = s.raw("functionals");
    if (!fs.is_array()) field_error("functionals", "must be an array");
    for (std::size_t k = 0; k < fs.size(); ++k) {
      for (auto& f : parse_functional_entry(fs[k], "functionals[" + std::to_string(k) + "]")) {
        c.functionals.push_back(std::move(f));
      }
    }
  }

  c.replications = s.count("replications", c.replications);
  c.seed = s.unsigned_int("seed", c.seed);
  c.threads = s.count("threads", c.threads);
  c.centering = choose(s, "centering", c.centering,
                       {{"known", CenteringMode::kKnown}, {"plugin", CenteringMode::kPlugin}});
  c.scaling = choose(s, "scaling", c.scaling,
                     {{"true_v", ScalingMode::kTrueV}, {"estimated", ScalingMode::kEstimated}});

  if (s.has("oracle")) {
    const Section o = s.child("oracle");
    o.allow({"kind", "draws", "seed", "closed_form", "cache"});
    c.oracle.enabled = choose(o, "kind", true, {{"tail_chain", true}, {"none", false}});
    c.oracle.draws = o.count("draws", c.oracle.draws);
    c.oracle.seed = o.unsigned_int("seed", c.oracle.seed);
    c.oracle.closed_form = o.boolean("closed_form", c.oracle.closed_form);
    c.oracle.cache = o.text("cache", c.oracle.cache);
  }
  c.hill = s.boolean("hill", c.hill);
  if (s.has("bootstrap")) {
    const Section b = s.child("bootstrap");
    b.allow({"enabled", "resamples", "seed"});
    c.bootstrap.enabled = b.boolean("enabled", true);
    c.bootstrap.resamples = b.count("resamples", c.bootstrap.resamples);
    c.bootstrap.seed = b.unsigned_int("seed", c.bootstrap.seed);
  }
  if (s.has("lag_sum")) {
    const Section l = s.child("lag_sum");
    l.allow({"max_lag"});
    if (!l.has("max_lag")) field_error(l.field("max_lag"), "is required");
    c.lag_sum_max_lag = l.count("max_lag", 0);
  }
  if (s.has("cluster_size")) {
    const Section l = s.child("cluster_size");
    l.allow({"kmax"});
    c.cluster_kmax = l.count("kmax", 12);
  }
  if (s.has("diagnostics")) {
    const Section d = s.child("diagnostics");
    d.allow({"enabled", "epsilon", "moment_grid"});
    c.diagnostics.enabled = d.boolean("enabled", true);
    c.diagnostics.epsilon = d.number("epsilon", c.diagnostics.epsilon);
    if (d.has("moment_grid")) {
      c.diagnostics.moment_grid.clear();
      const json& grid = d.raw("moment_grid");
      if (!grid.is_array()) field_error(d.field("moment_grid"), "must be an array of [x, y]");
      for (const auto& p : grid) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
          field_error(d.field("moment_grid"), "must be an array of [x, y]");
        }
        c.diagnostics.moment_grid.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
    }
  }
  if (s.has("tolerances")) {
    const Section t = s.child("tolerances");
    t.allow({"covariance", "theta", "normality_level", "skewness", "excess_kurtosis",
             "cluster_tv", "bootstrap_ks", "lag_sum", "sigma", "hill_variance"});
    auto& tol = c.tolerances;
    tol.covariance = tolerance(t, "covariance");
    tol.theta = tolerance(t, "theta");
    tol.normality_level = tolerance(t, "normality_level");
    tol.skewness = tolerance(t, "skewness");
    tol.excess_kurtosis = tolerance(t, "excess_kurtosis");
    tol.cluster_tv = tolerance(t, "cluster_tv");
    tol.bootstrap_ks = tolerance(t, "bootstrap_ks");
    tol.lag_sum = tolerance(t, "lag_sum");
    tol.sigma = tolerance(t, "sigma");
    tol.hill_variance = tolerance(t, "hill_variance");
  }
  if (s.has("outputs")) {
    const Section o = s.child("outputs");
    o.allow({"directory"});
    c.output_dir = o.text("directory", c.output_dir);
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (replications < 1) field_error("replications", "must be >= 1");
  GeneratorSpec g = generator;
  g.length = 1;
  try {
    g.validate();
  } catch (const ConfigError& e) {
    field_error("generator", e.what());
  }

  const auto& st = standardization;
  if (st.threshold != ThresholdMode::kExplicit &&
      !(st.target_v > 0.0 && st.target_v < 1.0)) {
    field_error("standardization.target_v", "must lie in (0,1)");
  }
  if (st.threshold == ThresholdMode::kExplicit) {
    if (st.mode == ExcessMode::kRatio ? !(st.u > 0.0) : !(st.a > 0.0)) {
      field_error("standardization", st.mode == ExcessMode::kRatio ? "ratio mode needs u > 0"
                                                                   : "a must be > 0");
    }
  }
  if (st.window < 1) field_error("standardization.window", "must be >= 1");
  if (st.mode != ExcessMode::kWindow && st.window != 1) {
    field_error("standardization.window", "only window mode takes a width other than 1");
  }
  if (st.mode == ExcessMode::kRatio) {
    if (generator.family == Family::kIidUniform || st.margin == MarginMode::kUniform) {
      field_error("standardization.mode", "ratio mode needs heavy-tailed native margins");
    }
  }
  const std::size_t dim = st.mode == ExcessMode::kWindow ? st.window : 1;

  if (ladder.empty()) field_error("ladder", "must list at least one (n, r, l)");
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const auto& e = ladder[k];
    if (!(e.l >= 1 && e.l < e.r && e.r <= e.n)) {
      field_error("ladder[" + std::to_string(k) + "]", "must satisfy 1 <= l < r <= n");
    }
    if (lag_sum_max_lag && *lag_sum_max_lag >= e.n) {
      field_error("lag_sum.max_lag", "must be below n of every ladder entry");
    }
  }

  if (functionals.empty() && !hill) {
    field_error("functionals", "must declare at least one functional (or enable hill)");
  }
  for (std::size_t k = 0; k < functionals.size(); ++k) {
    const std::string field = "functionals[" + std::to_string(k) + "]";
    const auto& f = functionals[k];
    try {
      const ClusterFunctional built = make_functional(f);
      const std::size_t want =
          f.family == FunctionalFamily::kClusterLength ? dim : (f.dim == 0 ? 1 : f.dim);
      if (want != dim) {
        field_error(field, "expects dimension " + std::to_string(want) +
                               ", rows have dimension " + std::to_string(dim));
      }
    } catch (const ConfigError& e) {
      if (std::string(e.what()).rfind("config field", 0) == 0) throw;
      field_error(field, e.what());
    }
  }
  if (hill && st.mode != ExcessMode::kRatio) field_error("hill", "needs ratio mode");
  if (bootstrap.enabled && !hill) field_error("bootstrap", "is implemented for hill only");
  if (bootstrap.enabled && bootstrap.resamples < 1) {
    field_error("bootstrap.resamples", "must be >= 1");
  }
  if (cluster_kmax && *cluster_kmax < 1) field_error("cluster_size.kmax", "must be >= 1");
  if (oracle.enabled && oracle.draws < 1) field_error("oracle.draws", "must be >= 1");
  if (!(diagnostics.epsilon > 0.0)) field_error("diagnostics.epsilon", "must be > 0");
  for (const auto& [x, y] : diagnostics.moment_grid) {
    if (!(x >= 0.0 && x < y)) field_error("diagnostics.moment_grid", "needs 0 <= x < y");
  }
  if (tolerances.normality_level) {
    const double lv = *tolerances.normality_level;
    const bool tabulated = lv == 0.10 || lv == 0.05 || lv == 0.025 || lv == 0.01 || lv == 0.005;
    if (!tabulated) {
      field_error("tolerances.normality_level", "must be one of 0.10, 0.05, 0.025, 0.01, 0.005");
    }
  }
  if (output_dir.empty()) field_error("outputs.directory", "must not be empty");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["generator"] = {{"family", to_string(c.generator.family)},
                    {"gamma", c.generator.gamma},
                    {"alpha", c.generator.alpha},
                    {"weights", c.generator.weights}};
  const auto& st = c.standardization;
  j["standardization"] = {{"mode", to_string(st.mode)},
                          {"margin", to_string(st.margin)},
                          {"threshold", to_string(st.threshold)},
                          {"target_v", st.target_v},
                          {"u", st.u},
                          {"a", st.a},
                          {"window", st.window}};
  j["ladder"] = json::array();
  for (const auto& e : c.ladder) j["ladder"].push_back({{"n", e.n}, {"r", e.r}, {"l", e.l}});
  j["functionals"] = json::array();
  for (const auto& f : c.functionals) j["functionals"].push_back(f.canonical());
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["centering"] = to_string(c.centering);
  j["scaling"] = to_string(c.scaling);
  j["oracle"] = {{"kind", c.oracle.enabled ? "tail_chain" : "none"},
                 {"draws", c.oracle.draws},
                 {"seed", c.oracle.seed},
                 {"closed_form", c.oracle.closed_form},
                 {"cache", c.oracle.cache}};
  j["hill"] = c.hill;
  j["bootstrap"] = {{"enabled", c.bootstrap.enabled},
                    {"resamples", c.bootstrap.resamples},
                    {"seed", c.bootstrap.seed}};
  if (c.lag_sum_max_lag) j["lag_sum"] = {{"max_lag", *c.lag_sum_max_lag}};
  if (c.cluster_kmax) j["cluster_size"] = {{"kmax", *c.cluster_kmax}};
  json grid = json::array();
  for (const auto& [x, y] : c.diagnostics.moment_grid) grid.push_back({x, y});
  j["diagnostics"] = {{"enabled", c.diagnostics.enabled},
                      {"epsilon", c.diagnostics.epsilon},
                      {"moment_grid", grid}};
  json tol = json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) tol[key] = *v;
  };
  put("covariance", c.tolerances.covariance);
  put("theta", c.tolerances.theta);
  put("normality_level", c.tolerances.normality_level);
  put("skewness", c.tolerances.skewness);
  put("excess_kurtosis", c.tolerances.excess_kurtosis);
  put("cluster_tv", c.tolerances.cluster_tv);
  put("bootstrap_ks", c.tolerances.bootstrap_ks);
  put("lag_sum", c.tolerances.lag_sum);
  put("sigma", c.tolerances.sigma);
  put("hill_variance", c.tolerances.hill_variance);
  j["tolerances"] = tol;
  j["outputs"] = {{"directory", c.output_dir}};
  return j.dump(2);
}

}  // namespace clusterfx
