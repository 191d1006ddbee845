#include "clusterfx/tail_chain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"

namespace clusterfx {

namespace {

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double std_error() const {
    if (n < 2) return 0.0;
    return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  OracleValue result() const { return {mean, std_error(), false}; }
};

bool is_iid(Family f) { return f == Family::kIidUniform || f == Family::kIidPareto; }

}  // namespace

std::vector<double> armax_ratio_chain(double y, double alpha) {
  std::vector<double> r{y};
  for (double x = y * alpha; x > 1.0; x *= alpha) r.push_back(x);
  return r;
}

namespace {

// Unit-Pareto chain R_1, R_2, ... up to the last index with R_i > 1.
std::vector<double> sample_ratio_chain(const GeneratorSpec& g, Rng& rng) {
  const double y = 1.0 / rng.uniform();
  std::vector<double> r{y};
  switch (g.family) {
    case Family::kIidUniform:
    case Family::kIidPareto:
      break;
    case Family::kArmaxFrechet:
      r = armax_ratio_chain(y, g.alpha);
      break;
    case Family::kMovingMaxima: {
      // Shock position J drawn with probability w_J.
      const double u = rng.uniform();
      std::size_t j = 0;
      double acc = g.weights[0];
      while (u > acc && j + 1 < g.weights.size()) acc += g.weights[++j];
      while (g.weights[j] == 0.0 && j > 0) --j;  // rounding past the last positive weight
      for (std::size_t h = j + 1; h < g.weights.size(); ++h) {
        r.push_back(y * g.weights[h] / g.weights[j]);
      }
      while (r.size() > 1 && !(r.back() > 1.0)) r.pop_back();
      break;
    }
  }
  return r;
}

double mm_theta(const std::vector<double>& w) {
  double theta = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    double later = 0.0;
    for (std::size_t h = j + 1; h < w.size(); ++h) later = std::max(later, w[h]);
    theta += std::max(w[j] - later, 0.0);
  }
  return theta;
}

const FunctionalSpec* spec_of(const ClusterFunctional& f) {
  return f.spec() ? &*f.spec() : nullptr;
}

bool uniform_scalar(const TailChainModel& m) {
  return m.scale() == ChainScale::kUniform && m.window() == 1;
}

// E[N_x N_y - (N_x - 1{W_1>x})(N_y - 1{W_1>y})] for ARMAX on the uniform
// scale, where N_x counts chain values above x. With a = 1/(1-x) <= b = 1/(1-y):
// Σ_k min(1/b, α^{k-1}/a) + (1/b)/(1-α) - 1/b.
double armax_tail_indicator_cov(double alpha, double x, double y) {
  if (x >= 1.0 || y >= 1.0) return 0.0;
  const double a = 1.0 / (1.0 - std::min(x, y));
  const double b = 1.0 / (1.0 - std::max(x, y));
  double sum = 0.0;
  double p = 1.0;
  for (int k = 0; k < 10000; ++k) {
    const double term = std::min(1.0 / b, p / a);
    sum += term;
    if (p / a < 1e-18) break;
    p *= alpha;
  }
  return sum + (1.0 / b) / (1.0 - alpha) - 1.0 / b;
}

// ∫_a^1 (u - s)(u - t) du.
double claims_moment(double s, double t, double a) {
  auto prim = [&](double u) { return u * u * u / 3.0 - (s + t) * u * u / 2.0 + s * t * u; };
  return prim(1.0) - prim(a);
}

}  // namespace

const char* to_string(ChainScale scale) {
  switch (scale) {
    case ChainScale::kUniform: return "uniform";
    case ChainScale::kRatio: return "ratio";
    case ChainScale::kShiftedRatio: return "shifted_ratio";
  }
  return "uniform";
}

TailChainModel::TailChainModel(GeneratorSpec generator, ChainScale scale,
                               std::size_t window)
    : generator_(std::move(generator)), scale_(scale), window_(window) {
  GeneratorSpec check = generator_;
  if (check.length == 0) check.length = 1;
  check.validate();
  if (window_ == 0) throw ConfigError("tail chain window must be >= 1");
  if (window_ > 1 && !is_iid(generator_.family)) {
    throw ConfigError("window tail chains are implemented for i.i.d. families only");
  }
  if (scale_ != ChainScale::kUniform) gamma_ = tail_index(generator_);
}

double TailChainModel::to_scale(double r) const {
  if (!(r > 1.0)) return 0.0;
  switch (scale_) {
    case ChainScale::kUniform: return 1.0 - 1.0 / r;
    case ChainScale::kRatio: return std::pow(r, gamma_);
    case ChainScale::kShiftedRatio: return std::pow(r, gamma_) - 1.0;
  }
  return 0.0;
}

Vector TailChainModel::sample(Rng& rng) const {
  const std::vector<double> r = sample_ratio_chain(generator_, rng);
  if (window_ == 1) {
    std::vector<double> w(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) w[i] = to_scale(r[i]);
    return Vector(std::move(w), 1);
  }
  // One exceedance at a uniform position J of the first window; window 1+h
  // sees it at coordinate J-h while h < J.
  const std::size_t d = window_;
  const std::size_t j = rng.below(d);  // 0-based J-1
  const double value = to_scale(r[0]);
  std::vector<double> flat((j + 1) * d, 0.0);
  for (std::size_t h = 0; h <= j; ++h) flat[h * d + (j - h)] = value;
  return Vector(std::move(flat), d);
}

std::string TailChainModel::tag() const {
  std::string t = generator_.model_tag();
  t += "|scale=";
  t += to_string(scale_);
  if (window_ > 1) t += "|window=" + std::to_string(window_);
  return t;
}

Vector shifted_chain(const Vector& w) {
  const BlockView v = w.view();
  if (v.size() <= 1) return Vector::zeros(1, w.dim());
  const Core core = extract_core(v.subview(1, v.size() - 1));
  if (core.empty()) return Vector::zeros(1, w.dim());
  const auto data = core.values.data();
  return Vector(std::vector<double>(data.begin(), data.end()), w.dim());
}

OracleValue theta_monte_carlo(const TailChainModel& model, const OracleOptions& opt) {
  Rng rng(opt.seed);
  Welford acc;
  for (std::size_t k = 0; k < opt.draws; ++k) {
    acc.add(model.sample(rng).size() == 1 ? 1.0 : 0.0);
  }
  return acc.result();
}

OracleValue theta_true(const TailChainModel& model, const OracleOptions& opt) {
  if (!opt.closed_form) return theta_monte_carlo(model, opt);
  if (model.window() > 1) return {1.0 / static_cast<double>(model.window()), 0.0, true};
  switch (model.family()) {
    case Family::kIidUniform:
    case Family::kIidPareto:
      return {1.0, 0.0, true};
    case Family::kArmaxFrechet:
      return {1.0 - model.generator().alpha, 0.0, true};
    case Family::kMovingMaxima:
      return {mm_theta(model.generator().weights), 0.0, true};
  }
  return theta_monte_carlo(model, opt);
}

std::optional<double> closed_form_covariance(const TailChainModel& model,
                                             const ClusterFunctional& f,
                                             const ClusterFunctional& g) {
  const FunctionalSpec* a = spec_of(f);
  const FunctionalSpec* b = spec_of(g);
  if (a == nullptr || b == nullptr) return std::nullopt;
  using FF = FunctionalFamily;
  const bool iid = is_iid(model.family());

  if (iid && uniform_scalar(model)) {
    // W = (U), U uniform on (0,1); the shifted chain is zero.
    if (a->family == FF::kTailIndicator && b->family == FF::kTailIndicator) {
      return 1.0 - std::max(a->params.at(0), b->params.at(0));
    }
    if (a->family == FF::kExcessClaims && b->family == FF::kExcessClaims) {
      const double s = a->params.at(0), t = b->params.at(0);
      return claims_moment(s, t, std::max(s, t));
    }
    if ((a->family == FF::kTailIndicator && b->family == FF::kExcessClaims) ||
        (a->family == FF::kExcessClaims && b->family == FF::kTailIndicator)) {
      const double x = (a->family == FF::kTailIndicator ? a : b)->params.at(0);
      const double t = (a->family == FF::kExcessClaims ? a : b)->params.at(0);
      const double lo = std::max(x, t);
      return ((1.0 - t) * (1.0 - t) - (lo - t) * (lo - t)) / 2.0;
    }
  }
  if (iid && model.scale() == ChainScale::kUniform && model.window() > 1) {
    // Each chain point has a single nonzero coordinate.
    if (a->family == FF::kTailIndicator && b->family == FF::kTailIndicator) return 0.0;
    if (model.window() == 2 && a->family == FF::kUpcrossing &&
        b->family == FF::kUpcrossing) {
      if (!(a->params.at(0) > 0.0) || !(b->params.at(0) > 0.0)) return 0.0;
      return 0.5 * (1.0 - std::max(a->params.at(1), b->params.at(1)));
    }
  }
  if (iid && model.scale() == ChainScale::kRatio && model.window() == 1) {
    // log W_1 ~ Exp with mean gamma.
    const double gam = tail_index(model.generator());
    const bool la = a->family == FF::kHillLog, lb = b->family == FF::kHillLog;
    const bool ca = a->family == FF::kHillCount, cb = b->family == FF::kHillCount;
    if (la && lb) return 2.0 * gam * gam;
    if ((la && cb) || (ca && lb)) return gam;
    if (ca && cb) return 1.0;
  }
  if (model.family() == Family::kArmaxFrechet && uniform_scalar(model) &&
      a->family == FF::kTailIndicator && b->family == FF::kTailIndicator) {
    return armax_tail_indicator_cov(model.generator().alpha, a->params.at(0),
                                    b->params.at(0));
  }
  return std::nullopt;
}

CovarianceOracle limit_covariance_matrix(const TailChainModel& model,
                                         const std::vector<ClusterFunctional>& fs,
                                         const OracleOptions& opt) {
  const std::size_t k = fs.size();
  CovarianceOracle out{Matrix(k, k), Matrix(k, k), std::vector<bool>(k * k, false)};
  std::vector<std::optional<double>> closed(k * k);
  bool need_mc = false;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (opt.closed_form) closed[i * k + j] = closed_form_covariance(model, fs[i], fs[j]);
      if (!closed[i * k + j]) need_mc = true;
    }
  }
  if (need_mc) {
    std::vector<Welford> acc(k * k);
    std::vector<double> full(k), shifted(k);
    Rng rng(opt.seed);
    for (std::size_t draw = 0; draw < opt.draws; ++draw) {
      const Vector w = model.sample(rng);
      const Vector w2 = shifted_chain(w);
      for (std::size_t i = 0; i < k; ++i) {
        full[i] = fs[i](w.view());
        shifted[i] = fs[i](w2.view());
      }
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          acc[i * k + j].add(full[i] * full[j] - shifted[i] * shifted[j]);
        }
      }
    }
    for (std::size_t e = 0; e < k * k; ++e) {
      out.value.data[e] = acc[e].mean;
      out.std_error.data[e] = acc[e].std_error();
    }
  }
  for (std::size_t e = 0; e < k * k; ++e) {
    if (closed[e]) {
      out.value.data[e] = *closed[e];
      out.std_error.data[e] = 0.0;
      out.closed_form[e] = true;
    }
  }
  return out;
}

OracleValue limit_covariance(const TailChainModel& model, const ClusterFunctional& f,
                             const ClusterFunctional& g, const OracleOptions& opt) {
  if (opt.closed_form) {
    if (auto c = closed_form_covariance(model, f, g)) return {*c, 0.0, true};
  }
  Rng rng(opt.seed);
  Welford acc;
  for (std::size_t draw = 0; draw < opt.draws; ++draw) {
    const Vector w = model.sample(rng);
    const Vector w2 = shifted_chain(w);
    acc.add(f(w.view()) * g(w.view()) - f(w2.view()) * g(w2.view()));
  }
  return acc.result();
}

OracleValue limit_survival_covariance(const TailChainModel& model,
                                      const std::vector<double>& s,
                                      const std::vector<double>& t,
                                      SurvivalVariant variant,
                                      const OracleOptions& opt) {
  for (double x : s) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("thresholds must lie in [0,1]");
  }
  for (double x : t) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("thresholds must lie in [0,1]");
  }
  if (s.empty() || t.empty()) throw ConfigError("threshold lists must be nonempty");
  if (variant == SurvivalVariant::kAllValues && s.size() != t.size()) {
    return {0.0, 0.0, true};
  }
  if (s.size() != t.size()) {
    throw ConfigError("survival/order-statistic covariance needs equal k");
  }
  const std::size_t k = s.size();
  std::vector<double> joint(k);
  for (std::size_t i = 0; i < k; ++i) {
    joint[i] = variant == SurvivalVariant::kAllValues ? std::min(s[i], t[i])
                                                      : std::max(s[i], t[i]);
  }

  if (opt.closed_form && uniform_scalar(model)) {
    if (is_iid(model.family())) {
      if (k >= 2) return {0.0, 0.0, true};
      if (variant == SurvivalVariant::kAllValues) return {joint[0], 0.0, true};
      return {1.0 - joint[0], 0.0, true};
    }
    if (model.family() == Family::kArmaxFrechet &&
        variant != SurvivalVariant::kAllValues) {
      // Chain values decrease, so survival and order-statistic sets coincide:
      // P{Y α^{i-1} > 1/(1-t_i) ∀i} - P{Y α^i > 1/(1-t_i) ∀i} = (1-α)/M.
      const double alpha = model.generator().alpha;
      double m = 0.0;
      double scale = 1.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (joint[i] >= 1.0) return {0.0, 0.0, true};
        m = std::max(m, scale / (1.0 - joint[i]));
        scale /= alpha;
      }
      return {(1.0 - alpha) / m, 0.0, true};
    }
  }

  ClusterFunctional set = [&]() {
    switch (variant) {
      case SurvivalVariant::kSurvival: return make_survival_indicator(joint);
      case SurvivalVariant::kOrderStat: return make_order_stat_indicator(joint);
      case SurvivalVariant::kAllValues: break;
    }
    return make_allvalues_indicator(k, joint);
  }();
  Rng rng(opt.seed);
  Welford acc;
  for (std::size_t draw = 0; draw < opt.draws; ++draw) {
    const Vector w = model.sample(rng);
    acc.add(set(w.view()) - set(shifted_chain(w).view()));
  }
  return acc.result();
}

ClusterSizeLaw cluster_size_law(const TailChainModel& model, std::size_t kmax,
                                const OracleOptions& opt) {
  if (kmax == 0) throw ConfigError("cluster-size law needs kmax >= 1");
  ClusterSizeLaw law;
  law.mass.assign(kmax + 1, 0.0);
  law.std_error.assign(kmax + 1, 0.0);
  auto point_mass = [&](std::size_t k) {
    law.mass[std::min(k, kmax + 1) - 1] = 1.0;
    law.closed_form = true;
    return law;
  };
  if (opt.closed_form && model.window() > 1) return point_mass(model.window());
  if (opt.closed_form && is_iid(model.family())) return point_mass(1);
  if (opt.closed_form && model.family() == Family::kArmaxFrechet) {
    const double alpha = model.generator().alpha;
    double p = 1.0 - alpha;
    for (std::size_t k = 0; k < kmax; ++k) {
      law.mass[k] = p;
      p *= alpha;
    }
    law.mass[kmax] = std::pow(alpha, static_cast<double>(kmax));
    law.closed_form = true;
    return law;
  }

  const double theta = theta_true(model, opt).value;
  std::vector<Welford> acc(kmax + 1);
  Rng rng(opt.seed);
  for (std::size_t draw = 0; draw < opt.draws; ++draw) {
    const Vector w = model.sample(rng);
    const std::size_t lw = extract_core(w.view()).length;
    std::size_t ls = 0;
    if (w.size() >= 2) ls = extract_core(shifted_chain(w).view()).length;
    for (std::size_t k = 1; k <= kmax + 1; ++k) {
      const bool in_w = k <= kmax ? lw == k : lw > kmax;
      const bool in_s = w.size() >= 2 && (k <= kmax ? ls == k : ls > kmax);
      acc[k - 1].add((in_w ? 1.0 : 0.0) - (in_s ? 1.0 : 0.0));
    }
  }
  for (std::size_t k = 0; k <= kmax; ++k) {
    law.mass[k] = acc[k].mean / theta;
    law.std_error[k] = acc[k].std_error() / theta;
  }
  return law;
}

OracleCache::OracleCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string key, value, se, closed, canonical;
    if (!std::getline(fields, key, '\t') || !std::getline(fields, value, '\t') ||
        !std::getline(fields, se, '\t') || !std::getline(fields, closed, '\t')) {
      continue;
    }
    std::getline(fields, canonical);
    try {
      entries_[key] = Entry{{std::stod(value), std::stod(se), closed == "1"}, canonical};
    } catch (const std::exception&) {
      // A damaged line only costs a recomputation.
    }
  }
}

std::string OracleCache::key(const std::string& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::optional<OracleValue> OracleCache::find(const std::string& canonical) const {
  const auto it = entries_.find(key(canonical));
  if (it == entries_.end() || it->second.canonical != canonical) return std::nullopt;
  return it->second.value;
}

void OracleCache::store(const std::string& canonical, const OracleValue& value) {
  entries_[key(canonical)] = Entry{value, canonical};
}

void OracleCache::save() const {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw IoError("cannot write oracle cache " + path_.string());
  out << "# key\tvalue\tstd_error\tclosed_form\tcanonical\n";
  for (const auto& [k, e] : entries_) {
    out << k << '\t' << format_double(e.value.value) << '\t'
        << format_double(e.value.std_error) << '\t' << (e.value.closed_form ? 1 : 0)
        << '\t' << e.canonical << '\n';
  }
}

}  // namespace clusterfx
