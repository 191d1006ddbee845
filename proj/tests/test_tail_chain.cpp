#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "clusterfx/errors.hpp"
#include "clusterfx/functional.hpp"
#include "clusterfx/tail_chain.hpp"

using namespace clusterfx;

namespace {

GeneratorSpec gen(Family f, double alpha = 0.5) {
  GeneratorSpec g;
  g.family = f;
  g.alpha = alpha;
  g.length = 1;
  return g;
}

OracleOptions mc(std::size_t draws = 200000, std::uint64_t seed = 31) {
  OracleOptions o;
  o.draws = draws;
  o.seed = seed;
  o.closed_form = false;
  return o;
}

// |closed - mc| <= 3 SE, with a floor for Monte Carlo estimates whose SE is 0.
void check_mc_agrees(double closed, const OracleValue& est) {
  CHECK(std::abs(closed - est.value) <= 3.0 * est.std_error + 1e-12);
}

}  // namespace

TEST_CASE("i.i.d. chains have a single point") {
  const TailChainModel m(gen(Family::kIidUniform), ChainScale::kUniform);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vector w = m.sample(rng);
    REQUIRE(w.size() == 1);
    REQUIRE(w.flat()[0] > 0.0);
    REQUIRE(w.flat()[0] < 1.0);
  }
}

TEST_CASE("ARMAX chain from a given first value") {
  CHECK(armax_ratio_chain(3.0, 0.5) == std::vector<double>{3.0, 1.5});
  CHECK(armax_ratio_chain(1.5, 0.5) == std::vector<double>{1.5});
}

TEST_CASE("ARMAX chains have no internal zeros and a geometric length") {
  const double alpha = 0.5;
  const TailChainModel m(gen(Family::kArmaxFrechet, alpha), ChainScale::kRatio);
  Rng rng(2);
  const std::size_t draws = 100000;
  std::vector<double> at_least(6, 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const Vector w = m.sample(rng);
    for (double x : w.flat()) REQUIRE(x > 1.0);
    for (std::size_t k = 1; k <= 6; ++k) at_least[k - 1] += w.size() >= k ? 1.0 : 0.0;
  }
  for (std::size_t k = 1; k <= 6; ++k) {
    const double p = std::pow(alpha, static_cast<double>(k - 1));
    const double se = std::sqrt(p * (1 - p) / draws);
    CHECK(std::abs(at_least[k - 1] / draws - p) <= 3 * se + 1e-12);
  }
}

TEST_CASE("window chains are available for i.i.d. models only") {
  CHECK_THROWS_AS(TailChainModel(gen(Family::kArmaxFrechet), ChainScale::kUniform, 2),
                  ConfigError);
  const TailChainModel m(gen(Family::kIidUniform), ChainScale::kUniform, 3);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vector w = m.sample(rng);
    REQUIRE(w.dim() == 3);
    REQUIRE(w.size() >= 1);
    REQUIRE(w.size() <= 3);
  }
}

TEST_CASE("extremal index") {
  CHECK(theta_true(TailChainModel(gen(Family::kIidUniform), ChainScale::kUniform)).value == 1.0);
  CHECK(theta_true(TailChainModel(gen(Family::kArmaxFrechet, 0.25), ChainScale::kUniform)).value ==
        0.75);
  CHECK(theta_true(TailChainModel(gen(Family::kArmaxFrechet, 0.75), ChainScale::kUniform)).value ==
        0.25);
  for (double alpha : {0.25, 0.5, 0.75}) {
    const TailChainModel m(gen(Family::kArmaxFrechet, alpha), ChainScale::kRatio);
    check_mc_agrees(1 - alpha, theta_true(m, mc()));
  }
  GeneratorSpec mm = gen(Family::kMovingMaxima);
  mm.weights = {0.2, 0.5, 0.3};
  const TailChainModel m(mm, ChainScale::kRatio);
  CHECK(theta_true(m).value == doctest::Approx(0.5));  // (0.2-0.5)+ + (0.5-0.3) + 0.3
  check_mc_agrees(0.5, theta_true(m, mc()));
}

TEST_CASE("limit covariance of i.i.d. tail indicators") {
  const TailChainModel m(gen(Family::kIidUniform), ChainScale::kUniform);
  CHECK(limit_covariance(m, make_tail_indicator({0.5}), make_tail_indicator({0.5})).value ==
        doctest::Approx(0.5));
  CHECK(limit_covariance(m, make_tail_indicator({0.3}), make_tail_indicator({0.5})).value ==
        doctest::Approx(0.5));
  const auto zero = make_tail_array_functional("zero", [](std::span<const double>) { return 0.0; });
  CHECK(limit_covariance(m, zero, zero).value == 0.0);
}

TEST_CASE("closed forms agree with Monte Carlo") {
  struct Case {
    TailChainModel model;
    ClusterFunctional f, g;
  };
  GeneratorSpec pareto = gen(Family::kIidPareto);
  pareto.gamma = 0.5;
  const std::vector<Case> cases{
      {TailChainModel(gen(Family::kIidUniform), ChainScale::kUniform), make_tail_indicator({0.2}),
       make_tail_indicator({0.6})},
      {TailChainModel(gen(Family::kIidUniform), ChainScale::kUniform), make_excess_claims(0.1),
       make_excess_claims(0.4)},
      {TailChainModel(gen(Family::kIidUniform), ChainScale::kUniform), make_tail_indicator({0.3}),
       make_excess_claims(0.5)},
      {TailChainModel(gen(Family::kArmaxFrechet, 0.5), ChainScale::kUniform),
       make_tail_indicator({0.0}), make_tail_indicator({0.0})},
      {TailChainModel(gen(Family::kArmaxFrechet, 0.3), ChainScale::kUniform),
       make_tail_indicator({0.2}), make_tail_indicator({0.7})},
      {TailChainModel(gen(Family::kIidUniform), ChainScale::kUniform, 2),
       make_tail_indicator({0.1, 0.1}), make_tail_indicator({0.1, 0.1})},
      {TailChainModel(gen(Family::kIidUniform), ChainScale::kUniform, 2),
       make_upcrossing_functional(0.0, 0.0), make_upcrossing_functional(0.0, 0.4)},
      {TailChainModel(pareto, ChainScale::kRatio), make_hill_log_sum(), make_hill_log_sum()},
      {TailChainModel(pareto, ChainScale::kRatio), make_hill_log_sum(), make_hill_count()},
      {TailChainModel(pareto, ChainScale::kRatio), make_hill_count(), make_hill_count()},
  };
  for (const auto& c : cases) {
    const auto closed = closed_form_covariance(c.model, c.f, c.g);
    REQUIRE(closed.has_value());
    INFO(c.model.tag() << " " << c.f.name() << " " << c.g.name());
    check_mc_agrees(*closed, limit_covariance(c.model, c.f, c.g, mc()));
  }
  const TailChainModel armax(gen(Family::kArmaxFrechet, 0.5), ChainScale::kUniform);
  CHECK(*closed_form_covariance(armax, make_tail_indicator({0.0}), make_tail_indicator({0.0})) ==
        doctest::Approx(3.0));
  const TailChainModel p(pareto, ChainScale::kRatio);
  CHECK(*closed_form_covariance(p, make_hill_log_sum(), make_hill_log_sum()) ==
        doctest::Approx(0.5));
  CHECK(*closed_form_covariance(p, make_hill_log_sum(), make_hill_count()) ==
        doctest::Approx(0.5));
}

TEST_CASE("covariance matrix and variances") {
  const TailChainModel m(gen(Family::kArmaxFrechet, 0.5), ChainScale::kUniform);
  const std::vector<ClusterFunctional> fs{make_tail_indicator({0.0}), make_cluster_length(),
                                          make_survival_indicator({0.4, 0.2})};
  OracleOptions o;
  o.draws = 100000;
  const CovarianceOracle c = limit_covariance_matrix(m, fs, o);
  CHECK(c.closed_form[0]);
  CHECK_FALSE(c.closed_form[4]);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    CHECK(c.value(i, i) >= -3 * c.std_error(i, i));
    for (std::size_t j = 0; j < fs.size(); ++j) CHECK(c.value(i, j) == c.value(j, i));
  }
}

TEST_CASE("survival-set covariances") {
  const TailChainModel iid(gen(Family::kIidUniform), ChainScale::kUniform);
  const TailChainModel armax(gen(Family::kArmaxFrechet, 0.5), ChainScale::kUniform);
  CHECK(limit_survival_covariance(armax, {0.5}, {0.5, 0.5}, SurvivalVariant::kAllValues).value ==
        0.0);
  CHECK(limit_survival_covariance(iid, {0.3}, {0.3}, SurvivalVariant::kSurvival).value ==
        doctest::Approx(0.7));
  CHECK(limit_survival_covariance(armax, {0.0}, {0.0}, SurvivalVariant::kOrderStat).value ==
        doctest::Approx(0.5));

  const std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs{
      {{0.0}, {0.0}}, {{0.2, 0.5}, {0.4, 0.1}}, {{0.5, 0.5, 0.1}, {0.3, 0.6, 0.2}}};
  for (const auto& [s, t] : pairs) {
    for (auto variant : {SurvivalVariant::kSurvival, SurvivalVariant::kOrderStat,
                         SurvivalVariant::kAllValues}) {
      for (const auto* model : {&iid, &armax}) {
        const OracleValue closed = limit_survival_covariance(*model, s, t, variant);
        if (!closed.closed_form) continue;
        INFO(model->tag() << " variant " << static_cast<int>(variant) << " k=" << s.size());
        check_mc_agrees(closed.value, limit_survival_covariance(*model, s, t, variant, mc()));
      }
    }
  }
}

TEST_CASE("cluster-size law") {
  const TailChainModel iid(gen(Family::kIidUniform), ChainScale::kUniform);
  const ClusterSizeLaw point = cluster_size_law(iid, 5);
  CHECK(point.mass[0] == 1.0);
  for (std::size_t k = 1; k < point.mass.size(); ++k) CHECK(point.mass[k] == 0.0);

  const TailChainModel armax(gen(Family::kArmaxFrechet, 0.5), ChainScale::kRatio);
  const ClusterSizeLaw geo = cluster_size_law(armax, 12);
  CHECK(geo.mass[0] == doctest::Approx(0.5));
  CHECK(geo.mass[1] == doctest::Approx(0.25));
  CHECK(geo.mass[2] == doctest::Approx(0.125));

  const ClusterSizeLaw est = cluster_size_law(armax, 12, mc());
  CHECK_FALSE(est.closed_form);
  double total = 0.0;
  for (std::size_t k = 0; k < est.mass.size(); ++k) {
    total += est.mass[k];
    CHECK(est.mass[k] >= -3 * est.std_error[k]);
    CHECK(std::abs(est.mass[k] - geo.mass[k]) <= 3 * est.std_error[k] + 1e-12);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  GeneratorSpec mm = gen(Family::kMovingMaxima);
  mm.weights = {0.2, 0.5, 0.3};
  const ClusterSizeLaw mml = cluster_size_law(TailChainModel(mm, ChainScale::kRatio), 4, mc());
  for (std::size_t k = 0; k < mml.mass.size(); ++k) CHECK(mml.mass[k] >= -3 * mml.std_error[k]);
}

TEST_CASE("shifted chain") {
  const Vector w = Vector::scalars({2.0, 0.0, 1.5, 0.0});
  CHECK(shifted_chain(w).flat() == std::vector<double>{1.5});
  CHECK(shifted_chain(Vector::scalars({2.0})).flat() == std::vector<double>{0.0});
}

TEST_CASE("oracle cache round trip") {
  const auto path = std::filesystem::temp_directory_path() / "clusterfx_cache_test.tsv";
  std::filesystem::remove(path);
  {
    OracleCache cache(path);
    CHECK(cache.size() == 0);
    cache.store("cov|a|b", {0.25, 0.01, false});
    cache.save();
  }
  OracleCache again(path);
  REQUIRE(again.find("cov|a|b").has_value());
  CHECK(again.find("cov|a|b")->value == 0.25);
  CHECK(again.find("cov|a|b")->std_error == 0.01);
  CHECK_FALSE(again.find("cov|a|c").has_value());
  CHECK(OracleCache::key("x") == OracleCache::key("x"));
  CHECK(OracleCache::key("x") != OracleCache::key("y"));
  std::filesystem::remove(path);
}
