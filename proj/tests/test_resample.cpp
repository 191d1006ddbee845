#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "clusterfx/errors.hpp"
#include "clusterfx/processes.hpp"
#include "clusterfx/resample.hpp"
#include "clusterfx/rng.hpp"

using namespace clusterfx;

namespace {

BootstrapSpec hill_spec(std::size_t resamples, std::uint64_t seed) {
  BootstrapSpec s;
  s.resamples = resamples;
  s.seed = seed;
  return s;
}

ExcessArray ratio_row(std::vector<double> v) {
  return ExcessArray(std::move(v), 1, 1.0, 1.0, ExcessMode::kRatio);
}

ExcessArray pareto_row(std::size_t n, double v, std::uint64_t seed, double gamma = 1.0) {
  GeneratorSpec g;
  g.family = Family::kIidPareto;
  g.gamma = gamma;
  g.length = n;
  g.seed = seed;
  return ratio_excesses(simulate(g), upper_quantile(g, v));
}

// Block sums of log(s) 1{s>1} and 1{s>1}, written out directly.
std::pair<std::vector<double>, std::vector<double>> block_sums(const ExcessArray& row,
                                                               std::size_t r) {
  const std::size_t m = row.size() / r;
  std::vector<double> s1(m, 0.0), s2(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = j * r; i < (j + 1) * r; ++i) {
      const double x = row.flat()[i];
      if (x > 1.0) {
        s1[j] += std::log(x);
        s2[j] += 1.0;
      }
    }
  }
  return {s1, s2};
}

}  // namespace

TEST_CASE("Hill estimate") {
  CHECK(hill_estimate(ratio_row({0, std::exp(1.0), 0})).gamma_hat == doctest::Approx(1.0));
  CHECK(hill_estimate(ratio_row({0, std::exp(1.0), 0})).exceedances == 1);
  const double eps = 1e-9;
  CHECK(hill_estimate(ratio_row({1 + eps, 0, 1 + eps})).gamma_hat < 2e-9);
  CHECK_THROWS_AS(hill_estimate(ratio_row({0, 0, 0})), UndefinedError);

  const ExcessArray row = pareto_row(100000, 0.01, 3);
  const double g = hill_estimate(row).gamma_hat;
  CHECK(g >= 0.9);
  CHECK(g <= 1.1);
}

TEST_CASE("sigma matrix") {
  SUBCASE("brute force") {
    const ExcessArray row = pareto_row(20000, 0.05, 4);
    const std::size_t r = 20;
    const Matrix s = sigma_matrix(row, Blocking::make(20000, r, 2));
    const auto [s1, s2] = block_sums(row, r);
    const double denom = static_cast<double>(s1.size() * r) * row.exceed_prob();
    double a = 0, b = 0, c = 0;
    for (std::size_t j = 0; j < s1.size(); ++j) {
      a += s1[j] * s1[j];
      b += s1[j] * s2[j];
      c += s2[j] * s2[j];
    }
    CHECK(s(0, 0) == doctest::Approx(a / denom).epsilon(1e-12));
    CHECK(s(0, 1) == doctest::Approx(b / denom).epsilon(1e-12));
    CHECK(s(1, 1) == doctest::Approx(c / denom).epsilon(1e-12));
  }
  SUBCASE("symmetric and positive semidefinite") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> v(400, 0.0);
      for (auto& x : v) {
        if (rng.uniform() < 0.1) x = rng.uniform() < 0.5 ? 1.0 / rng.uniform() : 0.5;
      }
      const ExcessArray row = ratio_row(v);
      if (row.nonzero_count() == 0) continue;
      const Matrix s = sigma_matrix(row, Blocking::make(400, 2 + rng.below(40), 1));
      REQUIRE(s(0, 1) == s(1, 0));
      REQUIRE(s(0, 0) >= 0.0);
      REQUIRE(s(1, 1) >= 0.0);
      REQUIRE(s(0, 0) * s(1, 1) - s(0, 1) * s(0, 1) >= -1e-10);
    }
  }
  SUBCASE("no exceedance above one") {
    const Matrix s = sigma_matrix(ratio_row({0, 0.5, 0, 0.7}), Blocking::make(4, 2, 1));
    CHECK(s(0, 0) == 0.0);
    CHECK(s(0, 1) == 0.0);
    CHECK(s(1, 1) == 0.0);
    CHECK_THROWS_AS(sigma_matrix(ratio_row({0, 0, 0, 0}), Blocking::make(4, 2, 1)), UndefinedError);
  }
  SUBCASE("i.i.d. Pareto") {
    const std::size_t n = 1000000;
    const ExcessArray row = pareto_row(n, 0.01, 6);
    const HillResult h = hill_estimate(row, Blocking::make(n, 5, 1));
    REQUIRE(h.sigma.has_value());
    CHECK(std::abs((*h.sigma)(0, 0) - 2.0) <= 0.15);
    CHECK(std::abs((*h.sigma)(0, 1) - 1.0) <= 0.15);
    CHECK(std::abs((*h.sigma)(1, 1) - 1.0) <= 0.15);
    CHECK(std::abs(*h.asymptotic_var - 1.0) <= 0.2);
    CHECK(*h.asymptotic_sd ==
          doctest::Approx(std::sqrt(*h.asymptotic_var / (n * row.exceed_prob()))));
  }
  Matrix m(2, 2, 0.0);
  m(0, 0) = 2;
  m(0, 1) = m(1, 0) = 1;
  m(1, 1) = 1;
  CHECK(hill_asymptotic_variance(m, 1.0) == 1.0);
}

TEST_CASE("bootstrap conditional mean identity") {
  const ExcessArray row = pareto_row(10007, 0.05, 7);
  const std::size_t r = 25;
  const BootstrapResult res = block_bootstrap(row, Blocking::make(10007, r, 2), hill_spec(200, 9));
  const auto [s1, s2] = block_sums(row, r);
  double a = 0, b = 0;
  for (std::size_t j = 0; j < s1.size(); ++j) {
    a += s1[j];
    b += s2[j];
  }
  // E*(Σ g1)/E*(Σ g2) = (m·mean S1)/(m·mean S2): the truncated-row estimate.
  CHECK(res.statistic == doctest::Approx(a / b).epsilon(1e-13));
  std::vector<double> trunc(row.flat().begin(), row.flat().begin() + 10000);
  CHECK(res.statistic == doctest::Approx(hill_estimate(ratio_row(trunc)).gamma_hat).epsilon(1e-13));
  CHECK(res.full_row_statistic == hill_estimate(row).gamma_hat);
  CHECK(res.scaling == doctest::Approx(std::sqrt(10007 * row.exceed_prob())));
}

TEST_CASE("bootstrap determinism") {
  const ExcessArray row = pareto_row(5000, 0.05, 8);
  const Blocking b = Blocking::make(5000, 20, 2);
  BootstrapSpec spec = hill_spec(300, 42);
  spec.threads = 1;
  const BootstrapResult one = block_bootstrap(row, b, spec);
  spec.threads = 4;
  const BootstrapResult four = block_bootstrap(row, b, spec);
  REQUIRE(one.draws.size() == 300);
  for (std::size_t k = 0; k < 300; ++k) CHECK(one.draws[k].statistic == four.draws[k].statistic);
  CHECK(resample_indices(250, 42, 3) == resample_indices(250, 42, 3));
  CHECK(resample_indices(250, 42, 3) != resample_indices(250, 42, 4));
  CHECK(resample_indices(250, 43, 3) != resample_indices(250, 42, 3));
  for (std::size_t j : resample_indices(250, 1, 0)) CHECK(j < 250);
}

TEST_CASE("bootstrap degenerate cases") {
  SUBCASE("resample equal to the original multiset") {
    const ExcessArray row = ratio_row({0, 3.0, 0, 0, 1.5, 2.0});
    const Blocking b = Blocking::make(6, 3, 1);
    std::uint64_t seed = 0;
    while (true) {
      const auto idx = resample_indices(2, seed, 0);
      if (std::multiset<std::size_t>(idx.begin(), idx.end()) == std::multiset<std::size_t>{0, 1})
        break;
      ++seed;
    }
    const BootstrapResult res = block_bootstrap(row, b, hill_spec(1, seed));
    CHECK(res.draws[0].statistic == res.statistic);
    CHECK(res.draws[0].centered_scaled == 0.0);
  }
  SUBCASE("identical blocks") {
    std::vector<double> v;
    for (int j = 0; j < 10; ++j) v.insert(v.end(), {0, 2.5, 0, 1.2});
    const BootstrapResult res =
        block_bootstrap(ratio_row(v), Blocking::make(40, 4, 1), hill_spec(50, 1));
    for (const auto& d : res.draws) CHECK(d.centered_scaled == 0.0);
  }
  SUBCASE("missing resamples are counted") {
    std::vector<double> v(100, 0.0);
    v[3] = 5.0;
    const BootstrapResult res =
        block_bootstrap(ratio_row(v), Blocking::make(100, 10, 1), hill_spec(400, 2));
    CHECK(res.missing > 0);
    CHECK(res.valid_values().size() == 400 - res.missing);
    for (const auto& d : res.draws) {
      if (!d.valid) CHECK(std::isnan(d.statistic));
    }
  }
  SUBCASE("errors") {
    const ExcessArray row = ratio_row({0, 3.0, 0, 0, 1.5, 2.0});
    CHECK_THROWS_AS(block_bootstrap(row, Blocking::make(6, 4, 1), hill_spec(10, 1)), ConfigError);
    CHECK_THROWS_AS(block_bootstrap(row, Blocking::make(6, 3, 1), hill_spec(0, 1)), ConfigError);
    CHECK_THROWS_AS(
        block_bootstrap(ratio_row({0, 0, 0, 0}), Blocking::make(4, 2, 1), hill_spec(10, 1)),
        UndefinedError);
  }
}

TEST_CASE("functional bootstrap") {
  const ExcessArray row = pareto_row(5000, 0.05, 10);
  BootstrapSpec spec{100, 3, BootstrapStatistic::kFunctional, make_hill_count()};
  const BootstrapResult res = block_bootstrap(row, Blocking::make(5000, 50, 5), spec);
  CHECK(res.statistic == doctest::Approx(1.0));  // Σ 1{s>1} / (n v̂)
  double mean = 0.0;
  for (const auto& d : res.draws) mean += d.statistic;
  CHECK(mean / 100 == doctest::Approx(1.0).epsilon(0.1));
  spec.functional.reset();
  CHECK_THROWS_AS(block_bootstrap(row, Blocking::make(5000, 50, 5), spec), ConfigError);
}

TEST_CASE("bootstrap CSV") {
  std::vector<double> v(100, 0.0);
  v[3] = 5.0;
  v[55] = 2.0;
  const BootstrapResult res =
      block_bootstrap(ratio_row(v), Blocking::make(100, 10, 1), hill_spec(5, 2));
  std::ostringstream out;
  write_bootstrap_csv(out, res);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# ", 0) == 0);
  std::getline(in, line);
  CHECK(line == "resample_index,statistic,centered_scaled,valid");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}
