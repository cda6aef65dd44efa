#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vrnnaug/metrics.hpp"
#include "vrnnaug/rng.hpp"

using namespace vrnnaug;

namespace {

// Brute-force pinball loss, written independently of the implementation.
double quantile_loss_oracle(std::span<const double> y,
                            std::span<const double> q, double rho) {
  double num = 0.0, den = 0.0;
  for (size_t t = 0; t < y.size(); ++t) {
    if (y[t] > q[t]) {
      num += rho * (y[t] - q[t]);
    } else {
      num += (1.0 - rho) * (q[t] - y[t]);
    }
    den += std::abs(y[t]);
  }
  return 2.0 * num / den;
}

ForecastSamples constant_samples(int k, int f, int d, double value) {
  ForecastSamples s;
  s.num_samples = k;
  s.horizon = f;
  s.d_y = d;
  s.values.assign(static_cast<size_t>(k) * f * d, value);
  return s;
}

}  // namespace

TEST_CASE("empirical_quantile") {
  SUBCASE("median of three") {
    const double v[] = {3.0, 1.0, 2.0};
    CHECK(empirical_quantile(v, 0.5) == doctest::Approx(2.0));
  }
  SUBCASE("interpolated upper quantile") {
    const double v[] = {0.0, 10.0};
    CHECK(empirical_quantile(v, 0.9) == doctest::Approx(9.0));
  }
  SUBCASE("boundary ranks are the extremes") {
    const double v[] = {5.0, -1.0, 3.0};
    CHECK(empirical_quantile(v, 0.0) == -1.0);
    CHECK(empirical_quantile(v, 1.0) == 5.0);
  }
  SUBCASE("single sample") {
    const double v[] = {4.2};
    CHECK(empirical_quantile(v, 0.3) == 4.2);
  }
  SUBCASE("monotone in rho") {
    RngStream rng(41);
    std::vector<double> v(25);
    rng.fill_uniform(v, -10.0, 10.0);
    double prev = empirical_quantile(v, 0.0);
    for (double rho = 0.05; rho <= 1.0; rho += 0.05) {
      const double q = empirical_quantile(v, rho);
      CHECK(q >= prev);
      prev = q;
    }
  }
  SUBCASE("contract errors") {
    CHECK_THROWS_AS(empirical_quantile({}, 0.5), ArgumentError);
    const double v[] = {1.0};
    CHECK_THROWS_AS(empirical_quantile(v, 1.5), ArgumentError);
  }
}

TEST_CASE("quantile_loss") {
  SUBCASE("perfect prediction scores zero") {
    const double y[] = {1.0, -2.0, 3.0};
    CHECK(quantile_loss(y, y, 0.5) == 0.0);
    CHECK(quantile_loss(y, y, 0.9) == 0.0);
  }
  SUBCASE("under-prediction at rho 0.9") {
    const double y[] = {2.0}, q[] = {1.0};
    CHECK(quantile_loss(y, q, 0.9) == doctest::Approx(0.9));
  }
  SUBCASE("over-prediction at rho 0.9") {
    const double y[] = {2.0}, q[] = {3.0};
    CHECK(quantile_loss(y, q, 0.9) == doctest::Approx(0.1));
  }
  SUBCASE("matches the brute-force oracle on random triples") {
    RngStream rng(43);
    for (int rep = 0; rep < 1000; ++rep) {
      const int n = 1 + static_cast<int>(rng.uniform(0.0, 40.0));
      std::vector<double> y(static_cast<size_t>(n)), q(static_cast<size_t>(n));
      rng.fill_uniform(y, -5.0, 5.0);
      rng.fill_uniform(q, -5.0, 5.0);
      if (quantile_loss_oracle(y, q, 0.0) == 0.0 && y[0] == 0.0) continue;
      bool all_zero = true;
      for (double v : y) all_zero = all_zero && v == 0.0;
      if (all_zero) continue;
      const double rho = rng.uniform01();
      CHECK(std::abs(quantile_loss(y, q, rho) -
                     quantile_loss_oracle(y, q, rho)) < 1e-12);
    }
  }
  SUBCASE("rho one half is exactly the relative absolute error") {
    RngStream rng(47);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> y(30), q(30);
      rng.fill_uniform(y, -4.0, 4.0);
      rng.fill_uniform(q, -4.0, 4.0);
      double num = 0.0, den = 0.0;
      for (size_t t = 0; t < y.size(); ++t) {
        num += std::abs(y[t] - q[t]);
        den += std::abs(y[t]);
      }
      CHECK(quantile_loss(y, q, 0.5) == num / den);  // bitwise equality
    }
  }
  SUBCASE("invariant to a common positive rescaling") {
    RngStream rng(53);
    std::vector<double> y(20), q(20), y2(20), q2(20);
    rng.fill_uniform(y, -3.0, 3.0);
    rng.fill_uniform(q, -3.0, 3.0);
    for (size_t i = 0; i < y.size(); ++i) {
      y2[i] = 8.0 * y[i];
      q2[i] = 8.0 * q[i];
    }
    CHECK(quantile_loss(y, q, 0.7) ==
          doctest::Approx(quantile_loss(y2, q2, 0.7)).epsilon(1e-12));
  }
  SUBCASE("all-zero observations are rejected") {
    const double y[] = {0.0, 0.0}, q[] = {1.0, 1.0};
    CHECK_THROWS_AS(quantile_loss(y, q, 0.5), DataError);
  }
  SUBCASE("length mismatch") {
    const double y[] = {1.0, 2.0}, q[] = {1.0};
    CHECK_THROWS_AS(quantile_loss(y, std::span<const double>(q, 1), 0.5),
                    DimensionError);
  }
}

TEST_CASE("empirical coverage probability") {
  SUBCASE("observation equal to the median is always covered") {
    RngStream rng(59);
    ForecastSamples s;
    s.num_samples = 101;  // odd: the median is an order statistic
    s.horizon = 6;
    s.d_y = 1;
    s.values.resize(static_cast<size_t>(s.num_samples) * s.horizon);
    std::vector<double> truth(static_cast<size_t>(s.horizon));
    for (int t = 0; t < s.horizon; ++t) {
      std::vector<double> col(static_cast<size_t>(s.num_samples));
      rng.fill_uniform(col, -3.0, 3.0);
      for (int k = 0; k < s.num_samples; ++k) s.at(k, t, 0) = col[static_cast<size_t>(k)];
      std::sort(col.begin(), col.end());
      truth[static_cast<size_t>(t)] = col[50];
    }
    for (double alpha : {0.1, 0.5, 0.9}) {
      CHECK(ecp(s, truth, alpha) == 1.0);
    }
  }
  SUBCASE("observation above every sample is never covered") {
    ForecastSamples s = constant_samples(10, 4, 1, 1.0);
    std::vector<double> truth(4, 5.0);
    CHECK(ecp(s, truth, 0.9) == 0.0);
  }
  SUBCASE("iid samples from the true distribution cover at the stated rate") {
    RngStream rng(61);
    ForecastSamples s;
    s.num_samples = 100;
    s.horizon = 10000;
    s.d_y = 1;
    s.values.resize(static_cast<size_t>(s.num_samples) * s.horizon);
    std::vector<double> truth(static_cast<size_t>(s.horizon));
    for (int t = 0; t < s.horizon; ++t) {
      for (int k = 0; k < s.num_samples; ++k) s.at(k, t, 0) = rng.normal();
      truth[static_cast<size_t>(t)] = rng.normal();
    }
    const double coverage = ecp(s, truth, 0.9);
    CHECK(coverage > 0.88);
    CHECK(coverage < 0.92);
  }
  SUBCASE("monotone non-decreasing in alpha") {
    RngStream rng(67);
    ForecastSamples s;
    s.num_samples = 40;
    s.horizon = 50;
    s.d_y = 2;
    s.values.resize(static_cast<size_t>(s.num_samples) * s.horizon * 2);
    rng.fill_uniform(s.values, -2.0, 2.0);
    std::vector<double> truth(static_cast<size_t>(s.horizon) * 2);
    rng.fill_uniform(truth, -2.0, 2.0);
    double prev = 0.0;
    for (double alpha = 0.05; alpha < 1.0; alpha += 0.05) {
      const double c = ecp(s, truth, alpha);
      CHECK(c >= prev);
      prev = c;
    }
  }
  SUBCASE("shape mismatch") {
    ForecastSamples s = constant_samples(5, 3, 1, 0.0);
    std::vector<double> truth(4, 0.0);
    CHECK_THROWS_AS(ecp(s, truth, 0.9), DimensionError);
  }
}

TEST_CASE("evaluate_run") {
  SUBCASE("a perfect point forecast scores zero everywhere") {
    ForecastSamples s = constant_samples(10, 5, 1, 2.5);
    std::vector<double> truth(5, 2.5);
    auto grid = default_alpha_grid();
    MetricsReport r = evaluate_run(s, truth, grid);
    REQUIRE(r.per_dim.size() == 1);
    CHECK(r.per_dim[0].p50 == 0.0);
    CHECK(r.per_dim[0].p90 == 0.0);
  }
  SUBCASE("two output dimensions give two metric rows") {
    RngStream rng(71);
    ForecastSamples s;
    s.num_samples = 20;
    s.horizon = 30;
    s.d_y = 2;
    s.values.resize(static_cast<size_t>(20) * 30 * 2);
    rng.fill_uniform(s.values, 0.5, 2.0);
    std::vector<double> truth(60);
    rng.fill_uniform(truth, 0.5, 2.0);
    auto grid = default_alpha_grid();
    MetricsReport r = evaluate_run(s, truth, grid, /*per_dim_ecp=*/true);
    CHECK(r.per_dim.size() == 2);
    CHECK(r.per_dim[0].p50 > 0.0);
    CHECK(r.per_dim[1].p50 > 0.0);
    CHECK(r.per_dim[0].p50 != r.per_dim[1].p50);
    CHECK(r.ecp_per_dim.size() == 2);
    CHECK(r.ecp_curve.size() == grid.size());
  }
  SUBCASE("per-dimension quantile series drive the scores") {
    // One dimension forecast high, the other exact; only the first pays.
    ForecastSamples s = constant_samples(8, 4, 2, 0.0);
    std::vector<double> truth(8);
    for (int t = 0; t < 4; ++t) {
      for (int k = 0; k < 8; ++k) {
        s.at(k, t, 0) = 3.0;
        s.at(k, t, 1) = 1.0;
      }
      truth[static_cast<size_t>(t) * 2] = 2.0;
      truth[static_cast<size_t>(t) * 2 + 1] = 1.0;
    }
    auto grid = default_alpha_grid();
    MetricsReport r = evaluate_run(s, truth, grid);
    CHECK(r.per_dim[0].p50 == doctest::Approx(0.5));  // 2 * (4 * 0.5) / (4 * 2)
    CHECK(r.per_dim[1].p50 == 0.0);
    CHECK(r.overall.p50 == doctest::Approx(2.0 * 0.5 * 4.0 / 12.0));
  }
}
