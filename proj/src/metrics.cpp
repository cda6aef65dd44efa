#include "vrnnaug/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace vrnnaug {

double empirical_quantile(std::span<const double> samples, double rho) {
  if (samples.empty()) throw ArgumentError("empirical_quantile: no samples");
  if (rho < 0.0 || rho > 1.0) {
    throw ArgumentError("empirical_quantile: rho must lie in [0, 1]");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = rho * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> quantile_series(const ForecastSamples& samples, double rho,
                                    int dim) {
  if (dim < 0 || dim >= samples.d_y) {
    throw ArgumentError("quantile_series: dimension out of range");
  }
  std::vector<double> out(static_cast<size_t>(samples.horizon));
  std::vector<double> column(static_cast<size_t>(samples.num_samples));
  for (int t = 0; t < samples.horizon; ++t) {
    for (int k = 0; k < samples.num_samples; ++k) {
      column[static_cast<size_t>(k)] = samples.at(k, t, dim);
    }
    out[static_cast<size_t>(t)] = empirical_quantile(column, rho);
  }
  return out;
}

std::vector<double> mean_series(const ForecastSamples& samples, int dim) {
  if (dim < 0 || dim >= samples.d_y) {
    throw ArgumentError("mean_series: dimension out of range");
  }
  std::vector<double> out(static_cast<size_t>(samples.horizon), 0.0);
  for (int t = 0; t < samples.horizon; ++t) {
    double acc = 0.0;
    for (int k = 0; k < samples.num_samples; ++k) acc += samples.at(k, t, dim);
    out[static_cast<size_t>(t)] = acc / static_cast<double>(samples.num_samples);
  }
  return out;
}

double quantile_loss(std::span<const double> y, std::span<const double> y_pred,
                     double rho) {
  if (y.size() != y_pred.size()) {
    throw DimensionError("quantile_loss: series lengths differ");
  }
  if (y.empty()) throw ArgumentError("quantile_loss: empty series");
  if (rho < 0.0 || rho > 1.0) {
    throw ArgumentError("quantile_loss: rho must lie in [0, 1]");
  }
  double penalty = 0.0;
  double denom = 0.0;
  for (size_t t = 0; t < y.size(); ++t) {
    const double yt = y[t];
    const double qt = y_pred[t];
    penalty += yt > qt ? rho * (yt - qt) : (1.0 - rho) * (qt - yt);
    denom += std::abs(yt);
  }
  if (denom == 0.0) {
    throw DataError("quantile_loss: all observations are zero, "
                    "normalization undefined");
  }
  return 2.0 * penalty / denom;
}

double ecp(const ForecastSamples& samples, std::span<const double> y_true,
           double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) {
    throw ArgumentError("ecp: alpha must lie in (0, 1)");
  }
  const size_t expect =
      static_cast<size_t>(samples.horizon) * static_cast<size_t>(samples.d_y);
  if (y_true.size() != expect) {
    throw DimensionError("ecp: observations have " +
                         std::to_string(y_true.size()) + " values, expected " +
                         std::to_string(expect));
  }
  const double lo_rho = (1.0 - alpha) / 2.0;
  const double hi_rho = (1.0 + alpha) / 2.0;
  std::vector<double> column(static_cast<size_t>(samples.num_samples));
  int64_t covered = 0;
  for (int t = 0; t < samples.horizon; ++t) {
    for (int j = 0; j < samples.d_y; ++j) {
      for (int k = 0; k < samples.num_samples; ++k) {
        column[static_cast<size_t>(k)] = samples.at(k, t, j);
      }
      const double lo = empirical_quantile(column, lo_rho);
      const double hi = empirical_quantile(column, hi_rho);
      const double obs = y_true[static_cast<size_t>(t) * samples.d_y + j];
      if (obs >= lo && obs <= hi) ++covered;
    }
  }
  return static_cast<double>(covered) / static_cast<double>(expect);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  return grid;
}

MetricsReport evaluate_run(const ForecastSamples& samples,
                           std::span<const double> y_true,
                           std::span<const double> alpha_grid,
                           bool per_dim_ecp) {
  const size_t expect =
      static_cast<size_t>(samples.horizon) * static_cast<size_t>(samples.d_y);
  if (y_true.size() != expect) {
    throw DimensionError("evaluate_run: observations have " +
                         std::to_string(y_true.size()) +
                         " values, expected " + std::to_string(expect));
  }
  MetricsReport report;

  std::vector<double> y_dim(static_cast<size_t>(samples.horizon));
  std::vector<double> pooled_y;
  std::vector<double> pooled_q50;
  std::vector<double> pooled_q90;
  pooled_y.reserve(expect);
  pooled_q50.reserve(expect);
  pooled_q90.reserve(expect);

  for (int j = 0; j < samples.d_y; ++j) {
    for (int t = 0; t < samples.horizon; ++t) {
      y_dim[static_cast<size_t>(t)] = y_true[static_cast<size_t>(t) * samples.d_y + j];
    }
    auto q50 = quantile_series(samples, 0.5, j);
    auto q90 = quantile_series(samples, 0.9, j);
    DimMetrics dm;
    dm.dim = j;
    dm.p50 = quantile_loss(y_dim, q50, 0.5);
    dm.p90 = quantile_loss(y_dim, q90, 0.9);
    report.per_dim.push_back(dm);
    pooled_y.insert(pooled_y.end(), y_dim.begin(), y_dim.end());
    pooled_q50.insert(pooled_q50.end(), q50.begin(), q50.end());
    pooled_q90.insert(pooled_q90.end(), q90.begin(), q90.end());
  }
  report.overall.dim = -1;
  report.overall.p50 = quantile_loss(pooled_y, pooled_q50, 0.5);
  report.overall.p90 = quantile_loss(pooled_y, pooled_q90, 0.9);

  for (double alpha : alpha_grid) {
    report.ecp_curve.emplace_back(alpha, ecp(samples, y_true, alpha));
  }
  if (per_dim_ecp) {
    report.ecp_per_dim.resize(static_cast<size_t>(samples.d_y));
    for (int j = 0; j < samples.d_y; ++j) {
      // Single-dimension view of the sample block.
      ForecastSamples one;
      one.num_samples = samples.num_samples;
      one.horizon = samples.horizon;
      one.d_y = 1;
      one.values.resize(static_cast<size_t>(one.num_samples) * one.horizon);
      std::vector<double> y_one(static_cast<size_t>(samples.horizon));
      for (int k = 0; k < samples.num_samples; ++k) {
        for (int t = 0; t < samples.horizon; ++t) {
          one.at(k, t, 0) = samples.at(k, t, j);
        }
      }
      for (int t = 0; t < samples.horizon; ++t) {
        y_one[static_cast<size_t>(t)] =
            y_true[static_cast<size_t>(t) * samples.d_y + j];
      }
      for (double alpha : alpha_grid) {
        report.ecp_per_dim[static_cast<size_t>(j)].emplace_back(
            alpha, ecp(one, y_one, alpha));
      }
    }
  }
  return report;
}

}  // namespace vrnnaug
