#pragma once

#include <span>
#include <vector>

#include "vrnnaug/model.hpp"

namespace vrnnaug {

/// Linear-interpolated order statistic at rank rho * (K - 1), 0-based.
double empirical_quantile(std::span<const double> samples, double rho);

/// Per-(t, dim) quantile of a forecast sample set, as a series of length F.
std::vector<double> quantile_series(const ForecastSamples& samples, double rho,
                                    int dim);
std::vector<double> mean_series(const ForecastSamples& samples, int dim);

/// Scale-normalized pinball loss:
///   QL_rho = 2 * sum_t P_rho(y_t, q_t) / sum_t |y_t|,
///   P_rho = rho * (y - q) when y > q, else (1 - rho) * (q - y).
/// For rho = 0.5 this reduces to sum|y - q| / sum|y|.
double quantile_loss(std::span<const double> y, std::span<const double> y_pred,
                     double rho);

/// Fraction of pooled (t, dim) observations inside the central alpha-level
/// interval [q((1-alpha)/2), q((1+alpha)/2)] of the sample set.
double ecp(const ForecastSamples& samples, std::span<const double> y_true,
           double alpha);

struct DimMetrics {
  int dim = 0;
  double p50 = 0.0;
  double p90 = 0.0;
};

struct MetricsReport {
  std::vector<DimMetrics> per_dim;
  DimMetrics overall;  // pooled over every output dimension
  std::vector<std::pair<double, double>> ecp_curve;  // (alpha, coverage)
  std::vector<std::vector<std::pair<double, double>>> ecp_per_dim;
};

/// p50/p90 per output dimension plus a pooled ECP curve; `y_true` is
/// row-major F x d_y in the same (de-standardized) units as the samples.
MetricsReport evaluate_run(const ForecastSamples& samples,
                           std::span<const double> y_true,
                           std::span<const double> alpha_grid,
                           bool per_dim_ecp = false);

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_alpha_grid();

}  // namespace vrnnaug
