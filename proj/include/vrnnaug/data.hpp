#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vrnnaug/errors.hpp"

namespace vrnnaug {

/// Aligned input-signal and observation matrices sampled at evenly spaced
/// time points, both stored row-major.
struct TimeSeries {
  int64_t length = 0;  // T
  int d_u = 0;
  int d_y = 0;
  std::vector<double> u;  // T x d_u
  std::vector<double> y;  // T x d_y
  std::string label;

  double u_at(int64_t t, int j) const {
    return u[static_cast<size_t>(t) * d_u + j];
  }
  double y_at(int64_t t, int j) const {
    return y[static_cast<size_t>(t) * d_y + j];
  }
  std::span<const double> u_row(int64_t t) const {
    return {u.data() + static_cast<size_t>(t) * d_u, static_cast<size_t>(d_u)};
  }
  std::span<const double> y_row(int64_t t) const {
    return {y.data() + static_cast<size_t>(t) * d_y, static_cast<size_t>(d_y)};
  }
};

/// Reads selected named columns of a headered CSV file. Every selected cell
/// must parse as a finite number; blank or malformed cells are reported with
/// their row and column.
TimeSeries load_csv(const std::filesystem::path& path,
                    const std::vector<std::string>& u_columns,
                    const std::vector<std::string>& y_columns);

void write_csv(const std::filesystem::path& path, const TimeSeries& series,
               const std::vector<std::string>& u_names,
               const std::vector<std::string>& y_names);

struct SplitFractions {
  double train = 0.5;
  double valid = 0.2;
  double test = 0.3;
};

struct SplitSeries {
  TimeSeries train, valid, test;
};

/// Contiguous chronological segments of floor(f*T) rows for train and valid,
/// remainder to test. Train/valid segments shorter than `min_train_valid_len`
/// are rejected.
SplitSeries chrono_split(const TimeSeries& series, SplitFractions fractions,
                         int64_t min_train_valid_len = 1);

/// Per-dimension zero-mean/unit-variance transform fitted on the training
/// split only (population standard deviation).
class Standardizer {
 public:
  static Standardizer fit(const TimeSeries& train);

  TimeSeries apply(const TimeSeries& series) const;
  TimeSeries invert(const TimeSeries& series) const;
  void apply_u_inplace(std::span<double> rows) const;
  /// De-standardizes y values laid out as consecutive d_y-wide rows.
  void invert_y_inplace(std::span<double> rows) const;

  const std::vector<double>& u_mean() const { return u_mean_; }
  const std::vector<double>& u_std() const { return u_std_; }
  const std::vector<double>& y_mean() const { return y_mean_; }
  const std::vector<double>& y_std() const { return y_std_; }

  static Standardizer from_moments(std::vector<double> u_mean,
                                   std::vector<double> u_std,
                                   std::vector<double> y_mean,
                                   std::vector<double> y_std);

 private:
  std::vector<double> u_mean_, u_std_, y_mean_, y_std_;
};

/// A window into the backing series: rows [start, start + window).
struct ChunkView {
  const TimeSeries* series = nullptr;
  int64_t start = 0;
  int window = 0;
};

/// Stride-1 overlapping windows of a series; count() == T - W + 1.
struct ChunkSet {
  std::shared_ptr<const TimeSeries> series;
  int window = 0;
  std::vector<int64_t> starts;
  std::string split_label;

  int64_t count() const { return static_cast<int64_t>(starts.size()); }
  ChunkView view(int64_t j) const {
    return {series.get(), starts[static_cast<size_t>(j)], window};
  }
};

ChunkSet shingle(std::shared_ptr<const TimeSeries> series, int window);
ChunkSet shingle(TimeSeries series, int window);

enum class InputMode { kExcitation, kSinusoid };

/// Two-state linear Gaussian system: y_t = C h_t + e, h_{t+1} = A h_t + B u_t + e_h.
struct LinearGaussianOptions {
  std::array<double, 4> a{0.7, 0.8, 0.0, 0.1};  // row-major 2x2
  std::array<double, 2> b{-1.0, 0.1};
  std::array<double, 2> c{1.0, 0.0};
  double process_noise_std = 0.7071067811865476;  // sqrt(0.5)
  double measurement_noise_std = 1.0;
  std::array<double, 2> h0{0.0, 0.0};
  double excitation_lo = -2.5;
  double excitation_hi = 2.5;
  /// Added to the step index inside the sinusoid input, so a series can
  /// continue another one's time axis.
  int64_t t_offset = 0;
};

/// Simulates `length` steps. Excitation mode draws u uniformly from
/// [excitation_lo, excitation_hi); sinusoid mode uses
/// u_t = sin(2*pi*t/10) + sin(2*pi*t/25). If `final_state` is non-null the
/// hidden state after the last step is written there, allowing segment-wise
/// continuation.
TimeSeries simulate_linear_gaussian(int64_t length, InputMode mode,
                                    uint64_t seed,
                                    const LinearGaussianOptions& options = {},
                                    std::array<double, 2>* final_state = nullptr);

/// Two-column file (time in ms, acceleration); time becomes the input signal.
/// Repeated time stamps are expected and accepted.
TimeSeries load_motorcycle(const std::filesystem::path& path);

}  // namespace vrnnaug
