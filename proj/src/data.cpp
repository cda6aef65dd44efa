#include "vrnnaug/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vrnnaug/rng.hpp"

namespace vrnnaug {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_cell(const std::string& cell, int64_t row, const std::string& col) {
  const std::string v = trim(cell);
  if (v.empty()) {
    throw DataError("blank cell at data row " + std::to_string(row) +
                    ", column '" + col + "'");
  }
  size_t consumed = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(v, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != v.size() || !std::isfinite(parsed)) {
    throw DataError("non-numeric cell '" + v + "' at data row " +
                    std::to_string(row) + ", column '" + col + "'");
  }
  return parsed;
}

}  // namespace

TimeSeries load_csv(const std::filesystem::path& path,
                    const std::vector<std::string>& u_columns,
                    const std::vector<std::string>& y_columns) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::string header_line;
  if (!std::getline(is, header_line)) {
    throw DataError("'" + path.string() + "' is empty");
  }
  std::vector<std::string> header = split_line(header_line);
  for (auto& h : header) h = strip_quotes(h);

  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError("column '" + name + "' not found in '" + path.string() +
                      "' (header: " + header_line + ")");
    }
    return static_cast<int>(it - header.begin());
  };
  std::vector<int> u_idx, y_idx;
  for (const auto& c : u_columns) u_idx.push_back(column_index(c));
  for (const auto& c : y_columns) y_idx.push_back(column_index(c));

  TimeSeries series;
  series.d_u = static_cast<int>(u_idx.size());
  series.d_y = static_cast<int>(y_idx.size());
  series.label = path.filename().string();

  std::string line;
  int64_t row = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (fields.size() < header.size()) {
      throw DataError("data row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    for (size_t k = 0; k < u_idx.size(); ++k) {
      series.u.push_back(parse_cell(fields[u_idx[k]], row, u_columns[k]));
    }
    for (size_t k = 0; k < y_idx.size(); ++k) {
      series.y.push_back(parse_cell(fields[y_idx[k]], row, y_columns[k]));
    }
    ++row;
  }
  if (row == 0) throw DataError("'" + path.string() + "' has no data rows");
  series.length = row;
  return series;
}

void write_csv(const std::filesystem::path& path, const TimeSeries& series,
               const std::vector<std::string>& u_names,
               const std::vector<std::string>& y_names) {
  if (static_cast<int>(u_names.size()) != series.d_u ||
      static_cast<int>(y_names.size()) != series.d_y) {
    throw ArgumentError("write_csv: column name counts do not match series");
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  for (size_t i = 0; i < u_names.size(); ++i) {
    if (i) os << ',';
    os << u_names[i];
  }
  for (const auto& n : y_names) os << ',' << n;
  os << '\n';
  char buf[32];
  for (int64_t t = 0; t < series.length; ++t) {
    for (int j = 0; j < series.d_u; ++j) {
      if (j) os << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", series.u_at(t, j));
      os << buf;
    }
    for (int j = 0; j < series.d_y; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", series.y_at(t, j));
      os << ',' << buf;
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

namespace {

TimeSeries take_rows(const TimeSeries& s, int64_t begin, int64_t count,
                     const std::string& label) {
  TimeSeries out;
  out.length = count;
  out.d_u = s.d_u;
  out.d_y = s.d_y;
  out.label = label;
  out.u.assign(s.u.begin() + begin * s.d_u, s.u.begin() + (begin + count) * s.d_u);
  out.y.assign(s.y.begin() + begin * s.d_y, s.y.begin() + (begin + count) * s.d_y);
  return out;
}

}  // namespace

SplitSeries chrono_split(const TimeSeries& series, SplitFractions fractions,
                         int64_t min_train_valid_len) {
  if (fractions.train <= 0.0 || fractions.valid <= 0.0 || fractions.test <= 0.0) {
    throw ArgumentError("chrono_split: fractions must be positive");
  }
  const double total = fractions.train + fractions.valid + fractions.test;
  if (std::abs(total - 1.0) > 1e-9) {
    throw ArgumentError("chrono_split: fractions sum to " + std::to_string(total));
  }
  const int64_t n_train = static_cast<int64_t>(fractions.train * static_cast<double>(series.length));
  const int64_t n_valid = static_cast<int64_t>(fractions.valid * static_cast<double>(series.length));
  const int64_t n_test = series.length - n_train - n_valid;
  if (n_train < min_train_valid_len || n_valid < min_train_valid_len) {
    throw DataError("chrono_split: train/valid segments (" +
                    std::to_string(n_train) + "/" + std::to_string(n_valid) +
                    ") shorter than required length " +
                    std::to_string(min_train_valid_len));
  }
  if (n_test < 1) throw DataError("chrono_split: empty test segment");
  SplitSeries out;
  out.train = take_rows(series, 0, n_train, series.label + ":train");
  out.valid = take_rows(series, n_train, n_valid, series.label + ":valid");
  out.test = take_rows(series, n_train + n_valid, n_test, series.label + ":test");
  return out;
}

namespace {

void fit_moments(const std::vector<double>& data, int64_t rows, int dims,
                 std::vector<double>& mean, std::vector<double>& stddev) {
  mean.assign(dims, 0.0);
  stddev.assign(dims, 0.0);
  for (int64_t t = 0; t < rows; ++t)
    for (int j = 0; j < dims; ++j) mean[j] += data[t * dims + j];
  for (int j = 0; j < dims; ++j) mean[j] /= static_cast<double>(rows);
  for (int64_t t = 0; t < rows; ++t)
    for (int j = 0; j < dims; ++j) {
      const double d = data[t * dims + j] - mean[j];
      stddev[j] += d * d;
    }
  for (int j = 0; j < dims; ++j) {
    stddev[j] = std::sqrt(stddev[j] / static_cast<double>(rows));
    if (stddev[j] <= 0.0) {
      throw DataError("standardizer: dimension " + std::to_string(j) +
                      " has zero variance");
    }
  }
}

}  // namespace

Standardizer Standardizer::fit(const TimeSeries& train) {
  Standardizer s;
  fit_moments(train.u, train.length, train.d_u, s.u_mean_, s.u_std_);
  fit_moments(train.y, train.length, train.d_y, s.y_mean_, s.y_std_);
  return s;
}

Standardizer Standardizer::from_moments(std::vector<double> u_mean,
                                        std::vector<double> u_std,
                                        std::vector<double> y_mean,
                                        std::vector<double> y_std) {
  Standardizer s;
  s.u_mean_ = std::move(u_mean);
  s.u_std_ = std::move(u_std);
  s.y_mean_ = std::move(y_mean);
  s.y_std_ = std::move(y_std);
  return s;
}

TimeSeries Standardizer::apply(const TimeSeries& series) const {
  if (series.d_u != static_cast<int>(u_mean_.size()) ||
      series.d_y != static_cast<int>(y_mean_.size())) {
    throw DimensionError("standardizer: dimension mismatch");
  }
  TimeSeries out = series;
  for (int64_t t = 0; t < out.length; ++t) {
    for (int j = 0; j < out.d_u; ++j)
      out.u[t * out.d_u + j] = (out.u[t * out.d_u + j] - u_mean_[j]) / u_std_[j];
    for (int j = 0; j < out.d_y; ++j)
      out.y[t * out.d_y + j] = (out.y[t * out.d_y + j] - y_mean_[j]) / y_std_[j];
  }
  return out;
}

TimeSeries Standardizer::invert(const TimeSeries& series) const {
  TimeSeries out = series;
  for (int64_t t = 0; t < out.length; ++t) {
    for (int j = 0; j < out.d_u; ++j)
      out.u[t * out.d_u + j] = out.u[t * out.d_u + j] * u_std_[j] + u_mean_[j];
    for (int j = 0; j < out.d_y; ++j)
      out.y[t * out.d_y + j] = out.y[t * out.d_y + j] * y_std_[j] + y_mean_[j];
  }
  return out;
}

void Standardizer::apply_u_inplace(std::span<double> rows) const {
  const size_t d = u_mean_.size();
  for (size_t i = 0; i < rows.size(); ++i) {
    const size_t j = i % d;
    rows[i] = (rows[i] - u_mean_[j]) / u_std_[j];
  }
}

void Standardizer::invert_y_inplace(std::span<double> rows) const {
  const size_t d = y_mean_.size();
  for (size_t i = 0; i < rows.size(); ++i) {
    const size_t j = i % d;
    rows[i] = rows[i] * y_std_[j] + y_mean_[j];
  }
}

ChunkSet shingle(std::shared_ptr<const TimeSeries> series, int window) {
  if (window < 1) throw ArgumentError("shingle: window must be positive");
  if (window > series->length) {
    throw DataError("shingle: window " + std::to_string(window) +
                    " exceeds series length " + std::to_string(series->length));
  }
  ChunkSet set;
  set.window = window;
  set.split_label = series->label;
  const int64_t count = series->length - window + 1;
  set.starts.resize(static_cast<size_t>(count));
  for (int64_t j = 0; j < count; ++j) set.starts[static_cast<size_t>(j)] = j;
  set.series = std::move(series);
  return set;
}

ChunkSet shingle(TimeSeries series, int window) {
  return shingle(std::make_shared<const TimeSeries>(std::move(series)), window);
}

TimeSeries simulate_linear_gaussian(int64_t length, InputMode mode,
                                    uint64_t seed,
                                    const LinearGaussianOptions& options,
                                    std::array<double, 2>* final_state) {
  if (length < 1) throw ArgumentError("simulate_linear_gaussian: length must be >= 1");
  RngStream input_rng = RngStream(seed).substream("input");
  RngStream process_rng = RngStream(seed).substream("process");
  RngStream measure_rng = RngStream(seed).substream("measure");

  TimeSeries series;
  series.length = length;
  series.d_u = 1;
  series.d_y = 1;
  series.label = "linear-gaussian";
  series.u.resize(static_cast<size_t>(length));
  series.y.resize(static_cast<size_t>(length));

  std::array<double, 2> h = options.h0;
  for (int64_t t = 0; t < length; ++t) {
    double u_t;
    if (mode == InputMode::kExcitation) {
      u_t = input_rng.uniform(options.excitation_lo, options.excitation_hi);
    } else {
      const double tt = static_cast<double>(t + options.t_offset);
      u_t = std::sin(kTwoPi * tt / 10.0) + std::sin(kTwoPi * tt / 25.0);
    }
    series.u[static_cast<size_t>(t)] = u_t;
    series.y[static_cast<size_t>(t)] =
        options.c[0] * h[0] + options.c[1] * h[1] +
        options.measurement_noise_std * measure_rng.normal();
    const double h0_next = options.a[0] * h[0] + options.a[1] * h[1] +
                           options.b[0] * u_t +
                           options.process_noise_std * process_rng.normal();
    const double h1_next = options.a[2] * h[0] + options.a[3] * h[1] +
                           options.b[1] * u_t +
                           options.process_noise_std * process_rng.normal();
    h = {h0_next, h1_next};
  }
  if (final_state != nullptr) *final_state = h;
  return series;
}

TimeSeries load_motorcycle(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::string header_line;
  if (!std::getline(is, header_line)) {
    throw DataError("'" + path.string() + "' is empty");
  }
  auto header = split_line(header_line);
  if (header.size() != 2) {
    throw DataError("'" + path.string() + "' must have exactly two columns");
  }
  TimeSeries series;
  series.d_u = 1;
  series.d_y = 1;
  series.label = "motorcycle";
  std::string line;
  int64_t row = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != 2) {
      throw DataError("data row " + std::to_string(row) +
                      " does not have two fields");
    }
    // Time stamps may repeat: several acceleration readings can share one
    // time point, so no ordering or uniqueness check is applied.
    series.u.push_back(parse_cell(fields[0], row, strip_quotes(header[0])));
    series.y.push_back(parse_cell(fields[1], row, strip_quotes(header[1])));
    ++row;
  }
  if (row == 0) throw DataError("'" + path.string() + "' has no data rows");
  series.length = row;
  return series;
}

}  // namespace vrnnaug
