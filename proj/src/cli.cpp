#include "vrnnaug/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vrnnaug/data.hpp"
#include "vrnnaug/metrics.hpp"
#include "vrnnaug/model.hpp"
#include "vrnnaug/serialize.hpp"
#include "vrnnaug/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace vrnnaug {

namespace {

std::string read_text_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(what + ": invalid JSON: " + e.what());
  }
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["data"] = cfg.data;
  j["u_cols"] = cfg.u_cols;
  j["y_cols"] = cfg.y_cols;
  j["split_train"] = cfg.split_train;
  j["split_valid"] = cfg.split_valid;
  j["split_test"] = cfg.split_test;
  j["window"] = cfg.window;
  j["d_z"] = cfg.d_z;
  j["gru_hidden"] = cfg.gru_hidden;
  j["variant"] = cfg.variant;
  j["logvar_min"] = cfg.logvar_min;
  j["logvar_max"] = cfg.logvar_max;
  j["mlp_hidden_layers"] = cfg.mlp_hidden_layers;
  j["mlp_min_width"] = cfg.mlp_min_width;
  j["max_epochs"] = cfg.max_epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["lr_floor"] = cfg.lr_floor;
  j["lr_check_every"] = cfg.lr_check_every;
  j["lr_factor"] = cfg.lr_factor;
  j["grad_clip"] = cfg.grad_clip;
  j["grad_through_feedback"] = cfg.grad_through_feedback;
  j["seed"] = cfg.seed;
  j["num_samples"] = cfg.num_samples;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json j = parse_json(text, "run config");
  RunConfig cfg;
  auto load = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  load("data", cfg.data);
  load("u_cols", cfg.u_cols);
  load("y_cols", cfg.y_cols);
  load("split_train", cfg.split_train);
  load("split_valid", cfg.split_valid);
  load("split_test", cfg.split_test);
  load("window", cfg.window);
  load("d_z", cfg.d_z);
  load("gru_hidden", cfg.gru_hidden);
  load("variant", cfg.variant);
  load("logvar_min", cfg.logvar_min);
  load("logvar_max", cfg.logvar_max);
  load("mlp_hidden_layers", cfg.mlp_hidden_layers);
  load("mlp_min_width", cfg.mlp_min_width);
  load("max_epochs", cfg.max_epochs);
  load("batch_size", cfg.batch_size);
  load("lr", cfg.lr);
  load("lr_floor", cfg.lr_floor);
  load("lr_check_every", cfg.lr_check_every);
  load("lr_factor", cfg.lr_factor);
  load("grad_clip", cfg.grad_clip);
  load("grad_through_feedback", cfg.grad_through_feedback);
  load("seed", cfg.seed);
  load("num_samples", cfg.num_samples);
  load("out_dir", cfg.out_dir);
  return cfg;
}

namespace {

void write_standardizer(const fs::path& path, const Standardizer& s) {
  ordered_json j;
  j["u_mean"] = s.u_mean();
  j["u_std"] = s.u_std();
  j["y_mean"] = s.y_mean();
  j["y_std"] = s.y_std();
  write_text_file(path, j.dump(2) + "\n");
}

Standardizer read_standardizer(const fs::path& path) {
  json j = parse_json(read_text_file(path), "standardizer");
  return Standardizer::from_moments(
      j.at("u_mean").get<std::vector<double>>(),
      j.at("u_std").get<std::vector<double>>(),
      j.at("y_mean").get<std::vector<double>>(),
      j.at("y_std").get<std::vector<double>>());
}

std::string trace_row(const EpochRecord& rec) {
  return std::to_string(rec.epoch) + "," + fmt17(rec.train_neg_elbo) + "," +
         fmt17(rec.valid_neg_elbo) + "," + fmt17(rec.lr) + "\n";
}

void write_report_json(const fs::path& path, const TrainReport& report,
                       const std::vector<EpochRecord>& all_epochs) {
  ordered_json j;
  j["best_epoch"] = report.best_epoch;
  j["best_valid"] = report.best_valid;
  j["termination"] = stop_reason_name(report.reason);
  ordered_json epochs = ordered_json::array();
  for (const auto& rec : all_epochs) {
    ordered_json e;
    e["epoch"] = rec.epoch;
    e["train_neg_elbo"] = rec.train_neg_elbo;
    e["valid_neg_elbo"] = rec.valid_neg_elbo;
    e["lr"] = rec.lr;
    e["wall_seconds"] = rec.wall_seconds;
    epochs.push_back(e);
  }
  j["epochs"] = epochs;
  write_text_file(path, j.dump(2) + "\n");
}

ModelConfig model_config_from_run(const RunConfig& cfg, int d_u, int d_y) {
  ModelConfig mc;
  mc.d_u = d_u;
  mc.d_y = d_y;
  mc.d_z = cfg.d_z;
  mc.gru_hidden = cfg.gru_hidden;
  mc.variant = variant_from_string(cfg.variant);
  mc.num_samples = cfg.num_samples;
  mc.logvar_min = cfg.logvar_min;
  mc.logvar_max = cfg.logvar_max;
  mc.mlp_hidden_layers = cfg.mlp_hidden_layers;
  mc.mlp_min_width = cfg.mlp_min_width;
  mc.grad_through_feedback = cfg.grad_through_feedback;
  return mc;
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.split_train <= 0.0 || cfg.split_valid <= 0.0 || cfg.split_test <= 0.0 ||
      std::abs(cfg.split_train + cfg.split_valid + cfg.split_test - 1.0) > 1e-9) {
    throw ArgumentError("split fractions must be positive and sum to 1");
  }
  if (cfg.window < 1) throw ArgumentError("window must be >= 1");
  if (cfg.max_epochs < 1) throw ArgumentError("max epochs must be >= 1");
  if (cfg.batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (cfg.d_z < 1) throw ArgumentError("d_z must be >= 1");
  if (cfg.gru_hidden < 1) throw ArgumentError("gru hidden size must be >= 1");
  if (cfg.num_samples < 1) throw ArgumentError("num samples must be >= 1");
  if (cfg.lr <= 0.0 || cfg.lr > 1e-3 + 1e-15) {
    throw ArgumentError("learning rate must lie in (0, 1e-3]");
  }
  if (cfg.u_cols.empty() || cfg.y_cols.empty()) {
    throw ArgumentError("u and y column lists must be nonempty");
  }
  variant_from_string(cfg.variant);  // validates
}

}  // namespace

int cmd_generate(const GenerateConfig& cfg) {
  if (cfg.system != "linear-gaussian") {
    throw ArgumentError("unknown system '" + cfg.system + "'");
  }
  if (cfg.length < 1) throw ArgumentError("length must be >= 1");
  if (cfg.out_csv.empty()) throw ArgumentError("an output CSV path is required");
  if (cfg.input_mode != "excitation" && cfg.input_mode != "sinusoid") {
    throw ArgumentError("input mode must be 'excitation' or 'sinusoid'");
  }
  if (cfg.sinusoid_tail < 0 || cfg.sinusoid_tail > cfg.length) {
    throw ArgumentError("sinusoid tail must lie in [0, length]");
  }

  LinearGaussianOptions options;
  TimeSeries series;
  if (cfg.input_mode == "sinusoid") {
    series = simulate_linear_gaussian(cfg.length, InputMode::kSinusoid,
                                      cfg.seed, options);
  } else if (cfg.sinusoid_tail == 0) {
    series = simulate_linear_gaussian(cfg.length, InputMode::kExcitation,
                                      cfg.seed, options);
  } else {
    // Excitation head, sinusoid tail, hidden state carried across.
    const int64_t head = cfg.length - cfg.sinusoid_tail;
    std::array<double, 2> state{0.0, 0.0};
    TimeSeries tail;
    if (head > 0) {
      series = simulate_linear_gaussian(
          head, InputMode::kExcitation,
          RngStream(cfg.seed).substream("head").seed(), options, &state);
      options.h0 = state;
      options.t_offset = head;
    }
    tail = simulate_linear_gaussian(cfg.sinusoid_tail, InputMode::kSinusoid,
                                    RngStream(cfg.seed).substream("tail").seed(),
                                    options);
    if (head > 0) {
      series.u.insert(series.u.end(), tail.u.begin(), tail.u.end());
      series.y.insert(series.y.end(), tail.y.begin(), tail.y.end());
      series.length += tail.length;
    } else {
      series = std::move(tail);
    }
  }

  write_csv(cfg.out_csv, series, {"u"}, {"y"});

  ordered_json j;
  j["system"] = cfg.system;
  j["length"] = cfg.length;
  j["input_mode"] = cfg.input_mode;
  j["sinusoid_tail"] = cfg.sinusoid_tail;
  j["seed"] = cfg.seed;
  j["A"] = {{options.a[0], options.a[1]}, {options.a[2], options.a[3]}};
  j["B"] = {options.b[0], options.b[1]};
  j["C"] = {options.c[0], options.c[1]};
  j["process_noise_std"] = options.process_noise_std;
  j["measurement_noise_std"] = options.measurement_noise_std;
  j["excitation_range"] = {options.excitation_lo, options.excitation_hi};
  const std::string prov = cfg.provenance_json.empty()
                               ? cfg.out_csv + ".json"
                               : cfg.provenance_json;
  write_text_file(prov, j.dump(2) + "\n");
  std::cerr << "wrote " << series.length << " rows to " << cfg.out_csv << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  const fs::path dir(cfg.out_dir);

  ResumeState resume_state;
  bool resuming = false;
  if (cfg.resume) {
    // The run directory's snapshot defines the resumed run; only the epoch
    // budget may be extended from the command line.
    const int extended_epochs = cfg.max_epochs;
    cfg = run_config_from_json(read_text_file(dir / "config.json"));
    cfg.out_dir = cfg_in.out_dir;
    cfg.max_epochs = std::max(cfg.max_epochs, extended_epochs);
    cfg.resume = true;
    cfg.quiet = cfg_in.quiet;

    json st = parse_json(read_text_file(dir / "train_state.json"), "train state");
    resume_state.valid_history =
        st.at("valid_history").get<std::vector<double>>();
    resume_state.best_valid = st.at("best_valid").get<double>();
    resume_state.best_epoch = st.at("best_epoch").get<int>();
    resume_state.adam_steps = st.at("adam_steps").get<int64_t>();
    resume_state.adam_records = read_tensor_records(dir / "optim.bin");
    resuming = true;
    if (static_cast<int>(resume_state.valid_history.size()) >= cfg.max_epochs) {
      throw ArgumentError(
          "run already has " +
          std::to_string(resume_state.valid_history.size()) +
          " epochs; raise --epochs to continue");
    }
  }
  validate_run_config(cfg);

  TimeSeries series = load_csv(cfg.data, cfg.u_cols, cfg.y_cols);
  SplitSeries split = chrono_split(
      series, {cfg.split_train, cfg.split_valid, cfg.split_test}, cfg.window);
  Standardizer standardizer = Standardizer::fit(split.train);
  ChunkSet train_chunks = shingle(standardizer.apply(split.train), cfg.window);
  ChunkSet valid_chunks = shingle(standardizer.apply(split.valid), cfg.window);

  ModelConfig mc = model_config_from_run(cfg, series.d_u, series.d_y);
  Model model(mc, cfg.seed);
  if (resuming) load_params(model.params(), dir / "last.bin");

  fs::create_directories(dir);
  write_text_file(dir / "config.json", run_config_to_json(cfg) + "\n");
  write_text_file(dir / "model_config.json", model_config_to_json(mc) + "\n");
  write_standardizer(dir / "standardizer.json", standardizer);

  TrainOptions options;
  options.max_epochs = cfg.max_epochs;
  options.batch_size = cfg.batch_size;
  options.schedule.initial = cfg.lr;
  options.schedule.floor = cfg.lr_floor;
  options.schedule.check_every = cfg.lr_check_every;
  options.schedule.factor = cfg.lr_factor;
  options.seed = cfg.seed;
  options.grad_clip_norm = cfg.grad_clip;
  if (!cfg.quiet) {
    options.on_epoch = [](const EpochRecord& rec) {
      std::fprintf(stderr,
                   "epoch %4d  train %.5f  valid %.5f  lr %.2e  (%.1fs)\n",
                   rec.epoch, rec.train_neg_elbo, rec.valid_neg_elbo, rec.lr,
                   rec.wall_seconds);
    };
  }

  TrainResult result = train(std::move(model), train_chunks, valid_chunks,
                             options, resuming ? &resume_state : nullptr);

  // Artifacts. The loss trace carries only deterministic fields.
  std::string trace;
  std::vector<EpochRecord> all_epochs;
  if (resuming && fs::exists(dir / "trace.csv")) {
    trace = read_text_file(dir / "trace.csv");
    json old = parse_json(read_text_file(dir / "report.json"), "report");
    for (const auto& e : old.at("epochs")) {
      EpochRecord rec;
      rec.epoch = e.at("epoch").get<int>();
      rec.train_neg_elbo = e.at("train_neg_elbo").get<double>();
      rec.valid_neg_elbo = e.at("valid_neg_elbo").get<double>();
      rec.lr = e.at("lr").get<double>();
      rec.wall_seconds = e.at("wall_seconds").get<double>();
      all_epochs.push_back(rec);
    }
  } else {
    trace = "epoch,train_neg_elbo,valid_neg_elbo,lr\n";
  }
  for (const auto& rec : result.report.epochs) {
    trace += trace_row(rec);
    all_epochs.push_back(rec);
  }
  write_text_file(dir / "trace.csv", trace);
  write_report_json(dir / "report.json", result.report, all_epochs);

  {
    ordered_json st;
    st["completed_epochs"] =
        all_epochs.empty() ? 0 : all_epochs.back().epoch;
    st["best_epoch"] = result.report.best_epoch;
    st["best_valid"] = result.report.best_valid;
    st["adam_steps"] = result.adam_steps;
    std::vector<double> history = resume_state.valid_history;
    for (const auto& rec : result.report.epochs) {
      history.push_back(rec.valid_neg_elbo);
    }
    st["valid_history"] = history;
    st["termination"] = stop_reason_name(result.report.reason);
    write_text_file(dir / "train_state.json", st.dump(2) + "\n");
  }

  write_tensor_records(dir / "optim.bin", result.adam_records);
  if (result.best_in_run) {
    // Model currently holds the best-validation parameters.
    save_params(result.model.params(), dir / "checkpoint.bin");
  }
  {
    // Final-epoch parameters for resumption.
    auto& entries = result.model.params().mutable_entries();
    for (size_t p = 0; p < entries.size(); ++p) {
      auto dst = entries[p].second.mutable_values();
      std::copy(result.last_params[p].begin(), result.last_params[p].end(),
                dst.begin());
    }
    save_params(result.model.params(), dir / "last.bin");
  }

  if (!cfg.quiet) {
    std::fprintf(stderr, "best epoch %d (valid %.5f), stopped by %s\n",
                 result.report.best_epoch, result.report.best_valid,
                 stop_reason_name(result.report.reason));
  }
  return kExitOk;
}

namespace {

void write_samples_json(const fs::path& path, const ForecastSamples& samples,
                        uint64_t seed) {
  ordered_json j;
  j["num_samples"] = samples.num_samples;
  j["horizon"] = samples.horizon;
  j["d_y"] = samples.d_y;
  j["seed"] = seed;
  ordered_json all = ordered_json::array();
  for (int k = 0; k < samples.num_samples; ++k) {
    ordered_json traj = ordered_json::array();
    for (int t = 0; t < samples.horizon; ++t) {
      ordered_json row = ordered_json::array();
      for (int d = 0; d < samples.d_y; ++d) row.push_back(samples.at(k, t, d));
      traj.push_back(row);
    }
    all.push_back(traj);
  }
  j["samples"] = all;
  write_text_file(path, j.dump() + "\n");
}

ForecastSamples read_samples_json(const fs::path& path) {
  json j = parse_json(read_text_file(path), "forecast samples");
  ForecastSamples samples;
  samples.num_samples = j.at("num_samples").get<int>();
  samples.horizon = j.at("horizon").get<int>();
  samples.d_y = j.at("d_y").get<int>();
  const auto& all = j.at("samples");
  if (static_cast<int>(all.size()) != samples.num_samples) {
    throw DataError("forecast samples: trajectory count mismatch");
  }
  samples.values.reserve(static_cast<size_t>(samples.num_samples) *
                         samples.horizon * samples.d_y);
  for (const auto& traj : all) {
    if (static_cast<int>(traj.size()) != samples.horizon) {
      throw DataError("forecast samples: horizon mismatch");
    }
    for (const auto& row : traj) {
      if (static_cast<int>(row.size()) != samples.d_y) {
        throw DataError("forecast samples: dimension mismatch");
      }
      for (const auto& v : row) samples.values.push_back(v.get<double>());
    }
  }
  return samples;
}

void write_quantile_csv(const fs::path& path, const ForecastSamples& samples) {
  std::string text = "t";
  for (int d = 0; d < samples.d_y; ++d) {
    const std::string col = "y" + std::to_string(d);
    text += "," + col + "_q05," + col + "_q50," + col + "_q95," + col + "_mean";
  }
  text += "\n";
  std::vector<std::vector<double>> q05, q50, q95, mu;
  for (int d = 0; d < samples.d_y; ++d) {
    q05.push_back(quantile_series(samples, 0.05, d));
    q50.push_back(quantile_series(samples, 0.5, d));
    q95.push_back(quantile_series(samples, 0.95, d));
    mu.push_back(mean_series(samples, d));
  }
  for (int t = 0; t < samples.horizon; ++t) {
    text += std::to_string(t + 1);
    for (int d = 0; d < samples.d_y; ++d) {
      text += "," + fmt17(q05[d][t]) + "," + fmt17(q50[d][t]) + "," +
              fmt17(q95[d][t]) + "," + fmt17(mu[d][t]);
    }
    text += "\n";
  }
  write_text_file(path, text);
}

}  // namespace

int cmd_forecast(const ForecastConfig& cfg) {
  if (cfg.run_dir.empty()) throw ArgumentError("a run directory is required");
  if (cfg.inputs_csv.empty()) throw ArgumentError("an inputs CSV is required");
  const fs::path dir(cfg.run_dir);
  RunConfig run_cfg = run_config_from_json(read_text_file(dir / "config.json"));
  Model model = load_model(dir / "checkpoint.bin", dir / "model_config.json");
  Standardizer standardizer = read_standardizer(dir / "standardizer.json");

  TimeSeries inputs = load_csv(cfg.inputs_csv, run_cfg.u_cols, {});
  const int horizon =
      cfg.horizon > 0 ? cfg.horizon : static_cast<int>(inputs.length);
  if (horizon > inputs.length) {
    throw DataError("inputs provide " + std::to_string(inputs.length) +
                    " rows; horizon " + std::to_string(horizon) + " is short " +
                    std::to_string(horizon - inputs.length) + " rows");
  }
  const int k = cfg.num_samples > 0 ? cfg.num_samples : run_cfg.num_samples;

  std::vector<double> u(inputs.u.begin(),
                        inputs.u.begin() + static_cast<size_t>(horizon) * inputs.d_u);
  standardizer.apply_u_inplace(u);

  ForecastSamples samples;
  if (cfg.warm_start) {
    const std::string history_path =
        cfg.history_csv.empty() ? run_cfg.data : cfg.history_csv;
    TimeSeries history = load_csv(history_path, run_cfg.u_cols, run_cfg.y_cols);
    if (cfg.history_csv.empty()) {
      // Default warm-up consumes the pre-test part of the training file.
      SplitSeries split = chrono_split(
          history, {run_cfg.split_train, run_cfg.split_valid, run_cfg.split_test});
      TimeSeries pre = split.train;
      pre.u.insert(pre.u.end(), split.valid.u.begin(), split.valid.u.end());
      pre.y.insert(pre.y.end(), split.valid.y.begin(), split.valid.y.end());
      pre.length += split.valid.length;
      history = std::move(pre);
    }
    history = standardizer.apply(history);
    EncoderState warm = model.warmup_state(history, k, cfg.seed);
    samples = model.forecast(u, horizon, k, cfg.seed, &warm);
  } else {
    samples = model.forecast(u, horizon, k, cfg.seed);
  }
  standardizer.invert_y_inplace(samples.values);

  const fs::path out_dir = cfg.out_dir.empty() ? dir : fs::path(cfg.out_dir);
  fs::create_directories(out_dir);
  write_samples_json(out_dir / "samples.json", samples, cfg.seed);
  write_quantile_csv(out_dir / "quantiles.csv", samples);
  std::cerr << "forecast: " << k << " trajectories x " << horizon
            << " steps -> " << (out_dir / "samples.json").string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const EvaluateConfig& cfg) {
  if (cfg.samples_json.empty()) throw ArgumentError("a samples file is required");
  if (cfg.truth_csv.empty()) throw ArgumentError("a truth CSV is required");
  ForecastSamples samples = read_samples_json(cfg.samples_json);
  TimeSeries truth = load_csv(cfg.truth_csv, {}, cfg.y_cols);
  if (truth.length != samples.horizon || truth.d_y != samples.d_y) {
    throw DataError("truth has " + std::to_string(truth.length) + " rows x " +
                    std::to_string(truth.d_y) + " dims, forecast has " +
                    std::to_string(samples.horizon) + " x " +
                    std::to_string(samples.d_y));
  }
  auto grid = default_alpha_grid();
  MetricsReport report = evaluate_run(samples, truth.y, grid, cfg.per_dim_ecp);

  for (const auto& dm : report.per_dim) {
    std::printf("y%d  p50 %.4f  p90 %.4f\n", dm.dim, dm.p50, dm.p90);
  }
  if (report.per_dim.size() > 1) {
    std::printf("all p50 %.4f  p90 %.4f\n", report.overall.p50,
                report.overall.p90);
  }

  ordered_json j;
  ordered_json dims = ordered_json::array();
  for (const auto& dm : report.per_dim) {
    ordered_json d;
    d["dim"] = dm.dim;
    d["p50"] = dm.p50;
    d["p90"] = dm.p90;
    dims.push_back(d);
  }
  j["per_dim"] = dims;
  j["overall"] = {{"p50", report.overall.p50}, {"p90", report.overall.p90}};
  ordered_json curve = ordered_json::array();
  for (const auto& [alpha, coverage] : report.ecp_curve) {
    curve.push_back({{"alpha", alpha}, {"coverage", coverage}});
  }
  j["ecp"] = curve;
  if (cfg.per_dim_ecp) {
    ordered_json per_dim = ordered_json::array();
    for (const auto& dim_curve : report.ecp_per_dim) {
      ordered_json c = ordered_json::array();
      for (const auto& [alpha, coverage] : dim_curve) {
        c.push_back({{"alpha", alpha}, {"coverage", coverage}});
      }
      per_dim.push_back(c);
    }
    j["ecp_by_dim"] = per_dim;
  }

  const fs::path out_json = cfg.out_json.empty()
                                ? fs::path(cfg.samples_json).parent_path() /
                                      "metrics.json"
                                : fs::path(cfg.out_json);
  write_text_file(out_json, j.dump(2) + "\n");

  const fs::path ecp_path = cfg.ecp_csv.empty()
                                ? out_json.parent_path() / "ecp.csv"
                                : fs::path(cfg.ecp_csv);
  std::string ecp_text = "alpha,coverage\n";
  for (const auto& [alpha, coverage] : report.ecp_curve) {
    ecp_text += fmt17(alpha) + "," + fmt17(coverage) + "\n";
  }
  write_text_file(ecp_path, ecp_text);
  return kExitOk;
}

namespace {

int dispatch(const std::function<int()>& f) {
  try {
    return f();
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Probabilistic time-series forecasting with a variational RNN "
               "over augmented recurrent inputs"};
  app.require_subcommand(1);

  GenerateConfig gen;
  auto* generate = app.add_subcommand(
      "generate", "Simulate a synthetic dataset and write it as CSV");
  generate->add_option("--system", gen.system, "System to simulate")
      ->capture_default_str();
  generate->add_option("--length,-T", gen.length, "Number of time steps")
      ->capture_default_str();
  generate->add_option("--input-mode", gen.input_mode,
                       "excitation | sinusoid")
      ->capture_default_str();
  generate->add_option("--sinusoid-tail", gen.sinusoid_tail,
                       "Switch the final N steps to the sinusoid input");
  generate->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  generate->add_option("--out", gen.out_csv, "Output CSV path")->required();
  generate->add_option("--provenance", gen.provenance_json,
                       "Provenance JSON path (default: <out>.json)");

  RunConfig run;
  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Fit a model on a CSV dataset");
  train_cmd->add_option("--config", config_path,
                        "JSON config; explicit flags override its values");
  train_cmd->add_option("--data", run.data, "Input CSV")->capture_default_str();
  train_cmd->add_option("--u-cols", run.u_cols, "Input-signal column names")
      ->capture_default_str();
  train_cmd->add_option("--y-cols", run.y_cols, "Observation column names")
      ->capture_default_str();
  std::vector<double> split_vals;
  train_cmd->add_option("--split", split_vals,
                        "Train/valid/test fractions (three values)")
      ->expected(3);
  train_cmd->add_option("--window,-W", run.window, "Chunk length")
      ->capture_default_str();
  train_cmd->add_option("--d-z", run.d_z, "Latent width")->capture_default_str();
  train_cmd->add_option("--gru-hidden", run.gru_hidden, "GRU hidden size")
      ->capture_default_str();
  train_cmd->add_option("--variant", run.variant, "full | v1 | v2")
      ->capture_default_str();
  train_cmd->add_option("--epochs", run.max_epochs, "Maximum epochs")
      ->capture_default_str();
  train_cmd->add_option("--batch", run.batch_size, "Mini-batch size")
      ->capture_default_str();
  train_cmd->add_option("--lr", run.lr, "Initial learning rate")
      ->capture_default_str();
  train_cmd->add_option("--grad-clip", run.grad_clip,
                        "Max gradient norm (0 disables)");
  train_cmd->add_flag("--grad-through-feedback", run.grad_through_feedback,
                      "Propagate gradients through the sampled feedback");
  train_cmd->add_option("--seed", run.seed, "Run seed")->capture_default_str();
  train_cmd->add_option("--K,--num-samples", run.num_samples,
                        "Forecast trajectories")
      ->capture_default_str();
  train_cmd->add_option("--out", run.out_dir, "Run directory")
      ->capture_default_str();
  train_cmd->add_flag("--resume", run.resume,
                      "Continue the run found in the output directory");
  train_cmd->add_flag("--quiet", run.quiet, "Suppress progress output");

  ForecastConfig fc;
  auto* forecast_cmd = app.add_subcommand(
      "forecast", "Sample future trajectories from a trained run");
  forecast_cmd->add_option("--run", fc.run_dir, "Run directory")->required();
  forecast_cmd->add_option("--inputs", fc.inputs_csv,
                           "CSV with future input signals")
      ->required();
  forecast_cmd->add_option("--horizon,-F", fc.horizon,
                           "Steps to forecast (default: all input rows)");
  forecast_cmd->add_option("--K,--num-samples", fc.num_samples,
                           "Trajectories (default: trained K)");
  forecast_cmd->add_option("--seed", fc.seed, "Sampling seed")
      ->capture_default_str();
  forecast_cmd->add_flag("--warm-start", fc.warm_start,
                         "Warm the state on observed history before forecasting");
  forecast_cmd->add_option("--history", fc.history_csv,
                           "History CSV for the warm start");
  forecast_cmd->add_option("--out", fc.out_dir,
                           "Output directory (default: run directory)");

  EvaluateConfig ev;
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "Score persisted forecast samples against observations");
  evaluate_cmd->add_option("--forecast", ev.samples_json,
                           "samples.json produced by forecast")
      ->required();
  evaluate_cmd->add_option("--truth", ev.truth_csv, "CSV with observations")
      ->required();
  evaluate_cmd->add_option("--y-cols", ev.y_cols, "Observation column names")
      ->capture_default_str();
  evaluate_cmd->add_option("--out", ev.out_json, "Metrics JSON path");
  evaluate_cmd->add_option("--ecp-out", ev.ecp_csv, "ECP curve CSV path");
  evaluate_cmd->add_flag("--per-dim-ecp", ev.per_dim_ecp,
                         "Also emit per-dimension coverage curves");

  // A config file provides defaults; flags parsed afterwards override them.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        run = run_config_from_json(read_text_file(argv[i + 1]));
      } catch (const Error& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return kExitArgument;
      }
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitArgument;
  }

  if (split_vals.size() == 3) {
    run.split_train = split_vals[0];
    run.split_valid = split_vals[1];
    run.split_test = split_vals[2];
  }

  if (generate->parsed()) return dispatch([&] { return cmd_generate(gen); });
  if (train_cmd->parsed()) return dispatch([&] { return cmd_train(run); });
  if (forecast_cmd->parsed()) return dispatch([&] { return cmd_forecast(fc); });
  if (evaluate_cmd->parsed()) return dispatch([&] { return cmd_evaluate(ev); });
  return kExitArgument;
}

}  // namespace vrnnaug
