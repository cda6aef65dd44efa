#include "vrnnaug/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vrnnaug/serialize.hpp"

namespace vrnnaug {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178032973640562;

Tensor ones_like(const Tensor& t) { return Tensor::full(t.shape(), 1.0); }

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kV1: return "v1";
    case Variant::kV2: return "v2";
  }
  return "?";
}

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "v1") return Variant::kV1;
  if (name == "v2") return Variant::kV2;
  throw ArgumentError("unknown variant '" + name + "' (full, v1, v2)");
}

Tensor reparameterize(const GaussianDiag& g, const Tensor& eps) {
  if (g.mean.shape() != g.log_var.shape() || g.mean.shape() != eps.shape()) {
    throw DimensionError("reparameterize: mean " + shape_str(g.mean.shape()) +
                         ", log_var " + shape_str(g.log_var.shape()) +
                         ", eps " + shape_str(eps.shape()) + " must agree");
  }
  return add(g.mean, mul(exp(scale(g.log_var, 0.5)), eps));
}

Tensor kl_unit_gaussian(const GaussianDiag& g) {
  if (g.mean.shape() != g.log_var.shape()) {
    throw DimensionError("kl_unit_gaussian: mean and log_var shapes differ");
  }
  Tensor inner = sub(sub(add(exp(g.log_var), square(g.mean)), ones_like(g.mean)),
                     g.log_var);
  return scale(sum(inner), 0.5);
}

Tensor gaussian_log_likelihood(const Tensor& y, const GaussianDiag& g) {
  if (y.shape() != g.mean.shape() || y.shape() != g.log_var.shape()) {
    throw DimensionError("gaussian_log_likelihood: y " + shape_str(y.shape()) +
                         " does not match distribution " +
                         shape_str(g.mean.shape()));
  }
  Tensor quad = mul(square(sub(y, g.mean)), exp(scale(g.log_var, -1.0)));
  Tensor elem = sub(Tensor::full(y.shape(), -kHalfLogTwoPi),
                    scale(add(g.log_var, quad), 0.5));
  return sum(elem);
}

Tensor hybrid_output(const Tensor& y_prev, const Tensor& y_sample_prev) {
  return scale(add(y_prev, y_sample_prev), 0.5);
}

EncoderState EncoderState::cold_start(const ModelConfig& cfg, int batch) {
  if (batch < 1) throw DimensionError("cold_start: batch must be >= 1");
  EncoderState st;
  st.h_z = Tensor::zeros({batch, cfg.gru_hidden});
  st.h_u = Tensor::zeros({batch, cfg.gru_hidden});
  st.h_y = Tensor::zeros({batch, cfg.gru_hidden});
  st.z_prev = Tensor::zeros({batch, cfg.d_z});
  st.y_prev = Tensor::zeros({batch, cfg.d_y});
  st.batch = batch;
  return st;
}

Tensor StreamNoise::draw(int rows, int cols) {
  std::vector<double> v(static_cast<size_t>(rows) * cols);
  stream_.fill_normal(v);
  return Tensor::from({rows, cols}, std::move(v));
}

Tensor StreamNoise::latent_eps(int, int rows, int cols) { return draw(rows, cols); }
Tensor StreamNoise::output_eps(int, int rows, int cols) { return draw(rows, cols); }

Tensor ZeroNoise::latent_eps(int, int rows, int cols) {
  return Tensor::zeros({rows, cols});
}
Tensor ZeroNoise::output_eps(int, int rows, int cols) {
  return Tensor::zeros({rows, cols});
}

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
  if (cfg.d_u < 1 || cfg.d_y < 1 || cfg.d_z < 1 || cfg.gru_hidden < 1) {
    throw ArgumentError("model: dimensions must be positive");
  }
  RngStream root(init_seed);
  const bool streams_active = cfg.variant != Variant::kV1;
  if (streams_active) {
    RngStream r1 = root.substream("gru_z");
    gru_z_ = make_gru(cfg.d_z, cfg.gru_hidden, r1);
    register_gru(params_, "gru_z", gru_z_);
    RngStream r2 = root.substream("gru_u");
    gru_u_ = make_gru(cfg.d_u, cfg.gru_hidden, r2);
    register_gru(params_, "gru_u", gru_u_);
  }
  RngStream r3 = root.substream("gru_y");
  gru_y_ = make_gru(cfg.d_y, cfg.gru_hidden, r3);
  register_gru(params_, "gru_y", gru_y_);

  if (streams_active) {
    RngStream r4 = root.substream("mlp_zbar");
    mlp_zbar_ = make_mlp(cfg.gru_hidden, cfg.d_z, r4, cfg.mlp_hidden_layers,
                         cfg.mlp_min_width);
    register_mlp(params_, "mlp_zbar", mlp_zbar_);
    RngStream r5 = root.substream("mlp_ubar");
    mlp_ubar_ = make_mlp(cfg.gru_hidden, cfg.d_u, r5, cfg.mlp_hidden_layers,
                         cfg.mlp_min_width);
    register_mlp(params_, "mlp_ubar", mlp_ubar_);
  }
  RngStream r6 = root.substream("mlp_ybar");
  mlp_ybar_ = make_mlp(cfg.gru_hidden, cfg.d_y, r6, cfg.mlp_hidden_layers,
                       cfg.mlp_min_width);
  register_mlp(params_, "mlp_ybar", mlp_ybar_);

  RngStream r7 = root.substream("mlp_post");
  mlp_post_ = make_mlp(cfg.d_z + cfg.d_u + cfg.d_y, 2 * cfg.d_z, r7,
                       cfg.mlp_hidden_layers, cfg.mlp_min_width);
  register_mlp(params_, "mlp_post", mlp_post_);

  RngStream r8 = root.substream("mlp_dec");
  mlp_dec_ = make_mlp(2 * (cfg.d_z + cfg.d_u) + cfg.d_y, 2 * cfg.d_y, r8,
                      cfg.mlp_hidden_layers, cfg.mlp_min_width);
  register_mlp(params_, "mlp_dec", mlp_dec_);
}

Transforms Model::recurrent_transforms(EncoderState& state,
                                       const Tensor& u_t) const {
  if (state.batch < 1 || !state.h_y.defined()) {
    throw Error("recurrent_transforms: uninitialized encoder state");
  }
  if (u_t.rank() != 2 || u_t.rows() != state.batch || u_t.cols() != cfg_.d_u) {
    throw DimensionError("recurrent_transforms: input " +
                         shape_str(u_t.shape()) + " does not match batch " +
                         std::to_string(state.batch) + " x d_u " +
                         std::to_string(cfg_.d_u));
  }
  Transforms tr;
  if (cfg_.variant == Variant::kV1) {
    // Plain auto-regression: previous latent sample and current input pass
    // through; only the lagged-output recurrence is kept.
    tr.z_bar = state.z_prev;
    tr.u_bar = u_t;
  } else {
    state.h_z = gru_step(gru_z_, state.h_z, state.z_prev);
    tr.z_bar = mlp_forward(mlp_zbar_, state.h_z);
    state.h_u = gru_step(gru_u_, state.h_u, u_t);
    tr.u_bar = mlp_forward(mlp_ubar_, state.h_u);
  }
  state.h_y = gru_step(gru_y_, state.h_y, state.y_prev);
  tr.y_bar = mlp_forward(mlp_ybar_, state.h_y);
  return tr;
}

namespace {

GaussianDiag split_gaussian(const Tensor& raw, int width, double lo, double hi) {
  GaussianDiag g;
  g.mean = slice(raw, 0, width);
  g.log_var = clamp(slice(raw, width, width), lo, hi);
  return g;
}

}  // namespace

GaussianDiag Model::posterior_params(const Transforms& tr) const {
  if (tr.z_bar.shape().back() != cfg_.d_z ||
      tr.u_bar.shape().back() != cfg_.d_u ||
      tr.y_bar.shape().back() != cfg_.d_y) {
    throw DimensionError("posterior_params: summary widths do not match");
  }
  Tensor raw = mlp_forward(mlp_post_, concat({tr.z_bar, tr.u_bar, tr.y_bar}));
  return split_gaussian(raw, cfg_.d_z, cfg_.logvar_min, cfg_.logvar_max);
}

GaussianDiag Model::decoder_params(const Tensor& z_sample, const Tensor& u_t,
                                   const Transforms& tr) const {
  if (z_sample.shape().back() != cfg_.d_z ||
      u_t.shape().back() != cfg_.d_u) {
    throw DimensionError("decoder_params: input widths do not match");
  }
  Tensor raw = mlp_forward(
      mlp_dec_, concat({z_sample, u_t, tr.z_bar, tr.u_bar, tr.y_bar}));
  return split_gaussian(raw, cfg_.d_y, cfg_.logvar_min, cfg_.logvar_max);
}

namespace {

Tensor gather_rows(std::span<const ChunkView> chunks, int t, bool from_u) {
  const int batch = static_cast<int>(chunks.size());
  const int d = from_u ? chunks[0].series->d_u : chunks[0].series->d_y;
  std::vector<double> v(static_cast<size_t>(batch) * d);
  for (int b = 0; b < batch; ++b) {
    const auto& c = chunks[static_cast<size_t>(b)];
    auto row = from_u ? c.series->u_row(c.start + t) : c.series->y_row(c.start + t);
    std::copy(row.begin(), row.end(), v.begin() + static_cast<size_t>(b) * d);
  }
  return Tensor::from({batch, d}, std::move(v));
}

}  // namespace

Tensor Model::elbo_batch(std::span<const ChunkView> chunks,
                         NoiseSource& noise) const {
  if (chunks.empty()) throw ArgumentError("elbo_batch: no chunks");
  const int window = chunks[0].window;
  for (const auto& c : chunks) {
    if (c.series == nullptr || c.window != window) {
      throw ArgumentError("elbo_batch: chunks must share one window length");
    }
    if (c.series->d_u != cfg_.d_u || c.series->d_y != cfg_.d_y) {
      throw DimensionError("elbo_batch: series dimensions do not match model");
    }
  }
  if (window < 1) throw ArgumentError("elbo_batch: window must be >= 1");
  const int batch = static_cast<int>(chunks.size());

  EncoderState st = EncoderState::cold_start(cfg_, batch);
  Tensor total;
  for (int t = 0; t < window; ++t) {
    try {
      Tensor u_t = gather_rows(chunks, t, /*from_u=*/true);
      Tensor y_t = gather_rows(chunks, t, /*from_u=*/false);

      Transforms tr = recurrent_transforms(st, u_t);
      GaussianDiag post = posterior_params(tr);
      Tensor z_t = reparameterize(post, noise.latent_eps(t, batch, cfg_.d_z));
      st.z_prev = z_t;
      GaussianDiag out = decoder_params(z_t, u_t, tr);

      Tensor term = sub(gaussian_log_likelihood(y_t, out), kl_unit_gaussian(post));
      total = t == 0 ? term : add(total, term);

      if (cfg_.variant == Variant::kFull) {
        Tensor y_hat = noise.fixed_output_sample(t, batch, cfg_.d_y);
        if (!y_hat.defined()) {
          Tensor eps = noise.output_eps(t, batch, cfg_.d_y);
          if (cfg_.grad_through_feedback) {
            y_hat = reparameterize(out, eps);
          } else {
            NoGradGuard ng;
            GaussianDiag frozen{out.mean.detach(), out.log_var.detach()};
            y_hat = reparameterize(frozen, eps);
          }
        }
        st.y_prev = hybrid_output(y_t, y_hat);
      } else {
        // kV1 / kV2 train on the lagged observation directly.
        st.y_prev = y_t;
      }
    } catch (const NumericError& e) {
      throw NumericError("elbo: time step " + std::to_string(t + 1) + ": " +
                         e.what());
    }
  }
  return total;
}

Tensor Model::elbo_chunk(const ChunkView& chunk, NoiseSource& noise) const {
  const ChunkView views[] = {chunk};
  return elbo_batch(views, noise);
}

Tensor Model::unbiased_elbo(std::span<const ChunkView> chunks,
                            int64_t total_chunks, NoiseSource& noise) const {
  if (chunks.empty()) throw ArgumentError("unbiased_elbo: empty batch");
  if (total_chunks < static_cast<int64_t>(chunks.size())) {
    throw ArgumentError("unbiased_elbo: total chunk count below batch size");
  }
  const double factor =
      static_cast<double>(total_chunks) / static_cast<double>(chunks.size());
  return scale(elbo_batch(chunks, noise), factor);
}

double unbiased_elbo(std::span<const double> chunk_elbos, int64_t total_chunks) {
  if (chunk_elbos.empty()) throw ArgumentError("unbiased_elbo: empty batch");
  if (total_chunks < static_cast<int64_t>(chunk_elbos.size())) {
    throw ArgumentError("unbiased_elbo: total chunk count below batch size");
  }
  double sum = 0.0;
  for (double v : chunk_elbos) sum += v;
  return static_cast<double>(total_chunks) /
         static_cast<double>(chunk_elbos.size()) * sum;
}

namespace {

/// Assembles batch noise row-by-row from per-trajectory streams, so batched
/// forecasting draws exactly what K independent sequential runs would.
class TrajectoryNoise : public NoiseSource {
 public:
  TrajectoryNoise(uint64_t seed, std::string_view tag, int count) {
    RngStream root = RngStream(seed).substream(tag);
    streams_.reserve(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) {
      streams_.push_back(root.substream(static_cast<uint64_t>(k)));
    }
  }

  Tensor latent_eps(int, int rows, int cols) override { return draw(rows, cols); }
  Tensor output_eps(int, int rows, int cols) override { return draw(rows, cols); }

 private:
  Tensor draw(int rows, int cols) {
    if (rows != static_cast<int>(streams_.size())) {
      throw DimensionError("trajectory noise: row count mismatch");
    }
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (int k = 0; k < rows; ++k) {
      streams_[static_cast<size_t>(k)].fill_normal(
          std::span<double>(v.data() + static_cast<size_t>(k) * cols,
                            static_cast<size_t>(cols)));
    }
    return Tensor::from({rows, cols}, std::move(v));
  }

  std::vector<RngStream> streams_;
};

}  // namespace

ForecastSamples Model::forecast(std::span<const double> u_future, int horizon,
                                int num_trajectories, NoiseSource& noise,
                                const EncoderState* warm) const {
  if (horizon < 1) throw ArgumentError("forecast: horizon must be >= 1");
  if (num_trajectories < 1) throw ArgumentError("forecast: need K >= 1");
  if (static_cast<int64_t>(u_future.size()) <
      static_cast<int64_t>(horizon) * cfg_.d_u) {
    throw DataError("forecast: input signal has " +
                    std::to_string(u_future.size() / cfg_.d_u) +
                    " rows, horizon needs " + std::to_string(horizon));
  }
  NoGradGuard ng;
  const int batch = num_trajectories;
  EncoderState st;
  if (warm != nullptr) {
    if (warm->batch != batch) {
      throw DimensionError("forecast: warm state batch " +
                           std::to_string(warm->batch) + " != K " +
                           std::to_string(batch));
    }
    st = *warm;
  } else {
    st = EncoderState::cold_start(cfg_, batch);
  }

  ForecastSamples out;
  out.num_samples = batch;
  out.horizon = horizon;
  out.d_y = cfg_.d_y;
  out.values.assign(
      static_cast<size_t>(batch) * horizon * cfg_.d_y, 0.0);

  for (int t = 0; t < horizon; ++t) {
    // Broadcast the known input row across trajectories.
    std::vector<double> u_row(static_cast<size_t>(batch) * cfg_.d_u);
    for (int b = 0; b < batch; ++b) {
      for (int j = 0; j < cfg_.d_u; ++j) {
        u_row[static_cast<size_t>(b) * cfg_.d_u + j] =
            u_future[static_cast<size_t>(t) * cfg_.d_u + j];
      }
    }
    Tensor u_t = Tensor::from({batch, cfg_.d_u}, std::move(u_row));

    Transforms tr = recurrent_transforms(st, u_t);
    GaussianDiag post = posterior_params(tr);
    Tensor z_t = reparameterize(post, noise.latent_eps(t, batch, cfg_.d_z));
    st.z_prev = z_t;
    GaussianDiag dist = decoder_params(z_t, u_t, tr);
    Tensor y_hat = noise.fixed_output_sample(t, batch, cfg_.d_y);
    if (!y_hat.defined()) {
      y_hat = reparameterize(dist, noise.output_eps(t, batch, cfg_.d_y));
    }
    st.y_prev = y_hat;
    for (int k = 0; k < batch; ++k) {
      for (int j = 0; j < cfg_.d_y; ++j) {
        out.at(k, t, j) = y_hat.value_at(k, j);
      }
    }
  }
  return out;
}

ForecastSamples Model::forecast(std::span<const double> u_future, int horizon,
                                int num_trajectories, uint64_t seed,
                                const EncoderState* warm) const {
  TrajectoryNoise noise(seed, "forecast", num_trajectories);
  return forecast(u_future, horizon, num_trajectories, noise, warm);
}

EncoderState Model::warmup_state(const TimeSeries& history,
                                 int num_trajectories, uint64_t seed) const {
  if (history.d_u != cfg_.d_u || history.d_y != cfg_.d_y) {
    throw DimensionError("warmup_state: history dimensions do not match model");
  }
  if (history.length < 1) throw DataError("warmup_state: empty history");
  NoGradGuard ng;
  TrajectoryNoise noise(seed, "warmup", num_trajectories);
  const int batch = num_trajectories;
  EncoderState st = EncoderState::cold_start(cfg_, batch);
  for (int64_t t = 0; t < history.length; ++t) {
    std::vector<double> u_row(static_cast<size_t>(batch) * cfg_.d_u);
    std::vector<double> y_row(static_cast<size_t>(batch) * cfg_.d_y);
    for (int b = 0; b < batch; ++b) {
      auto ur = history.u_row(t);
      auto yr = history.y_row(t);
      std::copy(ur.begin(), ur.end(), u_row.begin() + static_cast<size_t>(b) * cfg_.d_u);
      std::copy(yr.begin(), yr.end(), y_row.begin() + static_cast<size_t>(b) * cfg_.d_y);
    }
    Tensor u_t = Tensor::from({batch, cfg_.d_u}, std::move(u_row));
    Tensor y_t = Tensor::from({batch, cfg_.d_y}, std::move(y_row));

    Transforms tr = recurrent_transforms(st, u_t);
    GaussianDiag post = posterior_params(tr);
    Tensor z_t = reparameterize(
        post, noise.latent_eps(static_cast<int>(t), batch, cfg_.d_z));
    st.z_prev = z_t;
    if (cfg_.variant == Variant::kFull) {
      GaussianDiag dist = decoder_params(z_t, u_t, tr);
      Tensor y_hat = reparameterize(
          dist, noise.output_eps(static_cast<int>(t), batch, cfg_.d_y));
      st.y_prev = hybrid_output(y_t, y_hat);
    } else {
      st.y_prev = y_t;
    }
  }
  return st;
}

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["d_u"] = cfg.d_u;
  j["d_y"] = cfg.d_y;
  j["d_z"] = cfg.d_z;
  j["gru_hidden"] = cfg.gru_hidden;
  j["variant"] = variant_name(cfg.variant);
  j["num_samples"] = cfg.num_samples;
  j["logvar_min"] = cfg.logvar_min;
  j["logvar_max"] = cfg.logvar_max;
  j["mlp_hidden_layers"] = cfg.mlp_hidden_layers;
  j["mlp_min_width"] = cfg.mlp_min_width;
  j["grad_through_feedback"] = cfg.grad_through_feedback;
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model config: invalid JSON: ") + e.what());
  }
  ModelConfig cfg;
  cfg.d_u = j.at("d_u").get<int>();
  cfg.d_y = j.at("d_y").get<int>();
  cfg.d_z = j.at("d_z").get<int>();
  cfg.gru_hidden = j.at("gru_hidden").get<int>();
  cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  cfg.num_samples = j.at("num_samples").get<int>();
  cfg.logvar_min = j.at("logvar_min").get<double>();
  cfg.logvar_max = j.at("logvar_max").get<double>();
  cfg.mlp_hidden_layers = j.at("mlp_hidden_layers").get<int>();
  cfg.mlp_min_width = j.at("mlp_min_width").get<int>();
  cfg.grad_through_feedback = j.at("grad_through_feedback").get<bool>();
  return cfg;
}

void save_model(const Model& model, const std::filesystem::path& params_path,
                const std::filesystem::path& config_path) {
  save_params(model.params(), params_path);
  std::ofstream os(config_path, std::ios::trunc);
  if (!os) throw DataError("cannot open '" + config_path.string() + "'");
  os << model_config_to_json(model.config()) << '\n';
}

Model load_model(const std::filesystem::path& params_path,
                 const std::filesystem::path& config_path) {
  std::ifstream is(config_path);
  if (!is) throw DataError("cannot open '" + config_path.string() + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  Model model(model_config_from_json(buf.str()), /*init_seed=*/0);
  load_params(model.params(), params_path);
  return model;
}

}  // namespace vrnnaug
