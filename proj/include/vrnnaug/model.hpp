#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vrnnaug/data.hpp"
#include "vrnnaug/nn.hpp"
#include "vrnnaug/rng.hpp"
#include "vrnnaug/tensor.hpp"

namespace vrnnaug {

/// Ablation variants of the recurrent input construction.
///  kFull: recurrent summaries of latents, inputs and hybrid outputs.
///  kV2:   recurrent summaries, but the output stream consumes the lagged
///         observation instead of the hybrid during training.
///  kV1:   latent/input streams bypassed (previous sample and current input
///         are fed through directly); only the lagged-output recurrence
///         remains. Prediction always feeds back the model's own samples,
///         regardless of variant.
enum class Variant { kFull, kV1, kV2 };

const char* variant_name(Variant v);
Variant variant_from_string(const std::string& name);

struct ModelConfig {
  int d_u = 1;
  int d_y = 1;
  int d_z = 10;
  int gru_hidden = 100;
  Variant variant = Variant::kFull;
  int num_samples = 100;  // Monte-Carlo trajectories per forecast
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  int mlp_hidden_layers = 3;
  int mlp_min_width = 50;
  /// Experiment flag: propagate gradients through the sampled output that
  /// feeds the next training step (off by default; the sample is treated as
  /// a constant input).
  bool grad_through_feedback = false;
};

/// Diagonal Gaussian held as (mean, log-variance) tensors of equal shape.
struct GaussianDiag {
  Tensor mean;
  Tensor log_var;
};

/// mean + exp(log_var / 2) * eps, elementwise; differentiable in both
/// distribution parameters.
Tensor reparameterize(const GaussianDiag& g, const Tensor& eps);

/// KL(N(mean, diag(var)) || N(0, I)) summed over every element:
/// 1/2 * sum(exp(log_var) + mean^2 - 1 - log_var). Always >= 0.
Tensor kl_unit_gaussian(const GaussianDiag& g);

/// sum_i [ -log(2*pi)/2 - log_var_i/2 - (y_i - mean_i)^2 / (2 var_i) ].
Tensor gaussian_log_likelihood(const Tensor& y, const GaussianDiag& g);

/// Lagged hybrid feedback: (y_prev + y_sample_prev) / 2. Gradient flow
/// through the sample argument is controlled by how the caller built it
/// (see ModelConfig::grad_through_feedback).
Tensor hybrid_output(const Tensor& y_prev, const Tensor& y_sample_prev);

/// Recurrent encoder state carried across time steps. All fields start at
/// zero (cold start). `y_prev` holds the hybrid output during training and
/// the previous output sample during prediction.
struct EncoderState {
  Tensor h_z, h_u, h_y;  // (B, hidden)
  Tensor z_prev;         // (B, d_z)
  Tensor y_prev;         // (B, d_y)
  int batch = 0;

  static EncoderState cold_start(const ModelConfig& cfg, int batch);
};

struct Transforms {
  Tensor z_bar;  // (B, d_z)
  Tensor u_bar;  // (B, d_u)
  Tensor y_bar;  // (B, d_y)
};

/// Supplier of the stochastic inputs consumed by the per-step loops. The
/// default implementation draws from a stream in call order; tests can
/// substitute fixed values or replay recorded samples.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Tensor latent_eps(int t, int rows, int cols) = 0;
  virtual Tensor output_eps(int t, int rows, int cols) = 0;
  /// When this returns a defined tensor the loops use it directly as the
  /// step's output sample instead of drawing one.
  virtual Tensor fixed_output_sample(int t, int rows, int cols) {
    (void)t;
    (void)rows;
    (void)cols;
    return {};
  }
};

class StreamNoise : public NoiseSource {
 public:
  explicit StreamNoise(RngStream stream) : stream_(stream) {}
  Tensor latent_eps(int t, int rows, int cols) override;
  Tensor output_eps(int t, int rows, int cols) override;

 private:
  Tensor draw(int rows, int cols);
  RngStream stream_;
};

/// All stochastic draws are zero; forecasts collapse onto decoder means.
class ZeroNoise : public NoiseSource {
 public:
  Tensor latent_eps(int t, int rows, int cols) override;
  Tensor output_eps(int t, int rows, int cols) override;
};

/// K x F x d_y Monte-Carlo output samples over a forecast horizon.
struct ForecastSamples {
  int num_samples = 0;  // K
  int horizon = 0;      // F
  int d_y = 0;
  std::vector<double> values;  // row-major K x F x d_y

  double at(int k, int t, int j) const {
    return values[(static_cast<size_t>(k) * horizon + t) * d_y + j];
  }
  double& at(int k, int t, int j) {
    return values[(static_cast<size_t>(k) * horizon + t) * d_y + j];
  }
};

/// Recurrent variational sequence model over an augmented input space:
/// GRU-backed summaries of the latent, input and output histories feed an
/// amortized Gaussian posterior, and a densely connected decoder maps the
/// latent sample plus all summaries to the output distribution.
class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);

  // Copying would alias parameter storage between two models.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Advances the three recurrences one step. Consumes state.z_prev and
  /// state.y_prev, updates the GRU hidden states in place and returns the
  /// summaries. Under kV1 the latent/input streams pass through unchanged.
  Transforms recurrent_transforms(EncoderState& state, const Tensor& u_t) const;

  /// Posterior over the latent at the current step from the concatenated
  /// summaries; log-variance clamped to the configured bounds.
  GaussianDiag posterior_params(const Transforms& tr) const;

  /// Output distribution from the latent sample, the current input and all
  /// summaries (dense encoder-decoder connection).
  GaussianDiag decoder_params(const Tensor& z_sample, const Tensor& u_t,
                              const Transforms& tr) const;

  /// Single-sample estimate of the per-chunk evidence lower bound.
  Tensor elbo_chunk(const ChunkView& chunk, NoiseSource& noise) const;

  /// Sum of per-chunk bounds over a mini-batch, evaluated with all chunks
  /// advanced in lockstep (row-batched); equals the sum of elbo_chunk values
  /// under matched draws.
  Tensor elbo_batch(std::span<const ChunkView> chunks, NoiseSource& noise) const;

  /// Mini-batch estimate of the full-data bound: (J / |B|) * sum of chunk
  /// bounds, where J = total_chunks.
  Tensor unbiased_elbo(std::span<const ChunkView> chunks, int64_t total_chunks,
                       NoiseSource& noise) const;

  /// Recursively samples K output trajectories over `horizon` steps given
  /// future inputs (row-major horizon x d_u). Starts cold unless `warm` is
  /// supplied. Each trajectory owns a seed-derived stream, so results do not
  /// depend on how trajectories are scheduled.
  ForecastSamples forecast(std::span<const double> u_future, int horizon,
                           int num_trajectories, uint64_t seed,
                           const EncoderState* warm = nullptr) const;

  /// As above with caller-supplied noise (test hook).
  ForecastSamples forecast(std::span<const double> u_future, int horizon,
                           int num_trajectories, NoiseSource& noise,
                           const EncoderState* warm = nullptr) const;

  /// Runs the training-phase recurrences over an observed history, once per
  /// trajectory, to produce a warm state for forecast().
  EncoderState warmup_state(const TimeSeries& history, int num_trajectories,
                            uint64_t seed) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
  GruParams gru_z_, gru_u_, gru_y_;
  MlpParams mlp_zbar_, mlp_ubar_, mlp_ybar_;
  MlpParams mlp_post_, mlp_dec_;
};

/// Plain scaling form of the mini-batch bound for precomputed chunk values.
double unbiased_elbo(std::span<const double> chunk_elbos, int64_t total_chunks);

void save_model(const Model& model, const std::filesystem::path& params_path,
                const std::filesystem::path& config_path);
Model load_model(const std::filesystem::path& params_path,
                 const std::filesystem::path& config_path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace vrnnaug
