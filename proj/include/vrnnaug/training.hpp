#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vrnnaug/data.hpp"
#include "vrnnaug/model.hpp"
#include "vrnnaug/nn.hpp"

namespace vrnnaug {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a ParamStore. Moment buffers follow the store's
/// registration order; a non-finite gradient aborts with the parameter name.
class Adam {
 public:
  explicit Adam(const ParamStore& store, AdamConfig cfg = {});

  /// m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
  /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
  void step(ParamStore& store, double lr);
  int64_t step_count() const { return step_count_; }

  /// Moment buffers as named records (m.<param>, v.<param>) for resumable
  /// checkpoints.
  std::vector<std::pair<std::string, Tensor>> state_records(
      const ParamStore& store) const;
  void load_state_records(
      const ParamStore& store,
      const std::vector<std::pair<std::string, Tensor>>& records,
      int64_t step_count);

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int64_t step_count_ = 0;
};

struct LrSchedule {
  double initial = 1e-3;
  double floor = 1e-6;
  int check_every = 10;
  double factor = 0.5;
};

/// Validation-gated halving, evaluated after `completed_epoch` epochs with
/// one validation loss per entry. At every multiple of `check_every`: if the
/// minimum loss inside the trailing window did not improve on the best seen
/// before it, the rate is multiplied by `factor`. Returns the rate for the
/// next epoch.
double lr_schedule_update(int completed_epoch,
                          std::span<const double> valid_history,
                          double current_lr, const LrSchedule& schedule = {});

struct EpochRecord {
  int epoch = 0;                // 1-based, continues across resumes
  double train_neg_elbo = 0.0;  // mean over batches of the scaled bound
  double valid_neg_elbo = 0.0;  // exact negative bound over validation chunks
  double lr = 0.0;
  double wall_seconds = 0.0;
};

enum class StopReason { kMaxEpochs, kLrFloor };
const char* stop_reason_name(StopReason r);

struct TrainReport {
  std::vector<EpochRecord> epochs;  // this run's epochs only
  int best_epoch = 0;               // earliest epoch attaining the minimum
  double best_valid = 0.0;
  StopReason reason = StopReason::kMaxEpochs;
};

/// State carried over when continuing an interrupted run.
struct ResumeState {
  std::vector<double> valid_history;  // one entry per completed epoch
  double best_valid = 0.0;
  int best_epoch = 0;
  std::vector<std::pair<std::string, Tensor>> adam_records;
  int64_t adam_steps = 0;
};

struct TrainOptions {
  int max_epochs = 100;  // total across resumes
  int batch_size = 128;
  LrSchedule schedule;
  AdamConfig adam;
  uint64_t seed = 0;
  double grad_clip_norm = 0.0;  // 0 disables clipping
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  /// Holds the best-validation parameters when best_in_run, otherwise the
  /// final-epoch parameters (the caller's earlier checkpoint still stands).
  Model model;
  TrainReport report;
  bool best_in_run = true;
  std::vector<std::vector<double>> last_params;  // final-epoch values
  std::vector<std::pair<std::string, Tensor>> adam_records;
  int64_t adam_steps = 0;
};

/// Mini-batch optimization of the negative mini-batch bound. Each epoch
/// reshuffles the chunk order from the run seed, every batch takes one Adam
/// step with the total-count scaling applied at the actual batch size, and
/// the validation bound is evaluated with a noise stream that is identical
/// across epochs so model selection compares like with like.
TrainResult train(Model model, const ChunkSet& train_chunks,
                  const ChunkSet& valid_chunks, const TrainOptions& options,
                  const ResumeState* resume = nullptr);

/// Global gradient norm across a store (diagnostics and optional clipping).
double grad_norm(const ParamStore& store);

}  // namespace vrnnaug
