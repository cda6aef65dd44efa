#include "vrnnaug/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace vrnnaug {

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kMaxEpochs: return "max-epochs";
    case StopReason::kLrFloor: return "lr-floor";
  }
  return "?";
}

Adam::Adam(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& [name, t] : store.entries()) {
    m_.emplace_back(static_cast<size_t>(t.size()), 0.0);
    v_.emplace_back(static_cast<size_t>(t.size()), 0.0);
  }
}

void Adam::step(ParamStore& store, double lr) {
  auto& entries = store.mutable_entries();
  if (entries.size() != m_.size()) {
    throw Error("adam: parameter count changed since construction");
  }
  ++step_count_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double b1_corr = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double b2_corr = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (size_t p = 0; p < entries.size(); ++p) {
    auto& [name, t] = entries[p];
    if (!t.has_grad()) {
      throw NumericError("adam: parameter '" + name + "' has no gradient");
    }
    auto g = t.grad();
    auto theta = t.mutable_values();
    auto& m = m_[p];
    auto& v = v_[p];
    for (size_t i = 0; i < m.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) {
        throw NumericError("adam: non-finite gradient for parameter '" + name +
                           "'");
      }
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double m_hat = m[i] / b1_corr;
      const double v_hat = v[i] / b2_corr;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

std::vector<std::pair<std::string, Tensor>> Adam::state_records(
    const ParamStore& store) const {
  std::vector<std::pair<std::string, Tensor>> records;
  records.reserve(2 * m_.size());
  const auto& entries = store.entries();
  for (size_t p = 0; p < entries.size(); ++p) {
    records.emplace_back("m." + entries[p].first,
                         Tensor::from(entries[p].second.shape(), m_[p]));
    records.emplace_back("v." + entries[p].first,
                         Tensor::from(entries[p].second.shape(), v_[p]));
  }
  return records;
}

void Adam::load_state_records(
    const ParamStore& store,
    const std::vector<std::pair<std::string, Tensor>>& records,
    int64_t step_count) {
  const auto& entries = store.entries();
  if (records.size() != 2 * entries.size()) {
    throw DataError("adam state has " + std::to_string(records.size()) +
                    " records, expected " + std::to_string(2 * entries.size()));
  }
  for (size_t p = 0; p < entries.size(); ++p) {
    const auto& [m_name, m_t] = records[2 * p];
    const auto& [v_name, v_t] = records[2 * p + 1];
    if (m_name != "m." + entries[p].first || v_name != "v." + entries[p].first) {
      throw DataError("adam state record order does not match parameters");
    }
    m_[p].assign(m_t.values().begin(), m_t.values().end());
    v_[p].assign(v_t.values().begin(), v_t.values().end());
  }
  step_count_ = step_count;
}

double lr_schedule_update(int completed_epoch,
                          std::span<const double> valid_history,
                          double current_lr, const LrSchedule& schedule) {
  if (completed_epoch < schedule.check_every ||
      completed_epoch % schedule.check_every != 0) {
    return current_lr;
  }
  if (static_cast<int>(valid_history.size()) < completed_epoch) {
    throw ArgumentError("lr_schedule_update: history shorter than epoch count");
  }
  const int window_begin = completed_epoch - schedule.check_every;
  double best_before = std::numeric_limits<double>::infinity();
  for (int e = 0; e < window_begin; ++e) {
    best_before = std::min(best_before, valid_history[static_cast<size_t>(e)]);
  }
  double best_window = std::numeric_limits<double>::infinity();
  for (int e = window_begin; e < completed_epoch; ++e) {
    best_window = std::min(best_window, valid_history[static_cast<size_t>(e)]);
  }
  // No improvement inside the trailing window: halve.
  if (best_window >= best_before) return current_lr * schedule.factor;
  return current_lr;
}

double grad_norm(const ParamStore& store) {
  double ss = 0.0;
  for (const auto& [name, t] : store.entries()) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) ss += g * g;
  }
  return std::sqrt(ss);
}

namespace {

void scale_grads(ParamStore& store, double factor) {
  for (auto& [name, t] : store.mutable_entries()) {
    if (!t.has_grad()) continue;
    for (auto& g : t.mutable_grad()) g *= factor;
  }
}

std::vector<int64_t> shuffled_indices(int64_t count, RngStream rng) {
  std::vector<int64_t> idx(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = i;
  for (int64_t i = count - 1; i > 0; --i) {
    const int64_t j = static_cast<int64_t>(rng.next_u64() %
                                           static_cast<uint64_t>(i + 1));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  return idx;
}

double validation_neg_elbo(const Model& model, const ChunkSet& chunks,
                           int batch_size, uint64_t seed) {
  NoGradGuard ng;
  StreamNoise noise{RngStream(seed).substream("valid-noise")};
  double total = 0.0;
  std::vector<ChunkView> views;
  for (int64_t b = 0; b < chunks.count(); b += batch_size) {
    views.clear();
    const int64_t end = std::min<int64_t>(b + batch_size, chunks.count());
    for (int64_t j = b; j < end; ++j) views.push_back(chunks.view(j));
    total += model.elbo_batch(views, noise).value();
  }
  return -total;
}

std::vector<std::vector<double>> snapshot_values(const ParamStore& store) {
  std::vector<std::vector<double>> snap;
  snap.reserve(store.entries().size());
  for (const auto& [name, t] : store.entries()) {
    snap.emplace_back(t.values().begin(), t.values().end());
  }
  return snap;
}

void restore_values(ParamStore& store, const std::vector<std::vector<double>>& snap) {
  auto& entries = store.mutable_entries();
  for (size_t p = 0; p < entries.size(); ++p) {
    auto dst = entries[p].second.mutable_values();
    std::copy(snap[p].begin(), snap[p].end(), dst.begin());
  }
}

}  // namespace

TrainResult train(Model model, const ChunkSet& train_chunks,
                  const ChunkSet& valid_chunks, const TrainOptions& options,
                  const ResumeState* resume) {
  if (train_chunks.count() < 1 || valid_chunks.count() < 1) {
    throw DataError("train: chunk sets must be nonempty");
  }
  if (options.batch_size < 1) throw ArgumentError("train: batch size must be >= 1");

  Adam adam(model.params(), options.adam);
  std::vector<double> valid_history;
  int completed = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  if (resume != nullptr) {
    valid_history = resume->valid_history;
    completed = static_cast<int>(valid_history.size());
    best_valid = resume->best_valid;
    best_epoch = resume->best_epoch;
    adam.load_state_records(model.params(), resume->adam_records,
                            resume->adam_steps);
  }
  // The halving trajectory is a pure function of the validation history, so
  // resuming replays it instead of persisting the rate.
  double lr = options.schedule.initial;
  for (int e = options.schedule.check_every; e <= completed;
       e += options.schedule.check_every) {
    lr = lr_schedule_update(e, valid_history, lr, options.schedule);
  }

  const RngStream root(options.seed);
  const int64_t total_chunks = train_chunks.count();

  TrainResult result{std::move(model), {}, true, {}, {}, 0};
  result.report.best_valid = best_valid;
  result.report.best_epoch = best_epoch;
  result.report.reason = StopReason::kMaxEpochs;

  std::vector<std::vector<double>> best_snapshot;

  for (int epoch = completed + 1; epoch <= options.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = shuffled_indices(
        total_chunks, root.substream("shuffle").substream(
                          static_cast<uint64_t>(epoch)));
    RngStream epoch_noise = root.substream("train-noise").substream(
        static_cast<uint64_t>(epoch));

    double loss_sum = 0.0;
    int64_t batches = 0;
    std::vector<ChunkView> views;
    for (int64_t b = 0; b < total_chunks; b += options.batch_size) {
      views.clear();
      const int64_t end = std::min<int64_t>(b + options.batch_size, total_chunks);
      for (int64_t j = b; j < end; ++j) {
        views.push_back(train_chunks.view(order[static_cast<size_t>(j)]));
      }
      try {
        result.model.params().zero_grad();
        StreamNoise noise{epoch_noise.substream(static_cast<uint64_t>(batches))};
        Tensor loss = scale(
            result.model.unbiased_elbo(views, total_chunks, noise), -1.0);
        backward(loss);
        if (options.grad_clip_norm > 0.0) {
          const double norm = grad_norm(result.model.params());
          if (norm > options.grad_clip_norm) {
            scale_grads(result.model.params(), options.grad_clip_norm / norm);
          }
        }
        adam.step(result.model.params(), lr);
        loss_sum += loss.value();
        ++batches;
      } catch (const NumericError& e) {
        throw NumericError("train: epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1) + ": " + e.what());
      }
    }

    double valid_loss;
    try {
      valid_loss = validation_neg_elbo(result.model, valid_chunks,
                                       options.batch_size, options.seed);
    } catch (const NumericError& e) {
      throw NumericError("train: epoch " + std::to_string(epoch) +
                         ", validation: " + e.what());
    }
    valid_history.push_back(valid_loss);

    if (valid_loss < best_valid) {
      best_valid = valid_loss;
      best_epoch = epoch;
      best_snapshot = snapshot_values(result.model.params());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_neg_elbo = loss_sum / static_cast<double>(std::max<int64_t>(batches, 1));
    rec.valid_neg_elbo = valid_loss;
    rec.lr = lr;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    lr = lr_schedule_update(epoch, valid_history, lr, options.schedule);
    if (lr < options.schedule.floor) {
      result.report.reason = StopReason::kLrFloor;
      break;
    }
  }

  result.report.best_valid = best_valid;
  result.report.best_epoch = best_epoch;
  result.last_params = snapshot_values(result.model.params());
  result.adam_records = adam.state_records(result.model.params());
  result.adam_steps = adam.step_count();
  if (!best_snapshot.empty()) {
    restore_values(result.model.params(), best_snapshot);
    result.best_in_run = true;
  } else {
    result.best_in_run = false;  // an earlier segment's checkpoint is best
  }
  return result;
}

}  // namespace vrnnaug
