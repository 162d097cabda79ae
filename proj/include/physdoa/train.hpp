#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "physdoa/checkpoint.hpp"
#include "physdoa/config.hpp"
#include "physdoa/dataset.hpp"
#include "physdoa/objective.hpp"

namespace physdoa {

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  LossBreakdown loss;
  double sigma = 0.0;
  double mean_kappa = 0.0;
  double lr = 0.0;
};

struct EpochSummary {
  int epoch = 0;
  double lr = 0.0;
  double beta = 0.0;
  double physics = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double sigma = 0.0;
  double mean_kappa = 0.0;
  double val_rms_deg = -1.0;  // negative when there is no validation set
  double seconds = 0.0;
};

/// Owns the encoder, the global decoder sigma and the optimizer state.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::vector<PreparedClip> train, std::vector<PreparedClip> val, LagGrid grid);

  /// One optimizer step over the given clips. Throws TrainingError on a
  /// non-finite loss after writing a diagnostic dump when a dump path is set.
  StepLog step(const std::vector<std::size_t>& batch, int epoch);
  EpochSummary run_epoch(int epoch);
  /// RMS angular error of mu on the validation clips (negative if none).
  double validate() const;

  const Encoder& encoder() const { return encoder_; }
  Encoder& encoder() { return encoder_; }
  double sigma() const;
  double sigma_raw() const { return static_cast<double>(sigma_param_.value(0, 0)); }
  std::int64_t steps() const { return adam_.steps(); }
  std::string rng_state() const;
  Checkpoint checkpoint(int epoch) const;

  void set_step_log(std::function<void(const StepLog&)> f) { on_step_ = std::move(f); }
  void set_diagnostic_path(std::filesystem::path p) { diag_path_ = std::move(p); }

 private:
  TrainConfig cfg_;
  std::vector<PreparedClip> train_, val_;
  std::vector<PhysicsDecoder> decoders_;
  LagGrid grid_;
  Encoder encoder_;
  nn::Param sigma_param_;
  nn::Adam adam_;
  std::mt19937_64 rng_;
  std::function<void(const StepLog&)> on_step_;
  std::filesystem::path diag_path_;
};

struct TrainResult {
  std::vector<EpochSummary> history;
  int best_epoch = -1;
  double best_val_rms_deg = -1.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
};

/// Root mean square of the encoder inputs over a set of clips.
double feature_rms(const std::vector<PreparedClip>& clips);

/// Full training run over a simulated dataset. Writes to out_dir:
/// last.ckpt (every epoch), best.ckpt (best validation RMS), loss.jsonl
/// (one JSON object per step), epochs.jsonl and train_summary.json.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                  const std::function<void(const EpochSummary&)>& on_epoch = {});

}  // namespace physdoa
