#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "physdoa/encoder.hpp"
#include "physdoa/sim.hpp"

namespace physdoa {

/// Sectioned key/value file. Keys are addressed as "section.key". Every key
/// must be consumed by a loader; leftovers are reported as unknown.
class Ini {
 public:
  Ini() = default;
  static Ini load(const std::filesystem::path& path);
  static Ini parse(const std::string& text);

  /// Override or add a value ("section.key").
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string str(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  Range range(const std::string& key, Range fallback) const;

  /// Throws ConfigError naming any key under the given sections that no
  /// loader read.
  void check_consumed(const std::vector<std::string>& sections) const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

/// Experiment protocol: exp1 auralized AWGN, exp2 directional noise,
/// exp3 auralized AWGN with per-scene microphone jitter.
enum class Experiment { Exp1, Exp2, Exp3 };
std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

struct DatasetConfig {
  SceneConfig scene;
  int lags = 64;
  int train = 200;
  int val = 20;
  int test = 40;
  std::uint64_t seed = 1;
  Experiment experiment = Experiment::Exp1;
  int threads = 0;  // 0: hardware concurrency
};

/// Sections [scene], [excitation], [features], [data].
DatasetConfig dataset_config_from_ini(const Ini& ini);

struct TrainConfig {
  int epochs = 300;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  int batch_size = 4;
  double lambda = 8.0;
  double feature_eps = 1e-5;
  std::uint64_t seed = 0;
  Experiment experiment = Experiment::Exp1;
  EncoderConfig encoder = EncoderConfig::desk();
  std::string preset = "desk";
  bool mask_kl = false;
  bool freeze_sigma = false;
  double sigma_init_bins = 1.5;
  double warmup_fraction = 0.05;
  int max_train_scenes = 0;  // 0: all
  int max_val_scenes = 0;
  bool keep_epoch_checkpoints = false;
  // Replace encoder.input_scale by 1 / rms of the training features.
  bool fit_input_scale = true;

  void validate() const;
  /// lr(e) = lr_start * (lr_end / lr_start)^(e / (E - 1)).
  double learning_rate(int epoch) const;
};

/// Sections [train], [encoder].
TrainConfig train_config_from_ini(const Ini& ini);

struct EvalConfig {
  double corrupt_percent = 0.0;
  int runs = 10;
  std::string split = "test";
};
EvalConfig eval_config_from_ini(const Ini& ini);

void to_json(nlohmann::json& j, const SceneConfig& c);
SceneConfig scene_config_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const TrainConfig& c);

}  // namespace physdoa
