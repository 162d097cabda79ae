#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "physdoa/config.hpp"
#include "physdoa/encoder.hpp"
#include "physdoa/features.hpp"
#include "physdoa/sim.hpp"

namespace physdoa {

namespace fs = std::filesystem;

/// Dataset directory layout:
///   manifest.json          splits, feature settings, scene config echo
///   geometry.json          nominal array
///   <scene id>/audio.wav   M-channel float WAV
///   <scene id>/scene.json  sidecar: geometry used, trajectory, DOA, mask, rt60, snr, seed
///   <scene id>/features.gcc GCC-PHAT cache
struct Manifest {
  fs::path root;
  MicArray geometry = icosahedral_array();
  Experiment experiment = Experiment::Exp1;
  int lags = 64;
  double tau_max = 0.0;  // lag grid half-width shared by every scene
  StftConfig frames;
  nlohmann::json scene_config;

  LagGrid lag_grid() const { return make_lag_grid(tau_max, static_cast<std::size_t>(lags), frames.window); }
  std::map<std::string, std::vector<std::string>> splits;

  const std::vector<std::string>& split(const std::string& name) const;
};

Manifest load_manifest(const fs::path& dir);
void save_manifest(const Manifest& m);

struct SceneRecord {
  std::string id;
  std::uint64_t seed = 0;
  double rt60 = 0.0;
  double snr_db = 0.0;
  MicArray array = icosahedral_array();  // geometry the scene was rendered with
  std::vector<double> mask;
  std::vector<Vec3> doa;
  std::vector<double> frame_times;
};

struct SceneData {
  SceneRecord record;
  GccFeatures features;
};

SceneRecord load_scene_record(const fs::path& dir);
SceneData load_scene(const Manifest& m, const std::string& id);

/// Lag grid half-width for a dataset: the nominal array's maximum delay,
/// widened by three jitter standard deviations per endpoint when the
/// geometry is resampled per scene.
double dataset_tau_max(const SceneConfig& cfg);

GccFeatures scene_features(const MicSignals& signals, const MicArray& array, const LagGrid& grid,
                           const StftConfig& frames);

/// Renders and writes one scene directory.
void write_scene(const fs::path& dir, const AcousticScene& scene, const MicSignals& signals,
                 const GccFeatures& features);

/// Simulates a full dataset into out_dir. Progress is reported per scene.
Manifest simulate_dataset(const DatasetConfig& cfg, const fs::path& out_dir,
                          const std::function<void(std::size_t, std::size_t)>& progress = {});

/// Everything the encoder and objective need for one clip, on the latent
/// time axis.
struct PreparedClip {
  std::string id;
  Tensor3<float> g;                 // raw GCC-PHAT, (P, T, G)
  Tensor3<float> x;                 // encoder input, normalized g
  MicArray array = icosahedral_array();
  std::vector<PairMetadata> metadata;
  DelayDistribution p_in;            // (P, T', G)
  std::vector<double> mask;          // latent, interpolated weights in [0, 1]
  std::vector<Vec3> truth;           // latent, interpolated and renormalized
  double rt60 = 0.0;
  double snr_db = 0.0;
};

std::vector<PairMetadata> pair_metadata(const MicArray& array);
PreparedClip prepare_clip(const SceneData& s, const EncoderConfig& enc, double lambda, double eps = 1e-5);

/// Latent frames counted as active by the metrics: interpolated mask >= 0.5.
std::vector<double> binary_mask(const std::vector<double>& mask);

}  // namespace physdoa
