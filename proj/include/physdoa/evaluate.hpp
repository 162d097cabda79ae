#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "physdoa/checkpoint.hpp"
#include "physdoa/dataset.hpp"
#include "physdoa/srp.hpp"

namespace physdoa {

/// Angle between two directions in degrees (inputs need not be unit).
double angular_error_deg(const Vec3& a, const Vec3& b);

/// sqrt(mean over active frames of theta^2), degrees. Throws MetricError
/// when no frame is active.
double rms_angular_error(const std::vector<Vec3>& est, const std::vector<Vec3>& truth,
                         const std::vector<double>& mask);

struct SceneEval {
  std::string id;
  std::vector<Vec3> estimate;
  std::vector<Vec3> truth;
  std::vector<double> kappa;   // empty for SRP
  std::vector<double> mask;    // binary, latent frames
  std::vector<double> error_deg;
};

struct EvalReport {
  std::string method = "model";
  double rms_deg = 0.0;               // mean over runs
  std::vector<double> run_rms_deg;
  double rms_std_deg = 0.0;
  double corrupt_percent = 0.0;
  double baseline_rms_deg = 0.0;      // uncorrupted
  double relative_increase_pct = 0.0;
  double mean_kappa = 0.0;
  double kappa_std = 0.0;
  std::size_t active_frames = 0;
  std::vector<SceneEval> scenes;      // first run
  double wall_seconds = 0.0;
  double audio_seconds = 0.0;
  double rtf = 0.0;
  std::size_t params = 0;
  nlohmann::json config;
};

void to_json(nlohmann::json& j, const EvalReport& r);

/// Runs the encoder only. Metadata corruption perturbs the pair positions
/// fed to the encoder; features are untouched. With corruption, `runs`
/// seeded runs (seeds 0..runs-1) are averaged; the draw for a given run and
/// scene does not depend on the strength. corrupt_percent is a fraction of
/// the largest absolute coordinate (0.1 = 10%).
EvalReport evaluate_clips(const Encoder& encoder, const std::vector<PreparedClip>& clips, double corrupt_percent = 0.0,
                          int runs = 1);

EvalReport evaluate(const Checkpoint& ckpt, const Manifest& data, const EvalConfig& cfg);

/// Per-scene encoder outputs for one (possibly corrupted) metadata draw.
SceneEval encode_clip(const Encoder& encoder, const PreparedClip& clip, const std::vector<PairMetadata>& metadata);

/// SRP-PHAT on the GCC features interpolated to the latent time axis.
EvalReport srp_evaluate_clips(const std::vector<PreparedClip>& clips, const LagGrid& lags, const SrpGrid& grid,
                              SrpInterp interp = SrpInterp::Linear);
EvalReport srp_evaluate(const Manifest& data, const std::string& split, const EncoderConfig& enc = EncoderConfig{},
                        SrpInterp interp = SrpInterp::Linear);

/// Loads and prepares every clip of a split.
std::vector<PreparedClip> load_split(const Manifest& data, const std::string& split, const EncoderConfig& enc,
                                     double lambda, double eps = 1e-5, int limit = 0);

enum class KappaMode { Snr, Rt60 };
KappaMode kappa_mode_from_string(const std::string& s);

struct KappaPoint {
  double condition = 0.0;
  double mean_kappa = 0.0;
  double rms_deg = 0.0;
  std::size_t frames = 0;
};
struct KappaCurve {
  KappaMode mode = KappaMode::Snr;
  double fixed = 0.0;
  std::vector<KappaPoint> points;
};
void to_json(nlohmann::json& j, const KappaCurve& c);

/// Renders `scenes` matched scenes per sweep point (same seeds, only the
/// swept condition changes) and reports mean kappa over active frames.
KappaCurve kappa_analysis(const Encoder& encoder, const SceneConfig& base, const LagGrid& grid, KappaMode mode,
                          double fixed, const std::vector<double>& values, int scenes, std::uint64_t seed = 7,
                          int threads = 0);

struct ComplexityReport {
  std::size_t params = 0;
  std::uint64_t macs_per_clip = 0;
  std::size_t clip_frames = 0;
  double macs_per_frame = 0.0;
  double probe_seconds = 0.0;
  double wall_seconds = 0.0;
  double rtf = 0.0;
};
void to_json(nlohmann::json& j, const ComplexityReport& c);

/// Times feature extraction plus encoding over a synthetic probe clip of
/// probe_seconds, processed in chunks of chunk_frames. RTF is the mean wall
/// time per hop divided by the hop duration.
ComplexityReport complexity_report(const Encoder& encoder, const MicArray& array, const LagGrid& grid,
                                   const StftConfig& frames, double probe_seconds = 60.0, int chunk_frames = 100,
                                   std::uint64_t seed = 0);

}  // namespace physdoa
