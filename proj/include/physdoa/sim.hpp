#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "physdoa/features.hpp"
#include "physdoa/geometry.hpp"

namespace physdoa {

struct Range {
  double min = 0.0;
  double max = 0.0;
  bool valid() const { return min <= max; }
};

enum class NoiseMode { AuralizedAwgn, Directional };
std::string to_string(NoiseMode m);
NoiseMode noise_mode_from_string(const std::string& s);

/// Pink noise shaped by a syllable-rate amplitude modulation and random
/// on/off bursts. Stands in for speech at desk scale.
struct ExcitationConfig {
  std::string wav_path;      // if set, the first channel of this file is used
  Range burst_s{0.8, 2.5};   // active stretch length
  Range gap_s{0.2, 0.8};     // silent stretch length
  double modulation_hz = 4.0;
};

struct SceneConfig {
  MicArray array = icosahedral_array();
  Range room_x{3.0, 8.0};
  Range room_y{3.0, 8.0};
  Range room_z{2.5, 4.0};
  Range rt60{0.2, 1.0};
  Range snr_db{5.0, 30.0};
  int oscillations_min = 0;
  int oscillations_max = 2;
  Range oscillation_amp{0.0, 1.0};
  double duration_s = 20.0;
  double wall_margin = 0.5;
  double min_source_distance = 1.0;
  double array_offset = 0.5;      // horizontal jitter of the array around the room centre
  Range array_height{1.0, 1.8};
  double v_max = 10.0;            // m/s, trajectory speed bound
  double geometry_jitter_m = 0.0; // per-coordinate std of per-scene microphone resampling
  NoiseMode noise_mode = NoiseMode::AuralizedAwgn;
  double segment_s = 0.064;
  int max_reflection_order = 10;
  double activity_threshold_db = -40.0;
  StftConfig frames;
  ExcitationConfig excitation;

  void validate() const;
};

/// Straight segment start -> end plus a per-axis sinusoid with an integer
/// number of oscillations over the duration, clamped to the room interior.
struct Trajectory {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  std::array<int, 3> oscillations{0, 0, 0};
  Vec3 amplitude = Vec3::Zero();
  double duration = 1.0;
  Vec3 room = Vec3::Ones();
  double margin = 0.0;

  Vec3 position(double t) const;
  std::vector<Vec3> sample(const std::vector<double>& times) const;
  /// Maximum speed (m/s) estimated on a dense time grid.
  double max_speed(std::size_t steps = 2000) const;
};

struct AcousticScene {
  std::uint64_t seed = 0;
  Vec3 room = Vec3::Ones();
  double rt60 = 0.5;
  double snr_db = 20.0;
  Trajectory trajectory;
  NoiseMode noise_mode = NoiseMode::AuralizedAwgn;
  Vec3 noise_position = Vec3::Zero();
  MicArray array = icosahedral_array();  // array-local geometry actually used
  Vec3 array_center = Vec3::Zero();      // placement of the local origin in the room
  std::vector<double> excitation;
  double sample_rate = kDefaultSampleRate;
  double segment_s = 0.064;
  int max_reflection_order = 10;
  double activity_threshold_db = -40.0;
  StftConfig frames;

  /// Microphone positions in room coordinates.
  std::vector<Vec3> mic_positions() const;
  Vec3 array_centroid() const;
};

struct MicSignals {
  Eigen::MatrixXd samples;           // M x L
  std::vector<double> mask;          // per STFT frame, {0, 1}
  std::vector<Vec3> doa;             // per STFT frame, unit, centroid-relative
  std::vector<double> frame_times;   // seconds
  double sample_rate = kDefaultSampleRate;
};

/// Pink-noise excitation with bursts; deterministic in seed.
std::vector<double> generate_excitation(const ExcitationConfig& cfg, std::size_t length, double fs,
                                        std::uint64_t seed);

AcousticScene sample_scene(const SceneConfig& config, std::uint64_t seed);

/// Sabine-derived uniform wall reflection coefficient.
double reflection_coefficient(const Vec3& room, double rt60);

/// Image-source room impulse responses from one static source to each
/// receiver. Delays use linear interpolation between neighbouring taps.
struct IsmOptions {
  int max_order = 10;
  double max_time_s = 1.0;  // images arriving later are dropped
};
std::vector<std::vector<double>> ism_rirs(const Vec3& room, double beta, const Vec3& source,
                                          const std::vector<Vec3>& receivers, double c, double fs,
                                          const IsmOptions& opt);

/// Reflection order needed to cover the -60 dB tail, capped.
int reflection_order_for(const Vec3& room, double rt60, double c, int cap);

/// Per-frame activity of a waveform: frame energy above threshold relative
/// to the peak frame energy.
std::vector<double> activity_mask(const std::vector<double>& x, const StftConfig& frames, double threshold_db);

MicSignals render_ism(const AcousticScene& scene);
MicSignals add_noise(const MicSignals& clean, const AcousticScene& scene);
/// render_ism followed by add_noise.
MicSignals simulate(const AcousticScene& scene);

nlohmann::json scene_to_json(const AcousticScene& scene, const MicSignals& signals);

}  // namespace physdoa
