#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "physdoa/common.hpp"

namespace physdoa {

/// Microphone positions in array-local Cartesian coordinates (meters),
/// together with the propagation and sampling constants every delay
/// computation depends on.
class MicArray {
 public:
  MicArray(std::vector<Vec3> positions, double speed_of_sound = kDefaultSpeedOfSound,
           double sample_rate = kDefaultSampleRate);

  const std::vector<Vec3>& positions() const { return positions_; }
  std::size_t size() const { return positions_.size(); }
  double speed_of_sound() const { return c_; }
  double sample_rate() const { return fs_; }
  Vec3 centroid() const;
  /// Largest pairwise distance in meters.
  double aperture() const;

  MicArray translated(const Vec3& offset) const;
  MicArray transformed(const Eigen::Matrix3d& rotation, const Vec3& offset) const;

  bool operator==(const MicArray&) const = default;

 private:
  std::vector<Vec3> positions_;
  double c_;
  double fs_;
};

struct MicPair {
  std::size_t i = 0;
  std::size_t j = 0;
  Vec3 baseline;       // v_i - v_j
  Vec3 rel_i;          // centroid-relative endpoints
  Vec3 rel_j;

  /// Encoder metadata: (rel_i, rel_j) flattened.
  std::array<double, 6> metadata() const {
    return {rel_i.x(), rel_i.y(), rel_i.z(), rel_j.x(), rel_j.y(), rel_j.z()};
  }
};

/// All M(M-1)/2 pairs, lexicographic in (i, j).
std::vector<MicPair> enumerate_pairs(const MicArray& array);

/// F_s * max ||v_i - v_j|| / c.
double max_delay_samples(const MicArray& array);

/// Adds i.i.d. unit Gaussian noise to every coordinate, scaled by
/// percent * max |coordinate|. Deterministic in seed; the noise draw does
/// not depend on percent, so sweeps over percent share the same direction.
MicArray corrupt_positions(const MicArray& array, double percent, std::uint64_t seed);

/// Resamples every microphone independently around its nominal position
/// with the given per-coordinate standard deviation (meters).
MicArray jitter_positions(const MicArray& array, double stddev_m, std::uint64_t seed);

/// Pseudo-spherical 12-microphone layout (icosahedron vertices) with the
/// given radius; diametrically opposite microphones are 2*radius apart.
MicArray icosahedral_array(double radius = 0.05, double c = kDefaultSpeedOfSound,
                           double fs = kDefaultSampleRate);

void to_json(nlohmann::json& j, const MicArray& a);
MicArray mic_array_from_json(const nlohmann::json& j);

MicArray load_geometry(const std::filesystem::path& path);
void save_geometry(const MicArray& array, const std::filesystem::path& path);

}  // namespace physdoa
