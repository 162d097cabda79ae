#include "physdoa/geometry.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace physdoa {

MicArray::MicArray(std::vector<Vec3> positions, double speed_of_sound, double sample_rate)
    : positions_(std::move(positions)), c_(speed_of_sound), fs_(sample_rate) {
  if (positions_.size() < 2) throw InvalidArrayError("array needs at least 2 microphones");
  if (!(c_ > 0.0) || !std::isfinite(c_)) throw InvalidArrayError("speed of sound must be positive");
  if (!(fs_ > 0.0) || !std::isfinite(fs_)) throw InvalidArrayError("sample rate must be positive");
  for (const auto& p : positions_)
    if (!p.allFinite()) throw InvalidArrayError("microphone position is not finite");
  for (std::size_t a = 0; a < positions_.size(); ++a)
    for (std::size_t b = a + 1; b < positions_.size(); ++b)
      if ((positions_[a] - positions_[b]).norm() <= 0.0)
        throw InvalidArrayError("microphones " + std::to_string(a) + " and " + std::to_string(b) +
                                " coincide");
}

Vec3 MicArray::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : positions_) sum += p;
  return sum / static_cast<double>(positions_.size());
}

double MicArray::aperture() const {
  double best = 0.0;
  for (std::size_t a = 0; a < positions_.size(); ++a)
    for (std::size_t b = a + 1; b < positions_.size(); ++b)
      best = std::max(best, (positions_[a] - positions_[b]).norm());
  return best;
}

MicArray MicArray::translated(const Vec3& offset) const {
  return transformed(Eigen::Matrix3d::Identity(), offset);
}

MicArray MicArray::transformed(const Eigen::Matrix3d& rotation, const Vec3& offset) const {
  std::vector<Vec3> out;
  out.reserve(positions_.size());
  for (const auto& p : positions_) out.push_back(rotation * p + offset);
  return MicArray(std::move(out), c_, fs_);
}

std::vector<MicPair> enumerate_pairs(const MicArray& array) {
  const auto& v = array.positions();
  const Vec3 centroid = array.centroid();
  std::vector<MicPair> pairs;
  pairs.reserve(v.size() * (v.size() - 1) / 2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      pairs.push_back(MicPair{i, j, v[i] - v[j], v[i] - centroid, v[j] - centroid});
    }
  }
  return pairs;
}

double max_delay_samples(const MicArray& array) {
  return array.aperture() / array.speed_of_sound() * array.sample_rate();
}

MicArray corrupt_positions(const MicArray& array, double percent, std::uint64_t seed) {
  if (percent < 0.0 || !std::isfinite(percent)) throw ArgumentError("corruption percent must be >= 0");
  double max_abs = 0.0;
  for (const auto& p : array.positions()) max_abs = std::max(max_abs, p.cwiseAbs().maxCoeff());
  const double scale = percent * max_abs;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec3> out;
  for (const auto& p : array.positions()) {
    Vec3 n(normal(rng), normal(rng), normal(rng));
    out.push_back(p + scale * n);
  }
  return MicArray(std::move(out), array.speed_of_sound(), array.sample_rate());
}

MicArray jitter_positions(const MicArray& array, double stddev_m, std::uint64_t seed) {
  if (stddev_m < 0.0) throw ArgumentError("jitter stddev must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev_m);
  std::vector<Vec3> out;
  for (const auto& p : array.positions()) out.push_back(p + Vec3(normal(rng), normal(rng), normal(rng)));
  return MicArray(std::move(out), array.speed_of_sound(), array.sample_rate());
}

MicArray icosahedral_array(double radius, double c, double fs) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v;
  for (double s1 : {-1.0, 1.0})
    for (double s2 : {-1.0, 1.0}) {
      v.emplace_back(0.0, s1, s2 * phi);
      v.emplace_back(s1, s2 * phi, 0.0);
      v.emplace_back(s2 * phi, 0.0, s1);
    }
  for (auto& p : v) p = p.normalized() * radius;
  return MicArray(std::move(v), c, fs);
}

void to_json(nlohmann::json& j, const MicArray& a) {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& p : a.positions()) pos.push_back({p.x(), p.y(), p.z()});
  j = nlohmann::json{{"positions", pos},
                     {"speed_of_sound", a.speed_of_sound()},
                     {"sample_rate", a.sample_rate()}};
}

MicArray mic_array_from_json(const nlohmann::json& j) {
  std::vector<Vec3> pos;
  for (const auto& p : j.at("positions")) {
    if (p.size() != 3) throw InvalidArrayError("position entries must be [x, y, z]");
    pos.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  return MicArray(std::move(pos), j.value("speed_of_sound", kDefaultSpeedOfSound),
                  j.value("sample_rate", kDefaultSampleRate));
}

MicArray load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open geometry file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed geometry file " + path.string() + ": " + e.what());
  }
  return mic_array_from_json(j);
}

void save_geometry(const MicArray& array, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write geometry file " + path.string());
  out << nlohmann::json(array).dump(2) << "\n";
}

}  // namespace physdoa
