#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace physdoa {

/// Multichannel audio, one row per channel.
struct Audio {
  Eigen::MatrixXd samples;  // channels x length
  double sample_rate = 16000.0;
};

enum class WavFormat { Pcm16, Float32 };

/// Reads 16/24/32-bit PCM or 32-bit float WAV (RIFF, little-endian).
Audio read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Audio& audio,
               WavFormat format = WavFormat::Float32);

}  // namespace physdoa
