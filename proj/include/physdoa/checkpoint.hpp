#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "physdoa/encoder.hpp"

namespace physdoa {

/// Trained model state. The binary archive is:
///   char[8]  magic "PDOACKPT"
///   u32      format version (1)
///   u64      header length n
///   char[n]  JSON header: encoder config, sigma_raw, step, epoch, rng state,
///            parameter table (name, rows, cols), training/data echo
///   f32[]    parameter values in table order, row-major, little-endian
struct Checkpoint {
  EncoderConfig encoder_config;
  Encoder encoder{EncoderConfig::desk()};
  double sigma_raw = 0.0;
  std::int64_t step = 0;
  int epoch = 0;
  std::string rng_state;
  nlohmann::json extra;  // train config, dataset manifest echo, metrics

  Checkpoint() = default;
  Checkpoint(const Encoder& enc, double sigma_raw_value);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace physdoa
