#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "physdoa/nn.hpp"
#include "physdoa/tensor.hpp"
#include "physdoa/vmf.hpp"

namespace physdoa {

struct EncoderConfig {
  int lags = 64;
  int channels = 128;
  int hidden = 128;       // GRU width
  int gru_layers = 2;
  int mlp_width = 128;    // pairwise MLP
  int head_width = 128;
  std::array<int, 3> pool_time{5, 1, 1};
  std::array<int, 3> pool_lag{2, 2, 2};
  double metadata_scale = 20.0;  // per meter, applied before the metadata projections
  double input_scale = 1.0;      // gain on the GCC-PHAT input

  static EncoderConfig paper();
  /// Compact preset for single-core CPU training.
  static EncoderConfig desk();
  static EncoderConfig preset(const std::string& name);

  int time_factor() const { return pool_time[0] * pool_time[1] * pool_time[2]; }
  int lag_factor() const { return pool_lag[0] * pool_lag[1] * pool_lag[2]; }
  /// Latent frames for T input frames (T padded to a multiple of the time factor).
  std::size_t latent_frames(std::size_t input_frames) const;
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

using PairMetadata = std::array<double, 6>;
using PosteriorSequence = std::vector<VmfParams>;

inline constexpr double kKappaMin = 1e-6;

/// Shared-weight pairwise encoder: conv blocks with metadata bias, GRU over
/// latent time, pairwise MLP, pair sum, head emitting (mu, kappa).
class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg, std::uint64_t seed = 0);

  struct Cache;
  /// g is (P, T, G); metadata has one entry per pair.
  PosteriorSequence forward(const Tensor3<float>& g, const std::vector<PairMetadata>& metadata,
                            Cache* cache = nullptr) const;
  /// Accumulates parameter gradients given dL/dmu and dL/dkappa per latent frame.
  void backward(const Cache& cache, const std::vector<Vec3>& d_mu, const std::vector<double>& d_kappa);

  /// Pair-summed representation fed to the head, (T' x mlp_width).
  nn::MatF pair_sum(const Tensor3<float>& g, const std::vector<PairMetadata>& metadata) const;

  const EncoderConfig& config() const { return cfg_; }
  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  std::size_t param_count() const;
  void zero_grad();

  /// Analytic multiply-accumulate count for one clip of P pairs and T frames.
  static std::uint64_t macs(const EncoderConfig& cfg, std::size_t pairs, std::size_t frames);

  struct Block {
    nn::Conv2d conv;
    nn::Linear meta;
    nn::GroupNorm1 norm;
    nn::PRelu act;
    nn::MaxPool2d pool;
  };
  Block& block(std::size_t level) { return blocks_.at(level); }
  const Block& block(std::size_t level) const { return blocks_.at(level); }

  /// One conv block: conv, metadata bias, group norm, PReLU, max pool.
  /// x is NHWC rows for the given shape, which is updated to the pooled shape.
  nn::MatF conv_block(std::size_t level, const nn::MatF& x, nn::MapShape& shape,
                      const std::vector<PairMetadata>& metadata, void* block_cache = nullptr) const;

 private:
  EncoderConfig cfg_;
  std::array<Block, 3> blocks_;
  std::vector<nn::Gru> gru_;
  nn::Linear mlp1_, mlp2_;
  nn::PRelu mlp_act1_, mlp_act2_;
  nn::Linear head1_, head2_;
  nn::PRelu head_act_;
};

struct Encoder::Cache {
  struct BlockCache {
    nn::MapShape in;
    nn::Conv2d::Cache conv;
    nn::Linear::Cache meta;
    nn::GroupNorm1::Cache norm;
    nn::PRelu::Cache act;
    nn::MaxPool2d::Cache pool;
  };
  std::size_t pairs = 0, frames = 0, padded = 0, latent = 0;
  std::array<BlockCache, 3> blocks;
  std::vector<nn::Gru::Cache> gru;
  nn::Linear::Cache mlp1, mlp2, head1, head2;
  nn::PRelu::Cache mlp_act1, mlp_act2, head_act;
  nn::MatF raw;                 // T' x 4
  std::vector<bool> mu_guarded; // raw mu norm fell below the guard
};

}  // namespace physdoa
