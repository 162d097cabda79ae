#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "physdoa/common.hpp"

namespace physdoa::nn {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowF = Eigen::Matrix<float, 1, Eigen::Dynamic>;

/// A trainable array with its gradient accumulator and Adam moments.
struct Param {
  std::string name;
  MatF value;
  MatF grad;
  MatF m;
  MatF v;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols);
  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

void init_uniform(Param& p, float bound, std::mt19937_64& rng);

// Layer caches hold what backward needs from the matching forward call.

class Linear {
 public:
  struct Cache {
    MatF x;
  };
  Linear() = default;
  Linear(std::string name, int in, int out);
  void reset(std::mt19937_64& rng);
  MatF forward(const MatF& x, Cache* cache) const;
  /// Returns dL/dx when want_input_grad, otherwise an empty matrix.
  MatF backward(const Cache& cache, const MatF& dy, bool want_input_grad = true);
  std::vector<Param*> params() { return {&weight, &bias}; }
  int in_features() const { return static_cast<int>(weight.value.cols()); }
  int out_features() const { return static_cast<int>(weight.value.rows()); }

  Param weight;  // out x in
  Param bias;    // 1 x out
};

/// Single-parameter PReLU.
class PRelu {
 public:
  struct Cache {
    MatF x;
  };
  explicit PRelu(std::string name = "prelu");
  MatF forward(const MatF& x, Cache* cache) const;
  MatF backward(const Cache& cache, const MatF& dy);
  std::vector<Param*> params() { return {&alpha}; }

  Param alpha;
};

/// Shape of a batch of NHWC feature maps stored as (N*H*W) x C.
struct MapShape {
  int n = 0, h = 0, w = 0, c = 0;
  Eigen::Index rows() const { return static_cast<Eigen::Index>(n) * h * w; }
};

/// 3x3 convolution, stride 1, zero padding 1.
class Conv2d {
 public:
  struct Cache {
    MatF col;
    MapShape in;
  };
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels);
  void reset(std::mt19937_64& rng);
  MatF forward(const MatF& x, const MapShape& shape, Cache* cache) const;
  MatF backward(const Cache& cache, const MatF& dy, bool want_input_grad);
  std::vector<Param*> params() { return {&weight, &bias}; }
  int in_channels() const { return static_cast<int>(weight.value.cols() / 9); }
  int out_channels() const { return static_cast<int>(weight.value.rows()); }

  Param weight;  // out x (9 * in), column order (ky, kx, cin)
  Param bias;    // 1 x out
};

/// Group normalization with a single group: per sample over all of H, W, C.
class GroupNorm1 {
 public:
  struct Cache {
    MatF xhat;
    std::vector<float> inv_std;
    MapShape shape;
  };
  GroupNorm1() = default;
  GroupNorm1(std::string name, int channels, float eps = 1e-5f);
  MatF forward(const MatF& x, const MapShape& shape, Cache* cache) const;
  MatF backward(const Cache& cache, const MatF& dy);
  std::vector<Param*> params() { return {&gamma, &beta}; }

  Param gamma;
  Param beta;
  float eps = 1e-5f;
};

class MaxPool2d {
 public:
  struct Cache {
    std::vector<Eigen::Index> argmax;
    MapShape in;
  };
  MaxPool2d() = default;
  MaxPool2d(int pool_h, int pool_w) : ph(pool_h), pw(pool_w) {}
  MapShape output_shape(const MapShape& in) const;
  MatF forward(const MatF& x, const MapShape& shape, Cache* cache) const;
  MatF backward(const Cache& cache, const MatF& dy) const;

  int ph = 1, pw = 1;
};

/// Single GRU layer (PyTorch gate layout r, z, n), zero initial state.
/// Sequences are stored as (N*T) x D rows, sequence-major.
class Gru {
 public:
  struct Cache {
    MatF x;
    std::vector<MatF> r, z, n, hn, h_prev;
    int batch = 0, steps = 0;
  };
  Gru() = default;
  Gru(std::string name, int input, int hidden);
  void reset(std::mt19937_64& rng);
  MatF forward(const MatF& x, int batch, int steps, Cache* cache) const;
  MatF backward(const Cache& cache, const MatF& dy);
  std::vector<Param*> params() { return {&w_ih, &w_hh, &b_ih, &b_hh}; }
  int hidden() const { return static_cast<int>(w_hh.value.cols()); }
  int input() const { return static_cast<int>(w_ih.value.cols()); }

  Param w_ih;  // 3H x D
  Param w_hh;  // 3H x H
  Param b_ih;  // 1 x 3H
  Param b_hh;  // 1 x 3H
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(const std::vector<Param*>& params, double lr);
  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  double b1_, b2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace physdoa::nn
