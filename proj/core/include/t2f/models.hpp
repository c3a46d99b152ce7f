#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "t2f/batchnorm.hpp"
#include "t2f/conv.hpp"
#include "t2f/error.hpp"
#include "t2f/ops.hpp"
#include "t2f/rng.hpp"
#include "t2f/tape.hpp"
#include "t2f/tensor.hpp"

namespace t2f {

// Distribution the noise vector z is drawn from. uniform01 keeps each
// entry in [0, 1); uniform_sym centers it on [-1, 1) for experiments.
enum class NoiseKind { uniform01, uniform_sym };

// Fills each row of an [n, z] block with draws for one sample.
template <typename T>
void fill_noise_row(Tensor<T>& z, std::size_t row, NoiseKind kind, Rng& rng) {
  const std::size_t width = z.dim(1);
  auto d = z.mutable_data();
  for (std::size_t j = 0; j < width; ++j)
    d[row * width + j] = static_cast<T>(
        kind == NoiseKind::uniform01 ? rng.uniform() : rng.uniform(-1.0, 1.0));
}

// Shared shape parameters for the generator / discriminator pair. Both nets
// are pyramids of stride-2 4x4 (de)convolutions between a 4x4 spatial core
// and the image resolution, so image_size must be 4 * 2^k. base_channels is
// the channel count at the image-adjacent end; it doubles toward the core.
struct GanConfig {
  std::size_t image_size = 16;
  std::size_t z_dim = 100;
  std::size_t embed_dim = 256;  // raw caption embedding width
  std::size_t text_dim = 256;   // width after the learned reduction
  std::size_t base_channels = 64;
  NoiseKind noise = NoiseKind::uniform01;

  std::size_t stages() const {
    std::size_t s = image_size, k = 0;
    while (s > 4 && s % 2 == 0) {
      s /= 2;
      ++k;
    }
    if (s != 4 || k == 0)
      throw ContractError("image_size must be 4 * 2^k with k >= 1, got " +
                          std::to_string(image_size));
    return k;
  }

  // Channels of the 4x4 core layer.
  std::size_t core_channels() const { return base_channels << (stages() - 1); }

  void validate() const {
    stages();
    if (z_dim == 0 || embed_dim == 0 || text_dim == 0 || base_channels == 0)
      throw ContractError("all GanConfig dimensions must be positive");
  }
};

namespace detail {

template <typename T>
struct BnLayer {
  Tensor<T> gamma, beta;
  RunningStats<T> stats;

  BnLayer() = default;
  BnLayer(std::size_t channels, Rng& rng)
      : gamma(Tensor<T>::randn({channels}, rng, T(0.02), T(1))),
        beta(Tensor<T>::zeros({channels})),
        stats(channels) {
    gamma.set_requires_grad(true);
    beta.set_requires_grad(true);
  }
};

template <typename T>
Tensor<T> weight(Shape shape, Rng& rng) {
  auto w = Tensor<T>::randn(std::move(shape), rng, T(0.02));
  w.set_requires_grad(true);
  return w;
}

template <typename T>
Tensor<T> zero_bias(std::size_t n) {
  auto b = Tensor<T>::zeros({n});
  b.set_requires_grad(true);
  return b;
}

}  // namespace detail

// Maps [noise, reduced caption embedding] to an image in [-1, 1]. The
// embedding passes through a learned affine reduction with slope-0.2
// rectification, the concatenated vector is projected to the 4x4 core, and
// each stage doubles resolution with a stride-2 deconvolution. Hidden
// stages use batchnorm + relu; the output stage is a bare deconvolution
// into tanh.
template <typename T>
class Generator {
 public:
  Generator(const GanConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const std::size_t stages = cfg.stages();
    const std::size_t core = cfg.core_channels();
    reduce_w_ = detail::weight<T>({cfg.embed_dim, cfg.text_dim}, rng);
    reduce_b_ = detail::zero_bias<T>(cfg.text_dim);
    proj_w_ =
        detail::weight<T>({cfg.z_dim + cfg.text_dim, core * 16}, rng);
    proj_b_ = detail::zero_bias<T>(core * 16);
    bn_.emplace_back(core, rng);
    for (std::size_t i = 0; i < stages; ++i) {
      const std::size_t in = core >> i;
      const bool last = i + 1 == stages;
      const std::size_t out = last ? 3 : core >> (i + 1);
      deconv_.push_back(detail::weight<T>({in, out, 4, 4}, rng));
      if (!last) bn_.emplace_back(out, rng);
    }
  }

  // z: [n, z_dim], text: [n, embed_dim] -> [n, 3, s, s].
  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& z, const Tensor<T>& text,
                    BnMode mode) {
    if (z.ndim() != 2 || z.dim(1) != cfg_.z_dim)
      throw ContractError("generator: noise must be [n, " +
                          std::to_string(cfg_.z_dim) + "], got " +
                          shape_str(z.shape()));
    if (text.ndim() != 2 || text.dim(1) != cfg_.embed_dim ||
        text.dim(0) != z.dim(0))
      throw ContractError("generator: embeddings must be [" +
                          std::to_string(z.dim(0)) + ", " +
                          std::to_string(cfg_.embed_dim) + "], got " +
                          shape_str(text.shape()));
    const std::size_t n = z.dim(0);
    auto t = leaky_relu(tape, affine(tape, text, reduce_w_, reduce_b_),
                        T(0.2));
    auto h = affine(tape, concat_dim1(tape, z, t), proj_w_, proj_b_);
    h = reshape(tape, h, {n, cfg_.core_channels(), 4, 4});
    h = leaky_relu(
        tape, batchnorm(tape, h, bn_[0].gamma, bn_[0].beta, bn_[0].stats, mode),
        T(0));
    for (std::size_t i = 0; i < deconv_.size(); ++i) {
      h = deconv2d(tape, h, deconv_[i], 2, 1);
      if (i + 1 == deconv_.size()) return tanh_op(tape, h);
      h = leaky_relu(tape,
                     batchnorm(tape, h, bn_[i + 1].gamma, bn_[i + 1].beta,
                               bn_[i + 1].stats, mode),
                     T(0));
    }
    throw ContractError("generator: no stages configured");
  }

  std::vector<Tensor<T>> parameters() {
    std::vector<Tensor<T>> p = {reduce_w_, reduce_b_, proj_w_, proj_b_};
    for (auto& k : deconv_) p.push_back(k);
    for (auto& l : bn_) {
      p.push_back(l.gamma);
      p.push_back(l.beta);
    }
    return p;
  }

  std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>>> p = {
        {"g.reduce.w", reduce_w_},
        {"g.reduce.b", reduce_b_},
        {"g.proj.w", proj_w_},
        {"g.proj.b", proj_b_}};
    for (std::size_t i = 0; i < deconv_.size(); ++i)
      p.emplace_back("g.deconv" + std::to_string(i) + ".k", deconv_[i]);
    for (std::size_t i = 0; i < bn_.size(); ++i) {
      p.emplace_back("g.bn" + std::to_string(i) + ".gamma", bn_[i].gamma);
      p.emplace_back("g.bn" + std::to_string(i) + ".beta", bn_[i].beta);
    }
    return p;
  }

  std::vector<detail::BnLayer<T>>& bn_layers() { return bn_; }
  const GanConfig& config() const { return cfg_; }

 private:
  GanConfig cfg_;
  Tensor<T> reduce_w_, reduce_b_, proj_w_, proj_b_;
  std::vector<Tensor<T>> deconv_;
  std::vector<detail::BnLayer<T>> bn_;
};

// Scores (image, caption embedding) pairs with one sigmoid unit. The image
// runs down a stride-2 convolution pyramid (no batchnorm on the first
// stage), the reduced embedding is tiled over the 4x4 core and joined
// channel-wise, and a 1x1 convolution mixes the two before the scoring
// head. All rectifications are slope-0.2.
template <typename T>
class Discriminator {
 public:
  Discriminator(const GanConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const std::size_t stages = cfg.stages();
    const std::size_t core = cfg.core_channels();
    for (std::size_t i = 0; i < stages; ++i) {
      const std::size_t in = i == 0 ? 3 : cfg.base_channels << (i - 1);
      const std::size_t out = cfg.base_channels << i;
      conv_.push_back(detail::weight<T>({out, in, 4, 4}, rng));
      if (i > 0) bn_.emplace_back(out, rng);
    }
    reduce_w_ = detail::weight<T>({cfg.embed_dim, cfg.text_dim}, rng);
    reduce_b_ = detail::zero_bias<T>(cfg.text_dim);
    joint_k_ = detail::weight<T>({core, core + cfg.text_dim, 1, 1}, rng);
    joint_bn_ = detail::BnLayer<T>(core, rng);
    head_w_ = detail::weight<T>({core * 16, 1}, rng);
    head_b_ = detail::zero_bias<T>(1);
  }

  // x: [n, 3, s, s], text: [n, embed_dim] -> [n, 1] scores in (0, 1).
  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& text,
                    BnMode mode) {
    if (x.ndim() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.image_size ||
        x.dim(3) != cfg_.image_size)
      throw ContractError("discriminator: images must be [n, 3, " +
                          std::to_string(cfg_.image_size) + ", " +
                          std::to_string(cfg_.image_size) + "], got " +
                          shape_str(x.shape()));
    if (text.ndim() != 2 || text.dim(1) != cfg_.embed_dim ||
        text.dim(0) != x.dim(0))
      throw ContractError("discriminator: embeddings must be [" +
                          std::to_string(x.dim(0)) + ", " +
                          std::to_string(cfg_.embed_dim) + "], got " +
                          shape_str(text.shape()));
    const std::size_t n = x.dim(0);
    Tensor<T> h = x;
    for (std::size_t i = 0; i < conv_.size(); ++i) {
      h = conv2d(tape, h, conv_[i], 2, 1);
      if (i > 0)
        h = batchnorm(tape, h, bn_[i - 1].gamma, bn_[i - 1].beta,
                      bn_[i - 1].stats, mode);
      h = leaky_relu(tape, h, T(0.2));
    }
    auto t = leaky_relu(tape, affine(tape, text, reduce_w_, reduce_b_),
                        T(0.2));
    h = concat_dim1(tape, h, tile_spatial(tape, t, 4, 4));
    h = conv2d(tape, h, joint_k_, 1, 0);
    h = batchnorm(tape, h, joint_bn_.gamma, joint_bn_.beta, joint_bn_.stats,
                  mode);
    h = leaky_relu(tape, h, T(0.2));
    h = reshape(tape, h, {n, cfg_.core_channels() * 16});
    return sigmoid(tape, affine(tape, h, head_w_, head_b_));
  }

  std::vector<Tensor<T>> parameters() {
    std::vector<Tensor<T>> p;
    for (auto& k : conv_) p.push_back(k);
    p.insert(p.end(), {reduce_w_, reduce_b_, joint_k_, head_w_, head_b_});
    for (auto& l : bn_) {
      p.push_back(l.gamma);
      p.push_back(l.beta);
    }
    p.push_back(joint_bn_.gamma);
    p.push_back(joint_bn_.beta);
    return p;
  }

  std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>>> p;
    for (std::size_t i = 0; i < conv_.size(); ++i)
      p.emplace_back("d.conv" + std::to_string(i) + ".k", conv_[i]);
    p.emplace_back("d.reduce.w", reduce_w_);
    p.emplace_back("d.reduce.b", reduce_b_);
    p.emplace_back("d.joint.k", joint_k_);
    p.emplace_back("d.head.w", head_w_);
    p.emplace_back("d.head.b", head_b_);
    for (std::size_t i = 0; i < bn_.size(); ++i) {
      p.emplace_back("d.bn" + std::to_string(i) + ".gamma", bn_[i].gamma);
      p.emplace_back("d.bn" + std::to_string(i) + ".beta", bn_[i].beta);
    }
    p.emplace_back("d.joint_bn.gamma", joint_bn_.gamma);
    p.emplace_back("d.joint_bn.beta", joint_bn_.beta);
    return p;
  }

  std::vector<detail::BnLayer<T>>& bn_layers() { return bn_; }
  detail::BnLayer<T>& joint_bn() { return joint_bn_; }
  const GanConfig& config() const { return cfg_; }

 private:
  GanConfig cfg_;
  std::vector<Tensor<T>> conv_;
  std::vector<detail::BnLayer<T>> bn_;
  Tensor<T> reduce_w_, reduce_b_, joint_k_, head_w_, head_b_;
  detail::BnLayer<T> joint_bn_;
};

}  // namespace t2f
