#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "t2f/adam.hpp"
#include "t2f/error.hpp"
#include "t2f/models.hpp"
#include "t2f/tensor.hpp"

namespace t2f {

// A run snapshot: named value blocks plus string metadata. Values are held
// as doubles in memory; scalar_width picks the on-disk width, so a 32-bit
// run stores 4-byte scalars and a 64-bit run stores 8-byte scalars. Every
// float widens to double exactly, which keeps the narrow path lossless for
// values that were computed in 32-bit.
struct CheckpointData {
  std::uint32_t scalar_width = 8;  // bytes per stored scalar, 4 or 8
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, TensorD>> tensors;

  const TensorD* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }

  // The named block, or ParseError naming what is absent.
  const TensorD& need(const std::string& name) const;
};

void write_checkpoint(const CheckpointData& ck, const std::string& path);
CheckpointData read_checkpoint(const std::string& path);

std::string gan_config_to_json(const GanConfig& cfg);
GanConfig gan_config_from_json(const std::string& json);

namespace detail {

template <typename T>
TensorD vec_block(const std::vector<T>& v) {
  std::vector<double> d(v.begin(), v.end());
  return TensorD::from_raw({v.size()}, std::move(d));
}

template <typename T>
void fill_vec(std::vector<T>& dst, const TensorD& src,
              const std::string& name) {
  if (src.size() != dst.size())
    throw ParseError("checkpoint block '" + name + "' holds " +
                     std::to_string(src.size()) + " values, expected " +
                     std::to_string(dst.size()));
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i] = static_cast<T>(src.at(i));
}

template <typename T>
void fill_tensor(Tensor<T>& dst, const TensorD& src, const std::string& name) {
  if (src.shape() != dst.shape())
    throw ParseError("checkpoint block '" + name + "' has shape " +
                     shape_str(src.shape()) + ", expected " +
                     shape_str(dst.shape()));
  auto d = dst.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<T>(src.at(i));
}

template <typename T>
void pack_adam(CheckpointData& ck, const std::string& prefix,
               const AdamState<T>& opt) {
  for (std::size_t s = 0; s < opt.slot_count(); ++s) {
    ck.tensors.emplace_back(prefix + std::to_string(s) + ".m",
                            vec_block(opt.m(s)));
    ck.tensors.emplace_back(prefix + std::to_string(s) + ".v",
                            vec_block(opt.v(s)));
  }
  ck.meta[prefix + "t"] = std::to_string(opt.step_count());
}

template <typename T>
void unpack_adam(const CheckpointData& ck, const std::string& prefix,
                 AdamState<T>& opt, std::vector<Tensor<T>>& params) {
  opt.attach(params);
  for (std::size_t s = 0; s < opt.slot_count(); ++s) {
    auto base = prefix + std::to_string(s);
    fill_vec(opt.m(s), ck.need(base + ".m"), base + ".m");
    fill_vec(opt.v(s), ck.need(base + ".v"), base + ".v");
  }
  auto it = ck.meta.find(prefix + "t");
  if (it == ck.meta.end())
    throw ParseError("checkpoint missing '" + prefix + "t'");
  opt.set_step_count(std::stoull(it->second));
}

template <typename T>
void pack_bn(CheckpointData& ck, const std::string& base, BnLayer<T>& l) {
  ck.tensors.emplace_back(base + ".running_mean", vec_block(l.stats.mean));
  ck.tensors.emplace_back(base + ".running_var", vec_block(l.stats.var));
}

template <typename T>
void unpack_bn(const CheckpointData& ck, const std::string& base,
               BnLayer<T>& l) {
  fill_vec(l.stats.mean, ck.need(base + ".running_mean"),
           base + ".running_mean");
  fill_vec(l.stats.var, ck.need(base + ".running_var"), base + ".running_var");
}

}  // namespace detail

// Captures both networks and both optimizers into ck. Parameter tensors,
// batchnorm running moments, and Adam moments all become named blocks;
// optimizer step counts land in meta. Slot order follows parameters().
template <typename T>
void pack_models(CheckpointData& ck, Generator<T>& g, Discriminator<T>& d,
                 const AdamState<T>& opt_g, const AdamState<T>& opt_d) {
  ck.scalar_width = sizeof(T);
  for (auto& [name, t] : g.named_parameters())
    ck.tensors.emplace_back(name, t.template cast<double>());
  for (auto& [name, t] : d.named_parameters())
    ck.tensors.emplace_back(name, t.template cast<double>());
  auto& gb = g.bn_layers();
  for (std::size_t i = 0; i < gb.size(); ++i)
    detail::pack_bn(ck, "g.bn" + std::to_string(i), gb[i]);
  auto& db = d.bn_layers();
  for (std::size_t i = 0; i < db.size(); ++i)
    detail::pack_bn(ck, "d.bn" + std::to_string(i), db[i]);
  detail::pack_bn(ck, "d.joint_bn", d.joint_bn());
  detail::pack_adam(ck, "adam.g.", opt_g);
  detail::pack_adam(ck, "adam.d.", opt_d);
}

// Restores what pack_models captured into models built from the same
// config. Optimizers are re-attached to the freshly restored parameter
// lists, so the caller's params vectors stay in sync with the state.
template <typename T>
void unpack_models(const CheckpointData& ck, Generator<T>& g,
                   Discriminator<T>& d, AdamState<T>& opt_g,
                   AdamState<T>& opt_d) {
  for (auto& [name, t] : g.named_parameters())
    detail::fill_tensor(t, ck.need(name), name);
  for (auto& [name, t] : d.named_parameters())
    detail::fill_tensor(t, ck.need(name), name);
  auto& gb = g.bn_layers();
  for (std::size_t i = 0; i < gb.size(); ++i)
    detail::unpack_bn(ck, "g.bn" + std::to_string(i), gb[i]);
  auto& db = d.bn_layers();
  for (std::size_t i = 0; i < db.size(); ++i)
    detail::unpack_bn(ck, "d.bn" + std::to_string(i), db[i]);
  detail::unpack_bn(ck, "d.joint_bn", d.joint_bn());
  auto gp = g.parameters();
  auto dp = d.parameters();
  detail::unpack_adam(ck, "adam.g.", opt_g, gp);
  detail::unpack_adam(ck, "adam.d.", opt_d, dp);
}

}  // namespace t2f
