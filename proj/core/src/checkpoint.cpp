#include "t2f/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace t2f {
namespace {

constexpr char kMagic[4] = {'T', '2', 'F', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw ParseError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw ParseError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

const TensorD& CheckpointData::need(const std::string& name) const {
  const TensorD* t = find(name);
  if (!t) throw ParseError("checkpoint missing block '" + name + "'");
  return *t;
}

void write_checkpoint(const CheckpointData& ck, const std::string& path) {
  if (ck.scalar_width != 4 && ck.scalar_width != 8)
    throw ContractError("checkpoint scalar width must be 4 or 8, got " +
                        std::to_string(ck.scalar_width));
  // Written to a sibling temp file and renamed into place, so a crash
  // mid-write never leaves a half checkpoint under the final name.
  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + tmp);

  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, ck.scalar_width);

  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : ck.meta) meta[k] = v;
  const std::string meta_str = meta.dump();
  put_u64(out, meta_str.size());
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  put_u64(out, ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t i = 0; i < t.ndim(); ++i) put_u64(out, t.dim(i));
    auto data = t.data();
    if (ck.scalar_width == 8) {
      out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size() * 8));
    } else {
      std::vector<float> narrow(data.begin(), data.end());
      out.write(reinterpret_cast<const char*>(narrow.data()),
                static_cast<std::streamsize>(narrow.size() * 4));
    }
  }
  out.close();
  if (!out) throw IoError("write failed: " + tmp);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " into place: " + ec.message());
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("not a checkpoint file: " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " +
                     std::to_string(version));
  CheckpointData ck;
  ck.scalar_width = get_u32(in);
  if (ck.scalar_width != 4 && ck.scalar_width != 8)
    throw ParseError("checkpoint scalar width " +
                     std::to_string(ck.scalar_width) + " is not 4 or 8");

  const std::uint64_t meta_len = get_u64(in);
  std::string meta_str(meta_len, '\0');
  if (!in.read(meta_str.data(), static_cast<std::streamsize>(meta_len)))
    throw ParseError("truncated checkpoint");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata is not valid JSON: ") +
                     e.what());
  }
  for (auto it = meta.begin(); it != meta.end(); ++it)
    ck.meta[it.key()] = it.value().get<std::string>();

  const std::uint64_t count = get_u64(in);
  ck.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ParseError("truncated checkpoint");
    const std::uint32_t ndim = get_u32(in);
    Shape shape(ndim);
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < ndim; ++k) {
      shape[k] = get_u64(in);
      numel *= shape[k];
    }
    std::vector<double> values(numel);
    if (ck.scalar_width == 8) {
      if (!in.read(reinterpret_cast<char*>(values.data()),
                   static_cast<std::streamsize>(numel * 8)))
        throw ParseError("truncated checkpoint in block '" + name + "'");
    } else {
      std::vector<float> narrow(numel);
      if (!in.read(reinterpret_cast<char*>(narrow.data()),
                   static_cast<std::streamsize>(numel * 4)))
        throw ParseError("truncated checkpoint in block '" + name + "'");
      std::copy(narrow.begin(), narrow.end(), values.begin());
    }
    ck.tensors.emplace_back(std::move(name),
                            TensorD::from_raw(std::move(shape),
                                              std::move(values)));
  }
  return ck;
}

std::string gan_config_to_json(const GanConfig& cfg) {
  nlohmann::json j{
      {"image_size", cfg.image_size},
      {"z_dim", cfg.z_dim},
      {"embed_dim", cfg.embed_dim},
      {"text_dim", cfg.text_dim},
      {"base_channels", cfg.base_channels},
      {"noise", cfg.noise == NoiseKind::uniform_sym ? "usym" : "u01"}};
  return j.dump();
}

GanConfig gan_config_from_json(const std::string& json) {
  GanConfig cfg;
  try {
    auto j = nlohmann::json::parse(json);
    cfg.image_size = j.at("image_size").get<std::size_t>();
    cfg.z_dim = j.at("z_dim").get<std::size_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.text_dim = j.at("text_dim").get<std::size_t>();
    cfg.base_channels = j.at("base_channels").get<std::size_t>();
    const std::string noise = j.at("noise").get<std::string>();
    if (noise == "u01")
      cfg.noise = NoiseKind::uniform01;
    else if (noise == "usym")
      cfg.noise = NoiseKind::uniform_sym;
    else
      throw ParseError("unknown noise kind '" + noise + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace t2f
