#include "t2f/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "t2f/error.hpp"

namespace t2f {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  char buf[65536];
  std::uint64_t h = fnv1a64(nullptr, 0);
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j{{"command", m.command},
                   {"config", m.config},
                   {"seeds", m.seeds},
                   {"artifacts", m.artifacts},
                   {"duration_seconds", m.duration_seconds}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to '" + path + "'");
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
  RunManifest m;
  try {
    j.at("command").get_to(m.command);
    j.at("config").get_to(m.config);
    j.at("seeds").get_to(m.seeds);
    j.at("artifacts").get_to(m.artifacts);
    j.at("duration_seconds").get_to(m.duration_seconds);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
  return m;
}

}  // namespace t2f
