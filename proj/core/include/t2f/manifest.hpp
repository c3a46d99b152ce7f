#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace t2f {

// Sidecar metadata written next to every artifact a command produces: the
// exact invocation, every knob that shaped the output, the seeds in play,
// and a digest per artifact file. Replaying the recorded command reproduces
// the artifacts; the digests tell whether a tree still matches its run.
struct RunManifest {
  std::vector<std::string> command;              // argv, verbatim
  std::map<std::string, std::string> config;     // flat knob snapshot
  std::map<std::string, std::uint64_t> seeds;    // stream name -> seed
  std::map<std::string, std::string> artifacts;  // relative path -> digest
  double duration_seconds = 0;
};

// FNV-1a, chainable: feed the previous return value back in as h to hash
// data that arrives in pieces.
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t h = 0xcbf29ce484222325ull);

// Digest of the file's bytes as 16 hex digits. IoError if unreadable.
std::string hash_file(const std::string& path);

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

}  // namespace t2f
