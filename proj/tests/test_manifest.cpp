#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "t2f/error.hpp"
#include "t2f/manifest.hpp"

using namespace t2f;

TEST_CASE("fnv1a64 matches published reference digests") {
  // Values from the FNV reference tables for the 64-bit 1a variant.
  CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("fnv1a64 chains across split inputs") {
  const char* s = "foobar";
  std::uint64_t h = fnv1a64(s, 3);
  h = fnv1a64(s + 3, 3, h);
  CHECK(h == fnv1a64(s, 6));
}

TEST_CASE("hash_file digests file bytes and fails loudly on absence") {
  const char* path = "manifest_hash_probe.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "foobar";
  }
  CHECK(hash_file(path) == "85944171f73967e8");
  std::remove(path);
  CHECK_THROWS_AS(hash_file(path), IoError);
}

TEST_CASE("manifests survive a disk round trip") {
  RunManifest m;
  m.command = {"t2f", "synth", "--n", "8", "--out", "d"};
  m.config["size"] = "16";
  m.config["classes"] = "4";
  m.seeds["seed"] = 7;
  m.artifacts["d/images/000000.ppm"] = "00ff00ff00ff00ff";
  m.duration_seconds = 1.25;

  const char* path = "manifest_probe.json";
  write_manifest(m, path);
  RunManifest back = read_manifest(path);
  std::remove(path);

  CHECK(back.command == m.command);
  CHECK(back.config == m.config);
  CHECK(back.seeds == m.seeds);
  CHECK(back.artifacts == m.artifacts);
  CHECK(back.duration_seconds == m.duration_seconds);
}

TEST_CASE("malformed manifests raise ParseError, missing files IoError") {
  const char* path = "manifest_bad.json";
  {
    std::ofstream out(path);
    out << "{\"command\": 3}";
  }
  CHECK_THROWS_AS(read_manifest(path), ParseError);
  {
    std::ofstream out(path);
    out << "not json";
  }
  CHECK_THROWS_AS(read_manifest(path), ParseError);
  std::remove(path);
  CHECK_THROWS_AS(read_manifest(path), IoError);
}
