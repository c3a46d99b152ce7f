#include "t2f/embedding.hpp"

#include <cmath>
#include <string>

#include "t2f/error.hpp"

namespace t2f {
namespace {

// 64-bit FNV-1a, then a splitmix-style finalizer so that low bits are as
// well mixed as high ones (FNV alone is weak in the low bits, and both the
// index and the sign come from this value).
std::uint64_t hash_bytes(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    unsigned char u = static_cast<unsigned char>(ch);
    char lower = static_cast<char>(std::tolower(u));
    if ((lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9')) {
      cur += lower;
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace

TextEmbedding embed_caption(std::string_view text,
                            const EmbeddingConfig& config) {
  if (config.dim < 8)
    throw ContractError("embedding dim must be at least 8, got " +
                        std::to_string(config.dim));

  auto words = words_of(text);
  std::vector<std::int64_t> counts(config.dim, 0);
  std::string gram;
  for (std::size_t order : config.ngram_orders) {
    if (order == 0 || order > words.size()) continue;
    for (std::size_t i = 0; i + order <= words.size(); ++i) {
      gram.clear();
      for (std::size_t j = 0; j < order; ++j) {
        if (j) gram += '\x1f';
        gram += words[i + j];
      }
      std::uint64_t hi = hash_bytes(gram, config.seed ^ 0x9e3779b97f4a7c15ull);
      std::uint64_t hs = hash_bytes(gram, config.seed ^ 0x2545f4914f6cdd1dull);
      counts[hi % config.dim] += (hs & 1) ? 1 : -1;
    }
  }

  TextEmbedding e;
  e.values.assign(config.dim, 0.0);
  double norm_sq = 0;
  for (std::size_t i = 0; i < config.dim; ++i)
    norm_sq += static_cast<double>(counts[i]) * static_cast<double>(counts[i]);
  if (norm_sq == 0) return e;
  double inv = 1.0 / std::sqrt(norm_sq);
  for (std::size_t i = 0; i < config.dim; ++i)
    e.values[i] = static_cast<double>(counts[i]) * inv;
  return e;
}

}  // namespace t2f
