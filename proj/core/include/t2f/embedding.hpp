#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace t2f {

// Hashed-sign embedding parameters. The config travels inside checkpoints so
// a generator is always paired with the exact embedding that trained it.
struct EmbeddingConfig {
  std::size_t dim = 256;
  std::vector<std::size_t> ngram_orders = {1, 2};
  std::uint64_t seed = 0;
};

struct TextEmbedding {
  std::vector<double> values;

  bool operator==(const TextEmbedding&) const = default;
};

// Maps caption text to a unit vector (exact zero vector for text with no
// word characters). Words are lowercase runs of [a-z0-9]; every n-gram of
// each configured order contributes ±1 at a hashed index, accumulated in
// integers so the result is identical across platforms, then normalized.
TextEmbedding embed_caption(std::string_view text,
                            const EmbeddingConfig& config);

}  // namespace t2f
