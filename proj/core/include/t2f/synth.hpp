#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "t2f/attributes.hpp"
#include "t2f/caption.hpp"
#include "t2f/embedding.hpp"
#include "t2f/rng.hpp"
#include "t2f/tensor.hpp"

namespace t2f {

// One training example: the rendered face, its ground-truth attributes, the
// compiled caption, its embedding, and the identity class the record belongs
// to. Records of one class share an attribute vector and differ by jitter.
struct DatasetRecord {
  std::string image_id;
  TensorD image;  // [3, s, s] in [-1, 1]
  AttributeVector attrs;
  Caption caption;
  TextEmbedding embedding;
  std::size_t identity_class = 0;
};

// Deterministically draws the glyph face for an attribute vector. size must
// be a multiple of 16; every drawing coordinate scales by size/16. The
// jitter seed adds bounded per-identity color variation (background, skin,
// and hair tints) without moving any probe region.
TensorD render_procedural_face(const AttributeVector& attrs, std::size_t size,
                               std::uint64_t jitter_seed);

// The attributes the renderer encodes in dedicated pixel regions that
// probe_attribute can read back. Everything else only leaves margin marks.
const std::vector<Attr>& probeable_attributes();

// Inverse detector for one attribute: reads the region the renderer draws
// into and decides presence. Returns nullopt for attributes outside the
// probe-able set rather than guessing.
std::optional<bool> probe_attribute(const TensorD& image, Attr attribute);

// Samples one attribute vector with the documented CelebA-like marginals and
// the renderer's structural constraints (at most one hair color, bald
// excludes color, facial hair only on male faces).
AttributeVector sample_attributes(Rng& rng);

struct SynthDataset {
  std::vector<DatasetRecord> records;
  std::size_t train_count = 0;  // records[0..train_count) are the train split
  std::size_t class_count = 0;
};

// Builds the synthetic dataset: class_count identity classes with distinct
// attribute vectors, records assigned round-robin so classes stay balanced
// within one record, a 75/25 train/test split, everything derived from seed.
SynthDataset generate_dataset(std::size_t n, std::size_t class_count,
                              std::uint64_t seed, std::size_t size,
                              const EmbeddingConfig& embedding);

// Ingests an on-disk attribute file plus a directory of PPM images named by
// the attribute rows. Images are resized to `size`; captions and embeddings
// are compiled from the attributes. Missing images fail with every absent
// filename listed.
std::vector<DatasetRecord> load_celeba_format(const std::string& image_dir,
                                              const std::string& attr_file,
                                              std::size_t size,
                                              const EmbeddingConfig& embedding);

}  // namespace t2f
