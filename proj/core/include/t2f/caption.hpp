#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "t2f/attributes.hpp"

namespace t2f {

// A compiled caption: up to six sentences in fixed group order
// (face structure, facial hair, hair style, other features, appearance,
// accessories), plus their single-space concatenation.
struct Caption {
  std::vector<std::string> sentences;
  std::string text;
  bool male = false;
};

// Counts the primitive queue operations (opener seed, phrase enqueue,
// conjunction enqueue, emit) spent composing one caption, to pin the
// per-caption cost as linear in the attribute count.
struct ComposeStats {
  std::size_t queue_ops = 0;
};

// Deterministically renders the caption for an attribute vector. The Male
// attribute selects pronouns only; unmapped attributes (Bags_Under_Eyes,
// Blurry, No_Beard) are ignored. A vector with no mapped attributes set
// yields a caption with zero sentences and empty text.
Caption compose_caption(const AttributeVector& attrs,
                        ComposeStats* stats = nullptr);

struct ExtractionResult {
  AttributeVector attrs;
  // False when the text carries no pronoun or gendered noun (empty caption),
  // in which case attrs[Male] is meaningless.
  bool gender_known = false;
};

// Exact inverse of compose_caption on its own output language. Any token
// outside the closed caption grammar raises ContractError naming the token.
ExtractionResult extract_attributes(std::string_view text);

struct CorpusRecord {
  std::string image_id;
  std::string caption_text;
  AttributeVector attrs;
};

// Line-delimited JSON records {image_id, caption, bits} where bits is the
// 40-character 0/1 string in canonical attribute order.
void write_corpus_jsonl(const std::vector<CorpusRecord>& records,
                        std::ostream& out);
std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in);

// Two columns, image_id and caption text, tab separated.
void write_corpus_tsv(const std::vector<CorpusRecord>& records,
                      std::ostream& out);

}  // namespace t2f
