#include "t2f/caption.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "t2f/error.hpp"

namespace t2f {
namespace {

// One caption-group member: the attribute, the phrase spoken for it, and the
// conjunction used when the queue tail already holds an earlier attribute.
struct Member {
  Attr attr;
  std::string_view phrase;
  std::string_view conjunction;
};

// Token queue in the style of the caption-creation procedure: phrases are
// enqueued whole, commas attach to the previous token, and the finished
// sentence is the capitalized, period-terminated join.
class SentenceQueue {
 public:
  explicit SentenceQueue(ComposeStats* stats) : stats_(stats) {}

  void seed(std::string_view opener) {
    tally();
    text_ = opener;
    opener_len_ = text_.size();
  }

  bool still_opener() const { return text_.size() == opener_len_; }

  void push_phrase(std::string_view phrase) {
    tally();
    text_ += ' ';
    text_ += phrase;
  }

  void push_conjunction(std::string_view conj) {
    tally();
    if (conj == ",") {
      text_ += ',';
    } else {
      text_ += ' ';
      text_ += conj;
    }
  }

  void replace(std::string_view whole) {
    tally();
    text_ = whole;
    opener_len_ = 0;
  }

  // Capitalizes, appends the period, and returns the sentence.
  std::string emit() {
    tally();
    std::string s = std::move(text_);
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(s[0]));
    s += '.';
    return s;
  }

 private:
  void tally() {
    if (stats_) ++stats_->queue_ops;
  }

  std::string text_;
  std::size_t opener_len_ = 0;
  ComposeStats* stats_;
};

// Renders one queue-driven group: opener, then each present member either
// directly (queue tail still the opener) or behind its conjunction.
std::optional<std::string> render_queue_group(
    const AttributeVector& attrs, std::string_view opener,
    std::span<const Member> members, ComposeStats* stats) {
  bool any = false;
  for (const Member& m : members) any = any || attrs.get(m.attr);
  if (!any) return std::nullopt;

  SentenceQueue q(stats);
  q.seed(opener);
  for (const Member& m : members) {
    if (!attrs.get(m.attr)) continue;
    if (!q.still_opener()) q.push_conjunction(m.conjunction);
    q.push_phrase(m.phrase);
  }
  return q.emit();
}

std::optional<std::string> face_structure(const AttributeVector& a, bool male,
                                          ComposeStats* stats) {
  static constexpr Member kMembers[] = {
      {Attr::Chubby, "chubby face", ","},
      {Attr::DoubleChin, "double chin", ","},
      {Attr::OvalFace, "oval face", "and"},
      {Attr::HighCheekbones, "high cheekbones", "and"},
  };
  return render_queue_group(a, male ? "the man has" : "the woman has",
                            kMembers, stats);
}

std::optional<std::string> facial_hair(const AttributeVector& a, bool male,
                                       ComposeStats* stats) {
  static constexpr Member kMembers[] = {
      {Attr::FiveOClockShadow, "5 o'clock shadow", ","},
      {Attr::Goatee, "goatee", ","},
      {Attr::Mustache, "mustache", "and"},
      {Attr::Sideburns, "sideburns", "with"},
  };
  bool any = false;
  for (const Member& m : kMembers) any = any || a.get(m.attr);
  if (!any) return std::nullopt;

  SentenceQueue q(stats);
  q.seed(male ? "he sports a" : "she sports a");
  for (const Member& m : kMembers) {
    if (!a.get(m.attr)) continue;
    // Sideburns reached while the queue still ends in the bare article:
    // the procedure discards the queue for the fixed "has sideburns" form.
    if (m.attr == Attr::Sideburns && q.still_opener()) {
      q.replace(male ? "he has sideburns" : "she has sideburns");
      return q.emit();
    }
    if (!q.still_opener()) q.push_conjunction(m.conjunction);
    q.push_phrase(m.phrase);
  }
  return q.emit();
}

std::optional<std::string> hair_style(const AttributeVector& a, bool male,
                                      ComposeStats* stats) {
  std::vector<std::string_view> styles;
  if (a.get(Attr::StraightHair)) styles.push_back("straight");
  if (a.get(Attr::WavyHair)) styles.push_back("wavy");
  std::vector<std::string_view> colors;
  if (a.get(Attr::BlackHair)) colors.push_back("black");
  if (a.get(Attr::BlondHair)) colors.push_back("blond");
  if (a.get(Attr::BrownHair)) colors.push_back("brown");
  if (a.get(Attr::GrayHair)) colors.push_back("gray");

  auto join_and = [](const std::vector<std::string_view>& words) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) s += " and ";
      s += words[i];
    }
    return s;
  };

  bool bald = a.get(Attr::Bald);
  bool bangs = a.get(Attr::Bangs);
  bool receding = a.get(Attr::RecedingHairline);
  if (!bald && !bangs && !receding && styles.empty() && colors.empty())
    return std::nullopt;

  SentenceQueue q(stats);
  // Color with no style and nothing else reads as a possessive statement
  // rather than a "has" clause.
  if (!colors.empty() && styles.empty() && !bald && !bangs && !receding) {
    q.replace(std::string(male ? "his" : "her") + " hair is " +
              join_and(colors) + " in colour");
    return q.emit();
  }

  std::vector<std::string> clauses;
  if (bald) clauses.push_back("is bald");
  if (!styles.empty()) {
    std::string c = "has " + join_and(styles) + " hair";
    if (!colors.empty()) c += " which is " + join_and(colors) + " in colour";
    clauses.push_back(std::move(c));
  } else if (!colors.empty()) {
    clauses.push_back("has hair which is " + join_and(colors) + " in colour");
  }
  if (bangs) clauses.push_back("has bangs");
  if (receding) clauses.push_back("has a receding hairline");

  q.seed(male ? "he" : "she");
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    if (i) q.push_conjunction("and");
    q.push_phrase(clauses[i]);
  }
  return q.emit();
}

std::optional<std::string> other_features(const AttributeVector& a, bool male,
                                          ComposeStats* stats) {
  bool bushy = a.get(Attr::BushyEyebrows);
  bool arched = a.get(Attr::ArchedEyebrows);
  std::string_view eyebrow_phrase =
      bushy && arched ? "bushy and arched eyebrows"
      : bushy         ? "bushy eyebrows"
                      : "arched eyebrows";

  const Member members[] = {
      {Attr::BigLips, "big lips", ","},
      {Attr::BigNose, "big nose", "and"},
      {Attr::PointyNose, "pointy nose", "and"},
      {Attr::NarrowEyes, "narrow eyes", ","},
      // Both eyebrow attributes share one slot; either one triggers it.
      {bushy ? Attr::BushyEyebrows : Attr::ArchedEyebrows, eyebrow_phrase,
       "with"},
      {Attr::MouthSlightlyOpen, "a slightly open mouth", "and"},
  };
  return render_queue_group(a, male ? "he has" : "she has", members, stats);
}

std::optional<std::string> appearance(const AttributeVector& a, bool male,
                                      ComposeStats* stats) {
  static constexpr Member kComplements[] = {
      {Attr::PaleSkin, "pale skin", ","},
      {Attr::RosyCheeks, "rosy cheeks", ","},
      {Attr::HeavyMakeup, "heavy makeup", "and"},
  };
  bool smiling = a.get(Attr::Smiling);
  bool young = a.get(Attr::Young);
  bool attractive = a.get(Attr::Attractive);
  bool any_complement = false;
  for (const Member& m : kComplements)
    any_complement = any_complement || a.get(m.attr);

  if (!smiling && !young && !attractive && !any_complement)
    return std::nullopt;

  std::string_view noun = male ? "man" : "woman";
  SentenceQueue q(stats);

  if (any_complement) {
    // "The smiling, young attractive woman has rosy cheeks and heavy makeup."
    std::string opener = "the";
    if (smiling) opener += (young || attractive) ? " smiling," : " smiling";
    if (young) opener += " young";
    if (attractive) opener += " attractive";
    opener += ' ';
    opener += noun;
    opener += " has";
    q.seed(opener);
    for (const Member& m : kComplements) {
      if (!a.get(m.attr)) continue;
      if (!q.still_opener()) q.push_conjunction(m.conjunction);
      q.push_phrase(m.phrase);
    }
    return q.emit();
  }

  if (smiling) {
    std::string s = "the";
    if (young) s += " young";
    if (attractive) s += " attractive";
    s += ' ';
    s += noun;
    s += " is smiling";
    q.replace(s);
    return q.emit();
  }

  // Only young/attractive left.
  std::string s = "the ";
  s += noun;
  s += " looks";
  s += young ? " young" : "";
  if (attractive) s += young ? " and attractive" : " attractive";
  q.replace(s);
  return q.emit();
}

std::optional<std::string> accessories(const AttributeVector& a, bool male,
                                       ComposeStats* stats) {
  static constexpr Member kMembers[] = {
      {Attr::WearingEarrings, "earrings", ","},
      {Attr::WearingHat, "a hat", ","},
      {Attr::WearingNecklace, "a necklace", ","},
      {Attr::WearingNecktie, "necktie", "and"},
      {Attr::Eyeglasses, "eyeglasses", "and"},
      {Attr::WearingLipstick, "lipstick", "and"},
  };
  return render_queue_group(a, male ? "he is wearing" : "she is wearing",
                            kMembers, stats);
}

}  // namespace

Caption compose_caption(const AttributeVector& attrs, ComposeStats* stats) {
  Caption c;
  c.male = attrs.get(Attr::Male);
  auto add = [&](std::optional<std::string> s) {
    if (s) c.sentences.push_back(std::move(*s));
  };
  add(face_structure(attrs, c.male, stats));
  add(facial_hair(attrs, c.male, stats));
  add(hair_style(attrs, c.male, stats));
  add(other_features(attrs, c.male, stats));
  add(appearance(attrs, c.male, stats));
  add(accessories(attrs, c.male, stats));
  for (std::size_t i = 0; i < c.sentences.size(); ++i) {
    if (i) c.text += ' ';
    c.text += c.sentences[i];
  }
  return c;
}

namespace {

// Multi-token attribute markers, matched longest-first against the token
// stream. A marker can assert several attributes (the merged eyebrow form).
struct Marker {
  std::vector<std::string_view> tokens;
  std::vector<Attr> attrs;
};

const std::vector<Marker>& markers() {
  static const std::vector<Marker> kMarkers = [] {
    std::vector<Marker> m = {
        {{"chubby", "face"}, {Attr::Chubby}},
        {{"double", "chin"}, {Attr::DoubleChin}},
        {{"oval", "face"}, {Attr::OvalFace}},
        {{"high", "cheekbones"}, {Attr::HighCheekbones}},
        {{"5", "o'clock", "shadow"}, {Attr::FiveOClockShadow}},
        {{"goatee"}, {Attr::Goatee}},
        {{"mustache"}, {Attr::Mustache}},
        {{"sideburns"}, {Attr::Sideburns}},
        {{"bald"}, {Attr::Bald}},
        {{"straight"}, {Attr::StraightHair}},
        {{"wavy"}, {Attr::WavyHair}},
        {{"black"}, {Attr::BlackHair}},
        {{"blond"}, {Attr::BlondHair}},
        {{"brown"}, {Attr::BrownHair}},
        {{"gray"}, {Attr::GrayHair}},
        {{"bangs"}, {Attr::Bangs}},
        {{"a", "receding", "hairline"}, {Attr::RecedingHairline}},
        {{"big", "lips"}, {Attr::BigLips}},
        {{"big", "nose"}, {Attr::BigNose}},
        {{"pointy", "nose"}, {Attr::PointyNose}},
        {{"narrow", "eyes"}, {Attr::NarrowEyes}},
        {{"arched", "eyebrows"}, {Attr::ArchedEyebrows}},
        {{"bushy", "eyebrows"}, {Attr::BushyEyebrows}},
        {{"bushy", "and", "arched", "eyebrows"},
         {Attr::BushyEyebrows, Attr::ArchedEyebrows}},
        {{"a", "slightly", "open", "mouth"}, {Attr::MouthSlightlyOpen}},
        {{"smiling"}, {Attr::Smiling}},
        {{"young"}, {Attr::Young}},
        {{"attractive"}, {Attr::Attractive}},
        {{"pale", "skin"}, {Attr::PaleSkin}},
        {{"rosy", "cheeks"}, {Attr::RosyCheeks}},
        {{"heavy", "makeup"}, {Attr::HeavyMakeup}},
        {{"earrings"}, {Attr::WearingEarrings}},
        {{"a", "hat"}, {Attr::WearingHat}},
        {{"a", "necklace"}, {Attr::WearingNecklace}},
        {{"necktie"}, {Attr::WearingNecktie}},
        {{"eyeglasses"}, {Attr::Eyeglasses}},
        {{"lipstick"}, {Attr::WearingLipstick}},
    };
    // Longest first so "bushy and arched eyebrows" wins over "bushy ...".
    std::stable_sort(m.begin(), m.end(),
                     [](const Marker& a, const Marker& b) {
                       return a.tokens.size() > b.tokens.size();
                     });
    return m;
  }();
  return kMarkers;
}

bool is_grammar_word(std::string_view t) {
  static const std::vector<std::string_view> kWords = {
      "the", "man", "woman", "he",  "she",     "his", "her",
      "has", "is",  "sports", "a",  "and",     "with", "wearing",
      "which", "in", "colour", "hair", "looks"};
  return std::find(kWords.begin(), kWords.end(), t) != kWords.end();
}

}  // namespace

ExtractionResult extract_attributes(std::string_view text) {
  // Tokenize: whitespace split, lowercase, commas and periods stripped.
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::exchange(cur, {}));
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else if (ch == ',' || ch == '.') {
      // sentence and list punctuation carries no attribute information
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  flush();

  ExtractionResult r;
  bool male_seen = false, female_seen = false;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const Marker* hit = nullptr;
    for (const Marker& m : markers()) {
      if (i + m.tokens.size() > tokens.size()) continue;
      bool all = true;
      for (std::size_t j = 0; j < m.tokens.size() && all; ++j)
        all = tokens[i + j] == m.tokens[j];
      if (all) {
        hit = &m;
        break;
      }
    }
    if (hit) {
      for (Attr a : hit->attrs) r.attrs.set(a);
      i += hit->tokens.size();
      continue;
    }
    const std::string& t = tokens[i];
    if (t == "he" || t == "his" || t == "man") male_seen = true;
    if (t == "she" || t == "her" || t == "woman") female_seen = true;
    if (!is_grammar_word(t))
      throw ContractError("caption token outside the closed grammar: '" + t +
                          "'");
    ++i;
  }

  r.gender_known = male_seen || female_seen;
  if (male_seen && !female_seen) r.attrs.set(Attr::Male);
  return r;
}

void write_corpus_jsonl(const std::vector<CorpusRecord>& records,
                        std::ostream& out) {
  for (const CorpusRecord& r : records) {
    std::string bits(kAttributeCount, '0');
    for (std::size_t i = 0; i < kAttributeCount; ++i)
      if (r.attrs.get(i)) bits[i] = '1';
    nlohmann::json j{
        {"image_id", r.image_id}, {"caption", r.caption_text}, {"bits", bits}};
    out << j.dump() << '\n';
  }
}

std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in) {
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("image_id") || !j.contains("caption") ||
        !j.contains("bits"))
      throw ParseError("malformed corpus record", line_no);
    CorpusRecord r;
    r.image_id = j["image_id"].get<std::string>();
    r.caption_text = j["caption"].get<std::string>();
    std::string bits = j["bits"].get<std::string>();
    if (bits.size() != kAttributeCount)
      throw ParseError("bits field must have 40 characters", line_no);
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
      if (bits[i] != '0' && bits[i] != '1')
        throw ParseError("bits field must be 0/1", line_no);
      r.attrs.set(i, bits[i] == '1');
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_corpus_tsv(const std::vector<CorpusRecord>& records,
                      std::ostream& out) {
  for (const CorpusRecord& r : records)
    out << r.image_id << '\t' << r.caption_text << '\n';
}

}  // namespace t2f
