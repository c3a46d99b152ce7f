#include "t2f/attributes.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "t2f/error.hpp"

namespace t2f {

const std::array<std::string_view, kAttributeCount>& attribute_names() {
  static const std::array<std::string_view, kAttributeCount> names = {
      "5_o_Clock_Shadow", "Arched_Eyebrows",  "Attractive",
      "Bags_Under_Eyes",  "Bald",             "Bangs",
      "Big_Lips",         "Big_Nose",         "Black_Hair",
      "Blond_Hair",       "Blurry",           "Brown_Hair",
      "Bushy_Eyebrows",   "Chubby",           "Double_Chin",
      "Eyeglasses",       "Goatee",           "Gray_Hair",
      "Heavy_Makeup",     "High_Cheekbones",  "Male",
      "Mouth_Slightly_Open", "Mustache",      "Narrow_Eyes",
      "No_Beard",         "Oval_Face",        "Pale_Skin",
      "Pointy_Nose",      "Receding_Hairline", "Rosy_Cheeks",
      "Sideburns",        "Smiling",          "Straight_Hair",
      "Wavy_Hair",        "Wearing_Earrings", "Wearing_Hat",
      "Wearing_Lipstick", "Wearing_Necklace", "Wearing_Necktie",
      "Young",
  };
  return names;
}

std::optional<std::size_t> attribute_index(std::string_view name) {
  static const auto* lookup = [] {
    auto* m = new std::unordered_map<std::string_view, std::size_t>();
    const auto& names = attribute_names();
    for (std::size_t i = 0; i < names.size(); ++i) m->emplace(names[i], i);
    return m;
  }();
  auto it = lookup->find(name);
  if (it == lookup->end()) return std::nullopt;
  return it->second;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(std::move(tok));
  return out;
}

}  // namespace

std::vector<AttributeRecord> parse_attr_file(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line))
    throw ParseError("empty attribute file", 1);
  ++lineno;
  std::size_t declared = 0;
  {
    auto toks = split_ws(line);
    if (toks.size() != 1)
      throw ParseError("expected a record count, got '" + line + "'", lineno);
    try {
      declared = std::stoul(toks[0]);
    } catch (const std::exception&) {
      throw ParseError("bad record count '" + toks[0] + "'", lineno);
    }
  }

  if (!std::getline(in, line))
    throw ParseError("missing attribute-name header", 2);
  ++lineno;
  auto header = split_ws(line);
  if (header.size() != kAttributeCount)
    throw ParseError("expected " + std::to_string(kAttributeCount) +
                         " attribute names, got " +
                         std::to_string(header.size()),
                     lineno);
  // Columns may appear in any order; map each to its canonical slot.
  std::array<std::size_t, kAttributeCount> col_to_attr{};
  std::array<bool, kAttributeCount> seen{};
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto idx = attribute_index(header[c]);
    if (!idx)
      throw ParseError("unknown attribute name '" + header[c] + "'", lineno);
    if (seen[*idx])
      throw ParseError("duplicate attribute name '" + header[c] + "'", lineno);
    seen[*idx] = true;
    col_to_attr[c] = *idx;
  }

  std::vector<AttributeRecord> records;
  records.reserve(declared);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto toks = split_ws(line);
    if (toks.size() != 1 + kAttributeCount)
      throw ParseError("expected filename plus " +
                           std::to_string(kAttributeCount) + " values, got " +
                           std::to_string(toks.size()) + " fields",
                       lineno);
    AttributeRecord rec;
    rec.image_id = toks[0];
    for (std::size_t c = 0; c < kAttributeCount; ++c) {
      const std::string& v = toks[1 + c];
      if (v == "1")
        rec.attrs.set(col_to_attr[c], true);
      else if (v == "-1")
        rec.attrs.set(col_to_attr[c], false);
      else
        throw ParseError("value '" + v + "' for " +
                             std::string(attribute_names()[col_to_attr[c]]) +
                             " is outside {-1, 1}",
                         lineno);
    }
    records.push_back(std::move(rec));
  }
  if (records.size() != declared)
    throw ParseError("header declared " + std::to_string(declared) +
                         " records but file has " +
                         std::to_string(records.size()),
                     lineno);
  return records;
}

std::vector<AttributeRecord> parse_attr_file_path(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open attribute file: " + path);
  return parse_attr_file(in);
}

void write_attr_file(const std::vector<AttributeRecord>& records,
                     std::ostream& out) {
  out << records.size() << "\n";
  const auto& names = attribute_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    out << (i ? " " : "") << names[i];
  out << "\n";
  for (const auto& rec : records) {
    out << rec.image_id;
    for (std::size_t i = 0; i < kAttributeCount; ++i)
      out << (rec.attrs.get(i) ? " 1" : " -1");
    out << "\n";
  }
}

void write_attr_file_path(const std::vector<AttributeRecord>& records,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write attribute file: " + path);
  write_attr_file(records, out);
  if (!out) throw IoError("failed writing attribute file: " + path);
}

}  // namespace t2f
