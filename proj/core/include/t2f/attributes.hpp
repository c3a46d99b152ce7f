#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace t2f {

inline constexpr std::size_t kAttributeCount = 40;

// Canonical order of the 40 CelebA facial attributes. Attribute files, bit
// vectors, and corpus records all index against this order.
enum class Attr : std::size_t {
  FiveOClockShadow = 0,
  ArchedEyebrows,
  Attractive,
  BagsUnderEyes,
  Bald,
  Bangs,
  BigLips,
  BigNose,
  BlackHair,
  BlondHair,
  Blurry,
  BrownHair,
  BushyEyebrows,
  Chubby,
  DoubleChin,
  Eyeglasses,
  Goatee,
  GrayHair,
  HeavyMakeup,
  HighCheekbones,
  Male,
  MouthSlightlyOpen,
  Mustache,
  NarrowEyes,
  NoBeard,
  OvalFace,
  PaleSkin,
  PointyNose,
  RecedingHairline,
  RosyCheeks,
  Sideburns,
  Smiling,
  StraightHair,
  WavyHair,
  WearingEarrings,
  WearingHat,
  WearingLipstick,
  WearingNecklace,
  WearingNecktie,
  Young,
};

const std::array<std::string_view, kAttributeCount>& attribute_names();

// Index for a canonical name like "Blond_Hair"; nullopt when unknown.
std::optional<std::size_t> attribute_index(std::string_view name);

// 40 boolean flags in canonical order.
class AttributeVector {
 public:
  AttributeVector() { bits_.fill(false); }

  bool get(Attr a) const { return bits_[static_cast<std::size_t>(a)]; }
  bool get(std::size_t i) const { return bits_.at(i); }
  void set(Attr a, bool v = true) { bits_[static_cast<std::size_t>(a)] = v; }
  void set(std::size_t i, bool v) { bits_.at(i) = v; }

  bool operator==(const AttributeVector&) const = default;

  const std::array<bool, kAttributeCount>& bits() const { return bits_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (bool b : bits_) n += b;
    return n;
  }

 private:
  std::array<bool, kAttributeCount> bits_;
};

struct AttributeRecord {
  std::string image_id;
  AttributeVector attrs;
};

// Reads the CelebA attribute-list layout: a record-count line, a line of 40
// attribute names, then one row per image of "filename v1 .. v40" with each
// value in {-1, 1}. Malformed rows, unknown names, and count mismatches
// raise ParseError with the offending line number.
std::vector<AttributeRecord> parse_attr_file(std::istream& in);
std::vector<AttributeRecord> parse_attr_file_path(const std::string& path);

// Writes the same layout back in normalized form: canonical header names and
// single-space separated values. parse(write(records)) round-trips exactly.
void write_attr_file(const std::vector<AttributeRecord>& records,
                     std::ostream& out);
void write_attr_file_path(const std::vector<AttributeRecord>& records,
                          const std::string& path);

}  // namespace t2f
