#include "t2f/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "t2f/error.hpp"
#include "t2f/ppm.hpp"

namespace t2f {
namespace {

// All geometry lives in a continuous 16-unit square; a pixel (x, y) at image
// size s = 16u covers the unit-space rect [x/u, (x+1)/u) x [y/u, (y+1)/u).
// Regions below are [X0, X1) x [Y0, Y1) in those units.
//
// Layout: hat band Y 0-2 (X 2-14), hair band Y 2-4 (X 2-14), face ellipse
// centered (8, 9) with gendered half-width, eyes at Y 7, glasses frames
// Y 6-9, mustache bar Y 10-11, mouth Y 11-13 (arc up when smiling), goatee
// Y 13-14, margin marks for non-probe-able attributes Y 14-16.

struct Rgb {
  double r, g, b;
};

constexpr Rgb kBackground{0.15, 0.18, 0.22};
constexpr Rgb kSkin{0.80, 0.60, 0.50};
constexpr Rgb kHat{0.50, 0.05, 0.50};
constexpr Rgb kBlack{0.05, 0.05, 0.05};
constexpr Rgb kBlond{0.90, 0.86, 0.50};
constexpr Rgb kBrown{0.40, 0.25, 0.10};
constexpr Rgb kGray{0.60, 0.60, 0.60};
constexpr Rgb kNeutralHair{0.20, 0.50, 0.70};
constexpr Rgb kFrame{0.10, 0.10, 0.15};
constexpr Rgb kFacialHair{0.15, 0.08, 0.05};
constexpr Rgb kMouth{0.70, 0.20, 0.20};
constexpr Rgb kMark{0.95, 0.90, 0.10};

Rgb operator+(Rgb a, Rgb b) { return {a.r + b.r, a.g + b.g, a.b + b.b}; }

double dist(Rgb a, Rgb b) {
  double dr = a.r - b.r, dg = a.g - b.g, db = a.b - b.b;
  return std::sqrt(dr * dr + dg * dg + db * db);
}

std::size_t scale_of(const TensorD& image) {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != image.dim(2) ||
      image.dim(1) % 16 != 0 || image.dim(1) == 0)
    throw ContractError("probe needs a square [3, s, s] image with s a "
                        "multiple of 16, got " +
                        shape_str(image.shape()));
  return image.dim(1) / 16;
}

// Painter over the [-1, 1] tensor that takes [0, 1] colors.
class Canvas {
 public:
  Canvas(TensorD& image, std::size_t u) : d_(image.mutable_data()), u_(u) {}

  void fill(Rgb c) { rect(0, 16, 0, 16, c); }

  // Unit-space rect: covers pixels [X0*u, X1*u) x [Y0*u, Y1*u).
  void rect(double x0, double x1, double y0, double y1, Rgb c) {
    const std::size_t s = 16 * u_;
    auto lo = [&](double v) {
      return static_cast<std::size_t>(std::lround(v * static_cast<double>(u_)));
    };
    for (std::size_t y = lo(y0); y < std::min(lo(y1), s); ++y)
      for (std::size_t x = lo(x0); x < std::min(lo(x1), s); ++x) set(x, y, c);
  }

  void ellipse(double cx, double cy, double a, double b, Rgb c) {
    const std::size_t s = 16 * u_;
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        double px = (x + 0.5) / u_, py = (y + 0.5) / u_;
        double nx = (px - cx) / a, ny = (py - cy) / b;
        if (nx * nx + ny * ny <= 1.0) set(x, y, c);
      }
  }

 private:
  void set(std::size_t x, std::size_t y, Rgb c) {
    const std::size_t s = 16 * u_;
    d_[(0 * s + y) * s + x] = 2.0 * std::clamp(c.r, 0.0, 1.0) - 1.0;
    d_[(1 * s + y) * s + x] = 2.0 * std::clamp(c.g, 0.0, 1.0) - 1.0;
    d_[(2 * s + y) * s + x] = 2.0 * std::clamp(c.b, 0.0, 1.0) - 1.0;
  }

  std::span<double> d_;
  std::size_t u_;
};

Rgb pixel(const TensorD& image, std::size_t x, std::size_t y) {
  const std::size_t s = image.dim(1);
  auto c01 = [&](std::size_t ch) {
    return (image.at((ch * s + y) * s + x) + 1.0) * 0.5;
  };
  return {c01(0), c01(1), c01(2)};
}

struct RegionStats {
  Rgb mean;
  double max_std;  // largest per-channel standard deviation
  double mean_luminance;
};

RegionStats region_stats(const TensorD& image, double x0, double x1, double y0,
                         double y1) {
  const std::size_t u = image.dim(1) / 16;
  auto lo = [&](double v) {
    return static_cast<std::size_t>(std::lround(v * static_cast<double>(u)));
  };
  std::array<double, 3> sum{}, sum_sq{};
  std::size_t n = 0;
  for (std::size_t y = lo(y0); y < lo(y1); ++y)
    for (std::size_t x = lo(x0); x < lo(x1); ++x) {
      Rgb p = pixel(image, x, y);
      const double ch[3] = {p.r, p.g, p.b};
      for (int c = 0; c < 3; ++c) {
        sum[c] += ch[c];
        sum_sq[c] += ch[c] * ch[c];
      }
      ++n;
    }
  RegionStats st{};
  if (n == 0) throw ContractError("empty probe region");
  st.mean = {sum[0] / n, sum[1] / n, sum[2] / n};
  for (int c = 0; c < 3; ++c) {
    double var = std::max(0.0, sum_sq[c] / n - (sum[c] / n) * (sum[c] / n));
    st.max_std = std::max(st.max_std, std::sqrt(var));
  }
  st.mean_luminance = (st.mean.r + st.mean.g + st.mean.b) / 3.0;
  return st;
}

bool flat_match(const TensorD& image, double x0, double x1, double y0,
                double y1, Rgb target, double radius) {
  auto st = region_stats(image, x0, x1, y0, y1);
  return st.max_std < 0.15 && dist(st.mean, target) < radius;
}

// Attributes with a margin mark instead of a dedicated drawing. The rank in
// this list fixes the mark cell, so the encoding stays injective on the full
// vector even where the face geometry would not distinguish two attributes.
const std::vector<Attr>& marked_attributes() {
  static const std::vector<Attr> kMarked = [] {
    std::vector<Attr> m;
    const auto& probed = probeable_attributes();
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
      Attr a = static_cast<Attr>(i);
      if (std::find(probed.begin(), probed.end(), a) == probed.end())
        m.push_back(a);
    }
    return m;
  }();
  return kMarked;
}

}  // namespace

const std::vector<Attr>& probeable_attributes() {
  static const std::vector<Attr> kProbeable = {
      Attr::BlackHair, Attr::BlondHair,  Attr::BrownHair, Attr::GrayHair,
      Attr::Bald,      Attr::WearingHat, Attr::Smiling,   Attr::Eyeglasses,
      Attr::Mustache,  Attr::Goatee,     Attr::Male,
  };
  return kProbeable;
}

TensorD render_procedural_face(const AttributeVector& attrs, std::size_t size,
                               std::uint64_t jitter_seed) {
  if (size % 16 != 0 || size == 0)
    throw ContractError("face size must be a positive multiple of 16, got " +
                        std::to_string(size));
  const std::size_t u = size / 16;

  // Per-identity tints, bounded so every tinted color stays well inside the
  // probe radius of its constant.
  Rng jr(Rng::derive(jitter_seed, "tint", 0));
  auto tint = [&] {
    return Rgb{jr.uniform(-0.03, 0.03), jr.uniform(-0.03, 0.03),
               jr.uniform(-0.03, 0.03)};
  };
  Rgb bg_t = tint(), skin_t = tint(), hair_t = tint(), hat_t = tint();

  TensorD image = TensorD::zeros({3, size, size});
  Canvas canvas(image, u);
  canvas.fill(kBackground + bg_t);

  const bool male = attrs.get(Attr::Male);
  double a = (male ? 6.4 : 5.1) + (attrs.get(Attr::Chubby) ? 0.3 : 0.0);
  double b = attrs.get(Attr::OvalFace) ? 5.4 : 4.8;
  canvas.ellipse(8.0, 9.0, a, b, kSkin + skin_t);

  Rgb band = kNeutralHair;
  if (attrs.get(Attr::Bald))
    band = kSkin;
  else if (attrs.get(Attr::BlackHair))
    band = kBlack;
  else if (attrs.get(Attr::BlondHair))
    band = kBlond;
  else if (attrs.get(Attr::BrownHair))
    band = kBrown;
  else if (attrs.get(Attr::GrayHair))
    band = kGray;
  canvas.rect(2, 14, 2, 4, band + hair_t);

  if (attrs.get(Attr::WearingHat)) canvas.rect(2, 14, 0, 2, kHat + hat_t);

  canvas.rect(5, 6, 7, 8, kBlack);  // eyes
  canvas.rect(10, 11, 7, 8, kBlack);

  if (attrs.get(Attr::Eyeglasses)) {
    for (double ex : {4.0, 9.0}) {
      canvas.rect(ex, ex + 3, 6, 7, kFrame);
      canvas.rect(ex, ex + 3, 8, 9, kFrame);
      canvas.rect(ex, ex + 1, 7, 8, kFrame);
      canvas.rect(ex + 2, ex + 3, 7, 8, kFrame);
    }
  }

  if (attrs.get(Attr::Mustache)) canvas.rect(6, 10, 10, 11, kFacialHair);

  if (attrs.get(Attr::Smiling)) {
    canvas.rect(5, 6, 11, 12, kMouth);  // raised corners
    canvas.rect(10, 11, 11, 12, kMouth);
    canvas.rect(6, 10, 12, 13, kMouth);
  } else {
    canvas.rect(6, 10, 11, 12, kMouth);
  }

  if (attrs.get(Attr::Goatee)) canvas.rect(7, 9, 13, 14, kFacialHair);

  const auto& marked = marked_attributes();
  for (std::size_t j = 0; j < marked.size(); ++j) {
    if (!attrs.get(marked[j])) continue;
    double col = static_cast<double>(j % 16);
    double row = 14.0 + static_cast<double>(j / 16);
    canvas.rect(col, col + 1, row, row + 1, kMark);
  }
  return image;
}

std::optional<bool> probe_attribute(const TensorD& image, Attr attribute) {
  const std::size_t u = scale_of(image);
  const auto& probed = probeable_attributes();
  if (std::find(probed.begin(), probed.end(), attribute) == probed.end())
    return std::nullopt;

  switch (attribute) {
    case Attr::BlackHair:
      return flat_match(image, 4, 12, 2, 4, kBlack, 0.10);
    case Attr::BlondHair:
      return flat_match(image, 4, 12, 2, 4, kBlond, 0.10);
    case Attr::BrownHair:
      return flat_match(image, 4, 12, 2, 4, kBrown, 0.10);
    case Attr::GrayHair:
      return flat_match(image, 4, 12, 2, 4, kGray, 0.10);
    case Attr::Bald:
      return flat_match(image, 4, 12, 2, 4, kSkin, 0.10);
    case Attr::WearingHat:
      return flat_match(image, 4, 12, 0, 2, kHat, 0.10);
    case Attr::Smiling: {
      auto below = region_stats(image, 6, 10, 12, 13);
      auto at = region_stats(image, 6, 10, 11, 12);
      return dist(below.mean, kMouth) < 0.25 && dist(at.mean, kMouth) > 0.25;
    }
    case Attr::Eyeglasses: {
      // Frame bars above and below both eyes are dark; the nose bridge
      // between the lenses stays skin.
      double lum = 0;
      for (double ex : {4.0, 9.0}) {
        lum += region_stats(image, ex, ex + 3, 6, 7).mean_luminance;
        lum += region_stats(image, ex, ex + 3, 8, 9).mean_luminance;
      }
      lum /= 4.0;
      auto bridge = region_stats(image, 7, 9, 7, 8);
      return lum < 0.25 && dist(bridge.mean, kSkin) < 0.25;
    }
    case Attr::Mustache: {
      auto bar = region_stats(image, 6, 10, 10, 11);
      auto side = region_stats(image, 4, 6, 10, 11);
      return dist(bar.mean, kFacialHair) < 0.20 &&
             dist(side.mean, kSkin) < 0.25;
    }
    case Attr::Goatee: {
      auto chin = region_stats(image, 7, 9, 13, 14);
      auto left = region_stats(image, 6, 7, 13, 14);
      auto right = region_stats(image, 9, 10, 13, 14);
      return dist(chin.mean, kFacialHair) < 0.20 &&
             dist(left.mean, kSkin) < 0.30 && dist(right.mean, kSkin) < 0.30;
    }
    case Attr::Male: {
      // A face must be present (flat skin at the cheek line), then the jaw
      // width at Y=9 separates the gendered ellipse widths.
      auto cheek = region_stats(image, 6, 10, 9, 10);
      if (cheek.max_std >= 0.15 || dist(cheek.mean, kSkin) >= 0.25)
        return false;
      Rgb bg_ref = pixel(image, 0, 0);
      const std::size_t s = image.dim(1), y = 9 * u;
      std::size_t best = 0, run = 0;
      for (std::size_t x = 0; x < s; ++x) {
        if (dist(pixel(image, x, y), bg_ref) > 0.25) {
          best = std::max(best, ++run);
        } else {
          run = 0;
        }
      }
      return best > 11 * u;
    }
    default:
      return std::nullopt;
  }
}

AttributeVector sample_attributes(Rng& rng) {
  AttributeVector v;
  auto flip = [&](double p) { return rng.uniform() < p; };

  const bool male = flip(0.42);
  v.set(Attr::Male, male);

  // Hair: bald excludes color; otherwise at most one color.
  if (flip(male ? 0.05 : 0.01)) {
    v.set(Attr::Bald);
  } else {
    double r = rng.uniform();
    if (r < 0.28)
      v.set(Attr::BlackHair);
    else if (r < 0.28 + (male ? 0.05 : 0.28))
      v.set(Attr::BlondHair);
    else if (r < 0.28 + (male ? 0.05 : 0.28) + 0.22)
      v.set(Attr::BrownHair);
    else if (r < 0.28 + (male ? 0.05 : 0.28) + 0.22 + 0.07)
      v.set(Attr::GrayHair);
  }
  double style = rng.uniform();
  if (style < 0.25)
    v.set(Attr::StraightHair);
  else if (style < 0.55)
    v.set(Attr::WavyHair);
  v.set(Attr::Bangs, flip(0.15));
  v.set(Attr::RecedingHairline, flip(male ? 0.12 : 0.03));

  if (male) {
    v.set(Attr::FiveOClockShadow, flip(0.14));
    v.set(Attr::Goatee, flip(0.08));
    v.set(Attr::Mustache, flip(0.05));
    v.set(Attr::Sideburns, flip(0.06));
  }
  bool any_beard = v.get(Attr::FiveOClockShadow) || v.get(Attr::Goatee) ||
                   v.get(Attr::Mustache) || v.get(Attr::Sideburns);
  v.set(Attr::NoBeard, !any_beard);

  v.set(Attr::Chubby, flip(0.06));
  v.set(Attr::DoubleChin, flip(0.05));
  v.set(Attr::OvalFace, flip(0.25));
  v.set(Attr::HighCheekbones, flip(0.45));

  v.set(Attr::BigLips, flip(0.24));
  v.set(Attr::BigNose, flip(0.24));
  v.set(Attr::PointyNose, flip(0.28));
  v.set(Attr::NarrowEyes, flip(0.12));
  v.set(Attr::ArchedEyebrows, flip(0.27));
  v.set(Attr::BushyEyebrows, flip(0.14));
  v.set(Attr::MouthSlightlyOpen, flip(0.48));

  v.set(Attr::Smiling, flip(0.48));
  v.set(Attr::Young, flip(0.75));
  v.set(Attr::Attractive, flip(0.50));
  v.set(Attr::PaleSkin, flip(0.04));
  v.set(Attr::RosyCheeks, flip(male ? 0.01 : 0.08));
  v.set(Attr::HeavyMakeup, flip(male ? 0.002 : 0.55));

  v.set(Attr::WearingHat, flip(0.06));
  v.set(Attr::Eyeglasses, flip(0.07));
  v.set(Attr::WearingEarrings, flip(male ? 0.01 : 0.30));
  v.set(Attr::WearingNecklace, flip(male ? 0.005 : 0.25));
  v.set(Attr::WearingNecktie, flip(male ? 0.15 : 0.005));
  v.set(Attr::WearingLipstick, flip(male ? 0.005 : 0.55));

  v.set(Attr::BagsUnderEyes, flip(0.20));
  v.set(Attr::Blurry, flip(0.05));
  return v;
}

SynthDataset generate_dataset(std::size_t n, std::size_t class_count,
                              std::uint64_t seed, std::size_t size,
                              const EmbeddingConfig& embedding) {
  if (n == 0 || class_count == 0 || class_count > n)
    throw ContractError("need 1 <= class_count <= n");

  // Distinct attribute vectors, one per identity class.
  Rng rng(Rng::derive(seed, "class_attrs", 0));
  std::vector<AttributeVector> class_attrs;
  std::set<std::array<bool, kAttributeCount>> seen;
  while (class_attrs.size() < class_count) {
    AttributeVector v = sample_attributes(rng);
    if (seen.insert(v.bits()).second) class_attrs.push_back(v);
  }

  std::vector<Caption> class_captions(class_count);
  std::vector<TextEmbedding> class_embeddings(class_count);
  for (std::size_t c = 0; c < class_count; ++c) {
    class_captions[c] = compose_caption(class_attrs[c]);
    class_embeddings[c] = embed_caption(class_captions[c].text, embedding);
  }

  SynthDataset ds;
  ds.class_count = class_count;
  ds.train_count = n * 3 / 4;
  ds.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    DatasetRecord r;
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.ppm", i);
    r.image_id = name;
    r.identity_class = i % class_count;
    r.attrs = class_attrs[r.identity_class];
    r.caption = class_captions[r.identity_class];
    r.embedding = class_embeddings[r.identity_class];
    r.image = render_procedural_face(r.attrs, size,
                                     Rng::derive(seed, "jitter", i).next_u64());
    ds.records.push_back(std::move(r));
  }
  return ds;
}

std::vector<DatasetRecord> load_celeba_format(const std::string& image_dir,
                                              const std::string& attr_file,
                                              std::size_t size,
                                              const EmbeddingConfig& embedding) {
  auto attr_records = parse_attr_file_path(attr_file);

  std::string missing;
  for (const auto& ar : attr_records) {
    if (!std::filesystem::exists(std::filesystem::path(image_dir) /
                                 ar.image_id)) {
      if (!missing.empty()) missing += ", ";
      missing += ar.image_id;
    }
  }
  if (!missing.empty())
    throw IoError("images referenced by " + attr_file + " are missing from " +
                  image_dir + ": " + missing);

  std::vector<DatasetRecord> records;
  records.reserve(attr_records.size());
  for (auto& ar : attr_records) {
    DatasetRecord r;
    r.image_id = ar.image_id;
    r.attrs = ar.attrs;
    r.image = resize_nearest(
        read_ppm_path((std::filesystem::path(image_dir) / ar.image_id)
                          .string()),
        size);
    r.caption = compose_caption(r.attrs);
    r.embedding = embed_caption(r.caption.text, embedding);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace t2f
