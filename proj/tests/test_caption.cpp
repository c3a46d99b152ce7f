#include <chrono>
#include <sstream>

#include "doctest.h"
#include "t2f/caption.hpp"
#include "t2f/error.hpp"
#include "t2f/rng.hpp"

using namespace t2f;

namespace {

AttributeVector attrs_of(std::initializer_list<Attr> on) {
  AttributeVector v;
  for (Attr a : on) v.set(a);
  return v;
}

// Attributes that appear in some sentence template. Everything else
// (Bags_Under_Eyes, Blurry, No_Beard) is silent, and Male only steers
// pronouns.
const std::vector<Attr> kMapped = {
    Attr::Chubby,         Attr::DoubleChin,      Attr::OvalFace,
    Attr::HighCheekbones, Attr::FiveOClockShadow, Attr::Goatee,
    Attr::Mustache,       Attr::Sideburns,       Attr::Bald,
    Attr::StraightHair,   Attr::BlackHair,       Attr::BlondHair,
    Attr::BrownHair,      Attr::GrayHair,        Attr::Bangs,
    Attr::WavyHair,       Attr::RecedingHairline, Attr::BigLips,
    Attr::BigNose,        Attr::PointyNose,      Attr::NarrowEyes,
    Attr::ArchedEyebrows, Attr::BushyEyebrows,   Attr::MouthSlightlyOpen,
    Attr::Smiling,        Attr::Young,           Attr::Attractive,
    Attr::PaleSkin,       Attr::RosyCheeks,      Attr::HeavyMakeup,
    Attr::WearingEarrings, Attr::WearingHat,     Attr::WearingNecklace,
    Attr::WearingNecktie, Attr::Eyeglasses,      Attr::WearingLipstick,
};

void check_round_trip(const AttributeVector& v) {
  Caption c = compose_caption(v);
  auto r = extract_attributes(c.text);
  for (Attr a : kMapped) {
    INFO("attribute ", attribute_names()[static_cast<std::size_t>(a)],
         " caption: ", c.text);
    CHECK(r.attrs.get(a) == v.get(a));
  }
  if (!c.sentences.empty()) {
    CHECK(r.gender_known);
    CHECK(r.attrs.get(Attr::Male) == v.get(Attr::Male));
  }
}

}  // namespace

TEST_SUITE("caption") {

TEST_CASE("goatee and mustache worked example") {
  auto c = compose_caption(attrs_of({Attr::Male, Attr::Goatee, Attr::Mustache}));
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0] == "He sports a goatee and mustache.");
  CHECK(c.text == "He sports a goatee and mustache.");
}

TEST_CASE("sideburns alone short-circuits the opener") {
  auto c = compose_caption(attrs_of({Attr::Male, Attr::Sideburns}));
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0] == "He has sideburns.");
  auto f = compose_caption(attrs_of({Attr::Sideburns}));
  CHECK(f.sentences[0] == "She has sideburns.");
}

TEST_CASE("full facial hair queue walk") {
  auto c = compose_caption(attrs_of({Attr::Male, Attr::FiveOClockShadow,
                                     Attr::Goatee, Attr::Mustache,
                                     Attr::Sideburns}));
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0] ==
        "He sports a 5 o'clock shadow, goatee and mustache with sideburns.");
}

TEST_CASE("all sixteen facial hair subsets round-trip for both genders") {
  const Attr group[] = {Attr::FiveOClockShadow, Attr::Goatee, Attr::Mustache,
                        Attr::Sideburns};
  for (int male = 0; male < 2; ++male) {
    for (unsigned mask = 0; mask < 16; ++mask) {
      AttributeVector v;
      if (male) v.set(Attr::Male);
      for (int b = 0; b < 4; ++b)
        if (mask & (1u << b)) v.set(group[b]);
      check_round_trip(v);
    }
  }
}

TEST_CASE("figure template family") {
  auto v = attrs_of({Attr::HighCheekbones, Attr::WavyHair,
                     Attr::ArchedEyebrows, Attr::Young, Attr::Attractive,
                     Attr::HeavyMakeup, Attr::WearingLipstick});
  auto c = compose_caption(v);
  REQUIRE(c.sentences.size() == 5);
  CHECK(c.sentences[0] == "The woman has high cheekbones.");
  CHECK(c.sentences[1] == "She has wavy hair.");
  CHECK(c.sentences[2] == "She has arched eyebrows.");
  CHECK(c.sentences[3] == "The young attractive woman has heavy makeup.");
  CHECK(c.sentences[4] == "She is wearing lipstick.");
}

TEST_CASE("feature sentence conjunction walk") {
  auto c = compose_caption(attrs_of({Attr::Male, Attr::BigLips,
                                     Attr::PointyNose, Attr::ArchedEyebrows,
                                     Attr::MouthSlightlyOpen}));
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0] ==
        "He has big lips and pointy nose with arched eyebrows and a slightly "
        "open mouth.");

  auto d = compose_caption(attrs_of({Attr::Male, Attr::BigLips, Attr::BigNose,
                                     Attr::NarrowEyes,
                                     Attr::MouthSlightlyOpen}));
  CHECK(d.sentences[0] ==
        "He has big lips and big nose, narrow eyes and a slightly open "
        "mouth.");
}

TEST_CASE("both eyebrow attributes merge into one phrase") {
  auto c = compose_caption(attrs_of({Attr::Male, Attr::BigNose,
                                     Attr::BushyEyebrows,
                                     Attr::ArchedEyebrows}));
  CHECK(c.sentences[0] == "He has big nose with bushy and arched eyebrows.");
  check_round_trip(attrs_of({Attr::BushyEyebrows, Attr::ArchedEyebrows}));
  check_round_trip(attrs_of({Attr::BushyEyebrows}));
}

TEST_CASE("hair sentence forms") {
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::StraightHair,
                                  Attr::BlackHair}))
            .sentences[0] == "He has straight hair which is black in colour.");
  CHECK(compose_caption(attrs_of({Attr::BlackHair})).sentences[0] ==
        "Her hair is black in colour.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::BlackHair})).sentences[0] ==
        "His hair is black in colour.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::RecedingHairline}))
            .sentences[0] == "He has a receding hairline.");
  CHECK(compose_caption(attrs_of({Attr::WavyHair})).sentences[0] ==
        "She has wavy hair.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::Bald, Attr::Bangs}))
            .sentences[0] == "He is bald and has bangs.");
  CHECK(compose_caption(attrs_of({Attr::BrownHair, Attr::Bangs})).sentences[0] ==
        "She has hair which is brown in colour and has bangs.");
}

TEST_CASE("appearance sentence forms") {
  CHECK(compose_caption(attrs_of({Attr::Smiling, Attr::Young, Attr::RosyCheeks,
                                  Attr::HeavyMakeup}))
            .sentences[0] ==
        "The smiling, young woman has rosy cheeks and heavy makeup.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::Young, Attr::Attractive,
                                  Attr::Smiling}))
            .sentences[0] == "The young attractive man is smiling.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::Attractive})).sentences[0] ==
        "The man looks attractive.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::Young, Attr::Attractive}))
            .sentences[0] == "The man looks young and attractive.");
  CHECK(compose_caption(attrs_of({Attr::Smiling})).sentences[0] ==
        "The woman is smiling.");
  CHECK(compose_caption(attrs_of({Attr::PaleSkin, Attr::RosyCheeks,
                                  Attr::HeavyMakeup}))
            .sentences[0] ==
        "The woman has pale skin, rosy cheeks and heavy makeup.");
}

TEST_CASE("accessory sentence forms") {
  CHECK(compose_caption(attrs_of({Attr::WearingEarrings, Attr::WearingLipstick}))
            .sentences[0] == "She is wearing earrings and lipstick.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::WearingNecktie}))
            .sentences[0] == "He is wearing necktie.");
  CHECK(compose_caption(attrs_of({Attr::WearingNecklace, Attr::WearingLipstick}))
            .sentences[0] == "She is wearing a necklace and lipstick.");
  CHECK(compose_caption(attrs_of({Attr::Male, Attr::WearingHat,
                                  Attr::Eyeglasses}))
            .sentences[0] == "He is wearing a hat and eyeglasses.");
}

TEST_CASE("unmapped attributes and bare Male yield no sentences") {
  CHECK(compose_caption(attrs_of({Attr::Male})).sentences.empty());
  CHECK(compose_caption(attrs_of({Attr::Male})).text.empty());
  auto c = compose_caption(
      attrs_of({Attr::BagsUnderEyes, Attr::Blurry, Attr::NoBeard}));
  CHECK(c.sentences.empty());
}

TEST_CASE("empty caption extracts to nothing with unknown gender") {
  auto r = extract_attributes("");
  CHECK(!r.gender_known);
  CHECK(r.attrs.count() == 0);
}

TEST_CASE("corrupted token is rejected by name") {
  try {
    extract_attributes("He sports a gotee.");
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("gotee") != std::string::npos);
  }
}

TEST_CASE("composition is deterministic") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    AttributeVector v;
    for (std::size_t i = 0; i < kAttributeCount; ++i)
      v.set(i, rng.below(2) == 1);
    CHECK(compose_caption(v).text == compose_caption(v).text);
  }
}

TEST_CASE("ten thousand random vectors round-trip") {
  Rng rng(20260822);
  auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 10000; ++trial) {
    AttributeVector v;
    for (std::size_t i = 0; i < kAttributeCount; ++i)
      v.set(i, rng.below(2) == 1);
    check_round_trip(v);
  }
  auto elapsed = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  CHECK(elapsed < 10.0);
}

TEST_CASE("queue operation count stays linear in the attribute count") {
  AttributeVector everything;
  for (Attr a : kMapped) everything.set(a);
  everything.set(Attr::Male);
  ComposeStats stats;
  auto c = compose_caption(everything, &stats);
  CHECK(c.sentences.size() == 6);
  CHECK(stats.queue_ops <= 4 * kAttributeCount);
}

TEST_CASE("sentence count never exceeds six and order is fixed") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    AttributeVector v;
    for (std::size_t i = 0; i < kAttributeCount; ++i)
      v.set(i, rng.below(2) == 1);
    auto c = compose_caption(v);
    CHECK(c.sentences.size() <= 6);
  }
}

TEST_CASE("corpus files round-trip and keep the tsv shape") {
  std::vector<CorpusRecord> records(2);
  records[0].image_id = "000001.ppm";
  records[0].attrs = attrs_of({Attr::Male, Attr::Goatee, Attr::Mustache});
  records[0].caption_text = compose_caption(records[0].attrs).text;
  records[1].image_id = "000002.ppm";
  records[1].attrs = attrs_of({Attr::Smiling});
  records[1].caption_text = compose_caption(records[1].attrs).text;

  std::ostringstream js;
  write_corpus_jsonl(records, js);
  std::istringstream back(js.str());
  auto parsed = read_corpus_jsonl(back);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].caption_text == records[0].caption_text);
  CHECK(parsed[1].attrs == records[1].attrs);

  std::ostringstream ts;
  write_corpus_tsv(records, ts);
  CHECK(ts.str() ==
        "000001.ppm\tHe sports a goatee and mustache.\n"
        "000002.ppm\tThe woman is smiling.\n");
}

}  // TEST_SUITE
