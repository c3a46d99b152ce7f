#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "t2f/checkpoint.hpp"
#include "t2f/error.hpp"
#include "t2f/evaluator.hpp"
#include "t2f/synth.hpp"

using namespace t2f;

namespace {

TensorD one_hot_rows(const std::vector<std::size_t>& labels, std::size_t k) {
  TensorD m = TensorD::zeros({labels.size(), k});
  auto d = m.mutable_data();
  for (std::size_t i = 0; i < labels.size(); ++i) d[i * k + labels[i]] = 1.0;
  return m;
}

}  // namespace

TEST_CASE("balanced one-hot rows score exactly the class count") {
  // 10 classes cycling over 100 rows: every row's KL against the uniform
  // marginal is log 10, so each split scores exp(log 10) = 10 exactly.
  std::vector<std::size_t> labels(100);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 10;
  auto r = inception_score(one_hot_rows(labels, 10), 10);
  CHECK(r.mean == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(r.std_dev == doctest::Approx(0.0).epsilon(1e-12));
  REQUIRE(r.per_split.size() == 10);
  for (double v : r.per_split) CHECK(v == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("identical predictions score exactly one") {
  std::vector<std::size_t> labels(60, 3);
  auto r = inception_score(one_hot_rows(labels, 5), 4);
  CHECK(r.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.std_dev == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("score matches a hand-worked two-row example") {
  // Rows (0.8, 0.2) and (0.4, 0.6); marginal (0.6, 0.4).
  // KL1 = 0.8 ln(0.8/0.6) + 0.2 ln(0.2/0.4)
  // KL2 = 0.4 ln(0.4/0.6) + 0.6 ln(0.6/0.4)
  TensorD p = TensorD::from_data({2, 2}, {0.8, 0.2, 0.4, 0.6});
  const double kl1 = 0.8 * std::log(0.8 / 0.6) + 0.2 * std::log(0.2 / 0.4);
  const double kl2 = 0.4 * std::log(0.4 / 0.6) + 0.6 * std::log(0.6 / 0.4);
  const double want = std::exp(0.5 * (kl1 + kl2));
  auto r = inception_score(p, 1);
  CHECK(r.mean == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("zero probabilities contribute nothing to the divergence") {
  // One-hot rows over two classes, three of one and one of the other:
  // marginal (0.75, 0.25), KL terms ln(1/0.75) and ln(1/0.25).
  TensorD p = one_hot_rows({0, 0, 0, 1}, 2);
  const double want =
      std::exp((3.0 * std::log(1 / 0.75) + std::log(1 / 0.25)) / 4.0);
  auto r = inception_score(p, 1);
  CHECK(r.mean == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("split spread is the population standard deviation") {
  // Split 1 is all class 0, split 2 alternates: scores 1 and 2 exactly,
  // so mean 1.5 and population spread 0.5.
  std::vector<std::size_t> labels = {0, 0, 0, 0, 0, 1, 0, 1};
  auto r = inception_score(one_hot_rows(labels, 2), 2);
  REQUIRE(r.per_split.size() == 2);
  CHECK(r.per_split[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.per_split[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.mean == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(r.std_dev == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("malformed probability matrices are rejected") {
  SUBCASE("rows must sum to one") {
    TensorD p = TensorD::from_data({1, 2}, {0.6, 0.6});
    CHECK_THROWS_WITH_AS(inception_score(p, 1),
                         doctest::Contains("row 0 sums to"), ContractError);
  }
  SUBCASE("negative entries") {
    TensorD p = TensorD::from_data({2, 2}, {1.0, 0.0, -0.25, 1.25});
    CHECK_THROWS_WITH_AS(inception_score(p, 1),
                         doctest::Contains("row 1 has a negative"),
                         ContractError);
  }
  SUBCASE("rows must divide into the splits") {
    TensorD p = one_hot_rows({0, 1, 0}, 2);
    CHECK_THROWS_WITH_AS(inception_score(p, 2),
                         doctest::Contains("do not divide"), ContractError);
  }
  SUBCASE("zero splits") {
    TensorD p = one_hot_rows({0, 1}, 2);
    CHECK_THROWS_AS(inception_score(p, 0), ContractError);
  }
  SUBCASE("not a matrix") {
    CHECK_THROWS_AS(inception_score(TensorD::zeros({4}), 1), ContractError);
  }
}

TEST_CASE("score stays within [1, class count] and matches its raw form") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 40, k = 5;
    TensorD p = TensorD::zeros({n, k});
    auto d = p.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < k; ++j) {
        d[i * k + j] = rng.uniform(0.01, 1.0);
        sum += d[i * k + j];
      }
      for (std::size_t j = 0; j < k; ++j) d[i * k + j] /= sum;
    }
    auto r = inception_score(p, 4);
    CHECK(r.mean >= 1.0 - 1e-12);
    CHECK(r.mean <= static_cast<double>(k) + 1e-12);
    CHECK(r.std_dev >= 0.0);
    REQUIRE(r.per_split.size() == r.per_split_kl.size());
    for (std::size_t s = 0; s < r.per_split.size(); ++s)
      CHECK(r.per_split[s] ==
            doctest::Approx(std::exp(r.per_split_kl[s])).epsilon(1e-12));
    CHECK(r.marginal_entropy >= r.conditional_entropy - 1e-12);
  }
}

TEST_CASE("single-split score ignores row order") {
  std::vector<std::size_t> labels = {0, 0, 1, 2, 1, 0, 2, 2, 1, 0};
  TensorD a = one_hot_rows(labels, 3);
  std::vector<std::size_t> shuffled = {2, 0, 1, 0, 2, 1, 0, 2, 1, 0};
  TensorD b = one_hot_rows(shuffled, 3);
  auto ra = inception_score(a, 1);
  auto rb = inception_score(b, 1);
  CHECK(ra.mean == doctest::Approx(rb.mean).epsilon(1e-12));
}

TEST_CASE("mixing rows toward the marginal never raises the score") {
  // One-parameter family: p_lambda = (1 - lambda) p + lambda marginal.
  TensorD p = TensorD::from_data(
      {4, 3}, {0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4, 0.05, 0.15, 0.8});
  auto m = class_marginal(p);
  double prev = inception_score(p, 1).mean;
  for (double lambda : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    TensorD q = TensorD::zeros({4, 3});
    auto qd = q.mutable_data();
    auto pd = p.data();
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        qd[i * 3 + j] = (1 - lambda) * pd[i * 3 + j] + lambda * m[j];
    double cur = inception_score(q, 1).mean;
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("entropy diagnostics follow their closed forms") {
  // Uniform rows: conditional entropy ln k, marginal entropy ln k, KL 0.
  TensorD u = TensorD::full({6, 4}, 0.25);
  auto r = inception_score(u, 2);
  CHECK(r.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.kl_mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.marginal_entropy == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(r.conditional_entropy ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // Balanced one-hots: conditional entropy 0, marginal ln k, KL ln k.
  std::vector<std::size_t> labels = {0, 1, 2, 3, 0, 1, 2, 3};
  auto o = inception_score(one_hot_rows(labels, 4), 2);
  CHECK(o.conditional_entropy == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(o.marginal_entropy == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(o.kl_mean == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("class marginal averages the columns") {
  TensorD p = TensorD::from_data({2, 3},
                                 {0.5, 0.25, 0.25, 0.1, 0.6, 0.3});
  auto m = class_marginal(p);
  REQUIRE(m.size() == 3);
  CHECK(m[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.425).epsilon(1e-12));
  CHECK(m[2] == doctest::Approx(0.275).epsilon(1e-12));
}

TEST_CASE("skew sweep endpoints hit the closed forms") {
  auto pts = skew_sweep(100, 10, {0.0, 1.0}, 10, SweepOrder::interleaved);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].skew == 0.0);
  CHECK(pts[0].score.mean == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(pts[1].skew == 1.0);
  CHECK(pts[1].score.mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("skew sweep declines monotonically under interleaving") {
  // 30-row splits hold five full class cycles, so the skew-0 endpoint is
  // exact; class-0 counts stay integral at every listed skew.
  auto pts = skew_sweep(120, 6, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, 4,
                        SweepOrder::interleaved);
  REQUIRE(pts.size() == 6);
  for (std::size_t i = 1; i < pts.size(); ++i)
    CHECK(pts[i].score.mean < pts[i - 1].score.mean);
  CHECK(pts.front().score.mean == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(pts.back().score.mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("largest-remainder apportionment lands exact counts") {
  // n=10, k=4, skew 0.5: shares (0.625, 0.125, 0.125, 0.125) give exact
  // counts (6.25, 1.25, 1.25, 1.25); floors (6,1,1,1) leave one surplus
  // row, and the tied fractional parts resolve to the lowest class index,
  // so the realized counts are (7,1,1,1). With a single split the score
  // follows in closed form from the marginal (0.7, 0.1, 0.1, 0.1):
  // mean KL = 0.7 ln(1/0.7) + 3 * 0.1 ln(1/0.1).
  auto pts = skew_sweep(10, 4, {0.5}, 1, SweepOrder::interleaved);
  const double want =
      std::exp(0.7 * std::log(1 / 0.7) + 0.3 * std::log(1 / 0.1));
  CHECK(pts[0].score.mean == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("shuffled order is seed deterministic and varies across seeds") {
  auto a = skew_sweep(120, 6, {0.3}, 4, SweepOrder::shuffled, 7);
  auto b = skew_sweep(120, 6, {0.3}, 4, SweepOrder::shuffled, 7);
  auto c = skew_sweep(120, 6, {0.3}, 4, SweepOrder::shuffled, 8);
  CHECK(a[0].score.mean == b[0].score.mean);
  CHECK(a[0].score.std_dev == b[0].score.std_dev);
  // The whole-sample marginal is order-invariant, but split composition
  // (and so the spread) almost surely differs between seeds.
  CHECK(a[0].score.std_dev != c[0].score.std_dev);
}

TEST_CASE("skew sweep validates its arguments") {
  CHECK_THROWS_AS(skew_sweep(0, 4, {0.0}, 1, SweepOrder::interleaved),
                  ContractError);
  CHECK_THROWS_AS(skew_sweep(10, 0, {0.0}, 1, SweepOrder::interleaved),
                  ContractError);
  CHECK_THROWS_WITH_AS(
      skew_sweep(10, 2, {1.5}, 1, SweepOrder::interleaved),
      doctest::Contains("outside [0, 1]"), ContractError);
}

TEST_CASE("probe classifier separates glyph identities") {
  EmbeddingConfig ec;
  ec.dim = 32;
  auto data = generate_dataset(160, 8, 41, 16, ec);
  ClassifierConfig cc;
  cc.epochs = 40;
  cc.batch_size = 32;
  auto clf = train_probe_classifier(data, cc);
  CHECK(clf.image_size == 16);
  CHECK(clf.classes == 8);
  // Identity classes are distinct attribute vectors rendered into clearly
  // separated glyph layouts, so a pixel-level linear model should nail the
  // train split and generalize across jitter tints.
  CHECK(clf.train_accuracy > 0.95);
  CHECK(clf.test_accuracy > 0.9);

  SUBCASE("prediction rows are distributions") {
    TensorD batch = TensorD::zeros({3, 3, 16, 16});
    auto bd = batch.mutable_data();
    for (std::size_t i = 0; i < 3; ++i) {
      auto src = data.records[i].image.data();
      std::copy(src.begin(), src.end(), bd.begin() + i * src.size());
    }
    TensorD p = clf.predict(batch);
    REQUIRE(p.shape() == Shape{3, 8});
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < 8; ++j) sum += p.at(i * 8 + j);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("real images score near the class count") {
    std::vector<TensorD> images;
    std::vector<std::size_t> classes;
    std::vector<AttributeVector> class_attrs(8);
    for (std::size_t c = 0; c < 8; ++c)
      for (const auto& r : data.records)
        if (r.identity_class == c) {
          class_attrs[c] = r.attrs;
          break;
        }
    for (std::size_t i = 0; i < 80; ++i) {
      images.push_back(data.records[i].image);
      classes.push_back(data.records[i].identity_class);
    }
    auto ev = detail::evaluate_images(images, classes, class_attrs, &clf, 4);
    CHECK(ev.samples == 80);
    CHECK(ev.inception.mean > 6.0);
    CHECK(ev.marginal.size() == 8);
    // Rendered ground truth should agree with its own probes.
    CHECK(ev.attr_agreement == doctest::Approx(1.0));
    CHECK(ev.attr_pairs > 0);
  }
}

TEST_CASE("classifier files round-trip through disk") {
  EmbeddingConfig ec;
  ec.dim = 16;
  auto data = generate_dataset(48, 6, 11, 16, ec);
  ClassifierConfig cc;
  cc.epochs = 8;
  cc.batch_size = 12;
  auto clf = train_probe_classifier(data, cc);

  const std::string path = "t2f_classifier_roundtrip.bin";
  save_probe_classifier(clf, path);
  auto back = load_probe_classifier(path);
  std::remove(path.c_str());

  CHECK(back.image_size == clf.image_size);
  CHECK(back.classes == clf.classes);
  CHECK(back.train_accuracy == clf.train_accuracy);
  CHECK(back.test_accuracy == clf.test_accuracy);
  TensorD batch = TensorD::zeros({2, 3, 16, 16});
  auto bd = batch.mutable_data();
  for (std::size_t i = 0; i < 2; ++i) {
    auto src = data.records[i].image.data();
    std::copy(src.begin(), src.end(), bd.begin() + i * src.size());
  }
  TensorD pa = clf.predict(batch);
  TensorD pb = back.predict(batch);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa.at(i) == pb.at(i));

  SUBCASE("other checkpoint files are refused") {
    CheckpointData ck;
    ck.meta["kind"] = "something else";
    ck.tensors.emplace_back("clf.head.b", TensorD::zeros({2}));
    write_checkpoint(ck, path);
    CHECK_THROWS_AS(load_probe_classifier(path), ParseError);
    std::remove(path.c_str());
  }
}

TEST_CASE("classifier training validates the dataset") {
  EmbeddingConfig ec;
  ec.dim = 16;
  auto data = generate_dataset(24, 4, 5, 16, ec);
  SUBCASE("single class") {
    auto one = data;
    one.class_count = 1;
    for (auto& r : one.records) r.identity_class = 0;
    CHECK_THROWS_AS(train_probe_classifier(one, {}), ContractError);
  }
  SUBCASE("zero batch") {
    ClassifierConfig cc;
    cc.batch_size = 0;
    CHECK_THROWS_AS(train_probe_classifier(data, cc), ContractError);
  }
  SUBCASE("empty train split") {
    auto none = data;
    none.train_count = 0;
    CHECK_THROWS_AS(train_probe_classifier(none, {}), ContractError);
  }
}

TEST_CASE("image scoring rejects mismatched arguments") {
  std::vector<TensorD> images = {TensorD::zeros({3, 16, 16})};
  std::vector<AttributeVector> attrs(1);
  CHECK_THROWS_AS(
      detail::evaluate_images(images, {0, 1}, attrs, nullptr, 1),
      ContractError);
  CHECK_THROWS_AS(detail::evaluate_images({}, {}, attrs, nullptr, 1),
                  ContractError);
}

TEST_CASE("an untrained generator shows weak probe agreement") {
  EmbeddingConfig ec;
  ec.dim = 24;
  auto data = generate_dataset(40, 8, 63, 16, ec);
  GanConfig gc;
  gc.image_size = 16;
  gc.z_dim = 8;
  gc.embed_dim = 24;
  gc.text_dim = 16;
  gc.base_channels = 8;
  Rng init(Rng::derive(0, "init_g", 0));
  Generator<double> g(gc, init);

  auto ev = evaluate_generator(g, data, nullptr, 64, 1, 9);
  CHECK(ev.samples == 64);
  CHECK(ev.attr_pairs > 0);
  // Noise images land far from every glyph palette, so almost no
  // asserted attribute should be confirmed.
  CHECK(ev.attr_agreement < 0.2);
  // No classifier: the score block stays empty.
  CHECK(ev.inception.per_split.empty());
  CHECK(ev.marginal.empty());

  SUBCASE("sampling is seed deterministic") {
    auto ev2 = evaluate_generator(g, data, nullptr, 64, 1, 9);
    CHECK(ev2.attr_agreement == ev.attr_agreement);
    CHECK(ev2.attr_pairs == ev.attr_pairs);
  }
  SUBCASE("embedding width mismatch is caught") {
    auto other = data;
    for (auto& r : other.records) r.embedding.values.resize(7);
    CHECK_THROWS_WITH_AS(evaluate_generator(g, other, nullptr, 4, 1, 9),
                         doctest::Contains("embedding width"),
                         ContractError);
  }
  SUBCASE("class without records is caught") {
    auto other = data;
    other.class_count = 9;
    CHECK_THROWS_WITH_AS(evaluate_generator(g, other, nullptr, 4, 1, 9),
                         doctest::Contains("identity class 8"),
                         ContractError);
  }
}
