#include "t2f/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "t2f/adam.hpp"
#include "t2f/checkpoint.hpp"
#include "t2f/error.hpp"
#include "t2f/tape.hpp"

namespace t2f {
namespace {

void check_rows(const TensorD& probs) {
  if (probs.ndim() != 2 || probs.size() == 0)
    throw ContractError("expected a nonempty [n, k] matrix, got " +
                        shape_str(probs.shape()));
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  auto d = probs.data();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = d[i * k + j];
      if (p < 0)
        throw ContractError("row " + std::to_string(i) +
                            " has a negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ContractError("row " + std::to_string(i) + " sums to " +
                          std::to_string(sum) + ", not 1");
  }
}

}  // namespace

ScoreResult inception_score(const TensorD& probs, std::size_t splits) {
  check_rows(probs);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (splits == 0 || n % splits != 0)
    throw ContractError(std::to_string(n) + " rows do not divide into " +
                        std::to_string(splits) + " equal splits");
  const std::size_t m = n / splits;
  auto d = probs.data();

  ScoreResult r;
  for (std::size_t s = 0; s < splits; ++s) {
    const double* rows = d.data() + s * m * k;
    std::vector<double> marginal(k, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) marginal[j] += rows[i * k + j];
    for (double& v : marginal) v /= static_cast<double>(m);

    double mean_kl = 0;
    for (std::size_t i = 0; i < m; ++i) {
      double kl = 0;
      for (std::size_t j = 0; j < k; ++j) {
        const double p = rows[i * k + j];
        if (p > 0) kl += p * (std::log(p) - std::log(marginal[j]));
      }
      mean_kl += kl;
    }
    r.per_split_kl.push_back(mean_kl / static_cast<double>(m));
    r.per_split.push_back(std::exp(r.per_split_kl.back()));
  }
  r.mean = std::accumulate(r.per_split.begin(), r.per_split.end(), 0.0) /
           static_cast<double>(splits);
  r.kl_mean =
      std::accumulate(r.per_split_kl.begin(), r.per_split_kl.end(), 0.0) /
      static_cast<double>(splits);
  double sq = 0;
  for (double v : r.per_split) sq += (v - r.mean) * (v - r.mean);
  r.std_dev = std::sqrt(sq / static_cast<double>(splits));

  std::vector<double> whole(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) whole[j] += d[i * k + j];
  for (double v : whole) {
    v /= static_cast<double>(n);
    if (v > 0) r.marginal_entropy -= v * std::log(v);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double h = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = d[i * k + j];
      if (p > 0) h -= p * std::log(p);
    }
    r.conditional_entropy += h / static_cast<double>(n);
  }
  return r;
}

std::vector<double> class_marginal(const TensorD& probs) {
  check_rows(probs);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  auto d = probs.data();
  std::vector<double> marginal(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) marginal[j] += d[i * k + j];
  for (double& v : marginal) v /= static_cast<double>(n);
  return marginal;
}

std::vector<SweepPoint> skew_sweep(std::size_t n, std::size_t k,
                                   const std::vector<double>& skews,
                                   std::size_t splits, SweepOrder order,
                                   std::uint64_t seed) {
  if (n == 0 || k == 0) throw ContractError("need n > 0 and k > 0");
  std::vector<SweepPoint> out;
  for (std::size_t idx = 0; idx < skews.size(); ++idx) {
    const double a = skews[idx];
    if (a < 0.0 || a > 1.0)
      throw ContractError("skew " + std::to_string(a) +
                          " outside [0, 1]");

    // Class shares interpolate uniform -> all-on-class-0; integer counts
    // by largest remainder so they always sum to n exactly.
    std::vector<double> share(k);
    for (std::size_t c = 0; c < k; ++c)
      share[c] = (1.0 - a) / static_cast<double>(k) + (c == 0 ? a : 0.0);
    std::vector<std::size_t> count(k);
    std::vector<std::pair<double, std::size_t>> frac(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double exact = share[c] * static_cast<double>(n);
      count[c] = static_cast<std::size_t>(std::floor(exact));
      assigned += count[c];
      frac[c] = {exact - std::floor(exact), c};
    }
    std::stable_sort(frac.begin(), frac.end(),
                     [](const auto& x, const auto& y) {
                       return x.first > y.first;
                     });
    for (std::size_t r = 0; r < n - assigned; ++r) ++count[frac[r].second];

    // One-hot rows, placed round-robin so every contiguous split sees the
    // same composition, or in a seeded shuffle.
    std::vector<std::size_t> labels;
    labels.reserve(n);
    std::vector<std::size_t> left = count;
    while (labels.size() < n)
      for (std::size_t c = 0; c < k; ++c)
        if (left[c] > 0) {
          --left[c];
          labels.push_back(c);
        }
    if (order == SweepOrder::shuffled) {
      Rng rng(Rng::derive(seed, "skew_order", idx));
      for (std::size_t i = labels.size() - 1; i > 0; --i)
        std::swap(labels[i], labels[rng.below(i + 1)]);
    }

    TensorD probs = TensorD::zeros({n, k});
    auto pd = probs.mutable_data();
    for (std::size_t i = 0; i < n; ++i) pd[i * k + labels[i]] = 1.0;
    out.push_back({a, inception_score(probs, splits)});
  }
  return out;
}

namespace {

TensorD classifier_logits(Tape<double>* tape, const ProbeClassifier& clf,
                          const TensorD& images) {
  const std::size_t n = images.dim(0);
  const std::size_t half = clf.image_size / 2;
  TensorD h = leaky_relu<double>(
      tape, conv2d<double>(tape, images, clf.conv_k, 2, 1), 0.2);
  TensorD flat =
      reshape<double>(tape, h, {n, clf.conv_k.dim(0) * half * half});
  return affine<double>(tape, flat, clf.w, clf.b);
}

}  // namespace

TensorD ProbeClassifier::predict(const TensorD& images) const {
  if (images.ndim() != 4 || images.dim(1) != 3 ||
      images.dim(2) != image_size || images.dim(3) != image_size)
    throw ContractError("classifier expects [n, 3, " +
                        std::to_string(image_size) + ", " +
                        std::to_string(image_size) + "], got " +
                        shape_str(images.shape()));
  return softmax_rows<double>(classifier_logits(nullptr, *this, images));
}

ProbeClassifier train_probe_classifier(const SynthDataset& data,
                                       const ClassifierConfig& cfg) {
  if (data.train_count == 0 || data.train_count > data.records.size())
    throw ContractError("dataset has no usable train split");
  if (data.class_count < 2)
    throw ContractError("classification needs at least two classes");
  if (cfg.batch_size == 0) throw ContractError("batch_size must be positive");
  if (cfg.hidden_channels == 0)
    throw ContractError("hidden_channels must be positive");

  const std::size_t s = data.records[0].image.dim(1);
  if (s % 2 != 0)
    throw ContractError("image size must be even for the strided stage");
  const std::size_t px = 3 * s * s;
  const std::size_t train_n = data.train_count;

  std::vector<std::size_t> y_train(train_n);
  for (std::size_t i = 0; i < train_n; ++i) {
    const auto& r = data.records[i];
    if (r.image.size() != px)
      throw ContractError("record " + r.image_id +
                          " image size differs from the first record");
    if (r.identity_class >= data.class_count)
      throw ContractError("record " + r.image_id + " claims class " +
                          std::to_string(r.identity_class) + " of " +
                          std::to_string(data.class_count));
    y_train[i] = r.identity_class;
  }

  ProbeClassifier clf;
  clf.image_size = s;
  clf.classes = data.class_count;
  Rng init(Rng::derive(cfg.seed, "clf_init", 0));
  clf.conv_k =
      TensorD::randn({cfg.hidden_channels, 3, 4, 4}, init, 0.02);
  clf.w = TensorD::zeros({cfg.hidden_channels * (s / 2) * (s / 2),
                          data.class_count});
  clf.b = TensorD::zeros({data.class_count});
  clf.conv_k.set_requires_grad(true);
  clf.w.set_requires_grad(true);
  clf.b.set_requires_grad(true);

  std::vector<TensorD> params = {clf.conv_k, clf.w, clf.b};
  AdamState<double> opt(0.9, 0.999);
  opt.attach(params);

  const std::size_t batch = std::min(cfg.batch_size, train_n);
  const std::size_t per_epoch = train_n / batch;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::vector<std::size_t> perm(train_n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(Rng::derive(cfg.seed, "clf_perm", e));
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.below(i + 1)]);
    for (std::size_t bi = 0; bi < per_epoch; ++bi) {
      TensorD xb = TensorD::zeros({batch, 3, s, s});
      auto xbd = xb.mutable_data();
      std::vector<std::size_t> yb(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t src = perm[bi * batch + i];
        auto sd = data.records[src].image.data();
        std::copy(sd.begin(), sd.end(), xbd.begin() + i * px);
        yb[i] = y_train[src];
      }
      Tape<double> tape;
      auto loss = softmax_cross_entropy<double>(
          &tape, classifier_logits(&tape, clf, xb), yb);
      tape.backward(loss);
      opt.step(params, cfg.lr);
      for (auto& p : params) p.zero_grad();
    }
  }

  auto accuracy = [&](std::size_t begin, std::size_t end) {
    if (begin >= end) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
      TensorD one = reshape<double>(nullptr, data.records[i].image,
                                    {1, 3, s, s});
      TensorD p = clf.predict(one);
      std::size_t arg = 0;
      for (std::size_t j = 1; j < data.class_count; ++j)
        if (p.at(j) > p.at(arg)) arg = j;
      hits += arg == data.records[i].identity_class;
    }
    return static_cast<double>(hits) / static_cast<double>(end - begin);
  };
  clf.train_accuracy = accuracy(0, train_n);
  clf.test_accuracy = accuracy(train_n, data.records.size());
  return clf;
}

void save_probe_classifier(const ProbeClassifier& clf,
                           const std::string& path) {
  CheckpointData ck;
  ck.meta["kind"] = "classifier";
  ck.meta["image_size"] = std::to_string(clf.image_size);
  ck.meta["classes"] = std::to_string(clf.classes);
  char acc[64];
  std::snprintf(acc, sizeof acc, "%.17g", clf.train_accuracy);
  ck.meta["train_accuracy"] = acc;
  std::snprintf(acc, sizeof acc, "%.17g", clf.test_accuracy);
  ck.meta["test_accuracy"] = acc;
  ck.tensors.emplace_back("clf.conv.k", clf.conv_k);
  ck.tensors.emplace_back("clf.head.w", clf.w);
  ck.tensors.emplace_back("clf.head.b", clf.b);
  write_checkpoint(ck, path);
}

ProbeClassifier load_probe_classifier(const std::string& path) {
  CheckpointData ck = read_checkpoint(path);
  auto kind = ck.meta.find("kind");
  if (kind == ck.meta.end() || kind->second != "classifier")
    throw ParseError("not a classifier file: " + path);
  ProbeClassifier clf;
  clf.image_size = std::stoull(ck.meta.at("image_size"));
  clf.classes = std::stoull(ck.meta.at("classes"));
  clf.train_accuracy = std::stod(ck.meta.at("train_accuracy"));
  clf.test_accuracy = std::stod(ck.meta.at("test_accuracy"));
  clf.conv_k = ck.need("clf.conv.k").clone();
  clf.w = ck.need("clf.head.w").clone();
  clf.b = ck.need("clf.head.b").clone();
  const std::size_t half = clf.image_size / 2;
  if (clf.conv_k.ndim() != 4 || clf.conv_k.dim(1) != 3 ||
      clf.w.ndim() != 2 ||
      clf.w.dim(0) != clf.conv_k.dim(0) * half * half ||
      clf.w.dim(1) != clf.classes || clf.b.size() != clf.classes)
    throw ParseError("classifier blocks do not fit the declared shape");
  return clf;
}

namespace detail {

EvalResult evaluate_images(const std::vector<TensorD>& images,
                           const std::vector<std::size_t>& classes,
                           const std::vector<AttributeVector>& class_attrs,
                           const ProbeClassifier* classifier,
                           std::size_t splits) {
  if (images.empty() || images.size() != classes.size())
    throw ContractError("need one class per image");
  EvalResult out;
  out.samples = images.size();

  std::size_t pairs = 0, hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const AttributeVector& v = class_attrs.at(classes[i]);
    for (Attr a : probeable_attributes()) {
      if (!v.get(a)) continue;
      ++pairs;
      auto probed = probe_attribute(images[i], a);
      if (probed.has_value() && *probed) ++hits;
    }
  }
  out.attr_pairs = pairs;
  out.attr_agreement =
      pairs == 0 ? 0.0
                 : static_cast<double>(hits) / static_cast<double>(pairs);

  if (classifier) {
    const std::size_t n = images.size();
    const std::size_t px = 3 * classifier->image_size * classifier->image_size;
    TensorD batch = TensorD::zeros(
        {n, 3, classifier->image_size, classifier->image_size});
    auto bd = batch.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      if (images[i].size() != px)
        throw ContractError("image " + std::to_string(i) +
                            " does not match the classifier resolution");
      auto src = images[i].data();
      std::copy(src.begin(), src.end(), bd.begin() + i * px);
    }
    TensorD probs = classifier->predict(batch);
    out.inception = inception_score(probs, splits);
    out.marginal = class_marginal(probs);
  }
  return out;
}

}  // namespace detail

}  // namespace t2f
