#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2f/models.hpp"
#include "t2f/ops.hpp"
#include "t2f/rng.hpp"
#include "t2f/synth.hpp"
#include "t2f/tensor.hpp"

namespace t2f {

struct ScoreResult {
  double mean = 0;     // exponentiated scale, the headline number
  double std_dev = 0;  // population spread across splits
  std::vector<double> per_split;
  // The same quantity before exponentiation, since some write-ups print
  // the raw divergence: per_split[s] == exp(per_split_kl[s]).
  double kl_mean = 0;
  std::vector<double> per_split_kl;
  // Whole-sample diagnostics: a diverse sample has high marginal entropy,
  // a confident model low conditional entropy.
  double marginal_entropy = 0;
  double conditional_entropy = 0;
};

// Exponentiated mean KL divergence between per-row class distributions and
// their split marginal, averaged over `splits` contiguous equal splits.
// probs is [n, k]; every row must be a distribution (entries >= 0, sum
// within 1e-6 of one) and n must divide evenly into the splits. Zero
// probabilities contribute zero to the KL sum.
ScoreResult inception_score(const TensorD& probs, std::size_t splits = 5);

// Column means of a row-stochastic [n, k] matrix: the class marginal.
std::vector<double> class_marginal(const TensorD& probs);

enum class SweepOrder {
  interleaved,  // classes cycle round-robin, so splits stay balanced
  shuffled,     // seeded random order, exposing split-composition variance
};

struct SweepPoint {
  double skew = 0;
  ScoreResult score;
};

// Score of synthetic one-hot predictions as class balance degrades. At
// skew 0 every class gets an equal share of the n rows; at skew 1 all mass
// sits on class 0; between, proportions interpolate linearly and counts
// are apportioned by largest remainder, so they are exact, deterministic,
// and sum to n.
std::vector<SweepPoint> skew_sweep(std::size_t n, std::size_t k,
                                   const std::vector<double>& skews,
                                   std::size_t splits, SweepOrder order,
                                   std::uint64_t seed = 0);

struct ClassifierConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t hidden_channels = 8;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

// Small convolutional classifier from pixels to identity classes, fitted
// on the train split: one strided conv stage, then a linear head.
// Intentionally shallow: it scores generated images, so it must not share
// weights with either network under test.
struct ProbeClassifier {
  std::size_t image_size = 0;
  std::size_t classes = 0;
  TensorD conv_k;  // [hidden, 3, 4, 4], stride 2
  TensorD w;       // [hidden * (s/2)^2, classes]
  TensorD b;       // [classes]
  double train_accuracy = 0;
  double test_accuracy = 0;

  // [n, 3, s, s] -> [n, classes] row distributions.
  TensorD predict(const TensorD& images) const;
};

ProbeClassifier train_probe_classifier(const SynthDataset& data,
                                       const ClassifierConfig& cfg);

// Classifier files reuse the checkpoint container, carrying the three
// weight blocks plus shape and accuracy metadata.
void save_probe_classifier(const ProbeClassifier& clf,
                           const std::string& path);
ProbeClassifier load_probe_classifier(const std::string& path);

struct EvalResult {
  ScoreResult inception;         // empty unless a classifier was supplied
  std::vector<double> marginal;  // likewise
  // Over all (sample, attribute) pairs where the conditioning caption
  // asserts a probe-able attribute: the fraction the rendered probe
  // confirms.
  double attr_agreement = 0;
  std::size_t attr_pairs = 0;
  std::size_t samples = 0;
};

namespace detail {

EvalResult evaluate_images(const std::vector<TensorD>& images,
                           const std::vector<std::size_t>& classes,
                           const std::vector<AttributeVector>& class_attrs,
                           const ProbeClassifier* classifier,
                           std::size_t splits);

}  // namespace detail

// Samples the generator across identity classes (round-robin, one derived
// noise stream per sample) in infer mode and scores the results: probe
// agreement always, classifier-based scores when a classifier is given.
template <typename T>
EvalResult evaluate_generator(Generator<T>& g, const SynthDataset& data,
                              const ProbeClassifier* classifier,
                              std::size_t samples, std::size_t splits,
                              std::uint64_t seed) {
  if (samples == 0) throw ContractError("need at least one sample");
  if (data.class_count == 0)
    throw ContractError("dataset declares no identity classes");

  // One representative record per class supplies its caption embedding and
  // ground-truth attributes.
  std::vector<std::size_t> rep(data.class_count, data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const std::size_t c = data.records[i].identity_class;
    if (c < rep.size() && rep[c] == data.records.size()) rep[c] = i;
  }
  std::vector<AttributeVector> class_attrs;
  for (std::size_t c = 0; c < rep.size(); ++c) {
    if (rep[c] == data.records.size())
      throw ContractError("no record carries identity class " +
                          std::to_string(c));
    class_attrs.push_back(data.records[rep[c]].attrs);
  }

  const auto& cfg = g.config();
  std::vector<TensorD> images;
  images.reserve(samples);
  std::vector<std::size_t> classes(samples);

  const std::size_t batch = 32;
  for (std::size_t start = 0; start < samples; start += batch) {
    const std::size_t m = std::min(batch, samples - start);
    auto z = Tensor<T>::zeros({m, cfg.z_dim});
    auto text = Tensor<T>::zeros({m, cfg.embed_dim});
    auto td = text.mutable_data();
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t c = (start + i) % data.class_count;
      classes[start + i] = c;
      Rng rng(Rng::derive(seed, "eval_noise", start + i));
      fill_noise_row(z, i, cfg.noise, rng);
      const auto& e = data.records[rep[c]].embedding.values;
      if (e.size() != cfg.embed_dim)
        throw ContractError("dataset embedding width " +
                            std::to_string(e.size()) +
                            " does not match embed_dim " +
                            std::to_string(cfg.embed_dim));
      for (std::size_t j = 0; j < cfg.embed_dim; ++j)
        td[i * cfg.embed_dim + j] = static_cast<T>(e[j]);
    }
    Tensor<T> out = g.forward(nullptr, z, text, BnMode::infer);
    const std::size_t px = 3 * cfg.image_size * cfg.image_size;
    auto od = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> one(px);
      for (std::size_t j = 0; j < px; ++j)
        one[j] = static_cast<double>(od[i * px + j]);
      images.push_back(TensorD::from_raw(
          {3, cfg.image_size, cfg.image_size}, std::move(one)));
    }
  }
  return detail::evaluate_images(images, classes, class_attrs, classifier,
                                 splits);
}

}  // namespace t2f
