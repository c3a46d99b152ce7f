#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "t2f/adam.hpp"
#include "t2f/checkpoint.hpp"
#include "t2f/error.hpp"
#include "t2f/losses.hpp"
#include "t2f/models.hpp"
#include "t2f/rng.hpp"
#include "t2f/synth.hpp"

namespace t2f {

// How the discriminator's third input, a deliberately mismatched
// image-caption pair, is assembled: keep this row's caption and pull the
// image of a random other record, or keep the image and pull a random
// other record's caption (re-drawn until the embedding actually differs).
enum class MismatchStrategy { wrong_image, wrong_caption };

struct TrainConfig {
  GanConfig model;
  std::size_t batch_size = 64;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.5;
  std::size_t epochs = 200;  // default run budget; run() takes iterations
  // Every swap_period-th iteration (1-based) the discriminator's positive
  // and generated batches trade images while keeping their captions and
  // targets; 0 disables the exchange.
  std::size_t swap_period = 3;
  MismatchStrategy mismatch_strategy = MismatchStrategy::wrong_image;
  std::uint64_t seed = 0;
};

struct TrainRow {
  std::size_t iter = 0;
  std::size_t epoch = 0;
  double loss_d = 0;
  double loss_g = 0;
  // Mean D scores per term, taken before the update. On swap iterations
  // score_real describes the exchanged positive batch (generated images)
  // and score_fake the exchanged negative batch (real images).
  double score_real = 0;
  double score_wrong = 0;  // the mismatched pair, never swapped
  double score_fake = 0;
  bool swapped = false;
};

// Adversarial training over the train split of a synthetic dataset. All
// randomness comes from counter-derived streams keyed by (seed, purpose,
// index), so a run is a pure function of (config, dataset) and can resume
// from a checkpoint bit-exactly: the only cursor is the iteration count.
//
// Per iteration, 1-based:
//   batch    <- next batch_size indices of this epoch's permutation
//              ("epoch_perm", epoch); partial tail batches are dropped
//   z_d, z_g <- ("noise", iter), ("noise_g", iter), distributed per the
//              model's noise kind
//   mismatch <- per item from ("mismatch", iter): another record's image
//              (wrong_image) or another record's differing caption
//              (wrong_caption)
//   D step: scores on (real, matched), the mismatched pair, and
//           (fake, matched); the two negative terms carry weight 1/2
//   G step: fresh fake batch pushed toward 1 under matched captions, with
//           discriminator parameters frozen
template <typename T>
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const SynthDataset& data)
      : cfg_(cfg),
        opt_g_(T(cfg.beta1), T(cfg.beta2)),
        opt_d_(T(cfg.beta1), T(cfg.beta2)),
        g_(make_generator(cfg)),
        d_(make_discriminator(cfg)) {
    cfg_.model.validate();
    if (cfg_.batch_size == 0)
      throw ContractError("batch_size must be positive");
    if (data.train_count < cfg_.batch_size)
      throw ContractError("train split of " +
                          std::to_string(data.train_count) +
                          " cannot fill one batch of " +
                          std::to_string(cfg_.batch_size));
    if (data.train_count > data.records.size())
      throw ContractError("train_count " + std::to_string(data.train_count) +
                          " exceeds the " +
                          std::to_string(data.records.size()) +
                          " records present");
    if (data.class_count < 2)
      throw ContractError(
          "mismatched captions need at least two identity classes");
    const std::size_t s = cfg_.model.image_size;
    const std::size_t e = cfg_.model.embed_dim;
    for (std::size_t i = 0; i < data.train_count; ++i) {
      const DatasetRecord& r = data.records[i];
      if (r.image.ndim() != 3 || r.image.dim(1) != s || r.image.dim(2) != s)
        throw ContractError("record " + r.image_id + " is " +
                            shape_str(r.image.shape()) + ", expected [3, " +
                            std::to_string(s) + ", " + std::to_string(s) +
                            "]");
      if (r.embedding.values.size() != e)
        throw ContractError("record " + r.image_id + " embedding width " +
                            std::to_string(r.embedding.values.size()) +
                            " does not match embed_dim " + std::to_string(e));
      images_.push_back(r.image.template cast<T>());
      embeds_.emplace_back(r.embedding.values.begin(),
                           r.embedding.values.end());
    }
    opt_g_.attach(g_.parameters());
    opt_d_.attach(d_.parameters());
  }

  // Runs `iterations` more iterations. Each finished iteration appends one
  // JSON line to `jsonl` and one row to `rows` when given.
  void run(std::size_t iterations, std::ostream* jsonl = nullptr,
           std::vector<TrainRow>* rows = nullptr) {
    for (std::size_t k = 0; k < iterations; ++k) {
      TrainRow row = step();
      if (rows) rows->push_back(row);
      if (jsonl) {
        char line[384];
        std::snprintf(line, sizeof line,
                      "{\"iter\":%zu,\"epoch\":%zu,\"loss_d\":%.17g,"
                      "\"loss_g\":%.17g,\"score_real\":%.17g,"
                      "\"score_wrong\":%.17g,\"score_fake\":%.17g,"
                      "\"swapped\":%s}",
                      row.iter, row.epoch, row.loss_d, row.loss_g,
                      row.score_real, row.score_wrong, row.score_fake,
                      row.swapped ? "true" : "false");
        *jsonl << line << '\n';
      }
    }
  }

  std::size_t batches_per_epoch() const {
    return images_.size() / cfg_.batch_size;
  }
  std::size_t iteration() const { return iter_; }
  // The iteration at which the discriminator had stayed saturated
  // (positive scores above 0.99 and generated below 0.01) for 50
  // consecutive measurements, if that has happened.
  std::optional<std::size_t> collapse_iteration() const { return collapse_; }

  Generator<T>& generator() { return g_; }
  Discriminator<T>& discriminator() { return d_; }
  const TrainConfig& config() const { return cfg_; }

  void save(const std::string& path) {
    CheckpointData ck;
    pack_models(ck, g_, d_, opt_g_, opt_d_);
    ck.meta["config"] = gan_config_to_json(cfg_.model);
    ck.meta["iter"] = std::to_string(iter_);
    ck.meta["seed"] = std::to_string(cfg_.seed);
    ck.meta["batch_size"] = std::to_string(cfg_.batch_size);
    ck.meta["epochs"] = std::to_string(cfg_.epochs);
    ck.meta["swap_period"] = std::to_string(cfg_.swap_period);
    ck.meta["mismatch"] =
        cfg_.mismatch_strategy == MismatchStrategy::wrong_caption
            ? "wrong_caption"
            : "wrong_image";
    ck.meta["lr_g"] = format_double(cfg_.lr_g);
    ck.meta["lr_d"] = format_double(cfg_.lr_d);
    ck.meta["beta1"] = format_double(cfg_.beta1);
    ck.meta["beta2"] = format_double(cfg_.beta2);
    ck.meta["collapse_iter"] =
        collapse_ ? std::to_string(*collapse_) : std::string("none");
    ck.meta["collapse_run"] = std::to_string(collapse_run_);
    write_checkpoint(ck, path);
  }

  static TrainConfig config_from_checkpoint(const CheckpointData& ck) {
    TrainConfig cfg;
    cfg.model = gan_config_from_json(ck.meta.at("config"));
    cfg.batch_size = std::stoull(meta_of(ck, "batch_size"));
    cfg.epochs = std::stoull(meta_of(ck, "epochs"));
    cfg.swap_period = std::stoull(meta_of(ck, "swap_period"));
    const std::string& mism = meta_of(ck, "mismatch");
    if (mism == "wrong_caption")
      cfg.mismatch_strategy = MismatchStrategy::wrong_caption;
    else if (mism == "wrong_image")
      cfg.mismatch_strategy = MismatchStrategy::wrong_image;
    else
      throw ParseError("unknown mismatch strategy '" + mism + "'");
    cfg.seed = std::stoull(meta_of(ck, "seed"));
    cfg.lr_g = std::stod(meta_of(ck, "lr_g"));
    cfg.lr_d = std::stod(meta_of(ck, "lr_d"));
    cfg.beta1 = std::stod(meta_of(ck, "beta1"));
    cfg.beta2 = std::stod(meta_of(ck, "beta2"));
    return cfg;
  }

  static Trainer resume(const CheckpointData& ck, const SynthDataset& data) {
    Trainer t(config_from_checkpoint(ck), data);
    unpack_models(ck, t.g_, t.d_, t.opt_g_, t.opt_d_);
    t.iter_ = std::stoull(meta_of(ck, "iter"));
    const std::string& c = meta_of(ck, "collapse_iter");
    if (c != "none") t.collapse_ = std::stoull(c);
    t.collapse_run_ = std::stoull(meta_of(ck, "collapse_run"));
    return t;
  }

 private:
  static Generator<T> make_generator(const TrainConfig& cfg) {
    Rng r(Rng::derive(cfg.seed, "init_g", 0));
    return Generator<T>(cfg.model, r);
  }
  static Discriminator<T> make_discriminator(const TrainConfig& cfg) {
    Rng r(Rng::derive(cfg.seed, "init_d", 0));
    return Discriminator<T>(cfg.model, r);
  }
  static std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static const std::string& meta_of(const CheckpointData& ck,
                                    const std::string& key) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end())
      throw ParseError("checkpoint missing '" + key + "'");
    return it->second;
  }

  std::vector<std::size_t> epoch_permutation(std::size_t epoch) const {
    std::vector<std::size_t> perm(images_.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(Rng::derive(cfg_.seed, "epoch_perm", epoch));
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.below(i + 1)]);
    return perm;
  }

  Tensor<T> gather_images(const std::vector<std::size_t>& idx) const {
    const std::size_t s = cfg_.model.image_size;
    auto out = Tensor<T>::zeros({idx.size(), 3, s, s});
    auto od = out.mutable_data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = images_[idx[i]].data();
      std::copy(src.begin(), src.end(), od.begin() + i * 3 * s * s);
    }
    return out;
  }

  Tensor<T> gather_embeds(const std::vector<std::size_t>& idx) const {
    const std::size_t e = cfg_.model.embed_dim;
    auto out = Tensor<T>::zeros({idx.size(), e});
    auto od = out.mutable_data();
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy(embeds_[idx[i]].begin(), embeds_[idx[i]].end(),
                od.begin() + i * e);
    return out;
  }

  static double mean_of(const Tensor<T>& scores) {
    double s = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) s += scores.at(i);
    return s / scores.size();
  }

  Tensor<T> sample_noise(std::size_t n, Rng& rng) const {
    auto z = Tensor<T>::zeros({n, cfg_.model.z_dim});
    for (std::size_t i = 0; i < n; ++i)
      fill_noise_row(z, i, cfg_.model.noise, rng);
    return z;
  }

  TrainRow step() {
    const std::size_t bpe = batches_per_epoch();
    const std::size_t epoch = iter_ / bpe;
    const std::size_t offset = iter_ % bpe;
    ++iter_;

    if (offset == 0 || perm_epoch_ != epoch) {
      perm_ = epoch_permutation(epoch);
      perm_epoch_ = epoch;
    }
    std::vector<std::size_t> batch(
        perm_.begin() + offset * cfg_.batch_size,
        perm_.begin() + (offset + 1) * cfg_.batch_size);

    // The mismatched pair: an independent index per item. wrong_image only
    // rules out the record itself; wrong_caption re-draws until the
    // embedding differs so a caption never contradicts itself.
    const bool wrong_caption =
        cfg_.mismatch_strategy == MismatchStrategy::wrong_caption;
    Rng mism(Rng::derive(cfg_.seed, "mismatch", iter_));
    std::vector<std::size_t> wrong(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::size_t j, attempts = 0;
      do {
        j = mism.below(images_.size());
        if (++attempts > 100 * images_.size())
          throw ContractError(
              wrong_caption
                  ? "cannot draw a differing caption; are all embeddings "
                    "equal?"
                  : "cannot draw a different record");
      } while (wrong_caption ? embeds_[j] == embeds_[batch[i]]
                             : j == batch[i]);
      wrong[i] = j;
    }

    Tensor<T> real = gather_images(batch);
    Tensor<T> text = gather_embeds(batch);
    Tensor<T> mismatch_image =
        wrong_caption ? real : gather_images(wrong);
    Tensor<T> mismatch_text = wrong_caption ? gather_embeds(wrong) : text;

    Rng noise_d(Rng::derive(cfg_.seed, "noise", iter_));
    Tensor<T> z_d = sample_noise(batch.size(), noise_d);

    TrainRow row;
    row.iter = iter_;
    row.epoch = epoch;
    row.swapped = cfg_.swap_period != 0 && iter_ % cfg_.swap_period == 0;

    // Discriminator update. Generator parameters are frozen so the fake
    // batch enters as a constant and the tape stays inside D.
    for (auto& p : g_.parameters()) p.set_requires_grad(false);
    {
      Tape<T> tape;
      Tensor<T> fake = g_.forward(&tape, z_d, text, BnMode::train);
      // On swap iterations the image batches trade places; captions and
      // targets stay put, teaching D that image-caption agreement, not
      // image realism alone, separates the classes.
      const Tensor<T>& positive = row.swapped ? fake : real;
      const Tensor<T>& negative = row.swapped ? real : fake;
      auto s_pos = d_.forward(&tape, positive, text, BnMode::train);
      auto s_wrong =
          d_.forward(&tape, mismatch_image, mismatch_text, BnMode::train);
      auto s_neg = d_.forward(&tape, negative, text, BnMode::train);
      auto loss = discriminator_loss<T>(&tape, s_pos, s_wrong, s_neg);
      tape.backward(loss);
      row.loss_d = static_cast<double>(loss.item());
      row.score_real = mean_of(s_pos);
      row.score_wrong = mean_of(s_wrong);
      row.score_fake = mean_of(s_neg);
    }
    for (auto& p : g_.parameters()) p.set_requires_grad(true);
    auto dp = d_.parameters();
    opt_d_.step(dp, T(cfg_.lr_d));
    for (auto& p : dp) p.zero_grad();

    // Generator update against the just-updated discriminator, with its
    // own noise draw and frozen D parameters.
    Rng noise_g(Rng::derive(cfg_.seed, "noise_g", iter_));
    Tensor<T> z_g = sample_noise(batch.size(), noise_g);
    for (auto& p : d_.parameters()) p.set_requires_grad(false);
    {
      Tape<T> tape;
      Tensor<T> fake = g_.forward(&tape, z_g, text, BnMode::train);
      auto s_fake = d_.forward(&tape, fake, text, BnMode::train);
      auto loss = generator_loss<T>(&tape, s_fake);
      tape.backward(loss);
      row.loss_g = static_cast<double>(loss.item());
    }
    for (auto& p : d_.parameters()) p.set_requires_grad(true);
    auto gp = g_.parameters();
    opt_g_.step(gp, T(cfg_.lr_g));
    for (auto& p : gp) p.zero_grad();

    // Saturation watch. Swapped iterations score exchanged batches, so
    // they neither extend nor break the run of saturated measurements.
    if (!row.swapped) {
      if (row.score_real > 0.99 && row.score_fake < 0.01) {
        if (++collapse_run_ >= 50 && !collapse_) collapse_ = iter_;
      } else {
        collapse_run_ = 0;
      }
    }
    return row;
  }

  TrainConfig cfg_;
  AdamState<T> opt_g_, opt_d_;
  Generator<T> g_;
  Discriminator<T> d_;
  std::vector<Tensor<T>> images_;
  std::vector<std::vector<T>> embeds_;
  std::size_t iter_ = 0;
  std::vector<std::size_t> perm_;
  std::size_t perm_epoch_ = static_cast<std::size_t>(-1);
  std::optional<std::size_t> collapse_;
  std::size_t collapse_run_ = 0;
};

}  // namespace t2f
