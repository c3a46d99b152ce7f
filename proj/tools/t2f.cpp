// Command router for the whole pipeline. Every subcommand that writes
// artifacts drops a manifest next to them recording the exact invocation,
// the resolved knobs, the seeds, and a digest per output file, so any run
// can be replayed or audited from the manifest alone.
//
// T2F_PRECISION=32 (default) or 64 picks the scalar width for the model
// paths; gradcheck always measures in 64-bit because finite differences
// in float cannot resolve the tolerances that matter.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "t2f/caption.hpp"
#include "t2f/checkpoint.hpp"
#include "t2f/embedding.hpp"
#include "t2f/error.hpp"
#include "t2f/evaluator.hpp"
#include "t2f/gradsuite.hpp"
#include "t2f/manifest.hpp"
#include "t2f/ppm.hpp"
#include "t2f/synth.hpp"
#include "t2f/trainer.hpp"

namespace fs = std::filesystem;
using namespace t2f;

namespace {

using clock_ = std::chrono::steady_clock;
clock_::time_point g_started;

std::size_t precision_width() {
  const char* p = std::getenv("T2F_PRECISION");
  if (!p || !*p || std::strcmp(p, "32") == 0) return 4;
  if (std::strcmp(p, "64") == 0) return 8;
  throw ContractError(std::string("T2F_PRECISION must be 32 or 64, got '") +
                      p + "'");
}

RunManifest manifest_start(const std::vector<std::string>& argv) {
  RunManifest m;
  m.command = argv;
  return m;
}

// Artifact keys are paths relative to where the manifest itself lives, so
// a moved output tree still verifies.
void add_artifact(RunManifest& m, const fs::path& manifest_dir,
                  const fs::path& file) {
  fs::path rel = file.lexically_proximate(manifest_dir);
  m.artifacts[rel.generic_string()] = hash_file(file.string());
}

void manifest_finish(RunManifest& m, const fs::path& path) {
  m.duration_seconds =
      std::chrono::duration<double>(clock_::now() - g_started).count();
  write_manifest(m, path.string());
}

// ----- shared input plumbing

// A synth output directory (images/ plus attrs.txt) back as a dataset.
// Identity classes are rebuilt as attribute-vector equivalence classes in
// first-appearance order, which reproduces the generator's numbering for
// directories it wrote itself; the split is the same leading 75%.
SynthDataset load_dataset_dir(const std::string& dir, std::size_t size,
                              const EmbeddingConfig& ec) {
  SynthDataset ds;
  ds.records = load_celeba_format((fs::path(dir) / "images").string(),
                                  (fs::path(dir) / "attrs.txt").string(),
                                  size, ec);
  if (ds.records.empty())
    throw ContractError("dataset at '" + dir + "' holds no records");
  std::map<std::array<bool, kAttributeCount>, std::size_t> classes;
  for (auto& r : ds.records) {
    auto [it, fresh] = classes.try_emplace(r.attrs.bits(), classes.size());
    (void)fresh;
    r.identity_class = it->second;
  }
  ds.class_count = classes.size();
  ds.train_count = ds.records.size() * 3 / 4;
  return ds;
}

// Caption files are one caption per line; a leading id column separated by
// a tab is accepted and dropped, so synth's captions.tsv works directly.
std::vector<std::string> read_caption_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::vector<std::string> captions;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    captions.push_back(tab == std::string::npos ? line
                                                : line.substr(tab + 1));
  }
  if (captions.empty())
    throw ContractError("'" + path + "' holds no captions");
  return captions;
}

GanConfig model_config_of(const CheckpointData& ck) {
  auto it = ck.meta.find("config");
  if (it == ck.meta.end())
    throw ParseError("checkpoint has no model config block");
  return gan_config_from_json(it->second);
}

// Rebuilds the generator (and the discriminator it was trained against)
// from a checkpoint. Inference paths discard everything but g.
template <typename T>
struct LoadedModels {
  Generator<T> g;
  Discriminator<T> d;
  AdamState<T> opt_g{T(0.5), T(0.5)};
  AdamState<T> opt_d{T(0.5), T(0.5)};

  explicit LoadedModels(const CheckpointData& ck, const GanConfig& cfg)
      : g([&] {
          Rng r(0);
          return Generator<T>(cfg, r);
        }()),
        d([&] {
          Rng r(0);
          return Discriminator<T>(cfg, r);
        }()) {
    opt_g.attach(g.parameters());
    opt_d.attach(d.parameters());
    unpack_models(ck, g, d, opt_g, opt_d);
  }
};

// ----- caption

int run_caption(const std::vector<std::string>& argv,
                const std::string& attrs_path, const std::string& out_path,
                const std::string& ids_csv) {
  auto records = parse_attr_file_path(attrs_path);
  if (!ids_csv.empty()) {
    std::vector<AttributeRecord> picked;
    std::stringstream ss(ids_csv);
    std::string id;
    while (std::getline(ss, id, ',')) {
      auto hit = std::find_if(records.begin(), records.end(),
                              [&](const AttributeRecord& r) {
                                return r.image_id == id;
                              });
      if (hit == records.end())
        throw ContractError("id '" + id + "' is not in " + attrs_path);
      picked.push_back(*hit);
    }
    records = std::move(picked);
  }

  std::vector<CorpusRecord> corpus;
  corpus.reserve(records.size());
  for (const auto& r : records)
    corpus.push_back({r.image_id, compose_caption(r.attrs).text, r.attrs});

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + out_path + "'");
  write_corpus_tsv(corpus, out);
  out.close();

  RunManifest m = manifest_start(argv);
  m.config["attrs"] = attrs_path;
  if (!ids_csv.empty()) m.config["ids"] = ids_csv;
  fs::path dir = fs::path(out_path).parent_path();
  add_artifact(m, dir, out_path);
  manifest_finish(m, out_path + ".manifest.json");
  std::printf("%zu captions -> %s\n", corpus.size(), out_path.c_str());
  return 0;
}

// ----- embed

int run_embed(const std::vector<std::string>& argv, const std::string& text,
              std::size_t dim, std::uint64_t seed,
              const std::string& out_path) {
  EmbeddingConfig ec;
  ec.dim = dim;
  ec.seed = seed;
  TextEmbedding e = embed_caption(text, ec);

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + out_path + "'");
  for (double v : e.values) {
    float f = static_cast<float>(v);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    char le[4] = {static_cast<char>(u & 0xff),
                  static_cast<char>((u >> 8) & 0xff),
                  static_cast<char>((u >> 16) & 0xff),
                  static_cast<char>((u >> 24) & 0xff)};
    out.write(le, 4);
  }
  out.close();
  if (!out) throw IoError("short write to '" + out_path + "'");

  RunManifest m = manifest_start(argv);
  m.config["text"] = std::string(text);
  m.config["dim"] = std::to_string(dim);
  m.seeds["embed"] = seed;
  add_artifact(m, fs::path(out_path).parent_path(), out_path);
  manifest_finish(m, out_path + ".manifest.json");
  std::printf("%zu float32 values -> %s\n", e.values.size(),
              out_path.c_str());
  return 0;
}

// ----- synth

int run_synth(const std::vector<std::string>& argv, std::size_t n,
              std::size_t classes, std::size_t size, std::uint64_t seed,
              const std::string& out_dir) {
  EmbeddingConfig ec;
  SynthDataset ds = generate_dataset(n, classes, seed, size, ec);

  fs::path root(out_dir);
  std::error_code fs_err;
  fs::create_directories(root / "images", fs_err);
  if (fs_err)
    throw IoError("cannot create '" + (root / "images").string() + "': " +
                  fs_err.message());

  RunManifest m = manifest_start(argv);
  std::vector<AttributeRecord> attr_rows;
  std::vector<CorpusRecord> corpus;
  for (const auto& r : ds.records) {
    fs::path img = root / "images" / r.image_id;
    write_ppm_path(r.image, img.string());
    add_artifact(m, root, img);
    attr_rows.push_back({r.image_id, r.attrs});
    corpus.push_back({r.image_id, r.caption.text, r.attrs});
  }
  write_attr_file_path(attr_rows, (root / "attrs.txt").string());
  {
    std::ofstream out(root / "captions.tsv",
                      std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (root / "captions.tsv").string() + "'");
    write_corpus_tsv(corpus, out);
  }
  add_artifact(m, root, root / "attrs.txt");
  add_artifact(m, root, root / "captions.tsv");

  m.config["n"] = std::to_string(n);
  m.config["classes"] = std::to_string(classes);
  m.config["size"] = std::to_string(size);
  m.config["embed_dim"] = std::to_string(ec.dim);
  m.seeds["seed"] = seed;
  manifest_finish(m, root / "manifest.json");
  std::printf("%zu records, %zu classes, train split %zu -> %s\n",
              ds.records.size(), ds.class_count, ds.train_count,
              out_dir.c_str());
  return 0;
}

// ----- train

struct TrainFileConfig {
  TrainConfig train;
  std::size_t iterations = 0;  // 0: run the full epoch budget
  std::size_t checkpoint_every = 0;
};

// Flat key=value lines; '#' starts a comment. Unknown keys are errors so a
// typo cannot silently fall back to a default.
TrainFileConfig parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  TrainFileConfig fc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key=value, got '" + line + "'", lineno);
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t\r");
      auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string()
                                    : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (val.empty())
      throw ParseError("key '" + key + "' has no value", lineno);

    auto as_size = [&]() -> std::size_t {
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(val, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != val.size())
        throw ParseError("key '" + key + "' wants an integer, got '" + val +
                         "'", lineno);
      return static_cast<std::size_t>(v);
    };
    auto as_double = [&]() -> double {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(val, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != val.size())
        throw ParseError("key '" + key + "' wants a number, got '" + val +
                         "'", lineno);
      return v;
    };

    TrainConfig& tc = fc.train;
    if (key == "image_size") tc.model.image_size = as_size();
    else if (key == "z_dim") tc.model.z_dim = as_size();
    else if (key == "embed_dim") tc.model.embed_dim = as_size();
    else if (key == "text_dim") tc.model.text_dim = as_size();
    else if (key == "base_channels") tc.model.base_channels = as_size();
    else if (key == "noise") {
      if (val == "u01") tc.model.noise = NoiseKind::uniform01;
      else if (val == "usym") tc.model.noise = NoiseKind::uniform_sym;
      else
        throw ParseError("noise must be u01 or usym, got '" + val + "'",
                         lineno);
    } else if (key == "batch_size") tc.batch_size = as_size();
    else if (key == "lr_g") tc.lr_g = as_double();
    else if (key == "lr_d") tc.lr_d = as_double();
    else if (key == "beta1") tc.beta1 = as_double();
    else if (key == "beta2") tc.beta2 = as_double();
    else if (key == "epochs") tc.epochs = as_size();
    else if (key == "swap_period") tc.swap_period = as_size();
    else if (key == "seed") tc.seed = as_size();
    else if (key == "mismatch_strategy") {
      if (val == "wrong_image")
        tc.mismatch_strategy = MismatchStrategy::wrong_image;
      else if (val == "wrong_caption")
        tc.mismatch_strategy = MismatchStrategy::wrong_caption;
      else
        throw ParseError(
            "mismatch_strategy must be wrong_image or wrong_caption, got '" +
            val + "'", lineno);
    } else if (key == "iterations") fc.iterations = as_size();
    else if (key == "checkpoint_every") fc.checkpoint_every = as_size();
    else
      throw ParseError("unknown config key '" + key + "'", lineno);
  }
  return fc;
}

std::string noise_name(NoiseKind k) {
  return k == NoiseKind::uniform_sym ? "usym" : "u01";
}
std::string mismatch_name(MismatchStrategy s) {
  return s == MismatchStrategy::wrong_caption ? "wrong_caption"
                                              : "wrong_image";
}

// A freshly parsed config must agree with the checkpoint being resumed;
// anything else silently trains a different model under the old name.
void check_resume_config(const TrainConfig& file, const TrainConfig& ck) {
  auto fail = [](const std::string& key, const std::string& a,
                 const std::string& b) {
    throw ContractError("config file disagrees with checkpoint on " + key +
                        ": " + a + " vs " + b);
  };
  if (gan_config_to_json(file.model) != gan_config_to_json(ck.model))
    fail("the model", gan_config_to_json(file.model),
         gan_config_to_json(ck.model));
  if (file.batch_size != ck.batch_size)
    fail("batch_size", std::to_string(file.batch_size),
         std::to_string(ck.batch_size));
  if (file.lr_g != ck.lr_g || file.lr_d != ck.lr_d)
    fail("learning rates",
         std::to_string(file.lr_g) + "/" + std::to_string(file.lr_d),
         std::to_string(ck.lr_g) + "/" + std::to_string(ck.lr_d));
  if (file.beta1 != ck.beta1 || file.beta2 != ck.beta2)
    fail("Adam betas",
         std::to_string(file.beta1) + "/" + std::to_string(file.beta2),
         std::to_string(ck.beta1) + "/" + std::to_string(ck.beta2));
  if (file.epochs != ck.epochs)
    fail("epochs", std::to_string(file.epochs), std::to_string(ck.epochs));
  if (file.swap_period != ck.swap_period)
    fail("swap_period", std::to_string(file.swap_period),
         std::to_string(ck.swap_period));
  if (file.seed != ck.seed)
    fail("seed", std::to_string(file.seed), std::to_string(ck.seed));
  if (file.mismatch_strategy != ck.mismatch_strategy)
    fail("mismatch_strategy", mismatch_name(file.mismatch_strategy),
         mismatch_name(ck.mismatch_strategy));
}

template <typename T>
int run_train(const std::vector<std::string>& argv,
              const std::string& dataset_dir, const std::string& config_path,
              const std::string& out_path, const std::string& resume_path) {
  TrainFileConfig fc = parse_train_config(config_path);

  EmbeddingConfig ec;
  ec.dim = fc.train.model.embed_dim;
  SynthDataset data =
      load_dataset_dir(dataset_dir, fc.train.model.image_size, ec);

  std::optional<Trainer<T>> trainer;
  if (resume_path.empty()) {
    trainer.emplace(fc.train, data);
  } else {
    CheckpointData ck = read_checkpoint(resume_path);
    check_resume_config(fc.train, Trainer<T>::config_from_checkpoint(ck));
    trainer.emplace(Trainer<T>::resume(ck, data));
  }

  const std::size_t bpe = trainer->batches_per_epoch();
  std::size_t target = fc.iterations ? fc.iterations
                                     : fc.train.epochs * bpe;
  if (trainer->iteration() > target)
    throw ContractError("checkpoint is already at iteration " +
                        std::to_string(trainer->iteration()) +
                        ", past the target " + std::to_string(target));

  const std::string losses_path = out_path + ".losses.jsonl";
  std::ofstream jsonl(losses_path,
                      resume_path.empty()
                          ? std::ios::binary | std::ios::trunc
                          : std::ios::binary | std::ios::app);
  if (!jsonl) throw IoError("cannot write '" + losses_path + "'");

  std::printf("train split %zu, %zu classes, %zu batches/epoch, "
              "iterations %zu..%zu\n",
              data.train_count, data.class_count, bpe, trainer->iteration(),
              target);

  std::vector<TrainRow> rows;
  auto t0 = clock_::now();
  while (trainer->iteration() < target) {
    std::size_t remaining = target - trainer->iteration();
    std::size_t chunk = fc.checkpoint_every
                            ? std::min(fc.checkpoint_every, remaining)
                            : std::min<std::size_t>(
                                  remaining, std::max<std::size_t>(
                                                 1, (target + 19) / 20));
    rows.clear();
    trainer->run(chunk, &jsonl, &rows);
    jsonl.flush();
    if (fc.checkpoint_every) trainer->save(out_path);
    const TrainRow& last = rows.back();
    double el = std::chrono::duration<double>(clock_::now() - t0).count();
    std::printf("iter %zu  %.1fs  loss_d %.4f  loss_g %.4f  "
                "D(real) %.3f  D(wrong) %.3f  D(fake) %.3f\n",
                trainer->iteration(), el, last.loss_d, last.loss_g,
                last.score_real, last.score_wrong, last.score_fake);
    if (auto c = trainer->collapse_iteration())
      std::printf("warning: discriminator saturated at iteration %zu; "
                  "its scores have pinned past 0.99/0.01 for 50 straight "
                  "iterations and the generator is starving\n", *c);
  }
  trainer->save(out_path);
  jsonl.close();

  RunManifest m = manifest_start(argv);
  m.config["dataset"] = dataset_dir;
  m.config["image_size"] = std::to_string(fc.train.model.image_size);
  m.config["z_dim"] = std::to_string(fc.train.model.z_dim);
  m.config["embed_dim"] = std::to_string(fc.train.model.embed_dim);
  m.config["text_dim"] = std::to_string(fc.train.model.text_dim);
  m.config["base_channels"] = std::to_string(fc.train.model.base_channels);
  m.config["noise"] = noise_name(fc.train.model.noise);
  m.config["batch_size"] = std::to_string(fc.train.batch_size);
  m.config["lr_g"] = std::to_string(fc.train.lr_g);
  m.config["lr_d"] = std::to_string(fc.train.lr_d);
  m.config["beta1"] = std::to_string(fc.train.beta1);
  m.config["beta2"] = std::to_string(fc.train.beta2);
  m.config["epochs"] = std::to_string(fc.train.epochs);
  m.config["swap_period"] = std::to_string(fc.train.swap_period);
  m.config["mismatch_strategy"] = mismatch_name(fc.train.mismatch_strategy);
  m.config["iterations"] = std::to_string(target);
  m.config["checkpoint_every"] = std::to_string(fc.checkpoint_every);
  m.config["precision"] = sizeof(T) == 4 ? "32" : "64";
  if (!resume_path.empty()) m.config["resume"] = resume_path;
  m.seeds["seed"] = fc.train.seed;
  fs::path dir = fs::path(out_path).parent_path();
  add_artifact(m, dir, out_path);
  add_artifact(m, dir, losses_path);
  manifest_finish(m, out_path + ".manifest.json");

  if (auto c = trainer->collapse_iteration())
    std::printf("finished at iteration %zu (discriminator saturated at "
                "%zu)\n", trainer->iteration(), *c);
  else
    std::printf("finished at iteration %zu, no saturation\n",
                trainer->iteration());
  return 0;
}

// ----- generate

template <typename T>
int run_generate(const std::vector<std::string>& argv,
                 const std::string& ckpt_path, const std::string& caption,
                 std::size_t n, std::uint64_t seed,
                 const std::string& grid_path) {
  if (n == 0) throw ContractError("need at least one image");
  CheckpointData ck = read_checkpoint(ckpt_path);
  GanConfig cfg = model_config_of(ck);
  LoadedModels<T> models(ck, cfg);

  EmbeddingConfig ec;
  ec.dim = cfg.embed_dim;
  TextEmbedding e = embed_caption(caption, ec);

  auto z = Tensor<T>::zeros({n, cfg.z_dim});
  auto text = Tensor<T>::zeros({n, cfg.embed_dim});
  auto td = text.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive(seed, "gen_noise", i));
    fill_noise_row(z, i, cfg.noise, rng);
    for (std::size_t j = 0; j < cfg.embed_dim; ++j)
      td[i * cfg.embed_dim + j] = static_cast<T>(e.values[j]);
  }
  Tensor<T> out = models.g.forward(nullptr, z, text, BnMode::infer);

  std::vector<TensorD> images;
  const std::size_t px = 3 * cfg.image_size * cfg.image_size;
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> one(px);
    for (std::size_t j = 0; j < px; ++j)
      one[j] = static_cast<double>(od[i * px + j]);
    images.push_back(TensorD::from_raw(
        {3, cfg.image_size, cfg.image_size}, std::move(one)));
  }
  std::size_t cols = 1;
  while (cols * cols < n) ++cols;
  write_ppm_path(tile_grid(images, cols), grid_path);

  RunManifest m = manifest_start(argv);
  m.config["ckpt"] = ckpt_path;
  m.config["caption"] = caption;
  m.config["n"] = std::to_string(n);
  m.config["precision"] = sizeof(T) == 4 ? "32" : "64";
  m.seeds["seed"] = seed;
  add_artifact(m, fs::path(grid_path).parent_path(), grid_path);
  manifest_finish(m, grid_path + ".manifest.json");
  std::printf("%zu images for \"%s\" -> %s\n", n, caption.c_str(),
              grid_path.c_str());
  return 0;
}

// ----- evaluate

nlohmann::json score_to_json(const ScoreResult& s) {
  return {{"mean", s.mean},
          {"std_dev", s.std_dev},
          {"per_split", s.per_split},
          {"kl_mean", s.kl_mean},
          {"per_split_kl", s.per_split_kl},
          {"marginal_entropy", s.marginal_entropy},
          {"conditional_entropy", s.conditional_entropy}};
}

template <typename T>
int run_evaluate(const std::vector<std::string>& argv,
                 const std::string& ckpt_path,
                 const std::string& captions_path,
                 const std::string& classifier_path, bool fit_classifier,
                 const std::string& dataset_dir, std::size_t samples,
                 std::size_t splits, std::uint64_t seed,
                 const std::string& out_path) {
  CheckpointData ck = read_checkpoint(ckpt_path);
  GanConfig cfg = model_config_of(ck);
  LoadedModels<T> models(ck, cfg);

  // Distinct captions become the conditioning classes. The file must list
  // every caption equally often: an unbalanced file would silently change
  // what "agreement over pairs" measures, so it is rejected instead.
  std::vector<std::string> lines = read_caption_lines(captions_path);
  std::vector<std::string> distinct;
  std::map<std::string, std::size_t> times;
  for (const auto& c : lines) {
    if (times.try_emplace(c, 0).second) distinct.push_back(c);
    ++times[c];
  }
  for (const auto& c : distinct)
    if (times[c] != times[distinct.front()])
      throw ContractError("caption \"" + c + "\" appears " +
                          std::to_string(times[c]) + " times, others " +
                          std::to_string(times[distinct.front()]) +
                          "; the caption file must be balanced");

  EmbeddingConfig ec;
  ec.dim = cfg.embed_dim;
  SynthDataset probe;
  probe.class_count = distinct.size();
  for (std::size_t c = 0; c < distinct.size(); ++c) {
    DatasetRecord r;
    r.image_id = "caption-" + std::to_string(c);
    ExtractionResult ex = extract_attributes(distinct[c]);
    r.attrs = ex.attrs;
    r.caption.text = distinct[c];
    r.embedding = embed_caption(distinct[c], ec);
    r.identity_class = c;
    probe.records.push_back(std::move(r));
  }

  std::optional<ProbeClassifier> clf;
  if (fit_classifier) {
    if (dataset_dir.empty())
      throw ContractError("--fit-classifier needs --dataset");
    if (classifier_path.empty())
      throw ContractError("--fit-classifier needs --classifier");
    SynthDataset data = load_dataset_dir(dataset_dir, cfg.image_size, ec);
    ClassifierConfig cc;
    cc.seed = seed;
    clf = train_probe_classifier(data, cc);
    save_probe_classifier(*clf, classifier_path);
    std::printf("classifier: train %.1f%%, test %.1f%% -> %s\n",
                100 * clf->train_accuracy, 100 * clf->test_accuracy,
                classifier_path.c_str());
  } else if (!classifier_path.empty()) {
    clf = load_probe_classifier(classifier_path);
  }

  EvalResult r = evaluate_generator(models.g, probe,
                                    clf ? &*clf : nullptr, samples, splits,
                                    seed);

  nlohmann::json report{
      {"samples", r.samples},
      {"splits", splits},
      {"captions", distinct.size()},
      {"attr_agreement", r.attr_agreement},
      {"attr_pairs", r.attr_pairs},
      {"inception", clf ? score_to_json(r.inception) : nlohmann::json()},
      {"class_marginal", clf ? nlohmann::json(r.marginal)
                             : nlohmann::json()},
      {"classifier",
       clf ? nlohmann::json{{"path", classifier_path},
                            {"train_accuracy", clf->train_accuracy},
                            {"test_accuracy", clf->test_accuracy}}
           : nlohmann::json()}};
  {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + out_path + "'");
    out << report.dump(2) << '\n';
  }

  RunManifest m = manifest_start(argv);
  m.config["ckpt"] = ckpt_path;
  m.config["captions"] = captions_path;
  m.config["samples"] = std::to_string(samples);
  m.config["splits"] = std::to_string(splits);
  m.config["precision"] = sizeof(T) == 4 ? "32" : "64";
  if (!classifier_path.empty()) m.config["classifier"] = classifier_path;
  m.seeds["seed"] = seed;
  fs::path dir = fs::path(out_path).parent_path();
  add_artifact(m, dir, out_path);
  if (fit_classifier) add_artifact(m, dir, classifier_path);
  manifest_finish(m, out_path + ".manifest.json");

  std::printf("agreement %.3f over %zu pairs", r.attr_agreement,
              r.attr_pairs);
  if (clf)
    std::printf(", score %.3f +- %.3f", r.inception.mean,
                r.inception.std_dev);
  std::printf(" -> %s\n", out_path.c_str());
  return 0;
}

// ----- gradcheck

int run_gradcheck(double tol) {
  auto t0 = clock_::now();
  std::vector<SuiteCheck> checks = gradient_suite();
  double total =
      std::chrono::duration<double>(clock_::now() - t0).count();
  std::size_t failed = 0;
  double worst = 0;
  for (const auto& c : checks) {
    bool ok = c.ok(tol);
    if (!ok) ++failed;
    worst = std::max(worst, c.worst.max_rel_err);
    std::printf("%-26s %10.3e  %5.2fs  %s\n", c.name.c_str(),
                c.worst.max_rel_err, c.seconds, ok ? "ok" : "FAIL");
  }
  std::printf("%zu checks, worst %.3e, %.1fs%s\n", checks.size(), worst,
              total, failed ? "" : ", all passed");
  return failed ? 1 : 0;
}

// ----- critique

int run_critique(const std::vector<std::string>& argv, std::size_t n,
                 std::size_t classes, std::size_t splits,
                 const std::string& skews_csv, const std::string& order_name,
                 std::uint64_t seed, const std::string& out_path) {
  std::vector<double> skews;
  std::stringstream ss(skews_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != tok.size())
      throw ContractError("bad skew value '" + tok + "'");
    skews.push_back(v);
  }
  SweepOrder order;
  if (order_name == "interleaved") order = SweepOrder::interleaved;
  else if (order_name == "shuffled") order = SweepOrder::shuffled;
  else
    throw ContractError("--order must be interleaved or shuffled, got '" +
                        order_name + "'");

  std::vector<SweepPoint> points = skew_sweep(n, classes, skews, splits,
                                              order, seed);
  bool decreasing = true;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].score.mean >= points[i - 1].score.mean) decreasing = false;
  for (const auto& p : points)
    std::printf("skew %.3f  score %.6f +- %.6f  kl %.6f\n", p.skew,
                p.score.mean, p.score.std_dev, p.score.kl_mean);
  std::printf("%s across %zu points\n",
              decreasing ? "strictly decreasing" : "NOT strictly decreasing",
              points.size());

  if (!out_path.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : points)
      arr.push_back({{"skew", p.skew},
                     {"mean", p.score.mean},
                     {"std_dev", p.score.std_dev},
                     {"kl_mean", p.score.kl_mean},
                     {"per_split", p.score.per_split}});
    nlohmann::json report{{"n", n},
                          {"classes", classes},
                          {"splits", splits},
                          {"order", order_name},
                          {"points", arr},
                          {"strictly_decreasing", decreasing}};
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + out_path + "'");
    out << report.dump(2) << '\n';
    out.close();

    RunManifest m = manifest_start(argv);
    m.config["n"] = std::to_string(n);
    m.config["classes"] = std::to_string(classes);
    m.config["splits"] = std::to_string(splits);
    m.config["skews"] = skews_csv;
    m.config["order"] = order_name;
    m.seeds["seed"] = seed;
    add_artifact(m, fs::path(out_path).parent_path(), out_path);
    manifest_finish(m, out_path + ".manifest.json");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_started = clock_::now();
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"text-to-face laboratory"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  int rc = 0;

  // caption
  std::string c_attrs, c_out, c_ids;
  auto* sc_caption =
      app.add_subcommand("caption", "compile captions from an attribute file");
  sc_caption->add_option("--attrs", c_attrs, "attribute file")->required();
  sc_caption->add_option("--out", c_out, "output TSV")->required();
  sc_caption->add_option("--ids", c_ids, "comma-separated image ids to keep");
  sc_caption->callback([&] { rc = run_caption(args, c_attrs, c_out, c_ids); });

  // embed
  std::string e_text, e_out;
  std::size_t e_dim = 256;
  std::uint64_t e_seed = 0;
  auto* sc_embed =
      app.add_subcommand("embed", "embed caption text as raw float32");
  sc_embed->add_option("--text", e_text, "caption text")->required();
  sc_embed->add_option("--dim", e_dim, "embedding width");
  sc_embed->add_option("--seed", e_seed, "hash seed");
  sc_embed->add_option("--out", e_out, "output file (little-endian f32)")
      ->required();
  sc_embed->callback(
      [&] { rc = run_embed(args, e_text, e_dim, e_seed, e_out); });

  // synth
  std::size_t s_n = 2000, s_classes = 50, s_size = 16;
  std::uint64_t s_seed = 7;
  std::string s_out;
  auto* sc_synth =
      app.add_subcommand("synth", "render a synthetic glyph-face dataset");
  sc_synth->add_option("--n", s_n, "record count");
  sc_synth->add_option("--classes", s_classes, "identity class count");
  sc_synth->add_option("--size", s_size, "image side length");
  sc_synth->add_option("--seed", s_seed, "dataset seed");
  sc_synth->add_option("--out", s_out, "output directory")->required();
  sc_synth->callback(
      [&] { rc = run_synth(args, s_n, s_classes, s_size, s_seed, s_out); });

  // train
  std::string t_dataset, t_config, t_out, t_resume;
  auto* sc_train = app.add_subcommand("train", "adversarial training");
  sc_train->add_option("--dataset", t_dataset, "dataset directory")
      ->required();
  sc_train->add_option("--config", t_config, "flat key=value config file")
      ->required();
  sc_train->add_option("--out", t_out, "checkpoint path")->required();
  sc_train->add_option("--resume", t_resume, "checkpoint to continue from");
  sc_train->callback([&] {
    rc = precision_width() == 8
             ? run_train<double>(args, t_dataset, t_config, t_out, t_resume)
             : run_train<float>(args, t_dataset, t_config, t_out, t_resume);
  });

  // generate
  std::string g_ckpt, g_caption, g_grid;
  std::size_t g_n = 9;
  std::uint64_t g_seed = 0;
  auto* sc_gen =
      app.add_subcommand("generate", "render an image grid for one caption");
  sc_gen->add_option("--ckpt", g_ckpt, "trained checkpoint")->required();
  sc_gen->add_option("--caption", g_caption, "caption text")->required();
  sc_gen->add_option("--n", g_n, "image count");
  sc_gen->add_option("--seed", g_seed, "noise seed");
  sc_gen->add_option("--grid", g_grid, "output PPM")->required();
  sc_gen->callback([&] {
    rc = precision_width() == 8
             ? run_generate<double>(args, g_ckpt, g_caption, g_n, g_seed,
                                    g_grid)
             : run_generate<float>(args, g_ckpt, g_caption, g_n, g_seed,
                                   g_grid);
  });

  // evaluate
  std::string v_ckpt, v_captions, v_classifier, v_dataset, v_out;
  bool v_fit = false;
  std::size_t v_samples = 200, v_splits = 5;
  std::uint64_t v_seed = 0;
  auto* sc_eval =
      app.add_subcommand("evaluate", "score a generator against captions");
  sc_eval->add_option("--ckpt", v_ckpt, "trained checkpoint")->required();
  sc_eval->add_option("--captions", v_captions, "caption file, one per line")
      ->required();
  sc_eval->add_option("--classifier", v_classifier,
                      "probe classifier checkpoint");
  sc_eval->add_flag("--fit-classifier", v_fit,
                    "train the probe classifier first (needs --dataset)");
  sc_eval->add_option("--dataset", v_dataset,
                      "dataset directory for --fit-classifier");
  sc_eval->add_option("--samples", v_samples, "images to generate");
  sc_eval->add_option("--splits", v_splits, "score splits");
  sc_eval->add_option("--seed", v_seed, "noise seed");
  sc_eval->add_option("--out", v_out, "report JSON path")->required();
  sc_eval->callback([&] {
    rc = precision_width() == 8
             ? run_evaluate<double>(args, v_ckpt, v_captions, v_classifier,
                                    v_fit, v_dataset, v_samples, v_splits,
                                    v_seed, v_out)
             : run_evaluate<float>(args, v_ckpt, v_captions, v_classifier,
                                   v_fit, v_dataset, v_samples, v_splits,
                                   v_seed, v_out);
  });

  // gradcheck
  double gc_tol = 1e-6;
  auto* sc_gc = app.add_subcommand(
      "gradcheck", "finite-difference audit of every gradient (64-bit)");
  sc_gc->add_option("--tol", gc_tol, "max relative error allowed");
  sc_gc->callback([&] { rc = run_gradcheck(gc_tol); });

  // critique
  std::size_t q_n = 600, q_classes = 6, q_splits = 5;
  std::string q_skews = "0,0.2,0.4,0.6,0.8,1";
  std::string q_order = "interleaved";
  std::uint64_t q_seed = 0;
  std::string q_out;
  auto* sc_crit = app.add_subcommand(
      "critique", "score synthetic predictions as class balance degrades");
  sc_crit->add_option("--n", q_n, "prediction rows");
  sc_crit->add_option("--classes", q_classes, "class count");
  sc_crit->add_option("--splits", q_splits, "score splits");
  sc_crit->add_option("--skews", q_skews, "comma-separated skew grid");
  sc_crit->add_option("--order", q_order, "interleaved or shuffled");
  sc_crit->add_option("--seed", q_seed, "shuffle seed");
  sc_crit->add_option("--out", q_out, "report JSON path");
  sc_crit->callback([&] {
    rc = run_critique(args, q_n, q_classes, q_splits, q_skews, q_order,
                      q_seed, q_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "t2f: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "t2f: %s\n", e.what());
    return 1;
  }
  return rc;
}
