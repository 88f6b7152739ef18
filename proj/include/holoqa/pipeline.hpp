#pragma once

// Orchestration shared by the command-line tool and the acceptance
// harness: flat-key config resolution, run manifests, data preparation,
// and end-to-end training runs with on-disk artifacts.

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "holoqa/checkpoint.hpp"
#include "holoqa/data.hpp"
#include "holoqa/model.hpp"
#include "holoqa/trainer.hpp"

namespace holoqa {

struct DataPaths {
  std::string train;
  std::string dev;
  std::string test;
  std::string embeddings;  // empty: seeded random table
  std::string stopwords;   // empty: built-in list
};

// Everything needed to reproduce a run: resolved model + trainer config,
// data paths, and output location. Serialized next to the artifacts.
struct RunManifest {
  ModelConfig model;
  TrainConfig trainer;
  DataPaths paths;
  std::string out_dir;
  std::string precision = "f64";  // f32 | f64
  std::size_t workers = 1;
};

// Full-scale defaults: 50-d frozen embeddings into 640-d three-layer
// LSTMs, 64-unit hidden layer, dropout 0.5, Adam at 1e-5 with clip 1.0,
// batch 256, 30 epochs, patience 5. An empty config file trains that.
RunManifest make_default_manifest();

// Ordered key=value pairs; later entries win when applied in order.
using Settings = std::vector<std::pair<std::string, std::string>>;

// Flat dotted keys, one `key = value` per line, '#' comments.
Settings parse_config_text(const std::string& text, const std::string& origin);
Settings load_config_file(const std::string& path);

// Applies one dotted key. Unknown key or unparsable value -> ConfigError.
void apply_setting(RunManifest& m, const std::string& key,
                   const std::string& value);

RunManifest resolve_manifest(const Settings& file_settings,
                             const Settings& overrides);

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

// .jsonl / .json -> JSONL, anything else -> TSV.
DataFormat data_format_for(const std::string& path);

// ConfigError naming the path when it is missing or unreadable.
void require_readable(const std::string& path, const std::string& what);

// IDF corpus: each question once, each candidate answer once.
std::vector<std::vector<std::string>> idf_corpus(
    const std::vector<const QADataset*>& splits);

struct PreparedData {
  QADataset train, dev, test;  // splits without a configured path stay empty
  Vocabulary vocab;
  IdfTable idf;
  StopwordSet stopwords;
  std::vector<EncodedInstance> train_enc, dev_enc, test_enc;
};

// Loads every split named in the manifest, builds the shared vocabulary
// and IDF table over all of them, and encodes to padded id sequences.
PreparedData prepare_data(const RunManifest& m);

// Same preparation for splits already in memory (no files involved).
PreparedData prepare_loaded(const RunManifest& m, QADataset train,
                            QADataset dev, QADataset test);

template <typename T>
EmbeddingTable<T> make_embeddings(const RunManifest& m,
                                  const Vocabulary& vocab) {
  if (!m.paths.embeddings.empty())
    return load_pretrained_embeddings<T>(m.paths.embeddings, vocab,
                                         m.model.embed_dim,
                                         mix_seed(m.model.seed, 11));
  Rng rng(mix_seed(m.model.seed, 11));
  std::vector<T> data(vocab.size() * m.model.embed_dim);
  for (auto& v : data) v = static_cast<T>(rng.uniform(-0.5, 0.5));
  return EmbeddingTable<T>(vocab.size(), m.model.embed_dim, std::move(data));
}

template <typename T>
struct TrainArtifacts {
  Model<T> model;  // parameters as of the final epoch
  TrainResult result;
  bool has_test = false;
  MetricReport test_report{};  // best dev checkpoint scored on test
};

// Train per the manifest. With an out_dir: writes manifest.json, the
// checkpoints/ directory, and (given a test split) test.run + test.qrels.
template <typename T>
TrainArtifacts<T> run_training(const RunManifest& m, const PreparedData& data,
                               std::ostream* log = nullptr) {
  validate_config(m.model);
  validate_train_config(m.trainer);

  auto embeddings = make_embeddings<T>(m, data.vocab);
  TrainArtifacts<T> out{build_model(m.model, std::move(embeddings)), {}};

  std::string checkpoint_dir;
  if (!m.out_dir.empty()) {
    std::filesystem::create_directories(m.out_dir);
    write_manifest(m, m.out_dir + "/manifest.json");
    checkpoint_dir = m.out_dir + "/checkpoints";
  }
  CheckpointExtras extras{data.vocab, data.idf, data.stopwords};

  out.result = train(out.model, data.train_enc, data.dev_enc, m.trainer,
                     checkpoint_dir, extras, log, CompositionBackend::FFT,
                     m.workers);

  if (!data.test_enc.empty()) {
    out.has_test = true;
    // Score the model that won on dev, not the one of the final epoch.
    RankedRun run;
    if (!out.result.checkpoints.empty()) {
      auto best = load_checkpoint<T>(out.result.checkpoints.front().path);
      std::tie(out.test_report, run) =
          evaluate_model(best.model, data.test_enc, m.workers);
    } else {
      std::tie(out.test_report, run) =
          evaluate_model(out.model, data.test_enc, m.workers);
    }
    if (!m.out_dir.empty()) {
      write_run_file(run, m.out_dir + "/test.run");
      write_qrels(run, m.out_dir + "/test.qrels");
    }
  }
  return out;
}

// Encoding against a loaded checkpoint's own preprocessing state. The
// checkpoint must carry its vocabulary; overlap features additionally
// need the stored IDF table.
template <typename T>
std::vector<EncodedInstance> encode_with_checkpoint(
    const QADataset& data, const LoadedCheckpoint<T>& loaded) {
  if (!loaded.extras.vocab)
    throw ConfigError(
        "checkpoint carries no vocabulary; it cannot encode new text");
  const ModelConfig& config = loaded.model.config;
  IdfTable idf;
  if (loaded.extras.idf)
    idf = *loaded.extras.idf;
  else if (config.use_overlap_feats)
    throw ConfigError(
        "checkpoint has overlap features enabled but stores no IDF table");
  const StopwordSet& stop =
      loaded.extras.stopwords ? *loaded.extras.stopwords : default_stopwords();
  return encode_dataset(data, *loaded.extras.vocab, config, idf, stop);
}

}  // namespace holoqa
