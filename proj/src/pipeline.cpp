#include "holoqa/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace holoqa {

RunManifest make_default_manifest() {
  RunManifest m;
  m.model.architecture = Architecture::HDLSTM;
  m.model.embed_dim = 50;
  m.model.lstm_dim = 640;
  m.model.lstm_layers = 3;
  m.model.hidden_dim = 64;
  m.model.use_bilinear_sim = true;
  m.model.use_overlap_feats = true;
  m.model.max_len_q = 32;
  m.model.max_len_a = 64;
  m.model.dropout_rate = 0.5;
  m.model.seed = 42;
  m.trainer.seed = 42;
  return m;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + value + "' is not a non-negative integer");
  }
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + value + "' is not an unsigned integer");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + value + "' is not a number");
  }
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": '" + value + "' is not a boolean");
}

}  // namespace

Settings parse_config_text(const std::string& text,
                           const std::string& origin) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": empty key or value");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

Settings load_config_file(const std::string& path) {
  require_readable(path, "config file");
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_setting(RunManifest& m, const std::string& key,
                   const std::string& value) {
  if (key == "arch") {
    m.model.architecture = architecture_from_string(value);
  } else if (key == "seed") {
    m.model.seed = parse_seed(key, value);
    m.trainer.seed = m.model.seed;
  } else if (key == "precision") {
    if (value != "f32" && value != "f64")
      throw ConfigError("precision must be f32 or f64, got '" + value + "'");
    m.precision = value;
  } else if (key == "workers") {
    m.workers = std::max<std::size_t>(1, parse_size(key, value));
  } else if (key == "out") {
    m.out_dir = value;
  } else if (key == "model.embed_dim") {
    m.model.embed_dim = parse_size(key, value);
  } else if (key == "model.lstm_dim") {
    m.model.lstm_dim = parse_size(key, value);
  } else if (key == "model.lstm_layers") {
    m.model.lstm_layers = parse_size(key, value);
  } else if (key == "model.hidden_dim") {
    m.model.hidden_dim = parse_size(key, value);
  } else if (key == "model.ntn_slices") {
    m.model.ntn_slices = parse_size(key, value);
  } else if (key == "model.bilinear_sim") {
    m.model.use_bilinear_sim = parse_flag(key, value);
  } else if (key == "model.overlap_feats") {
    m.model.use_overlap_feats = parse_flag(key, value);
  } else if (key == "model.max_len_q") {
    m.model.max_len_q = parse_size(key, value);
  } else if (key == "model.max_len_a") {
    m.model.max_len_a = parse_size(key, value);
  } else if (key == "model.dropout") {
    m.model.dropout_rate = parse_real(key, value);
  } else if (key == "train.learning_rate") {
    m.trainer.learning_rate = parse_real(key, value);
  } else if (key == "train.l2_lambda") {
    m.trainer.l2_lambda = parse_real(key, value);
  } else if (key == "train.clip_norm") {
    m.trainer.clip_norm = parse_real(key, value);
  } else if (key == "train.batch_size") {
    m.trainer.batch_size = parse_size(key, value);
  } else if (key == "train.max_epochs") {
    m.trainer.max_epochs = parse_size(key, value);
  } else if (key == "train.patience") {
    m.trainer.patience = parse_size(key, value);
  } else if (key == "train.keep_top_k") {
    m.trainer.keep_top_k = parse_size(key, value);
  } else if (key == "train.beta1") {
    m.trainer.beta1 = parse_real(key, value);
  } else if (key == "train.beta2") {
    m.trainer.beta2 = parse_real(key, value);
  } else if (key == "train.epsilon") {
    m.trainer.adam_eps = parse_real(key, value);
  } else if (key == "data.train") {
    m.paths.train = value;
  } else if (key == "data.dev") {
    m.paths.dev = value;
  } else if (key == "data.test") {
    m.paths.test = value;
  } else if (key == "data.embeddings") {
    m.paths.embeddings = value;
  } else if (key == "data.stopwords") {
    m.paths.stopwords = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunManifest resolve_manifest(const Settings& file_settings,
                             const Settings& overrides) {
  RunManifest m = make_default_manifest();
  std::set<std::string> touched;
  for (const auto& [key, value] : file_settings) {
    apply_setting(m, key, value);
    touched.insert(key);
  }
  for (const auto& [key, value] : overrides) {
    apply_setting(m, key, value);
    touched.insert(key);
  }
  // Switching to the tensor head drops the dense-head defaults that it
  // cannot consume, unless the user asked for them explicitly.
  if (m.model.architecture == Architecture::NTNLSTM) {
    if (!touched.count("model.ntn_slices") && m.model.ntn_slices == 0)
      m.model.ntn_slices = 5;
    if (!touched.count("model.hidden_dim")) m.model.hidden_dim = 0;
    if (!touched.count("model.bilinear_sim")) m.model.use_bilinear_sim = false;
    if (!touched.count("model.overlap_feats"))
      m.model.use_overlap_feats = false;
    if (!touched.count("model.dropout")) m.model.dropout_rate = 0.0;
  }
  return m;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"model", detail::config_to_json(m.model)},
          {"trainer",
           {{"learning_rate", m.trainer.learning_rate},
            {"l2_lambda", m.trainer.l2_lambda},
            {"clip_norm", m.trainer.clip_norm},
            {"batch_size", m.trainer.batch_size},
            {"max_epochs", m.trainer.max_epochs},
            {"patience", m.trainer.patience},
            {"keep_top_k", m.trainer.keep_top_k},
            {"seed", m.trainer.seed},
            {"beta1", m.trainer.beta1},
            {"beta2", m.trainer.beta2},
            {"epsilon", m.trainer.adam_eps}}},
          {"data",
           {{"train", m.paths.train},
            {"dev", m.paths.dev},
            {"test", m.paths.test},
            {"embeddings", m.paths.embeddings},
            {"stopwords", m.paths.stopwords}}},
          {"out_dir", m.out_dir},
          {"precision", m.precision},
          {"workers", m.workers}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.model = detail::config_from_json(j.at("model"));
    const auto& t = j.at("trainer");
    m.trainer.learning_rate = t.at("learning_rate").get<double>();
    m.trainer.l2_lambda = t.at("l2_lambda").get<double>();
    m.trainer.clip_norm = t.at("clip_norm").get<double>();
    m.trainer.batch_size = t.at("batch_size").get<std::size_t>();
    m.trainer.max_epochs = t.at("max_epochs").get<std::size_t>();
    m.trainer.patience = t.at("patience").get<std::size_t>();
    m.trainer.keep_top_k = t.at("keep_top_k").get<std::size_t>();
    m.trainer.seed = t.at("seed").get<std::uint64_t>();
    m.trainer.beta1 = t.at("beta1").get<double>();
    m.trainer.beta2 = t.at("beta2").get<double>();
    m.trainer.adam_eps = t.at("epsilon").get<double>();
    const auto& d = j.at("data");
    m.paths.train = d.at("train").get<std::string>();
    m.paths.dev = d.at("dev").get<std::string>();
    m.paths.test = d.at("test").get<std::string>();
    m.paths.embeddings = d.at("embeddings").get<std::string>();
    m.paths.stopwords = d.at("stopwords").get<std::string>();
    m.out_dir = j.at("out_dir").get<std::string>();
    m.precision = j.at("precision").get<std::string>();
    m.workers = j.at("workers").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path);
  out << manifest_to_json(m).dump(2) << "\n";
}

RunManifest read_manifest(const std::string& path) {
  require_readable(path, "manifest");
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return manifest_from_json(j);
}

DataFormat data_format_for(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  return ext == ".jsonl" || ext == ".json" ? DataFormat::JSONL
                                           : DataFormat::TSV;
}

void require_readable(const std::string& path, const std::string& what) {
  std::error_code ec;
  if (path.empty() || !std::filesystem::exists(path, ec) ||
      std::filesystem::is_directory(path, ec))
    throw ConfigError("missing " + what + ": " + path);
}

std::vector<std::vector<std::string>> idf_corpus(
    const std::vector<const QADataset*>& splits) {
  std::vector<std::vector<std::string>> docs;
  for (const QADataset* split : splits) {
    for (const auto& group : split->groups) {
      if (!group.candidates.empty())
        docs.push_back(group.candidates.front().question_tokens);
      for (const auto& c : group.candidates) docs.push_back(c.answer_tokens);
    }
  }
  return docs;
}

PreparedData prepare_loaded(const RunManifest& m, QADataset train,
                            QADataset dev, QADataset test) {
  PreparedData out;
  out.train = std::move(train);
  out.dev = std::move(dev);
  out.test = std::move(test);

  std::vector<const QADataset*> splits;
  for (const QADataset* s : {&out.train, &out.dev, &out.test})
    if (!s->groups.empty()) splits.push_back(s);
  if (splits.empty()) throw DataError("no data to prepare");

  out.vocab = build_vocabulary(splits);
  out.idf = compute_idf(idf_corpus(splits));
  out.stopwords = m.paths.stopwords.empty()
                      ? default_stopwords()
                      : load_stopwords(m.paths.stopwords);

  out.train_enc = encode_dataset(out.train, out.vocab, m.model, out.idf,
                                 out.stopwords);
  out.dev_enc =
      encode_dataset(out.dev, out.vocab, m.model, out.idf, out.stopwords);
  out.test_enc =
      encode_dataset(out.test, out.vocab, m.model, out.idf, out.stopwords);
  return out;
}

PreparedData prepare_data(const RunManifest& m) {
  auto load_split = [&](const std::string& path, const char* split) {
    if (path.empty()) return QADataset{};
    require_readable(path, std::string(split) + " dataset");
    return load_dataset(path, data_format_for(path), split);
  };
  if (!m.paths.embeddings.empty())
    require_readable(m.paths.embeddings, "embedding file");
  if (!m.paths.stopwords.empty())
    require_readable(m.paths.stopwords, "stopword file");
  return prepare_loaded(m, load_split(m.paths.train, "train"),
                        load_split(m.paths.dev, "dev"),
                        load_split(m.paths.test, "test"));
}

}  // namespace holoqa
