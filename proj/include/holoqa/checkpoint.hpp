#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "holoqa/data.hpp"
#include "holoqa/model.hpp"

namespace holoqa {

// Artifacts the scoring pipeline needs besides the parameters, so a saved
// model can rank raw text on its own.
struct CheckpointExtras {
  std::optional<Vocabulary> vocab;
  std::optional<IdfTable> idf;
  std::optional<StopwordSet> stopwords;
};

namespace detail {

// Container layout: "HQCK", u32 version, u32 scalar width, u64 header
// length, JSON header, then raw little-endian value blobs — the embedding
// table first, the trainable tensors after it in their fixed order.
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
  char b[4];
  if (!in.read(b, 4)) throw DataError(path + ": truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in, const std::string& path) {
  char b[8];
  if (!in.read(b, 8)) throw DataError(path + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

template <typename T>
void write_blob(std::ostream& out, const std::vector<T>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
}

template <typename T>
void read_blob(std::istream& in, std::vector<T>& values, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(T))))
    throw DataError(path + ": truncated checkpoint");
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"architecture", to_string(c.architecture)},
          {"embed_dim", c.embed_dim},
          {"lstm_dim", c.lstm_dim},
          {"lstm_layers", c.lstm_layers},
          {"hidden_dim", c.hidden_dim},
          {"ntn_slices", c.ntn_slices},
          {"use_bilinear_sim", c.use_bilinear_sim},
          {"use_overlap_feats", c.use_overlap_feats},
          {"max_len_q", c.max_len_q},
          {"max_len_a", c.max_len_a},
          {"dropout_rate", c.dropout_rate},
          {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.lstm_dim = j.at("lstm_dim").get<std::size_t>();
  c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.ntn_slices = j.at("ntn_slices").get<std::size_t>();
  c.use_bilinear_sim = j.at("use_bilinear_sim").get<bool>();
  c.use_overlap_feats = j.at("use_overlap_feats").get<bool>();
  c.max_len_q = j.at("max_len_q").get<std::size_t>();
  c.max_len_a = j.at("max_len_a").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& path,
                     const CheckpointExtras& extras = {}) {
  nlohmann::json header;
  header["config"] = detail::config_to_json(model.config);
  header["embedding"] = {{"vocab_size", model.embeddings.vocab_size()},
                         {"dim", model.embeddings.dim()}};
  auto params = model.trainable_params();
  auto names = parameter_names(model);
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i)
    tensors.push_back({{"name", names[i]}, {"shape", params[i].shape()}});
  header["tensors"] = std::move(tensors);
  if (extras.vocab) header["vocab"] = extras.vocab->id_to_token;
  if (extras.idf)
    header["idf"] = {{"doc_count", extras.idf->doc_count},
                     {"weights", extras.idf->weights}};
  if (extras.stopwords) {
    std::vector<std::string> sorted(extras.stopwords->begin(),
                                    extras.stopwords->end());
    std::sort(sorted.begin(), sorted.end());
    header["stopwords"] = std::move(sorted);
  }
  const std::string header_bytes = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write("HQCK", 4);
  detail::write_u32(out, detail::kCheckpointVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(sizeof(T)));
  detail::write_u64(out, header_bytes.size());
  out.write(header_bytes.data(),
            static_cast<std::streamsize>(header_bytes.size()));
  detail::write_blob(out, model.embeddings.table.values());
  for (const auto& p : params) detail::write_blob(out, p.values());
  if (!out) throw DataError("failed writing checkpoint " + path);
}

template <typename T>
struct LoadedCheckpoint {
  Model<T> model;
  CheckpointExtras extras;
};

// Scalar width recorded in the container, for precision dispatch.
inline std::size_t checkpoint_scalar_width(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "HQCK")
    throw DataError(path + ": not a checkpoint file");
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != detail::kCheckpointVersion)
    throw DataError(path + ": unsupported checkpoint version " +
                    std::to_string(version));
  return detail::read_u32(in, path);
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "HQCK")
    throw DataError(path + ": not a checkpoint file");
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != detail::kCheckpointVersion)
    throw DataError(path + ": unsupported checkpoint version " +
                    std::to_string(version));
  const std::uint32_t width = detail::read_u32(in, path);
  if (width != sizeof(T))
    throw ConfigError(path + ": checkpoint stores " + std::to_string(width) +
                      "-byte scalars, not " + std::to_string(sizeof(T)));
  const std::uint64_t header_len = detail::read_u64(in, path);
  std::string header_bytes(header_len, '\0');
  if (!in.read(header_bytes.data(), static_cast<std::streamsize>(header_len)))
    throw DataError(path + ": truncated checkpoint");

  nlohmann::json header;
  ModelConfig config;
  std::size_t vocab_size = 0, dim = 0;
  try {
    header = nlohmann::json::parse(header_bytes);
    config = detail::config_from_json(header.at("config"));
    vocab_size = header.at("embedding").at("vocab_size").get<std::size_t>();
    dim = header.at("embedding").at("dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad checkpoint header: " + e.what());
  }

  std::vector<T> embed_data(vocab_size * dim);
  detail::read_blob(in, embed_data, path);
  Model<T> model =
      build_model<T>(config, EmbeddingTable<T>(vocab_size, dim,
                                               std::move(embed_data)));

  auto params = model.trainable_params();
  auto names = parameter_names(model);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size())
    throw DataError(path + ": checkpoint lists " +
                    std::to_string(tensors.size()) + " tensors, model has " +
                    std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != names[i] ||
        tensors[i].at("shape").get<Shape>() != params[i].shape())
      throw DataError(path + ": tensor " + std::to_string(i) +
                      " does not match the declared config");
    detail::read_blob(in, params[i].mutable_values(), path);
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError(path + ": trailing bytes after checkpoint payload");

  CheckpointExtras extras;
  try {
    if (header.contains("vocab"))
      extras.vocab = Vocabulary::from_tokens(
          header.at("vocab").get<std::vector<std::string>>());
    if (header.contains("idf")) {
      IdfTable idf;
      idf.doc_count = header.at("idf").at("doc_count").get<std::size_t>();
      idf.weights = header.at("idf")
                        .at("weights")
                        .get<std::unordered_map<std::string, double>>();
      extras.idf = std::move(idf);
    }
    if (header.contains("stopwords")) {
      auto words = header.at("stopwords").get<std::vector<std::string>>();
      extras.stopwords = StopwordSet(words.begin(), words.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad checkpoint extras: " + e.what());
  }
  return LoadedCheckpoint<T>{std::move(model), std::move(extras)};
}

}  // namespace holoqa
