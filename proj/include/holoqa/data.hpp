#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "holoqa/common.hpp"
#include "holoqa/layers.hpp"
#include "holoqa/rng.hpp"

namespace holoqa {

struct QAInstance {
  std::string query_id;
  std::string candidate_id;
  int label = 0;  // binary relevance
  std::vector<std::string> question_tokens;
  std::vector<std::string> answer_tokens;
};

struct QAGroup {
  std::string query_id;
  std::vector<QAInstance> candidates;  // file order
};

struct DatasetStats {
  std::size_t questions = 0;
  std::size_t pairs = 0;
  std::size_t positives = 0;
  double pct_correct = 0.0;
};

struct QADataset {
  std::vector<QAGroup> groups;  // first-appearance order of query ids
  std::string split;

  std::size_t question_count() const { return groups.size(); }
  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.candidates.size();
    return n;
  }
  DatasetStats stats() const;
};

enum class DataFormat { TSV, JSONL };

// Lowercases, replaces every non-alphanumeric byte with a space, splits on
// whitespace. No stemming.
std::vector<std::string> tokenize(const std::string& text);

QADataset load_dataset(const std::string& path, DataFormat format,
                       const std::string& split = "");

struct Vocabulary {
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  std::vector<std::string> id_to_token;  // [PAD, UNK, ...]
  std::unordered_map<std::string, std::size_t> token_to_id;

  std::size_t size() const { return id_to_token.size(); }
  bool contains(const std::string& tok) const { return token_to_id.count(tok) > 0; }
  std::size_t id(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnk : it->second;
  }

  static Vocabulary from_tokens(const std::vector<std::string>& id_to_token);
};

// Ids ordered by frequency (desc) then token (asc); PAD=0 and UNK=1 reserved.
Vocabulary build_vocabulary(const std::vector<const QADataset*>& datasets);

std::vector<std::size_t> encode_and_pad(const std::vector<std::string>& tokens,
                                        const Vocabulary& vocab, std::size_t max_len);

struct IdfTable {
  std::unordered_map<std::string, double> weights;
  std::size_t doc_count = 0;

  // Smoothed ln((N+1)/(df+1)) + 1; unseen tokens take the df=0 value.
  double operator()(const std::string& tok) const;
  double max_weight() const;
};

IdfTable compute_idf(const std::vector<std::vector<std::string>>& documents);

using StopwordSet = std::unordered_set<std::string>;

const StopwordSet& default_stopwords();
StopwordSet load_stopwords(const std::string& path);

// [raw overlap, idf overlap, raw overlap w/o stopwords, idf overlap w/o
// stopwords], computed on unique-token intersections. Normalized divides by
// |q_unique| + |a_unique| (the filtered sets for the filtered features).
std::array<double, 4> overlap_features(const std::vector<std::string>& question,
                                       const std::vector<std::string>& answer,
                                       const IdfTable& idf, const StopwordSet& stop,
                                       bool normalized = true);

namespace detail {
struct ParsedEmbeddings {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> rows;
};
ParsedEmbeddings parse_embedding_file(const std::string& path);
}  // namespace detail

// Word2vec-style text file: `token v1 … vn` per line, optional `count dim`
// header auto-detected. In-vocab rows are copied; missing tokens are drawn
// uniform in [−0.25, 0.25], each row seeded by (seed, row id) so the table
// is reproducible regardless of load order. PAD stays zero.
template <typename T>
EmbeddingTable<T> load_pretrained_embeddings(const std::string& path,
                                             const Vocabulary& vocab,
                                             std::size_t expect_dim,
                                             std::uint64_t seed) {
  detail::ParsedEmbeddings parsed = detail::parse_embedding_file(path);
  if (expect_dim != 0 && parsed.dim != expect_dim)
    throw ConfigError("embedding file dimension " + std::to_string(parsed.dim) +
                      " != configured " + std::to_string(expect_dim));
  const std::size_t n = parsed.dim;
  std::vector<T> data(vocab.size() * n, T(0));
  for (std::size_t id = 1; id < vocab.size(); ++id) {
    auto it = parsed.rows.find(vocab.id_to_token[id]);
    if (it != parsed.rows.end()) {
      for (std::size_t j = 0; j < n; ++j)
        data[id * n + j] = static_cast<T>(it->second[j]);
    } else {
      Rng rng(mix_seed(seed, id));
      for (std::size_t j = 0; j < n; ++j)
        data[id * n + j] = static_cast<T>(rng.uniform(-0.25, 0.25));
    }
  }
  return EmbeddingTable<T>(vocab.size(), n, std::move(data));
}

}  // namespace holoqa
