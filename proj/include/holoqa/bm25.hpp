#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "holoqa/common.hpp"

namespace holoqa {

struct InvertedIndex {
  std::vector<std::string> doc_ids;  // insertion order
  std::unordered_map<std::string, std::size_t> doc_slot;
  std::vector<std::size_t> doc_len;
  double avgdl = 0.0;
  // token -> (doc slot, term frequency), slots ascending
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::size_t>>>
      postings;

  std::size_t doc_count() const { return doc_ids.size(); }
  std::size_t slot_of(const std::string& doc_id) const;
};

InvertedIndex index_corpus(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& documents);

// Okapi BM25 with the smoothed, always-nonnegative idf
// ln(1 + (N − df + 0.5)/(df + 0.5)).
double bm25_score(const std::vector<std::string>& query_tokens,
                  const std::string& doc_id, const InvertedIndex& index,
                  double k1 = 1.2, double b = 0.75);

// Docs with positive score, ordered score desc then doc id asc, capped at
// pool_size.
std::vector<std::string> bm25_top(const std::vector<std::string>& query_tokens,
                                  const InvertedIndex& index, std::size_t pool_size,
                                  double k1 = 1.2, double b = 0.75);

// k distinct non-gold ids drawn uniformly (seeded) from the top pool_size
// hits; refilled uniformly from the rest of the corpus when the pool runs
// short.
std::vector<std::string> sample_negatives(const std::vector<std::string>& question,
                                          const std::string& gold_id,
                                          const InvertedIndex& index,
                                          std::size_t pool_size, std::size_t k,
                                          std::uint64_t seed);

}  // namespace holoqa
