#include "holoqa/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "holoqa/rng.hpp"

namespace holoqa {

std::size_t InvertedIndex::slot_of(const std::string& doc_id) const {
  auto it = doc_slot.find(doc_id);
  if (it == doc_slot.end()) throw DataError("unknown document id " + doc_id);
  return it->second;
}

InvertedIndex index_corpus(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& documents) {
  if (documents.empty()) throw DataError("index_corpus needs at least one document");
  InvertedIndex index;
  std::size_t total_len = 0;
  for (const auto& [id, tokens] : documents) {
    if (!index.doc_slot.emplace(id, index.doc_ids.size()).second)
      throw DataError("duplicate document id " + id);
    const std::size_t slot = index.doc_ids.size();
    index.doc_ids.push_back(id);
    index.doc_len.push_back(tokens.size());
    total_len += tokens.size();
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [tok, n] : tf) index.postings[tok].emplace_back(slot, n);
  }
  for (auto& [tok, plist] : index.postings) {
    (void)tok;
    std::sort(plist.begin(), plist.end());
  }
  index.avgdl = static_cast<double>(total_len) / static_cast<double>(documents.size());
  return index;
}

namespace {

double idf_of(const InvertedIndex& index, std::size_t df) {
  const double n = static_cast<double>(index.doc_count());
  return std::log(1.0 + (n - static_cast<double>(df) + 0.5) /
                            (static_cast<double>(df) + 0.5));
}

std::vector<std::string> unique_terms(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens)
    if (seen.insert(t).second) out.push_back(t);
  return out;
}

double term_contribution(const InvertedIndex& index, std::size_t tf, std::size_t df,
                         std::size_t len, double k1, double b) {
  const double len_ratio =
      index.avgdl > 0.0 ? static_cast<double>(len) / index.avgdl : 0.0;
  const double tf_d = static_cast<double>(tf);
  return idf_of(index, df) * tf_d * (k1 + 1.0) /
         (tf_d + k1 * (1.0 - b + b * len_ratio));
}

}  // namespace

double bm25_score(const std::vector<std::string>& query_tokens,
                  const std::string& doc_id, const InvertedIndex& index, double k1,
                  double b) {
  const std::size_t slot = index.slot_of(doc_id);
  double score = 0.0;
  for (const auto& term : unique_terms(query_tokens)) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const auto& plist = it->second;
    auto pit = std::lower_bound(plist.begin(), plist.end(),
                                std::make_pair(slot, std::size_t(0)));
    if (pit == plist.end() || pit->first != slot) continue;
    score += term_contribution(index, pit->second, plist.size(),
                               index.doc_len[slot], k1, b);
  }
  return score;
}

std::vector<std::string> bm25_top(const std::vector<std::string>& query_tokens,
                                  const InvertedIndex& index, std::size_t pool_size,
                                  double k1, double b) {
  std::vector<double> scores(index.doc_count(), 0.0);
  for (const auto& term : unique_terms(query_tokens)) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const std::size_t df = it->second.size();
    for (const auto& [slot, tf] : it->second)
      scores[slot] += term_contribution(index, tf, df, index.doc_len[slot], k1, b);
  }
  std::vector<std::size_t> hits;
  for (std::size_t s = 0; s < scores.size(); ++s)
    if (scores[s] > 0.0) hits.push_back(s);
  std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    return index.doc_ids[a] < index.doc_ids[c];
  });
  if (hits.size() > pool_size) hits.resize(pool_size);
  std::vector<std::string> out;
  out.reserve(hits.size());
  for (std::size_t s : hits) out.push_back(index.doc_ids[s]);
  return out;
}

std::vector<std::string> sample_negatives(const std::vector<std::string>& question,
                                          const std::string& gold_id,
                                          const InvertedIndex& index,
                                          std::size_t pool_size, std::size_t k,
                                          std::uint64_t seed) {
  if (index.doc_count() < k + 1)
    throw DataError("corpus of " + std::to_string(index.doc_count()) +
                    " documents cannot supply " + std::to_string(k) +
                    " negatives plus gold");
  std::vector<std::string> pool = bm25_top(question, index, pool_size);
  pool.erase(std::remove(pool.begin(), pool.end(), gold_id), pool.end());

  Rng rng(seed);
  std::vector<std::string> chosen;
  if (pool.size() >= k) {
    for (std::size_t i : rng.sample_without_replacement(pool.size(), k))
      chosen.push_back(pool[i]);
    return chosen;
  }

  chosen = pool;  // every non-gold hit, then uniform fill from the rest
  std::unordered_set<std::string> taken(chosen.begin(), chosen.end());
  taken.insert(gold_id);
  std::vector<std::string> rest;
  for (const auto& id : index.doc_ids)
    if (taken.count(id) == 0) rest.push_back(id);
  const std::size_t need = k - chosen.size();
  for (std::size_t i : rng.sample_without_replacement(rest.size(), need))
    chosen.push_back(rest[i]);
  return chosen;
}

}  // namespace holoqa
