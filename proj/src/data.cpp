#include "holoqa/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace holoqa {

DatasetStats QADataset::stats() const {
  DatasetStats s;
  s.questions = groups.size();
  for (const auto& g : groups) {
    s.pairs += g.candidates.size();
    for (const auto& c : g.candidates) s.positives += c.label;
  }
  s.pct_correct = s.pairs == 0 ? 0.0
                               : 100.0 * static_cast<double>(s.positives) /
                                     static_cast<double>(s.pairs);
  return s;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char ch : text) {
    if (std::isalnum(ch))
      cleaned.push_back(static_cast<char>(std::tolower(ch)));
    else
      cleaned.push_back(' ');
  }
  std::vector<std::string> tokens;
  std::istringstream in(cleaned);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

namespace {

int parse_label(const std::string& raw, const std::string& path, std::size_t lineno) {
  if (raw == "0") return 0;
  if (raw == "1") return 1;
  throw DataError(path + ":" + std::to_string(lineno) + ": label '" + raw +
                  "' is not 0 or 1");
}

QAInstance instance_from_fields(std::string query_id, std::string candidate_id,
                                int label, const std::string& question,
                                const std::string& answer) {
  QAInstance inst;
  inst.query_id = std::move(query_id);
  inst.candidate_id = std::move(candidate_id);
  inst.label = label;
  inst.question_tokens = tokenize(question);
  inst.answer_tokens = tokenize(answer);
  return inst;
}

QAInstance parse_tsv_line(const std::string& line, const std::string& path,
                          std::size_t lineno) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  if (fields.size() != 5)
    throw DataError(path + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields, got " +
                    std::to_string(fields.size()));
  if (fields[0].empty() || fields[1].empty())
    throw DataError(path + ":" + std::to_string(lineno) + ": empty query or candidate id");
  return instance_from_fields(fields[0], fields[1],
                              parse_label(fields[2], path, lineno), fields[3],
                              fields[4]);
}

QAInstance parse_jsonl_line(const std::string& line, const std::string& path,
                            std::size_t lineno) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
  }
  try {
    const auto& label = obj.at("label");
    int lab;
    if (label.is_string())
      lab = parse_label(label.get<std::string>(), path, lineno);
    else
      lab = parse_label(std::to_string(label.get<int>()), path, lineno);
    return instance_from_fields(obj.at("query_id").get<std::string>(),
                                obj.at("candidate_id").get<std::string>(), lab,
                                obj.at("question_text").get<std::string>(),
                                obj.at("answer_text").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

}  // namespace

QADataset load_dataset(const std::string& path, DataFormat format,
                       const std::string& split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path);

  QADataset ds;
  ds.split = split;
  std::unordered_map<std::string, std::size_t> group_index;
  std::unordered_map<std::string, std::unordered_set<std::string>> seen_candidates;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    QAInstance inst = format == DataFormat::TSV
                          ? parse_tsv_line(line, path, lineno)
                          : parse_jsonl_line(line, path, lineno);
    auto [it, fresh] = group_index.try_emplace(inst.query_id, ds.groups.size());
    if (fresh) ds.groups.push_back(QAGroup{inst.query_id, {}});
    if (!seen_candidates[inst.query_id].insert(inst.candidate_id).second)
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate candidate '" +
                      inst.candidate_id + "' for query '" + inst.query_id + "'");
    ds.groups[it->second].candidates.push_back(std::move(inst));
  }
  if (ds.groups.empty()) throw DataError("dataset file " + path + " has no instances");
  return ds;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_to_token) {
  Vocabulary v;
  v.id_to_token = id_to_token;
  for (std::size_t i = 0; i < id_to_token.size(); ++i)
    v.token_to_id.emplace(id_to_token[i], i);
  if (v.id_to_token.size() < 2)
    throw DataError("vocabulary must at least hold PAD and UNK");
  return v;
}

Vocabulary build_vocabulary(const std::vector<const QADataset*>& datasets) {
  if (datasets.empty()) throw DataError("build_vocabulary needs at least one dataset");
  std::unordered_map<std::string, std::size_t> freq;
  for (const QADataset* ds : datasets)
    for (const auto& g : ds->groups)
      for (const auto& c : g.candidates) {
        for (const auto& t : c.question_tokens) ++freq[t];
        for (const auto& t : c.answer_tokens) ++freq[t];
      }

  std::vector<std::pair<std::string, std::size_t>> order(freq.begin(), freq.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens{"<pad>", "<unk>"};
  tokens.reserve(order.size() + 2);
  for (auto& [tok, n] : order) {
    (void)n;
    if (tok != "<pad>" && tok != "<unk>") tokens.push_back(tok);
  }
  return Vocabulary::from_tokens(tokens);
}

std::vector<std::size_t> encode_and_pad(const std::vector<std::string>& tokens,
                                        const Vocabulary& vocab,
                                        std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be >= 1");
  std::vector<std::size_t> ids(max_len, Vocabulary::kPad);
  const std::size_t n = std::min(max_len, tokens.size());
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

double IdfTable::operator()(const std::string& tok) const {
  auto it = weights.find(tok);
  if (it != weights.end()) return it->second;
  return std::log(static_cast<double>(doc_count) + 1.0) + 1.0;  // df = 0
}

double IdfTable::max_weight() const {
  double m = 0.0;
  for (const auto& [tok, w] : weights) {
    (void)tok;
    m = std::max(m, w);
  }
  return std::max(m, std::log(static_cast<double>(doc_count) + 1.0) + 1.0);
}

IdfTable compute_idf(const std::vector<std::vector<std::string>>& documents) {
  if (documents.empty()) throw DataError("compute_idf needs at least one document");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    std::unordered_set<std::string> uniq(doc.begin(), doc.end());
    for (const auto& t : uniq) ++df[t];
  }
  IdfTable table;
  table.doc_count = documents.size();
  const double n1 = static_cast<double>(documents.size()) + 1.0;
  for (const auto& [tok, d] : df)
    table.weights[tok] = std::log(n1 / (static_cast<double>(d) + 1.0)) + 1.0;
  return table;
}

const StopwordSet& default_stopwords() {
  static const StopwordSet words{
      "a",        "about",   "above",      "after",   "again",    "against",
      "all",      "am",      "an",         "and",     "any",      "are",
      "as",       "at",      "be",         "because", "been",     "before",
      "being",    "below",   "between",    "both",    "but",      "by",
      "can",      "cannot",  "could",      "did",     "do",       "does",
      "doing",    "down",    "during",     "each",    "few",      "for",
      "from",     "further", "had",        "has",     "have",     "having",
      "he",       "her",     "here",       "hers",    "herself",  "him",
      "himself",  "his",     "how",        "i",       "if",       "in",
      "into",     "is",      "it",         "its",     "itself",   "just",
      "me",       "more",    "most",       "my",      "myself",   "no",
      "nor",      "not",     "now",        "of",      "off",      "on",
      "once",     "only",    "or",         "other",   "our",      "ours",
      "ourselves", "out",    "over",       "own",     "same",     "she",
      "should",   "so",      "some",       "such",    "than",     "that",
      "the",      "their",   "theirs",     "them",    "themselves", "then",
      "there",    "these",   "they",       "this",    "those",    "through",
      "to",       "too",     "under",      "until",   "up",       "very",
      "was",      "we",      "were",       "what",    "when",     "where",
      "which",    "while",   "who",        "whom",    "why",      "will",
      "with",     "would",   "you",        "your",    "yours",    "yourself",
      "yourselves"};
  return words;
}

StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file " + path);
  StopwordSet words;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = tokenize(line);
    for (auto& t : toks) words.insert(std::move(t));
  }
  return words;
}

namespace {

std::unordered_set<std::string> unique_of(const std::vector<std::string>& tokens) {
  return {tokens.begin(), tokens.end()};
}

std::unordered_set<std::string> without(const std::unordered_set<std::string>& set,
                                        const StopwordSet& stop) {
  std::unordered_set<std::string> out;
  for (const auto& t : set)
    if (stop.count(t) == 0) out.insert(t);
  return out;
}

std::pair<double, double> overlap_pair(const std::unordered_set<std::string>& q,
                                       const std::unordered_set<std::string>& a,
                                       const IdfTable& idf, bool normalized) {
  double raw = 0.0, weighted = 0.0;
  for (const auto& t : q)
    if (a.count(t)) {
      raw += 1.0;
      weighted += idf(t);
    }
  if (normalized) {
    const double denom = static_cast<double>(q.size() + a.size());
    if (denom > 0.0) {
      raw /= denom;
      weighted /= denom;
    }
  }
  return {raw, weighted};
}

}  // namespace

std::array<double, 4> overlap_features(const std::vector<std::string>& question,
                                       const std::vector<std::string>& answer,
                                       const IdfTable& idf, const StopwordSet& stop,
                                       bool normalized) {
  const auto q = unique_of(question);
  const auto a = unique_of(answer);
  const auto [raw, weighted] = overlap_pair(q, a, idf, normalized);
  const auto [raw_ns, weighted_ns] =
      overlap_pair(without(q, stop), without(a, stop), idf, normalized);
  return {raw, weighted, raw_ns, weighted_ns};
}

}  // namespace holoqa

namespace holoqa::detail {

ParsedEmbeddings parse_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path);

  ParsedEmbeddings out;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (fields.fail() && !fields.eof())
      throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric value");

    if (first) {
      first = false;
      // optional word2vec header: `count dim`, both integers
      if (values.size() == 1) {
        bool numeric_token = !token.empty() &&
                             token.find_first_not_of("0123456789") == std::string::npos;
        if (numeric_token && values[0] == std::floor(values[0]) && values[0] > 0) {
          continue;  // header line, skip
        }
      }
    }
    if (values.empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": no embedding values");
    if (out.dim == 0) out.dim = values.size();
    if (values.size() != out.dim)
      throw DataError(path + ":" + std::to_string(lineno) + ": dimension " +
                      std::to_string(values.size()) + " != " + std::to_string(out.dim));
    out.rows.emplace(std::move(token), std::move(values));
  }
  if (out.rows.empty()) throw DataError("embedding file " + path + " has no rows");
  return out;
}

}  // namespace holoqa::detail
