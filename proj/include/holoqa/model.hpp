#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "holoqa/data.hpp"
#include "holoqa/holo.hpp"
#include "holoqa/layers.hpp"
#include "holoqa/rng.hpp"
#include "holoqa/tensor.hpp"

namespace holoqa {

enum class Architecture { HDLSTM, NTNLSTM, ConcatLSTM };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::HDLSTM: return "hdlstm";
    case Architecture::NTNLSTM: return "ntnlstm";
    case Architecture::ConcatLSTM: return "concatlstm";
  }
  throw ConfigError("unknown architecture enum value");
}

inline Architecture architecture_from_string(const std::string& s) {
  if (s == "hdlstm") return Architecture::HDLSTM;
  if (s == "ntnlstm") return Architecture::NTNLSTM;
  if (s == "concatlstm") return Architecture::ConcatLSTM;
  throw ConfigError("unknown architecture '" + s +
                    "' (expected hdlstm, ntnlstm or concatlstm)");
}

struct ModelConfig {
  Architecture architecture = Architecture::HDLSTM;
  std::size_t embed_dim = 0;
  std::size_t lstm_dim = 0;
  std::size_t lstm_layers = 1;
  std::size_t hidden_dim = 0;  // dense-head width; unused by ntnlstm
  std::size_t ntn_slices = 0;  // tensor slices; used only by ntnlstm
  bool use_bilinear_sim = false;
  bool use_overlap_feats = false;
  std::size_t max_len_q = 1;
  std::size_t max_len_a = 1;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
};

// Collects soft inconsistencies (set-but-unused fields); throws ConfigError
// on impossible combinations.
inline void validate_config(const ModelConfig& c,
                            std::vector<std::string>* warnings = nullptr) {
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  if (c.embed_dim == 0 || c.lstm_dim == 0 || c.lstm_layers == 0)
    throw ConfigError("embed_dim, lstm_dim and lstm_layers must be >= 1");
  if (c.max_len_q == 0 || c.max_len_a == 0)
    throw ConfigError("max_len_q and max_len_a must be >= 1");
  if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must lie in [0, 1)");
  if (c.architecture == Architecture::NTNLSTM) {
    if (c.ntn_slices == 0) throw ConfigError("ntnlstm needs ntn_slices >= 1");
    if (c.use_bilinear_sim || c.use_overlap_feats)
      throw ConfigError("the tensor head takes no extra features");
    if (c.hidden_dim != 0) warn("hidden_dim is unused by ntnlstm");
    if (c.dropout_rate != 0.0) warn("dropout_rate is unused by ntnlstm");
  } else {
    if (c.hidden_dim == 0)
      throw ConfigError(to_string(c.architecture) + " needs hidden_dim >= 1");
    if (c.ntn_slices != 0)
      warn("ntn_slices is unused by " + to_string(c.architecture));
  }
}

template <typename T>
struct Model {
  ModelConfig config;
  EmbeddingTable<T> embeddings;  // frozen lookup table
  LstmParams<T> q_lstm;
  LstmParams<T> a_lstm;
  std::optional<HoloHeadParams<T>> dense;  // hdlstm / concatlstm
  std::optional<NtnParams<T>> ntn;         // ntnlstm

  // Everything the optimizer touches, in a fixed order; the frozen
  // embedding table is not part of it.
  std::vector<Tensor<T>> trainable_params() const {
    std::vector<Tensor<T>> out;
    q_lstm.append_params(out);
    a_lstm.append_params(out);
    if (dense) dense->append_params(out);
    if (ntn) ntn->append_params(out);
    return out;
  }
};

// Names matching trainable_params() order, for checkpoints and diagnostics.
template <typename T>
std::vector<std::string> parameter_names(const Model<T>& model) {
  std::vector<std::string> names;
  for (const char* lstm : {"q_lstm", "a_lstm"}) {
    const auto& params = std::string(lstm) == "q_lstm" ? model.q_lstm : model.a_lstm;
    for (std::size_t l = 0; l < params.layers.size(); ++l)
      for (const char* p : {"W_i", "W_f", "W_c", "W_o", "U_i", "U_f", "U_c",
                            "U_o", "b_i", "b_f", "b_c", "b_o"})
        names.push_back(std::string(lstm) + "." + std::to_string(l) + "." + p);
  }
  if (model.dense) {
    for (const char* p : {"head.W_h", "head.b_h", "head.W_f", "head.b_f"})
      names.push_back(p);
    if (model.dense->use_bilinear_sim()) names.push_back("head.M_sim");
  }
  if (model.ntn) {
    for (std::size_t s = 0; s < model.ntn->slices(); ++s)
      names.push_back("head.M" + std::to_string(s));
    for (const char* p : {"head.V", "head.b", "head.u", "head.u_bias"})
      names.push_back(p);
  }
  return names;
}

template <typename T>
Model<T> build_model(const ModelConfig& config, EmbeddingTable<T> embeddings,
                     std::vector<std::string>* warnings = nullptr) {
  validate_config(config, warnings);
  if (embeddings.dim() != config.embed_dim)
    throw ConfigError("embedding dim " + std::to_string(embeddings.dim()) +
                      " != configured embed_dim " +
                      std::to_string(config.embed_dim));
  // Independent streams so e.g. adding a layer to Q-LSTM cannot shift the
  // draws of everything after it.
  Rng q_rng(mix_seed(config.seed, 1));
  Rng a_rng(mix_seed(config.seed, 2));
  Rng head_rng(mix_seed(config.seed, 3));
  Model<T> model{config,
                 std::move(embeddings),
                 LstmParams<T>::init(config.embed_dim, config.lstm_dim,
                                     config.lstm_layers, q_rng),
                 LstmParams<T>::init(config.embed_dim, config.lstm_dim,
                                     config.lstm_layers, a_rng),
                 std::nullopt,
                 std::nullopt};
  switch (config.architecture) {
    case Architecture::HDLSTM:
      model.dense = HoloHeadParams<T>::init(
          config.lstm_dim, config.hidden_dim, config.use_bilinear_sim,
          config.use_overlap_feats, config.lstm_dim, head_rng);
      break;
    case Architecture::ConcatLSTM:
      model.dense = HoloHeadParams<T>::init(
          2 * config.lstm_dim, config.hidden_dim, config.use_bilinear_sim,
          config.use_overlap_feats, config.lstm_dim, head_rng);
      break;
    case Architecture::NTNLSTM:
      model.ntn = NtnParams<T>::init(config.lstm_dim, config.ntn_slices, head_rng);
      break;
  }
  return model;
}

// Two class logits for one padded (question, answer) pair. The dropout mask,
// when given, multiplies the composed vector entering the dense hidden layer
// (training only); inference passes none.
template <typename T>
Tensor<T> model_logits(
    const Model<T>& model, const std::vector<std::size_t>& q_ids,
    const std::vector<std::size_t>& a_ids,
    const std::optional<std::array<double, 4>>& x_feat,
    const std::type_identity_t<std::optional<Tensor<T>>>& dropout_mask =
        std::nullopt,
    CompositionBackend backend = CompositionBackend::FFT) {
  const ModelConfig& cfg = model.config;
  if (q_ids.size() != cfg.max_len_q)
    throw DimensionError("question length " + std::to_string(q_ids.size()) +
                         " != max_len_q " + std::to_string(cfg.max_len_q));
  if (a_ids.size() != cfg.max_len_a)
    throw DimensionError("answer length " + std::to_string(a_ids.size()) +
                         " != max_len_a " + std::to_string(cfg.max_len_a));
  if (cfg.use_overlap_feats != x_feat.has_value())
    throw ConfigError(cfg.use_overlap_feats
                          ? "model expects overlap features but none were given"
                          : "overlap features given but the model has none configured");
  Tensor<T> q_vec =
      lstm_forward(embed(q_ids, model.embeddings), model.q_lstm).second;
  Tensor<T> a_vec =
      lstm_forward(embed(a_ids, model.embeddings), model.a_lstm).second;
  if (model.ntn) {
    if (dropout_mask)
      throw ConfigError("the tensor head takes no dropout mask");
    return ntn_score(q_vec, a_vec, *model.ntn);
  }
  HeadExtras<T> extras;
  if (model.dense->use_bilinear_sim())
    extras.sim = bilinear_similarity(q_vec, a_vec, *model.dense->M_sim);
  if (x_feat) {
    std::vector<T> feats(4);
    for (std::size_t i = 0; i < 4; ++i) feats[i] = static_cast<T>((*x_feat)[i]);
    extras.x_feat = Tensor<T>::vector(std::move(feats));
  }
  if (cfg.architecture == Architecture::HDLSTM)
    return holographic_head(q_vec, a_vec, extras, *model.dense, dropout_mask,
                            backend);
  return concat_head(q_vec, a_vec, extras, *model.dense, dropout_mask);
}

// Probability of the relevant class (index 1), dropout-free.
template <typename T>
T score_pair(const Model<T>& model, const std::vector<std::size_t>& q_ids,
             const std::vector<std::size_t>& a_ids,
             const std::optional<std::array<double, 4>>& x_feat = std::nullopt,
             CompositionBackend backend = CompositionBackend::FFT) {
  Tensor<T> p =
      softmax2(model_logits(model, q_ids, a_ids, x_feat, std::nullopt, backend));
  return p.values()[1];
}

struct ParameterBreakdown {
  std::size_t embedding = 0;
  std::size_t q_lstm = 0;
  std::size_t a_lstm = 0;
  std::size_t head = 0;  // comparison-layer cost, the Table-2 convention
  std::size_t total = 0;
};

template <typename T>
ParameterBreakdown count_parameters(const Model<T>& model) {
  ParameterBreakdown b;
  b.embedding = model.embeddings.vocab_size() * model.embeddings.dim();
  b.q_lstm = model.q_lstm.count();
  b.a_lstm = model.a_lstm.count();
  if (model.dense) b.head = model.dense->count();
  if (model.ntn) b.head = model.ntn->count();
  b.total = b.embedding + b.q_lstm + b.a_lstm + b.head;
  return b;
}

// One padded, featurized (question, candidate) pair ready for the model.
struct EncodedInstance {
  std::string query_id;
  std::string candidate_id;
  int label = 0;
  std::vector<std::size_t> q_ids;
  std::vector<std::size_t> a_ids;
  std::array<double, 4> x_feat{};  // consumed only when the config says so
};

inline std::vector<EncodedInstance> encode_dataset(const QADataset& data,
                                                   const Vocabulary& vocab,
                                                   const ModelConfig& config,
                                                   const IdfTable& idf,
                                                   const StopwordSet& stopwords) {
  std::vector<EncodedInstance> out;
  out.reserve(data.pair_count());
  for (const auto& group : data.groups)
    for (const auto& c : group.candidates) {
      EncodedInstance inst;
      inst.query_id = c.query_id;
      inst.candidate_id = c.candidate_id;
      inst.label = c.label;
      inst.q_ids = encode_and_pad(c.question_tokens, vocab, config.max_len_q);
      inst.a_ids = encode_and_pad(c.answer_tokens, vocab, config.max_len_a);
      inst.x_feat = overlap_features(c.question_tokens, c.answer_tokens, idf,
                                     stopwords);
      out.push_back(std::move(inst));
    }
  return out;
}

// Loop oracle by construction: one pair at a time, in order.
template <typename T>
std::vector<T> score_batch(const Model<T>& model,
                           const std::vector<EncodedInstance>& batch,
                           CompositionBackend backend = CompositionBackend::FFT) {
  std::vector<T> out;
  out.reserve(batch.size());
  for (const auto& inst : batch) {
    std::optional<std::array<double, 4>> x_feat;
    if (model.config.use_overlap_feats) x_feat = inst.x_feat;
    out.push_back(score_pair(model, inst.q_ids, inst.a_ids, x_feat, backend));
  }
  return out;
}

}  // namespace holoqa
