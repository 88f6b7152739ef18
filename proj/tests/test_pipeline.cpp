#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "holoqa/bench.hpp"
#include "holoqa/pipeline.hpp"
#include "support.hpp"
#include "synth.hpp"

using namespace holoqa;

namespace {

synth::SynthSpec tiny_spec() {
  synth::SynthSpec s;
  s.train_questions = 12;
  s.dev_questions = 4;
  s.test_questions = 4;
  return s;
}

RunManifest tiny_manifest() {
  RunManifest m = make_default_manifest();
  m.model.embed_dim = 8;
  m.model.lstm_dim = 10;
  m.model.lstm_layers = 1;
  m.model.hidden_dim = 6;
  m.model.use_bilinear_sim = false;
  m.model.use_overlap_feats = false;
  m.model.max_len_q = 5;
  m.model.max_len_a = 6;
  m.model.dropout_rate = 0.0;
  m.model.seed = 3;
  m.trainer.learning_rate = 1e-3;
  m.trainer.batch_size = 16;
  m.trainer.max_epochs = 2;
  m.trainer.patience = 2;
  m.trainer.seed = 3;
  return m;
}

bool same_manifest(const RunManifest& a, const RunManifest& b) {
  return manifest_to_json(a) == manifest_to_json(b);
}

std::set<std::string> content_tokens(const std::vector<std::string>& toks) {
  std::set<std::string> out;
  for (const auto& t : toks)
    if (!default_stopwords().count(t)) out.insert(t);
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config text: comments, spacing, and malformed lines") {
  auto s = parse_config_text(
      "# full run\n"
      "arch = ntnlstm\n"
      "\n"
      "model.lstm_dim=128   # inline note\n"
      "  train.batch_size =  32\n",
      "inline");
  REQUIRE(s.size() == 3);
  CHECK(s[0] == std::pair<std::string, std::string>("arch", "ntnlstm"));
  CHECK(s[1] == std::pair<std::string, std::string>("model.lstm_dim", "128"));
  CHECK(s[2] == std::pair<std::string, std::string>("train.batch_size", "32"));

  CHECK_THROWS_AS(parse_config_text("just words\n", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("key =\n", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("= value\n", "x"), ConfigError);
}

TEST_CASE("settings apply with validation and precedence") {
  RunManifest m = make_default_manifest();
  CHECK(m.model.lstm_dim == 640);
  CHECK(m.model.lstm_layers == 3);
  CHECK(m.model.hidden_dim == 64);
  CHECK(m.model.dropout_rate == 0.5);
  CHECK(m.trainer.learning_rate == 1e-5);
  CHECK(m.trainer.batch_size == 256);
  CHECK(m.trainer.max_epochs == 30);
  CHECK(m.trainer.patience == 5);
  CHECK(m.trainer.keep_top_k == 3);

  CHECK_THROWS_AS(apply_setting(m, "nope", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(m, "model.lstm_dim", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_setting(m, "model.lstm_dim", "-4"), ConfigError);
  CHECK_THROWS_AS(apply_setting(m, "model.bilinear_sim", "maybe"),
                  ConfigError);
  CHECK_THROWS_AS(apply_setting(m, "train.learning_rate", "fast"),
                  ConfigError);
  CHECK_THROWS_AS(apply_setting(m, "arch", "transformer"), ConfigError);
  CHECK_THROWS_AS(apply_setting(m, "precision", "f16"), ConfigError);

  auto r = resolve_manifest({{"model.lstm_dim", "128"}, {"seed", "9"}},
                            {{"model.lstm_dim", "256"}});
  CHECK(r.model.lstm_dim == 256);  // override beats file
  CHECK(r.model.seed == 9);
  CHECK(r.trainer.seed == 9);  // one seed drives both
}

TEST_CASE("switching to the tensor head drops dense-only defaults") {
  auto r = resolve_manifest({}, {{"arch", "ntnlstm"}});
  CHECK(r.model.architecture == Architecture::NTNLSTM);
  CHECK(r.model.ntn_slices == 5);
  CHECK(r.model.hidden_dim == 0);
  CHECK(!r.model.use_bilinear_sim);
  CHECK(!r.model.use_overlap_feats);
  CHECK(r.model.dropout_rate == 0.0);
  CHECK_NOTHROW(validate_config(r.model));

  // An explicit request survives normalization (and fails validation).
  auto bad = resolve_manifest(
      {}, {{"arch", "ntnlstm"}, {"model.bilinear_sim", "true"}});
  CHECK(bad.model.use_bilinear_sim);
  CHECK_THROWS_AS(validate_config(bad.model), ConfigError);
}

TEST_CASE("manifest survives the JSON round trip") {
  RunManifest m = tiny_manifest();
  m.model.architecture = Architecture::ConcatLSTM;
  m.paths.train = "a.tsv";
  m.paths.embeddings = "vec.txt";
  m.out_dir = "runs/x";
  m.precision = "f32";
  m.workers = 4;
  m.trainer.adam_eps = 3e-9;

  CHECK(same_manifest(manifest_from_json(manifest_to_json(m)), m));

  auto path = (testsupport::scratch_dir() / "manifest.json").string();
  write_manifest(m, path);
  CHECK(same_manifest(read_manifest(path), m));

  testsupport::write_fixture("broken_manifest.json", "{\"model\": 3}");
  CHECK_THROWS_AS(
      read_manifest((testsupport::scratch_dir() / "broken_manifest.json").string()),
      DataError);
}

TEST_CASE("format detection and readable-path guard") {
  CHECK(data_format_for("x/train.tsv") == DataFormat::TSV);
  CHECK(data_format_for("x/train.txt") == DataFormat::TSV);
  CHECK(data_format_for("x/train.jsonl") == DataFormat::JSONL);
  CHECK(data_format_for("x/train.json") == DataFormat::JSONL);

  try {
    require_readable("/no/such/file.tsv", "train dataset");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/no/such/file.tsv") !=
          std::string::npos);
  }

  RunManifest m = tiny_manifest();
  m.paths.train = "/no/such/file.tsv";
  CHECK_THROWS_AS(prepare_data(m), ConfigError);
}

TEST_CASE("idf corpus lists each question and answer once") {
  auto corpus = synth::make_synth_corpus(tiny_spec());
  auto docs = idf_corpus({&corpus.train});
  // one question + five candidate answers per group
  CHECK(docs.size() == corpus.train.question_count() * 6);
  CHECK(docs[0] == corpus.train.groups[0].candidates[0].question_tokens);
}

TEST_CASE("synthetic corpus obeys its own contract") {
  auto spec = tiny_spec();
  auto corpus = synth::make_synth_corpus(spec);
  CHECK(corpus.train.question_count() == 12);
  CHECK(corpus.dev.question_count() == 4);
  CHECK(corpus.test.question_count() == 4);

  for (const QADataset* ds : {&corpus.train, &corpus.dev, &corpus.test}) {
    for (const auto& g : ds->groups) {
      REQUIRE(g.candidates.size() == 5);
      std::size_t positives = 0;
      for (const auto& c : g.candidates) {
        auto q_content = content_tokens(c.question_tokens);
        auto a_content = content_tokens(c.answer_tokens);
        std::vector<std::string> shared;
        std::set_intersection(q_content.begin(), q_content.end(),
                              a_content.begin(), a_content.end(),
                              std::back_inserter(shared));
        if (c.label == 1) {
          ++positives;
          CHECK(shared.size() >= 2);
        } else {
          CHECK(shared.empty());
        }
      }
      CHECK(positives == 1);
    }
  }

  auto again = synth::make_synth_corpus(spec);
  CHECK(again.train.groups[5].candidates[2].answer_tokens ==
        corpus.train.groups[5].candidates[2].answer_tokens);
  CHECK(again.test.groups[3].query_id == corpus.test.groups[3].query_id);
}

TEST_CASE("written corpus loads back verbatim") {
  auto corpus = synth::make_synth_corpus(tiny_spec());
  auto path = (testsupport::scratch_dir() / "synth_train.tsv").string();
  synth::write_tsv(corpus.train, path);
  auto loaded = load_dataset(path, DataFormat::TSV, "train");
  REQUIRE(loaded.groups.size() == corpus.train.groups.size());
  for (std::size_t g = 0; g < loaded.groups.size(); ++g) {
    const auto& a = loaded.groups[g];
    const auto& b = corpus.train.groups[g];
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t c = 0; c < a.candidates.size(); ++c) {
      CHECK(a.candidates[c].candidate_id == b.candidates[c].candidate_id);
      CHECK(a.candidates[c].label == b.candidates[c].label);
      CHECK(a.candidates[c].question_tokens == b.candidates[c].question_tokens);
      CHECK(a.candidates[c].answer_tokens == b.candidates[c].answer_tokens);
    }
  }
}

TEST_CASE("prepared data encodes every split against one vocabulary") {
  auto corpus = synth::make_synth_corpus(tiny_spec());
  RunManifest m = tiny_manifest();
  auto data = prepare_loaded(m, corpus.train, corpus.dev, corpus.test);

  CHECK(data.train_enc.size() == 12 * 5);
  CHECK(data.dev_enc.size() == 4 * 5);
  CHECK(data.test_enc.size() == 4 * 5);
  CHECK(data.vocab.contains("what"));
  CHECK(data.vocab.contains(synth::detail::topic_word(0)));
  for (const auto& inst : data.dev_enc) {
    CHECK(inst.q_ids.size() == m.model.max_len_q);
    CHECK(inst.a_ids.size() == m.model.max_len_a);
  }
  CHECK(data.idf.doc_count == idf_corpus({&data.train, &data.dev, &data.test}).size());

  CHECK_THROWS_AS(prepare_loaded(m, {}, {}, {}), DataError);
}

TEST_CASE("random embedding tables are seeded and keep PAD at zero") {
  auto corpus = synth::make_synth_corpus(tiny_spec());
  RunManifest m = tiny_manifest();
  auto data = prepare_loaded(m, corpus.train, corpus.dev, corpus.test);

  auto e1 = make_embeddings<double>(m, data.vocab);
  auto e2 = make_embeddings<double>(m, data.vocab);
  CHECK(e1.table.values() == e2.table.values());
  for (std::size_t j = 0; j < m.model.embed_dim; ++j)
    CHECK(e1.table.values()[j] == 0.0);

  m.model.seed = 4;
  auto e3 = make_embeddings<double>(m, data.vocab);
  CHECK(e1.table.values() != e3.table.values());

  testsupport::write_fixture("tiny_vectors.txt",
                             "what 0.1 0.2 0.3\nis -0.1 0.0 0.4\n");
  m.paths.embeddings =
      (testsupport::scratch_dir() / "tiny_vectors.txt").string();
  m.model.embed_dim = 3;
  auto e4 = make_embeddings<double>(m, data.vocab);
  const std::size_t what_id = data.vocab.id("what");
  CHECK(e4.table.values()[what_id * 3 + 1] == 0.2);

  m.model.embed_dim = 8;  // file carries 3-d rows
  CHECK_THROWS_AS(make_embeddings<double>(m, data.vocab), ConfigError);
}

TEST_CASE("a training run leaves a complete artifact directory") {
  auto corpus = synth::make_synth_corpus(tiny_spec());
  RunManifest m = tiny_manifest();
  m.out_dir = (testsupport::scratch_dir() / "run_artifacts").string();
  std::filesystem::remove_all(m.out_dir);

  auto data = prepare_loaded(m, corpus.train, corpus.dev, corpus.test);
  auto art = run_training<double>(m, data);

  CHECK(art.has_test);
  CHECK(art.result.log.size() >= 1);
  CHECK(std::filesystem::exists(m.out_dir + "/manifest.json"));
  CHECK(std::filesystem::exists(m.out_dir + "/test.run"));
  CHECK(std::filesystem::exists(m.out_dir + "/test.qrels"));
  CHECK(!art.result.checkpoints.empty());
  for (const auto& ck : art.result.checkpoints)
    CHECK(std::filesystem::exists(ck.path));

  CHECK(same_manifest(read_manifest(m.out_dir + "/manifest.json"), m));
  auto run = read_run_file(m.out_dir + "/test.run");
  CHECK(run.queries.size() == 4);

  // the whole pipeline is a function of the manifest
  std::filesystem::remove_all(m.out_dir);
  auto art2 = run_training<double>(m, data);
  CHECK(art2.result.best_dev_map == art.result.best_dev_map);
  CHECK(art2.test_report.map == art.test_report.map);
  REQUIRE(art2.result.log.size() == art.result.log.size());
  for (std::size_t i = 0; i < art.result.log.size(); ++i)
    CHECK(art2.result.log[i].loss == art.result.log[i].loss);
}

TEST_CASE("checkpoints re-encode raw text exactly like the pipeline") {
  auto corpus = synth::make_synth_corpus(tiny_spec());
  RunManifest m = tiny_manifest();
  m.out_dir = (testsupport::scratch_dir() / "run_encode").string();
  std::filesystem::remove_all(m.out_dir);
  auto data = prepare_loaded(m, corpus.train, corpus.dev, corpus.test);
  auto art = run_training<double>(m, data);
  REQUIRE(!art.result.checkpoints.empty());

  auto loaded = load_checkpoint<double>(art.result.checkpoints.front().path);
  auto enc = encode_with_checkpoint(corpus.test, loaded);
  auto [report, run] = evaluate_model(loaded.model, enc);
  (void)run;
  CHECK(report.map == art.test_report.map);
  CHECK(report.mrr == art.test_report.mrr);

  // a bare checkpoint (no vocabulary) cannot encode anything
  auto bare = build_model(m.model, make_embeddings<double>(m, data.vocab));
  auto bare_path = (testsupport::scratch_dir() / "bare.hqck").string();
  save_checkpoint(bare, bare_path);
  auto bare_loaded = load_checkpoint<double>(bare_path);
  CHECK_THROWS_AS(encode_with_checkpoint(corpus.test, bare_loaded),
                  ConfigError);
}

TEST_CASE("bench rows carry exact closed-form parameter counts") {
  CHECK(holographic_head_params(640, 64) == 41154);
  CHECK(tensor_head_params(640, 5) == 2054417);
  for (std::size_t d : {8u, 640u, 4096u})
    for (std::size_t h : {4u, 64u})
      CHECK(concat_head_params(d, h) == 2 * d * h + h + 2 * h + 2);

  BenchConfig cfg;
  cfg.dims = {8, 16};
  cfg.reps = 5;
  cfg.warmups = 1;
  cfg.slices = 2;
  cfg.hidden = 4;
  auto rows = run_bench(cfg);
  REQUIRE(rows.size() == 8);  // 4 operators x 2 dims
  for (const auto& r : rows) CHECK(r.median_ns > 0.0);
  auto pts = bench_points(rows, "corr_fft");
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].first == 8.0);
  CHECK(pts[1].first == 16.0);

  auto table = format_bench_table(rows);
  CHECK(table.find("corr_direct") != std::string::npos);
  CHECK(table.find("tensor_slices") != std::string::npos);

  BenchConfig empty;
  CHECK_THROWS_AS(run_bench(empty), ConfigError);
}

TEST_CASE("log-log slope recovers exact power laws") {
  std::vector<std::pair<double, double>> pts;
  for (double x : {256.0, 512.0, 1024.0, 2048.0})
    pts.emplace_back(x, 3.5 * std::pow(x, 2.3));
  CHECK(std::abs(log_log_slope(pts) - 2.3) < 1e-9);

  std::vector<std::pair<double, double>> flat = {{4.0, 1.0}, {4.0, 2.0}};
  CHECK_THROWS_AS(log_log_slope(flat), ConfigError);
  CHECK_THROWS_AS(log_log_slope({{1.0, 1.0}}), ConfigError);
  std::vector<std::pair<double, double>> neg = {{1.0, -1.0}, {2.0, 1.0}};
  CHECK_THROWS_AS(log_log_slope(neg), NumericError);
}

}  // TEST_SUITE
