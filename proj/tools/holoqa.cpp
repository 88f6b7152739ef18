// Command-line surface: train, evaluate, rank, count-params, bench.
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "holoqa/bench.hpp"
#include "holoqa/pipeline.hpp"

using namespace holoqa;

namespace {

// Mirrors every byte into two buffers (stdout + train.log).
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int ch) override {
    if (ch == EOF) return !EOF;
    const int ra = a_->sputc(static_cast<char>(ch));
    const int rb = b_->sputc(static_cast<char>(ch));
    return ra == EOF || rb == EOF ? EOF : ch;
  }
  int sync() override { return a_->pubsync() == 0 && b_->pubsync() == 0 ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::string arch, train, dev, test, embeddings, out, precision;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "config file of key = value lines");
  cmd->add_option("--set", f.sets, "override, key=value (wins over flags)");
  cmd->add_option("--seed", f.seed, "seed for weights, shuffling, dropout");
  cmd->add_option("--arch", f.arch)
      ->check(CLI::IsMember({"hdlstm", "ntnlstm", "concatlstm"}));
  cmd->add_option("--train", f.train, "training dataset (TSV or JSONL)");
  cmd->add_option("--dev", f.dev, "development dataset");
  cmd->add_option("--test", f.test, "test dataset");
  cmd->add_option("--embeddings", f.embeddings, "pretrained embedding text file");
  cmd->add_option("--out", f.out, "artifact output directory");
  cmd->add_option("--workers", f.workers, "evaluation worker threads");
  cmd->add_option("--precision", f.precision)
      ->check(CLI::IsMember({"f32", "f64"}));
}

RunManifest manifest_from_flags(const CLI::App* cmd, const CommonFlags& f) {
  Settings file_settings;
  if (!f.config_file.empty()) file_settings = load_config_file(f.config_file);

  Settings overrides;
  auto flag = [&](const char* name, const std::string& key,
                  const std::string& value) {
    if (cmd->count(name)) overrides.emplace_back(key, value);
  };
  flag("--arch", "arch", f.arch);
  flag("--seed", "seed", std::to_string(f.seed));
  flag("--train", "data.train", f.train);
  flag("--dev", "data.dev", f.dev);
  flag("--test", "data.test", f.test);
  flag("--embeddings", "data.embeddings", f.embeddings);
  flag("--out", "out", f.out);
  flag("--workers", "workers", std::to_string(f.workers));
  flag("--precision", "precision", f.precision);
  for (const std::string& kv : f.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return resolve_manifest(file_settings, overrides);
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

template <typename T>
void train_with(const RunManifest& m) {
  auto data = prepare_data(m);
  if (data.train_enc.empty()) throw ConfigError("train needs --train data");
  if (data.dev_enc.empty()) throw ConfigError("train needs --dev data");

  std::ofstream log_file;
  std::unique_ptr<TeeBuf> tee;
  std::unique_ptr<std::ostream> log;
  if (!m.out_dir.empty()) {
    std::filesystem::create_directories(m.out_dir);
    log_file.open(m.out_dir + "/train.log");
    tee = std::make_unique<TeeBuf>(std::cout.rdbuf(), log_file.rdbuf());
    log = std::make_unique<std::ostream>(tee.get());
  } else {
    log = std::make_unique<std::ostream>(std::cout.rdbuf());
  }

  auto art = run_training<T>(m, data, log.get());
  if (art.has_test)
    *log << "test map=" << fixed4(art.test_report.map)
         << " mrr=" << fixed4(art.test_report.mrr)
         << " p1=" << fixed4(art.test_report.p_at_1) << "\n";
  const auto& best = art.result.log.at(art.result.best_epoch - 1);
  *log << "best dev_map=" << fixed4(best.dev_map)
       << " dev_mrr=" << fixed4(best.dev_mrr)
       << " epoch=" << art.result.best_epoch << "\n";
}

void cmd_train(const CLI::App* cmd, const CommonFlags& f) {
  RunManifest m = manifest_from_flags(cmd, f);
  if (m.precision == "f32")
    train_with<float>(m);
  else
    train_with<double>(m);
}

template <typename T>
void evaluate_with(const std::string& checkpoint, const std::string& dataset,
                   const std::string& run_file, std::size_t workers) {
  auto loaded = load_checkpoint<T>(checkpoint);
  auto data = load_dataset(dataset, data_format_for(dataset), "eval");
  auto enc = encode_with_checkpoint(data, loaded);
  auto [report, run] = evaluate_model(loaded.model, enc, workers);
  if (!run_file.empty()) write_run_file(run, run_file);
  std::cout << "MAP " << fixed4(report.map) << "\n"
            << "MRR " << fixed4(report.mrr) << "\n"
            << "P@1 " << fixed4(report.p_at_1) << "\n";
}

void cmd_evaluate(const std::string& checkpoint, const std::string& dataset,
                  const std::string& run_file, std::size_t workers) {
  require_readable(checkpoint, "checkpoint");
  require_readable(dataset, "dataset");
  if (checkpoint_scalar_width(checkpoint) == sizeof(float))
    evaluate_with<float>(checkpoint, dataset, run_file, workers);
  else
    evaluate_with<double>(checkpoint, dataset, run_file, workers);
}

template <typename T>
void rank_with(const std::string& checkpoint, const std::string& question,
               const std::string& candidates_file) {
  auto loaded = load_checkpoint<T>(checkpoint);

  std::ifstream in(candidates_file);
  QADataset data;
  QAGroup group;
  group.query_id = "q";
  std::string line;
  std::size_t n = 0;
  std::vector<std::string> texts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    QAInstance inst;
    inst.query_id = "q";
    char id[16];
    std::snprintf(id, sizeof id, "c%04zu", ++n);
    inst.candidate_id = id;
    inst.question_tokens = tokenize(question);
    inst.answer_tokens = tokenize(line);
    texts.push_back(line);
    group.candidates.push_back(std::move(inst));
  }
  if (group.candidates.empty())
    throw DataError(candidates_file + ": no candidates to rank");
  data.groups.push_back(std::move(group));

  auto enc = encode_with_checkpoint(data, loaded);
  auto scores = score_instances(loaded.model, enc);
  std::vector<RankedQuery> queries(1);
  queries[0].query_id = "q";
  for (std::size_t i = 0; i < enc.size(); ++i)
    queries[0].candidates.push_back(RankedCandidate{
        enc[i].candidate_id, static_cast<double>(scores[i]), 0});
  auto run = make_run(std::move(queries), "rank");  // score desc, id asc
  for (const auto& c : run.queries[0].candidates) {
    const std::size_t idx = std::stoul(c.candidate_id.substr(1)) - 1;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", c.score);
    std::cout << buf << "\t" << c.candidate_id << "\t" << texts[idx] << "\n";
  }
}

void cmd_rank(const std::string& checkpoint, const std::string& question,
              const std::string& candidates_file) {
  require_readable(checkpoint, "checkpoint");
  require_readable(candidates_file, "candidates file");
  if (checkpoint_scalar_width(checkpoint) == sizeof(float))
    rank_with<float>(checkpoint, question, candidates_file);
  else
    rank_with<double>(checkpoint, question, candidates_file);
}

void cmd_count_params(const CLI::App* cmd, const CommonFlags& f) {
  RunManifest m = manifest_from_flags(cmd, f);
  validate_config(m.model);

  std::size_t vocab_size = 2;  // PAD + UNK when no data is given
  if (!m.paths.train.empty() || !m.paths.dev.empty() || !m.paths.test.empty())
    vocab_size = prepare_data(m).vocab.size();

  EmbeddingTable<double> table(
      vocab_size, m.model.embed_dim,
      std::vector<double>(vocab_size * m.model.embed_dim, 0.0));
  auto model = build_model(m.model, std::move(table));
  auto counts = count_parameters(model);
  std::cout << "arch " << to_string(m.model.architecture) << "\n"
            << "vocab " << vocab_size << "\n"
            << "embedding " << counts.embedding << " (frozen)\n"
            << "q_lstm " << counts.q_lstm << "\n"
            << "a_lstm " << counts.a_lstm << "\n"
            << "head " << counts.head << "\n"
            << "total " << counts.total << "\n";
}

void cmd_bench(const std::string& dims_csv, std::size_t slices,
               std::size_t hidden, std::size_t reps, std::size_t warmups) {
  BenchConfig cfg;
  cfg.slices = slices;
  cfg.hidden = hidden;
  cfg.reps = reps;
  cfg.warmups = warmups;
  std::istringstream in(dims_csv);
  std::string field;
  while (std::getline(in, field, ',')) {
    if (field.empty()) continue;
    try {
      cfg.dims.push_back(std::stoul(field));
    } catch (const std::exception&) {
      throw ConfigError("--dims expects integers, got '" + field + "'");
    }
  }

  auto rows = run_bench(cfg);
  std::cout << format_bench_table(rows);
  std::cout << "head params at d=640: holographic "
            << holographic_head_params(640, 64) << " (h=64), tensor "
            << tensor_head_params(640, 5) << " (k=5), ratio "
            << fixed4(static_cast<double>(tensor_head_params(640, 5)) /
                      static_cast<double>(holographic_head_params(640, 64)))
            << "\n"
            << "note: the 2dh+4h closed form sometimes quoted for the\n"
            << "holographic head double-counts W_h (the composed vector has\n"
            << "width d, not 2d); the exact count is dh+3h+2.\n";
  if (cfg.dims.size() >= 2) {
    for (const char* op : {"corr_fft", "corr_direct", "tensor_slices"}) {
      auto pts = bench_points(rows, op);
      std::cout << "slope " << op << " " << fixed4(log_log_slope(pts)) << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"holographic dual-LSTM ranking for question answering"};
  app.require_subcommand(1);

  CommonFlags tf;
  auto* train_cmd = app.add_subcommand("train", "train a ranking model");
  add_common(train_cmd, tf);

  std::string ev_checkpoint, ev_data, ev_run_file;
  std::size_t ev_workers = 1;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a labeled dataset");
  eval_cmd->add_option("--checkpoint", ev_checkpoint)->required();
  eval_cmd->add_option("--data", ev_data)->required();
  eval_cmd->add_option("--run-file", ev_run_file, "write rankings here");
  eval_cmd->add_option("--workers", ev_workers);

  std::string rk_checkpoint, rk_question, rk_candidates;
  auto* rank_cmd = app.add_subcommand("rank", "order candidate answers");
  rank_cmd->add_option("--checkpoint", rk_checkpoint)->required();
  rank_cmd->add_option("--question", rk_question)->required();
  rank_cmd->add_option("--candidates", rk_candidates, "one answer per line")
      ->required();

  CommonFlags cf;
  auto* count_cmd =
      app.add_subcommand("count-params", "parameter accounting per module");
  add_common(count_cmd, cf);

  std::string bn_dims = "256,512,1024,2048,4096,8192,16384";
  std::size_t bn_slices = 5, bn_hidden = 64, bn_reps = 30, bn_warmups = 5;
  auto* bench_cmd =
      app.add_subcommand("bench", "time the composition operators");
  bench_cmd->add_option("--dims", bn_dims, "comma-separated vector sizes");
  bench_cmd->add_option("--slices", bn_slices);
  bench_cmd->add_option("--hidden", bn_hidden);
  bench_cmd->add_option("--reps", bn_reps);
  bench_cmd->add_option("--warmups", bn_warmups);

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) cmd_train(train_cmd, tf);
    if (eval_cmd->parsed())
      cmd_evaluate(ev_checkpoint, ev_data, ev_run_file, ev_workers);
    if (rank_cmd->parsed())
      cmd_rank(rk_checkpoint, rk_question, rk_candidates);
    if (count_cmd->parsed()) cmd_count_params(count_cmd, cf);
    if (bench_cmd->parsed())
      cmd_bench(bn_dims, bn_slices, bn_hidden, bn_reps, bn_warmups);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
