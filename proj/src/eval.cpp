#include "holoqa/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace holoqa {

RankedRun make_run(std::vector<RankedQuery> queries, std::string tag) {
  std::unordered_set<std::string> query_ids;
  for (auto& query : queries) {
    if (!query_ids.insert(query.query_id).second)
      throw DataError("duplicate query id " + query.query_id);
    if (query.candidates.empty())
      throw DataError("query " + query.query_id + " has no candidates");
    std::unordered_set<std::string> candidate_ids;
    for (const auto& c : query.candidates)
      if (!candidate_ids.insert(c.candidate_id).second)
        throw DataError("duplicate candidate " + c.candidate_id + " in query " +
                        query.query_id);
    std::sort(query.candidates.begin(), query.candidates.end(),
              [](const RankedCandidate& a, const RankedCandidate& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.candidate_id < b.candidate_id;
              });
  }
  return RankedRun{std::move(queries), std::move(tag)};
}

namespace {

struct QueryMetrics {
  bool has_positive = false;
  double average_precision = 0.0;
  double reciprocal_rank = 0.0;
  double top_one = 0.0;
};

QueryMetrics query_metrics(const RankedQuery& query) {
  QueryMetrics m;
  std::size_t positives_seen = 0;
  double precision_sum = 0.0;
  for (std::size_t rank = 1; rank <= query.candidates.size(); ++rank) {
    if (query.candidates[rank - 1].label <= 0) continue;
    ++positives_seen;
    precision_sum +=
        static_cast<double>(positives_seen) / static_cast<double>(rank);
    if (positives_seen == 1) {
      m.reciprocal_rank = 1.0 / static_cast<double>(rank);
      m.top_one = rank == 1 ? 1.0 : 0.0;
    }
  }
  if (positives_seen == 0) return m;
  m.has_positive = true;
  m.average_precision = precision_sum / static_cast<double>(positives_seen);
  return m;
}

}  // namespace

MetricReport evaluate_run(const RankedRun& run) {
  if (run.queries.empty()) throw DataError("run contains no queries");
  MetricReport report;
  for (const auto& query : run.queries) {
    const QueryMetrics m = query_metrics(query);
    if (!m.has_positive) {
      ++report.skipped;
      continue;
    }
    ++report.evaluated;
    report.map += m.average_precision;
    report.mrr += m.reciprocal_rank;
    report.p_at_1 += m.top_one;
  }
  if (report.evaluated == 0)
    throw DataError("no query in the run has a positive label");
  const double n = static_cast<double>(report.evaluated);
  report.map /= n;
  report.mrr /= n;
  report.p_at_1 /= n;
  return report;
}

double mean_average_precision(const RankedRun& run) {
  return evaluate_run(run).map;
}

double mean_reciprocal_rank(const RankedRun& run) {
  return evaluate_run(run).mrr;
}

double precision_at_1(const RankedRun& run) { return evaluate_run(run).p_at_1; }

void write_run_file(const RankedRun& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write run file " + path);
  out << std::fixed << std::setprecision(6);
  for (const auto& query : run.queries)
    for (std::size_t rank = 1; rank <= query.candidates.size(); ++rank) {
      const auto& c = query.candidates[rank - 1];
      out << query.query_id << " Q0 " << c.candidate_id << ' ' << rank << ' '
          << c.score << ' ' << run.tag << '\n';
    }
  if (!out) throw DataError("failed writing run file " + path);
}

void write_qrels(const RankedRun& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write qrels file " + path);
  for (const auto& query : run.queries)
    for (const auto& c : query.candidates)
      out << query.query_id << " 0 " << c.candidate_id << ' ' << c.label << '\n';
  if (!out) throw DataError("failed writing qrels file " + path);
}

RankedRun read_run_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read run file " + path);
  RankedRun run;
  run.tag.clear();
  std::unordered_map<std::string, std::size_t> query_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string query_id, q0, candidate_id, tag;
    std::size_t rank = 0;
    double score = 0.0;
    if (!(fields >> query_id >> q0 >> candidate_id >> rank >> score >> tag) ||
        q0 != "Q0")
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed run line");
    std::string extra;
    if (fields >> extra)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": trailing fields in run line");
    if (run.tag.empty())
      run.tag = tag;
    else if (tag != run.tag)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": inconsistent run tag");
    auto [it, inserted] = query_index.try_emplace(query_id, run.queries.size());
    if (inserted) run.queries.push_back(RankedQuery{query_id, {}});
    auto& candidates = run.queries[it->second].candidates;
    if (rank != candidates.size() + 1)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": rank out of sequence");
    candidates.push_back(RankedCandidate{candidate_id, score, 0});
  }
  if (run.queries.empty()) throw DataError(path + ": empty run file");
  return run;
}

}  // namespace holoqa
