#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "holoqa/common.hpp"

namespace holoqa {

struct RankedCandidate {
  std::string candidate_id;
  double score = 0.0;
  int label = 0;
};

struct RankedQuery {
  std::string query_id;
  std::vector<RankedCandidate> candidates;  // score desc, then id asc
};

struct RankedRun {
  std::vector<RankedQuery> queries;
  std::string tag = "run";
};

// Sorts every query's candidates by (score desc, candidate_id asc) and
// validates uniqueness of query ids and of candidate ids within a query.
RankedRun make_run(std::vector<RankedQuery> queries, std::string tag);

struct MetricReport {
  double map = 0.0;
  double mrr = 0.0;
  double p_at_1 = 0.0;
  std::size_t evaluated = 0;  // queries with at least one positive
  std::size_t skipped = 0;    // queries with none, excluded from the means
};

// Queries without a positive label are skipped (and counted); a run with
// nothing left to evaluate is an error.
MetricReport evaluate_run(const RankedRun& run);

double mean_average_precision(const RankedRun& run);
double mean_reciprocal_rank(const RankedRun& run);
double precision_at_1(const RankedRun& run);

// Lines `query_id Q0 candidate_id rank score tag`, ranks from 1, scores
// with 6 decimal places.
void write_run_file(const RankedRun& run, const std::string& path);

// Lines `query_id 0 candidate_id label`.
void write_qrels(const RankedRun& run, const std::string& path);

// Parses a run file back; labels are not part of the format and read as 0.
RankedRun read_run_file(const std::string& path);

}  // namespace holoqa
