#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "holoqa/eval.hpp"
#include "holoqa/rng.hpp"
#include "support.hpp"

using namespace holoqa;

namespace {

// Query whose ranked order equals the label order given (scores descending).
RankedQuery query_from_labels(const std::string& id,
                              const std::vector<int>& labels) {
  RankedQuery q{id, {}};
  for (std::size_t i = 0; i < labels.size(); ++i)
    q.candidates.push_back(
        {"c" + std::to_string(i), static_cast<double>(labels.size() - i),
         labels[i]});
  return q;
}

RankedRun run_from_labels(const std::vector<std::vector<int>>& per_query) {
  std::vector<RankedQuery> queries;
  for (std::size_t i = 0; i < per_query.size(); ++i)
    queries.push_back(query_from_labels("q" + std::to_string(i), per_query[i]));
  return make_run(std::move(queries), "test");
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("average precision on hand-ranked label fixtures") {
  CHECK(mean_average_precision(run_from_labels({{1, 0, 0}})) == 1.0);
  CHECK(mean_average_precision(run_from_labels({{0, 1, 0, 1}})) == 0.5);
  CHECK(mean_average_precision(run_from_labels({{1, 0, 0}, {0, 1, 0, 1}})) ==
        0.75);
}

TEST_CASE("reciprocal rank and precision-at-1 fixtures") {
  CHECK(mean_reciprocal_rank(run_from_labels({{1, 0, 0, 0}})) == 1.0);
  CHECK(mean_reciprocal_rank(run_from_labels({{0, 1, 0, 0}})) == 0.5);
  CHECK(precision_at_1(run_from_labels({{1, 0}, {1, 0, 0}})) == 1.0);
  CHECK(precision_at_1(run_from_labels({{0, 1}})) == 0.0);
}

TEST_CASE("mixed run matches the rank-by-rank hand computation") {
  // APs: 1, (1/2 + 2/4)/2 = 1/2, 1/3; mean = 11/18. RRs: 1, 1/2, 1/3;
  // mean = 11/18 as well here. P@1 = 1/3.
  auto run = run_from_labels({{1, 0, 0}, {0, 1, 0, 1}, {0, 0, 1}});
  auto report = evaluate_run(run);
  CHECK(report.map == doctest::Approx(11.0 / 18.0).epsilon(1e-15));
  CHECK(report.mrr == doctest::Approx(11.0 / 18.0).epsilon(1e-15));
  CHECK(report.p_at_1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(report.evaluated == 3);
  CHECK(report.skipped == 0);
}

TEST_CASE("queries without positives are skipped, not averaged in") {
  auto run = run_from_labels({{1, 0}, {0, 0, 0}, {0, 0}});
  auto report = evaluate_run(run);
  CHECK(report.evaluated == 1);
  CHECK(report.skipped == 2);
  CHECK(report.map == 1.0);
  CHECK(report.mrr == 1.0);
  CHECK(report.p_at_1 == 1.0);
}

TEST_CASE("empty and positive-free runs are errors") {
  CHECK_THROWS_AS(evaluate_run(RankedRun{{}, "t"}), DataError);
  CHECK_THROWS_AS(evaluate_run(run_from_labels({{0, 0}, {0}})), DataError);
}

TEST_CASE("make_run sorts by score and breaks ties by id") {
  RankedQuery q{"q", {{"b", 1.0, 0}, {"a", 1.0, 1}, {"z", 3.0, 0}}};
  auto run = make_run({q}, "t");
  const auto& c = run.queries[0].candidates;
  CHECK(c[0].candidate_id == "z");
  CHECK(c[1].candidate_id == "a");
  CHECK(c[2].candidate_id == "b");
  CHECK(mean_reciprocal_rank(run) == 0.5);
}

TEST_CASE("make_run rejects duplicates and empty queries") {
  CHECK_THROWS_AS(
      make_run({{"q", {{"a", 1.0, 0}, {"a", 0.5, 1}}}}, "t"), DataError);
  CHECK_THROWS_AS(
      make_run({{"q", {{"a", 1.0, 1}}}, {"q", {{"b", 1.0, 0}}}}, "t"),
      DataError);
  CHECK_THROWS_AS(make_run({{"q", {}}}, "t"), DataError);
}

TEST_CASE("metrics depend only on ordering, not score values") {
  Rng rng(7);
  std::vector<RankedQuery> base;
  for (int qi = 0; qi < 20; ++qi) {
    RankedQuery q{"q" + std::to_string(qi), {}};
    for (int ci = 0; ci < 8; ++ci)
      q.candidates.push_back({"c" + std::to_string(ci),
                              rng.uniform(-3.0, 3.0), rng.bernoulli(0.3)});
    base.push_back(q);
  }
  auto reference = evaluate_run(make_run(base, "t"));

  for (int variant = 0; variant < 2; ++variant) {
    auto transformed = base;
    for (auto& q : transformed)
      for (auto& c : q.candidates)
        c.score = variant == 0 ? 2.0 * c.score + 1.0 : std::exp(c.score);
    auto report = evaluate_run(make_run(transformed, "t"));
    CHECK(report.map == reference.map);
    CHECK(report.mrr == reference.mrr);
    CHECK(report.p_at_1 == reference.p_at_1);
  }
}

TEST_CASE("metrics coincide for single-positive queries") {
  // With exactly one positive, AP equals the reciprocal rank; with that
  // positive always first, all three metrics are 1.
  Rng rng(11);
  std::vector<std::vector<int>> layouts;
  for (int qi = 0; qi < 50; ++qi) {
    std::vector<int> labels(6, 0);
    labels[rng.below(6)] = 1;
    layouts.push_back(labels);
  }
  auto report = evaluate_run(run_from_labels(layouts));
  CHECK(report.map == report.mrr);

  auto perfect = evaluate_run(run_from_labels({{1, 0, 0}, {1, 0}, {1, 0, 0, 0}}));
  CHECK(perfect.map == 1.0);
  CHECK(perfect.mrr == 1.0);
  CHECK(perfect.p_at_1 == 1.0);
}

TEST_CASE("random ranking of 5 candidates matches the known expectations") {
  // Exact expectation (1 + 1/2 + 1/3 + 1/4 + 1/5)/5 = 137/300.
  constexpr int kTrials = 100000;
  Rng rng(2026);
  std::vector<int> labels = {1, 0, 0, 0, 0};
  double mrr_sum = 0.0;
  double top_sum = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    rng.shuffle(labels);
    auto report =
        evaluate_run(make_run({query_from_labels("q", labels)}, "mc"));
    mrr_sum += report.mrr;
    top_sum += report.p_at_1;
  }
  const double mrr = mrr_sum / kTrials;
  const double p1 = top_sum / kTrials;
  CHECK(std::abs(mrr - 0.4570) <= 0.005);
  CHECK(std::abs(mrr - 137.0 / 300.0) <= 0.004);
  CHECK(std::abs(p1 - 0.2000) <= 0.005);
}

TEST_CASE("run files are written in the six-field format") {
  auto run = make_run({{"q1", {{"c2", 0.25, 0}, {"c1", 0.5, 1}}}}, "tag");
  auto path = testsupport::write_fixture("eval_run_small.txt", "");
  write_run_file(run, path);
  std::ifstream in(path);
  std::string line1, line2, extra;
  REQUIRE(std::getline(in, line1));
  REQUIRE(std::getline(in, line2));
  CHECK_FALSE(std::getline(in, extra));
  CHECK(line1 == "q1 Q0 c1 1 0.500000 tag");
  CHECK(line2 == "q1 Q0 c2 2 0.250000 tag");
}

TEST_CASE("qrels files carry the labels") {
  auto run = make_run({{"q1", {{"c2", 0.25, 0}, {"c1", 0.5, 1}}}}, "tag");
  auto path = testsupport::write_fixture("eval_qrels.txt", "");
  write_qrels(run, path);
  std::ifstream in(path);
  std::string line1, line2;
  REQUIRE(std::getline(in, line1));
  REQUIRE(std::getline(in, line2));
  CHECK(line1 == "q1 0 c1 1");
  CHECK(line2 == "q1 0 c2 0");
}

TEST_CASE("written runs parse back with order and scores intact") {
  Rng rng(5);
  std::vector<RankedQuery> queries;
  for (int qi = 0; qi < 7; ++qi) {
    RankedQuery q{"query" + std::to_string(qi), {}};
    for (int ci = 0; ci < 5; ++ci)
      q.candidates.push_back({"cand" + std::to_string(ci),
                              rng.uniform(-2.0, 2.0), 0});
    queries.push_back(q);
  }
  auto run = make_run(std::move(queries), "roundtrip");
  auto path = testsupport::write_fixture("eval_roundtrip.txt", "");
  write_run_file(run, path);
  auto parsed = read_run_file(path);
  CHECK(parsed.tag == "roundtrip");
  REQUIRE(parsed.queries.size() == run.queries.size());
  for (std::size_t qi = 0; qi < run.queries.size(); ++qi) {
    CHECK(parsed.queries[qi].query_id == run.queries[qi].query_id);
    REQUIRE(parsed.queries[qi].candidates.size() ==
            run.queries[qi].candidates.size());
    for (std::size_t ci = 0; ci < run.queries[qi].candidates.size(); ++ci) {
      CHECK(parsed.queries[qi].candidates[ci].candidate_id ==
            run.queries[qi].candidates[ci].candidate_id);
      CHECK(std::abs(parsed.queries[qi].candidates[ci].score -
                     run.queries[qi].candidates[ci].score) < 1e-6);
    }
  }
}

TEST_CASE("malformed run files are rejected with a location") {
  auto bad_fields = testsupport::write_fixture("eval_bad_fields.txt",
                                                "q1 Q0 c1 1 0.5\n");
  CHECK_THROWS_AS(read_run_file(bad_fields), DataError);
  auto bad_marker = testsupport::write_fixture(
      "eval_bad_marker.txt", "q1 X0 c1 1 0.500000 tag\n");
  CHECK_THROWS_AS(read_run_file(bad_marker), DataError);
  auto bad_rank = testsupport::write_fixture(
      "eval_bad_rank.txt", "q1 Q0 c1 2 0.500000 tag\n");
  CHECK_THROWS_AS(read_run_file(bad_rank), DataError);
  CHECK_THROWS_AS(read_run_file("/nonexistent/run.txt"), DataError);
  auto empty = testsupport::write_fixture("eval_empty_run.txt", "\n");
  CHECK_THROWS_AS(read_run_file(empty), DataError);
}

}  // TEST_SUITE
