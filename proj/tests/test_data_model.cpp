#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "ragmi/data_model.hpp"
#include "ragmi/error.hpp"
#include "ragmi/random.hpp"
#include "support.hpp"

using namespace ragmi;
using ragmi::test::dist;
using ragmi::test::make_run;

TEST_SUITE("data_model") {

TEST_CASE("make_ranked_list sorts by score then id") {
  auto list = make_ranked_list({{"b", 1.0}, {"a", 1.0}, {"c", 3.0}});
  REQUIRE(list.size() == 3);
  CHECK(list[0].chunk_id == "c");
  CHECK(list[1].chunk_id == "a");
  CHECK(list[2].chunk_id == "b");
  for (int i = 0; i < 3; ++i) CHECK(list[i].rank == i + 1);
}

TEST_CASE("runs parse two retrievers by three queries") {
  std::string text;
  for (std::string r : {"r1", "r2"})
    for (std::string q : {"q1", "q2", "q3"})
      text += R"({"retriever":")" + r + R"(","query_id":")" + q +
              R"(","chunks":[{"chunk_id":"a","score":2.0,"rank":1},{"chunk_id":"b","score":1.0,"rank":2}]})" +
              "\n";
  auto runs = runs_from_jsonl(text);
  REQUIRE(runs.size() == 2);
  for (const auto& run : runs) {
    CHECK(run.lists.size() == 3);
    CHECK(run.find("q2")->at(1).chunk_id == "b");
  }
}

TEST_CASE("empty runs file gives no runs") {
  CHECK(runs_from_jsonl("").empty());
  CHECK(runs_from_jsonl("\n\n").empty());
}

TEST_CASE("missing rank names the line") {
  std::string text =
      R"({"retriever":"r","query_id":"q1","chunks":[{"chunk_id":"a","score":1,"rank":1}]})"
      "\n"
      R"({"retriever":"r","query_id":"q2","chunks":[{"chunk_id":"a","score":1}]})"
      "\n";
  try {
    runs_from_jsonl(text, "runs.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("runs.jsonl:2") != std::string::npos);
    CHECK(std::string(e.what()).find("rank") != std::string::npos);
  }
}

TEST_CASE("malformed JSON is a parse error") {
  CHECK_THROWS_AS(runs_from_jsonl("{not json}\n"), ParseError);
}

TEST_CASE("duplicate (retriever, query, chunk) is a validation error") {
  std::string text =
      R"({"retriever":"r","query_id":"q","chunks":[{"chunk_id":"a","score":2,"rank":1},{"chunk_id":"a","score":1,"rank":2}]})"
      "\n";
  CHECK_THROWS_AS(runs_from_jsonl(text), ValidationError);
}

TEST_CASE("ranks that disagree with scores are rejected") {
  std::string text =
      R"({"retriever":"r","query_id":"q","chunks":[{"chunk_id":"a","score":1,"rank":1},{"chunk_id":"b","score":2,"rank":2}]})"
      "\n";
  CHECK_THROWS_AS(runs_from_jsonl(text), ValidationError);
}

TEST_CASE("runs round-trip through JSONL") {
  auto r1 = make_run("r1", {{"q1", {{"a", 0.5}, {"b", -1.25}}}, {"q2", {{"c", 3.0}}}});
  auto r2 = make_run("r2", {{"q1", {{"b", 1e-7}, {"z", 2.0}}}});
  auto text = runs_to_jsonl({r1, r2});
  auto back = runs_from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(runs_to_jsonl(back) == text);
  CHECK(back[0].find("q1")->at(1).score == -1.25);
}

TEST_CASE("qa, corpus and distributions round-trip through files") {
  auto dir = ragmi::test::scratch_dir("data_model_files");
  std::vector<QaPair> qa{{"q1", "what?", "this", {"c1"}}, {"q2", "why?", "that", {}}};
  std::vector<Chunk> corpus{{"c1", "text one", {1.0, 0.0}}, {"c2", "text two", {0.0, 1.0}}};
  TargetMap t{{"q1", dist("q1", {{"c1", 0.25}, {"c2", 0.75}})}};
  save_qa((dir / "qa.jsonl").string(), qa);
  save_corpus((dir / "corpus.jsonl").string(), corpus);
  save_distributions((dir / "cp.jsonl").string(), t);

  auto qa2 = load_qa((dir / "qa.jsonl").string());
  REQUIRE(qa2.size() == 2);
  CHECK(qa2[0].golden_chunk_ids == std::set<std::string>{"c1"});
  CHECK(qa2[1].golden_chunk_ids.empty());
  auto corpus2 = load_corpus((dir / "corpus.jsonl").string());
  REQUIRE(corpus2.size() == 2);
  CHECK(corpus2[1].embedding == std::vector<double>{0.0, 1.0});
  auto t2 = load_distributions((dir / "cp.jsonl").string());
  CHECK(*t2.at("q1").probability_of("c2") == 0.75);

  check_golden_against_corpus(qa2, corpus2);
  qa2[1].golden_chunk_ids.insert("missing");
  CHECK_THROWS_AS(check_golden_against_corpus(qa2, corpus2), ValidationError);
}

TEST_CASE("distribution validation") {
  CHECK_NOTHROW(validate(dist("q", {{"a", 0.5}, {"b", 0.5}})));
  CHECK_THROWS_AS(validate(dist("q", {{"a", 0.5}, {"b", 0.6}})), ValidationError);
  CHECK_THROWS_AS(validate(dist("q", {{"a", 1.5}, {"b", -0.5}})), ValidationError);
  CHECK_THROWS_AS(validate(dist("q", {{"a", 0.5}, {"a", 0.5}})), ValidationError);
  auto n = normalized_distribution("q", {"a", "b"}, {1.0, 3.0});
  CHECK(*n.probability_of("b") == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(normalized_distribution("q", {"a"}, {0.0}), ArgumentError);
}

TEST_CASE("restrict_to renormalizes and rejects unknown chunks") {
  auto d = dist("q", {{"a", 0.2}, {"b", 0.3}, {"c", 0.5}});
  auto r = restrict_to(d, {"c", "a"});
  REQUIRE(r.size() == 2);
  CHECK(r.entries[0].chunk_id == "c");
  CHECK(r.entries[0].probability == doctest::Approx(0.5 / 0.7));
  CHECK_THROWS_AS(restrict_to(d, {"a", "x"}), AlignmentError);
}

TEST_CASE("union anchor over disjoint lists") {
  auto r1 = make_run("r1", {{"q", {{"a", 2.0}, {"b", 1.0}}}});
  auto r2 = make_run("r2", {{"q", {{"c", 5.0}}}});
  auto anchor = build_anchor_lists({r1, r2}, AnchorPolicy::union_of_all(5));
  // a and c share best rank 1; the id breaks the tie.
  CHECK(anchor.at("q") == std::vector<std::string>{"a", "c", "b"});
  auto cut = build_anchor_lists({r1, r2}, AnchorPolicy::union_of_all(2));
  CHECK(cut.at("q") == std::vector<std::string>{"a", "c"});
}

TEST_CASE("single anchor truncates the named retriever") {
  auto r1 = make_run("r1", {{"q", {{"x", 3.0}, {"y", 2.0}, {"z", 1.0}}}});
  auto r2 = make_run("r2", {{"q", {{"w", 3.0}}}});
  auto anchor = build_anchor_lists({r1, r2}, AnchorPolicy::single("r1", 2));
  CHECK(anchor.at("q") == std::vector<std::string>{"x", "y"});
  CHECK_THROWS_AS(build_anchor_lists({r1, r2}, AnchorPolicy::single("nope", 2)), ConfigError);
}

TEST_CASE("anchor policy parsing") {
  CHECK(AnchorPolicy::parse("union", 3).kind == AnchorPolicy::Kind::Union);
  auto s = AnchorPolicy::parse("single:bm25", 3);
  CHECK(s.kind == AnchorPolicy::Kind::Single);
  CHECK(s.retriever == "bm25");
  CHECK_THROWS_AS(AnchorPolicy::parse("both", 3), ConfigError);
  CHECK_THROWS_AS(AnchorPolicy::union_of_all(0), ConfigError);
}

TEST_CASE("align zero-fills chunks a retriever did not return") {
  auto r = make_run("r", {{"q", {{"a", 2.0}}}});
  TargetMap t{{"q", dist("q", {{"a", 0.6}, {"b", 0.4}})}};
  AnchorMap anchor{{"q", {"a", "b"}}};
  auto m = align({r}, t, anchor);
  REQUIRE(m.rows() == 2);
  CHECK(m.columns[0] == std::vector<double>{2.0, 0.0});
  CHECK(m.y == std::vector<double>{0.6, 0.4});
}

TEST_CASE("align copies full coverage verbatim and has the stacked shape") {
  std::vector<RetrieverRun> runs;
  for (int j = 0; j < 4; ++j) {
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> lists;
    for (std::string q : {"q1", "q2"})
      lists.push_back({q, {{"a", 1.0 + j}, {"b", 0.5 * j}, {"c", -1.0 * j}}});
    runs.push_back(make_run("r" + std::to_string(j), lists));
  }
  TargetMap t;
  for (std::string q : {"q1", "q2"}) t[q] = dist(q, {{"a", 0.2}, {"b", 0.3}, {"c", 0.5}});
  auto anchor = build_anchor_lists(runs, AnchorPolicy::union_of_all(3));
  auto m = align(runs, t, anchor);
  CHECK(m.rows() == 6);
  CHECK(m.cols() == 4);
  for (std::size_t row = 0; row < m.rows(); ++row) {
    const auto& [q, c] = m.row_index[row];
    for (std::size_t j = 0; j < 4; ++j) CHECK(m.x(row, j) == *score_in(*runs[j].find(q), c));
  }
}

TEST_CASE("align rejects anchor chunks the target lacks") {
  auto r = make_run("r", {{"q", {{"a", 2.0}, {"b", 1.0}}}});
  TargetMap t{{"q", dist("q", {{"a", 1.0}})}};
  CHECK_THROWS_AS(align({r}, t, AnchorMap{{"q", {"a", "b"}}}), AlignmentError);
}

TEST_CASE("align is equivariant under retriever reordering") {
  Rng rng(11);
  std::vector<RetrieverRun> runs;
  for (int j = 0; j < 3; ++j) {
    RetrieverRun run{"r" + std::to_string(j), {}};
    for (int q = 0; q < 4; ++q) {
      std::vector<std::pair<std::string, double>> scored;
      for (int c = 0; c < 6; ++c)
        if (rng.uniform() < 0.7) scored.push_back({"c" + std::to_string(c), rng.normal()});
      run.lists["q" + std::to_string(q)] = make_ranked_list(scored);
    }
    runs.push_back(run);
  }
  TargetMap t;
  for (int q = 0; q < 4; ++q) {
    std::vector<std::string> ids;
    std::vector<double> w;
    for (int c = 0; c < 6; ++c) {
      ids.push_back("c" + std::to_string(c));
      w.push_back(1.0 + c);
    }
    t["q" + std::to_string(q)] = normalized_distribution("q" + std::to_string(q), ids, w);
  }
  auto anchor = build_anchor_lists(runs, AnchorPolicy::union_of_all(4));
  auto m = align(runs, t, anchor);
  std::vector<RetrieverRun> reversed(runs.rbegin(), runs.rend());
  auto mr = align(reversed, t, build_anchor_lists(reversed, AnchorPolicy::union_of_all(4)));
  CHECK(mr.y == m.y);
  for (std::size_t j = 0; j < 3; ++j) CHECK(mr.columns[2 - j] == m.columns[j]);
}

}  // TEST_SUITE
