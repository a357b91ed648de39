#include <cmath>
#include <fstream>
#include <set>

#include "al4rag/corpus.hpp"
#include "al4rag/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace al4rag;
using al4rag::testing::TempDir;

namespace {

std::string line(const std::string& id, const std::string& extra = "") {
  return R"({"id":")" + id + R"(","query":"q )" + id + R"(","reference":"r )" + id + R"(","response":"a )" + id +
         "\"" + extra + "}\n";
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an al4rag::Error");
  return ErrorCode::usage;
}

}  // namespace

TEST_CASE("load_corpus keeps file order") {
  TempDir dir;
  std::ofstream(dir / "c.jsonl") << line("b") << line("a") << line("c");
  const auto corpus = load_corpus(dir / "c.jsonl");
  REQUIRE(corpus.size() == 3);
  CHECK(corpus[0].id == "b");
  CHECK(corpus[1].id == "a");
  CHECK(corpus[2].id == "c");
  CHECK(corpus.index_of("a") == 1u);
}

TEST_CASE("duplicate ids are rejected by name") {
  try {
    parse_corpus(line("x") + line("y") + line("x"));
    FAIL("expected duplicate-id");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::duplicate_id);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("a line missing response reports its line number") {
  const std::string text = line("a") + R"({"id":"b","query":"q","reference":"r"})" + "\n";
  try {
    parse_corpus(text, "c.jsonl");
    FAIL("expected malformed-line");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::malformed_line);
    CHECK(std::string(e.what()).find("c.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("record invariants") {
  CHECK(code_of([] { parse_corpus(R"({"id":"","query":"q","reference":"r","response":"a"})"); }) ==
        ErrorCode::malformed_line);
  CHECK(code_of([] { parse_corpus(R"({"id":"a","query":"   ","reference":"r","response":"a"})"); }) ==
        ErrorCode::malformed_line);
  CHECK(code_of([] { parse_corpus(line("a", R"(,"hallucination":2)")); }) == ErrorCode::malformed_line);
  CHECK(code_of([] { parse_corpus(line("a", R"(,"task_kind":"poetry")")); }) == ErrorCode::malformed_line);
  CHECK(code_of([] { parse_corpus("{not json"); }) == ErrorCode::malformed_line);
  CHECK(code_of([] { load_corpus("/nonexistent/corpus.jsonl"); }) == ErrorCode::io_failure);

  const auto corpus = parse_corpus(line("a", R"(,"hallucination":1,"task_kind":"summary")"));
  CHECK(corpus[0].hallucination == 1);
  CHECK(corpus[0].task_kind == TaskKind::summary);
}

TEST_CASE("round trip preserves every field including unknown keys") {
  const std::string text = line("a", R"(,"hallucination":0,"meta":{"src":"x","n":[1,2]},"z":true)") + line("b") +
                           line("c", R"(,"task_kind":"data2text")");
  const auto first = parse_corpus(text);
  const auto second = parse_corpus(serialize_corpus(first));
  CHECK(first.records() == second.records());
  CHECK(second[0].extra["meta"]["src"] == "x");
  CHECK(serialize_corpus(second) == serialize_corpus(first));
  CHECK(first.content_hash() == second.content_hash());
}

TEST_CASE("content hash ignores key order and whitespace but not content") {
  const auto a = parse_corpus(R"({"id":"a","query":"q","reference":"r","response":"x"})");
  const auto b = parse_corpus(R"({ "response": "x", "reference": "r", "query": "q", "id": "a" })");
  const auto c = parse_corpus(R"({"id":"a","query":"q","reference":"r","response":"y"})");
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("render_prompt substitutes both placeholders") {
  const PromptTemplate simple("{query}|{reference}");
  CHECK(render_prompt(testing::make_record("1", "a", "b", "c"), simple) == "a|b");

  const PromptTemplate def;
  const auto rendered = render_prompt(testing::make_record("1", "Q1", "R1", "c"), def);
  CHECK(rendered.find("Q1") != std::string::npos);
  CHECK(rendered.find("Q1", rendered.find("Q1") + 1) == std::string::npos);
  CHECK(rendered.find("R1") != std::string::npos);
  CHECK(rendered.find("R1", rendered.find("R1") + 1) == std::string::npos);
  CHECK(rendered == render_prompt(testing::make_record("1", "Q1", "R1", "c"), def));

  // Placeholder text inside the data is not expanded again.
  CHECK(simple.render("{reference}", "b") == "{reference}|b");
}

TEST_CASE("template must contain each placeholder once") {
  CHECK(code_of([] { PromptTemplate("{query} only"); }) == ErrorCode::config_invalid);
  CHECK(code_of([] { PromptTemplate("{query}{query}{reference}"); }) == ErrorCode::config_invalid);
}

TEST_CASE("split_corpus sizes, determinism and partition") {
  std::string text;
  for (int i = 0; i < 10; ++i) text += line("r" + std::to_string(i));
  const auto corpus = parse_corpus(text);

  const auto [a, b] = split_corpus(corpus, 0.5, 3);
  CHECK(a.size() == 5);
  CHECK(b.size() == 5);

  const auto [a2, b2] = split_corpus(corpus, 0.5, 3);
  CHECK(a.records() == a2.records());
  CHECK(b.records() == b2.records());

  std::multiset<std::string> joined;
  for (const auto& r : a) joined.insert(r.id);
  for (const auto& r : b) joined.insert(r.id);
  std::multiset<std::string> original;
  for (const auto& r : corpus) original.insert(r.id);
  CHECK(joined == original);

  std::string eight;
  for (int i = 0; i < 8; ++i) eight += line("e" + std::to_string(i));
  const auto [small, large] = split_corpus(parse_corpus(eight), 0.125, 1);
  CHECK(small.size() == 1);
  CHECK(large.size() == 7);

  CHECK(code_of([] { split_corpus(Corpus(), 0.5, 1); }) == ErrorCode::empty_input);
  CHECK(code_of([&] { split_corpus(corpus, 1.0, 1); }) == ErrorCode::config_invalid);
}

TEST_CASE("split partition property over random sizes and seeds") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 1 + rng() % 30;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += line("p" + std::to_string(i));
    const auto corpus = parse_corpus(text);
    const double fraction = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    const auto [a, b] = split_corpus(corpus, fraction, rng());
    CHECK(a.size() + b.size() == n);
    CHECK(a.size() == static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    for (const auto& r : a) CHECK_FALSE(b.index_of(r.id).has_value());
  }
}
