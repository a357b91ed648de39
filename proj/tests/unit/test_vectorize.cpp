#include <cmath>
#include <fstream>

#include "al4rag/error.hpp"
#include "al4rag/vectorize.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace al4rag;

TEST_CASE("tokenize") {
  CHECK(tokenize("The cat, the CAT!") == std::vector<std::string>{"the", "cat", "the", "cat"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a1-b2") == std::vector<std::string>{"a1", "b2"});
  CHECK(tokenize("  --  ").empty());
  // Non-ASCII bytes stay inside tokens.
  CHECK(tokenize("caf\xc3\xa9 bar") == std::vector<std::string>{"caf\xc3\xa9", "bar"});
}

TEST_CASE("fit_vocabulary counts document frequency once per document") {
  const auto v = fit_vocabulary({"a b", "b c"});
  CHECK(v.document_count() == 2);
  CHECK(v.document_frequency("a") == 1u);
  CHECK(v.document_frequency("b") == 2u);
  CHECK(v.document_frequency("c") == 1u);

  CHECK(fit_vocabulary({"x x x"}).document_frequency("x") == 1u);

  const auto disjoint = fit_vocabulary({"p q", "r s"});
  for (std::uint32_t i = 0; i < disjoint.size(); ++i) CHECK(disjoint.document_frequency(i) == 1u);

  CHECK_THROWS_AS(fit_vocabulary({}), Error);
}

TEST_CASE("vocabulary indices are lexicographic, contiguous and deterministic") {
  const std::vector<std::string> texts = {"zeta alpha", "mu alpha beta"};
  const auto v = fit_vocabulary(texts);
  CHECK(v.terms() == std::vector<std::string>{"alpha", "beta", "mu", "zeta"});
  CHECK(v.index_of("alpha") == 0u);
  CHECK(v.index_of("zeta") == 3u);
  CHECK(v == fit_vocabulary(texts));
  for (std::uint32_t i = 0; i < v.size(); ++i) {
    CHECK(v.idf(i) > 0.0);
    CHECK(v.document_frequency(i) >= 1);
    CHECK(v.document_frequency(i) <= v.document_count());
  }
}

TEST_CASE("tfidf_vector weights and normalization") {
  const auto v = fit_vocabulary({"apple banana", "apple cherry"});
  const auto vec = tfidf_vector("apple banana", v);
  REQUIRE(vec.entries.size() == 2);
  const double apple = vec.entries[*v.index_of("apple") == vec.entries[0].index ? 0 : 1].weight;
  const double banana = vec.entries[*v.index_of("banana") == vec.entries[0].index ? 0 : 1].weight;
  CHECK(banana > apple);
  // Hand evaluation: idf(apple) = ln(3/3) + 1 = 1, idf(banana) = ln(3/2) + 1.
  CHECK(apple == doctest::Approx(0.5797386715376657).epsilon(1e-12));
  CHECK(banana == doctest::Approx(0.8148024746671689).epsilon(1e-12));
  CHECK(std::abs(vec.norm() - 1.0) < 1e-9);
  CHECK(vec.valid());

  CHECK(tfidf_vector("durian elderberry", v).empty());
  CHECK(tfidf_vector("", v).empty());
}

TEST_CASE("normalized tfidf is invariant to positive rescaling") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto v = testing::random_sparse(rng, 20, 0.4);
    if (v.empty()) continue;
    const double c = 0.001 + static_cast<double>(rng() % 100000) / 10.0;
    SparseVector scaled = v;
    for (auto& e : scaled.entries) e.weight *= c;
    const auto renormalized = normalize(scaled);
    REQUIRE(renormalized.entries.size() == v.entries.size());
    for (std::size_t i = 0; i < v.entries.size(); ++i) {
      CHECK(renormalized.entries[i].weight == doctest::Approx(v.entries[i].weight).epsilon(1e-12));
    }
  }
}

TEST_CASE("vectorize_corpus fits per-view vocabularies") {
  const Corpus corpus({testing::make_record("a", "where is paris", "paris lies on the seine", "in france"),
                       testing::make_record("b", "where is paris", "berlin spree river", "germany"),
                       testing::make_record("c", "capital of italy", "rome tiber", "rome")},
                      "mem");
  const auto vocab = fit_field_vocabularies(corpus, PromptTemplate());
  CHECK_FALSE(vocab.query.index_of("seine").has_value());
  CHECK_FALSE(vocab.query.index_of("answer").has_value());
  CHECK(vocab.prompt.index_of("answer").has_value());
  CHECK_FALSE(vocab.combined.index_of("answer").has_value());
  CHECK(vocab.combined.index_of("seine").has_value());

  const auto vectors = vectorize_corpus(corpus, PromptTemplate());
  REQUIRE(vectors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(vectors[i].record_id == corpus[i].id);
    CHECK(vectors[i].query.valid());
    CHECK(vectors[i].prompt.valid());
  }
  CHECK(vectors[0].query == vectors[1].query);
  CHECK_FALSE(vectors[0].reference == vectors[1].reference);

  VectorizerConfig shared;
  shared.shared_vocabulary = true;
  const auto shared_vocab = fit_field_vocabularies(corpus, PromptTemplate(), shared);
  CHECK(shared_vocab.query.index_of("seine").has_value());
  CHECK(shared_vocab.query == shared_vocab.reference);

  CHECK_THROWS_AS(vectorize_corpus(Corpus(), PromptTemplate()), Error);
}

TEST_CASE("vectorization result does not depend on worker count") {
  std::mt19937_64 rng(3);
  const auto words = testing::word_list("w", 40);
  std::vector<ConversationRecord> records;
  for (int i = 0; i < 30; ++i) {
    records.push_back(testing::make_record("r" + std::to_string(i), testing::random_words(rng, words, 5),
                                           testing::random_words(rng, words, 30), "x"));
  }
  const Corpus corpus(records, "mem");
  const auto vocab = fit_field_vocabularies(corpus, PromptTemplate());
  const auto one = vectorize_with(corpus, PromptTemplate(), vocab, 1);
  const auto four = vectorize_with(corpus, PromptTemplate(), vocab, 4);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].record_id == four[i].record_id);
    CHECK(one[i].prompt == four[i].prompt);
    CHECK(one[i].combined == four[i].combined);
  }
}

namespace {

const std::string kHeader = R"({"views":{"query":4,"reference":4}})";

std::string row(const std::string& id, const std::string& view, const std::string& values) {
  return R"({"id":")" + id + R"(","view":")" + view + R"(","vector":[)" + values + "]}\n";
}

ErrorCode parse_error(const std::string& text, const Corpus* corpus) {
  try {
    parse_embeddings(text, corpus);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::usage;
}

}  // namespace

TEST_CASE("load_embeddings") {
  const Corpus corpus({testing::make_record("a", "q", "r", "x"), testing::make_record("b", "q", "r", "x"),
                       testing::make_record("c", "q", "r", "x")},
                      "mem");
  std::string text = kHeader + "\n";
  for (const auto* id : {"a", "b", "c"}) {
    text += row(id, "query", "1,0,0,0.5");
    text += row(id, "reference", "0,1,0,0");
  }
  testing::TempDir dir;
  std::ofstream(dir / "e.jsonl") << text;
  const auto table = load_embeddings(dir / "e.jsonl", &corpus);
  CHECK(table.entry_count() == 6);
  CHECK(table.view_dimensions().at("query") == 4);
  REQUIRE(table.find("b", "query") != nullptr);
  CHECK((*table.find("b", "query"))[3] == 0.5);

  const auto dense = dense_field_vectors(table, corpus);
  CHECK(dense[2].reference == DenseVector{0, 1, 0, 0});
  CHECK(dense[2].prompt.empty());

  CHECK(parse_error(kHeader + "\n" + row("a", "query", "1,2,3"), &corpus) == ErrorCode::dimension_mismatch);
  CHECK(parse_error(kHeader + "\n" + row("zz", "query", "1,2,3,4"), &corpus) == ErrorCode::unknown_record);
  CHECK(parse_error(row("a", "query", "1,2,3,4"), &corpus) == ErrorCode::malformed_line);
  CHECK(parse_error(kHeader + "\n" + row("a", "prompt", "1,2,3,4"), &corpus) == ErrorCode::malformed_line);
  CHECK(parse_error(kHeader + "\n" + row("a", "query", "1,2,3,4") + row("a", "query", "1,2,3,4"), &corpus) ==
        ErrorCode::duplicate_id);
  CHECK_THROWS_AS(load_embeddings("/nonexistent.jsonl"), Error);

  // Serialization reparses to the same table.
  const auto again = parse_embeddings(serialize_embeddings(table), &corpus);
  CHECK(again.entries() == table.entries());
  CHECK(again.view_dimensions() == table.view_dimensions());
}
