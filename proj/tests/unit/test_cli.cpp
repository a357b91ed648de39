#include <fstream>
#include <sstream>

#include "al4rag/cli.hpp"
#include "al4rag/hashing.hpp"
#include "al4rag/manifest.hpp"
#include "al4rag/preference.hpp"
#include "al4rag/selection.hpp"
#include "al4rag/task_store.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace al4rag;
using nlohmann::json;

namespace {

const std::string kTiny = std::string(AL4RAG_TEST_DATA) + "/tiny_corpus.jsonl";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& path) { return read_text_file(path); }

void write_corpus(const std::filesystem::path& path, std::size_t n) {
  std::mt19937_64 rng(1);
  const auto words = testing::word_list("k", 40);
  std::ofstream out(path);
  for (std::size_t i = 0; i < n; ++i) {
    json rec = {{"id", "c" + std::to_string(i)},
                {"query", testing::random_words(rng, words, 5)},
                {"reference", testing::random_words(rng, words, 20)},
                {"response", testing::random_words(rng, words, 6)}};
    out << rec.dump() << "\n";
  }
}

}  // namespace

TEST_CASE("budget parsing") {
  CHECK(cli::resolve_budget("40", 400) == 40);
  CHECK(cli::resolve_budget("25%", 400) == 100);
  CHECK(cli::resolve_budget("12.5%", 400) == 50);
  CHECK(cli::resolve_budget("25%", 10) == 3);
  CHECK(cli::resolve_budget(" 50% ", 7) == 4);
  for (const char* bad : {"0", "0%", "-3", "abc", "", "5x", "101%", "2.5"}) {
    CHECK_THROWS_AS(cli::resolve_budget(bad, 100), Error);
  }
}

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code_for(ErrorCode::io_failure) == cli::kIoError);
  CHECK(cli::exit_code_for(ErrorCode::usage) == cli::kUsage);
  CHECK(cli::exit_code_for(ErrorCode::config_invalid) == cli::kUsage);
  CHECK(cli::exit_code_for(ErrorCode::malformed_line) == cli::kDataError);
  CHECK(cli::exit_code_for(ErrorCode::empty_input) == cli::kDataError);
}

TEST_CASE("ingest-check") {
  const auto ok = invoke({"ingest-check", "--corpus", kTiny});
  CHECK(ok.code == 0);
  const auto summary = json::parse(ok.out);
  CHECK(summary["records"] == 4);

  testing::TempDir dir;
  std::ofstream(dir / "bad.jsonl") << "{\"id\":\"a\",\"query\":\"q\",\"reference\":\"r\",\"response\":\"x\"}\n{oops\n";
  const auto bad = invoke({"ingest-check", "--corpus", (dir / "bad.jsonl").string()});
  CHECK(bad.code == cli::kDataError);
  CHECK(bad.err.find("bad.jsonl:2") != std::string::npos);
  CHECK(invoke({"ingest-check", "--corpus", (dir / "none.jsonl").string()}).code == cli::kIoError);
  CHECK(invoke({"ingest-check"}).code == cli::kUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kUsage);
}

TEST_CASE("select writes a deterministic selection and manifest") {
  testing::TempDir dir;
  write_corpus(dir / "c.jsonl", 40);
  const auto base = std::vector<std::string>{"select", "--corpus", (dir / "c.jsonl").string(), "--strategy", "idds",
                                             "--similarity", "ras", "--budget", "25%", "--rounds", "5", "--seed", "7"};
  auto a_args = base;
  a_args.insert(a_args.end(), {"--out", (dir / "a.jsonl").string()});
  auto b_args = base;
  b_args.insert(b_args.end(), {"--out", (dir / "b.jsonl").string(), "--cache-dir", (dir / "cache").string()});

  const auto a = invoke(a_args);
  REQUIRE(a.code == 0);
  const auto b = invoke(b_args);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(a.out == b.out);
  const auto c = invoke(b_args);  // served from the matrix cache
  CHECK(c.code == 0);
  CHECK(slurp(dir / "b.jsonl") == slurp(dir / "a.jsonl"));

  const auto ids = read_selection_ids(dir / "a.jsonl");
  CHECK(ids.size() == 10);
  const auto manifest = json::parse(slurp(dir / "a.jsonl.manifest.json"));
  CHECK(manifest["selection"]["lambda"] == 0.67);
  CHECK(manifest["selection"]["budget"] == 10);
  CHECK(manifest["manifest_hash"].get<std::string>() + "\n" == a.out);
  const auto first_line = json::parse(slurp(dir / "a.jsonl").substr(0, slurp(dir / "a.jsonl").find('\n')));
  CHECK(first_line["manifest"] == manifest["manifest_hash"]);
  CHECK(first_line["round"] == 1);

  auto zero = base;
  zero[8] = "0";
  zero.insert(zero.end(), {"--out", (dir / "z.jsonl").string()});
  CHECK(invoke(zero).code == cli::kUsage);
  CHECK_FALSE(std::filesystem::exists(dir / "z.jsonl"));

  auto bad_strategy = a_args;
  bad_strategy[4] = "best";
  CHECK(invoke(bad_strategy).code == cli::kUsage);

  auto random = a_args;
  random[4] = "random";
  CHECK(invoke(random).code == 0);
}

TEST_CASE("build-prefs from a label export") {
  testing::TempDir dir;
  const auto labels = json::array({{{"record_id", "r1"}, {"h", 0}, {"revision", 3}},
                                   {{"record_id", "r2"}, {"h", 1}, {"revision", 5}},
                                   {{"record_id", "r4"}, {"h", 1}, {"revision", 4}}});
  std::ofstream(dir / "labels.json") << labels.dump();
  std::ofstream(dir / "sel.jsonl") << "{\"id\":\"r1\"}\n{\"id\":\"r3\"}\n";
  const auto r = invoke({"build-prefs", "--corpus", kTiny, "--labels", (dir / "labels.json").string(), "--selection",
                         (dir / "sel.jsonl").string(), "--out", (dir / "dpo.jsonl").string()});
  REQUIRE(r.code == 0);
  const auto summary = json::parse(r.out);
  CHECK(summary["pairs"] == 3);
  CHECK(summary["original_response_chosen"] == 1);
  CHECK(summary["rejection_chosen"] == 2);
  CHECK(summary["unlabeled_selected"] == json::array({"r3"}));
  CHECK(r.err.find("r3") != std::string::npos);

  const auto pairs = parse_dpo_dataset(slurp(dir / "dpo.jsonl"), RejectionPolicy());
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].id == "r1");
  CHECK(pairs[0].chosen == "Paris.");
  CHECK(pairs[1].rejected == "Christopher Marlowe wrote Hamlet.");
  const auto manifest = json::parse(slurp(dir / "dpo.jsonl.manifest.json"));
  CHECK(manifest["label_store_revision"] == 5);
  CHECK(manifest["dataset_sha256"] == sha256_hex(slurp(dir / "dpo.jsonl")));

  std::ofstream(dir / "empty.json") << "[]";
  const auto none = invoke({"build-prefs", "--corpus", kTiny, "--labels", (dir / "empty.json").string(), "--out",
                            (dir / "none.jsonl").string()});
  CHECK(none.code == cli::kDataError);
  CHECK(none.err.find("no-labels") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "none.jsonl"));

  CHECK(invoke({"build-prefs", "--corpus", kTiny, "--out", (dir / "x.jsonl").string()}).code == cli::kUsage);
}

TEST_CASE("build-prefs from a store directory") {
  testing::TempDir dir;
  {
    TaskStoreOptions options;
    options.fsync = false;
    TaskStore store(dir / "store", options);
    store.import_tasks(std::vector<std::string>{"r1", "r2", "r3"}, load_corpus(kTiny));
    for (int i = 0; i < 2; ++i) {
      const auto t = store.lease_next("ann");
      store.submit_label(t->record_id, 1, "ann");
    }
  }
  const auto r = invoke({"build-prefs", "--corpus", kTiny, "--store", (dir / "store").string(), "--out",
                         (dir / "dpo.jsonl").string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["rejection_chosen"] == 2);
}

TEST_CASE("report metrics") {
  testing::TempDir dir;
  const std::string refusal(RejectionPolicy::kDefaultText);
  {
    std::ofstream in(dir / "same.jsonl");
    in << json{{"id", "a"}, {"response", "the cat sat"}, {"reference_answer", "the cat sat"}}.dump() << "\n";
    in << json{{"response", "a b c d"}, {"reference_answer", "a b c d"}}.dump() << "\n";
  }
  const auto same = invoke({"report", "--input", (dir / "same.jsonl").string()});
  REQUIRE(same.code == 0);
  const auto report = json::parse(same.out);
  CHECK(report["count"] == 2);
  CHECK(report["metrics"]["rouge1"]["f1"] == 1.0);
  CHECK(report["metrics"]["rouge2"]["f1"] == 1.0);
  CHECK(report["metrics"]["rougeL"]["f1"] == 1.0);
  CHECK(report["metrics"]["rejection_rate"] == 0.0);
  CHECK(report["per_record"][0]["id"] == "a");
  CHECK(report["per_record"][1]["id"] == "2");

  {
    std::ofstream in(dir / "refuse.jsonl");
    for (int i = 0; i < 3; ++i) in << json{{"response", refusal}, {"reference_answer", "x"}}.dump() << "\n";
  }
  const auto refuse = invoke({"report", "--input", (dir / "refuse.jsonl").string(), "--out",
                              (dir / "r.json").string()});
  REQUIRE(refuse.code == 0);
  CHECK(json::parse(slurp(dir / "r.json"))["metrics"]["rejection_rate"] == 1.0);

  {
    std::ofstream in(dir / "pat.jsonl");
    in << json{{"response", "No idea, honestly."}, {"reference_answer", "x"}}.dump() << "\n";
    in << json{{"response", "I cannot answer."}, {"reference_answer", "x"}}.dump() << "\n";
  }
  const auto pat = json::parse(invoke({"report", "--input", (dir / "pat.jsonl").string(), "--no-default-patterns",
                                       "--pattern", "no idea"})
                                   .out);
  CHECK(pat["metrics"]["rejection_rate"] == 0.5);

  std::ofstream(dir / "empty.jsonl") << "\n";
  const auto empty = invoke({"report", "--input", (dir / "empty.jsonl").string()});
  CHECK(empty.code == cli::kDataError);
  CHECK(empty.err.find("malformed-input") != std::string::npos);
}

TEST_CASE("embed-import") {
  testing::TempDir dir;
  {
    std::ofstream e(dir / "e.jsonl");
    e << R"({"views":{"query":2}})" << "\n";
    for (const char* id : {"r1", "r2", "r3", "r4"}) {
      e << json{{"id", id}, {"view", "query"}, {"vector", {1.0, 0.5}}}.dump() << "\n";
    }
  }
  const auto ok = invoke({"embed-import", "--corpus", kTiny, "--embeddings", (dir / "e.jsonl").string()});
  REQUIRE(ok.code == 0);
  CHECK(json::parse(ok.out)["entries"] == 4);

  const auto sel = invoke({"select", "--corpus", kTiny, "--strategy", "idds", "--similarity", "query", "--source",
                           "embedding", "--embeddings", (dir / "e.jsonl").string(), "--budget", "2", "--rounds", "2",
                           "--out", (dir / "s.jsonl").string()});
  CHECK(sel.code == 0);
  const auto missing_view = invoke({"select", "--corpus", kTiny, "--similarity", "ras", "--source", "embedding",
                                    "--embeddings", (dir / "e.jsonl").string(), "--budget", "2", "--rounds", "2", "--out",
                                    (dir / "t.jsonl").string()});
  CHECK(missing_view.code == cli::kDataError);
}
