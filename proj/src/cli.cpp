#include "al4rag/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "al4rag/annotate_server.hpp"
#include "al4rag/corpus.hpp"
#include "al4rag/hashing.hpp"
#include "al4rag/manifest.hpp"
#include "al4rag/metrics.hpp"
#include "al4rag/preference.hpp"
#include "al4rag/rng.hpp"
#include "al4rag/selection.hpp"
#include "al4rag/similarity.hpp"
#include "al4rag/task_store.hpp"
#include "al4rag/vectorize.hpp"
#include "json.hpp"

namespace al4rag::cli {

using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_failure: return kIoError;
    case ErrorCode::usage:
    case ErrorCode::config_invalid: return kUsage;
    default: return kDataError;
  }
}

std::size_t resolve_budget(std::string_view spec, std::size_t pool_size) {
  const auto text = trim(spec);
  if (text.empty()) throw Error(ErrorCode::usage, "budget is empty");
  const bool percent = text.back() == '%';
  const auto number = percent ? text.substr(0, text.size() - 1) : text;
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(number, &consumed);
  } catch (const std::exception&) {
    throw Error(ErrorCode::usage, "cannot parse budget '" + text + "'");
  }
  if (consumed != number.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::usage, "cannot parse budget '" + text + "'");
  }
  if (value <= 0.0) throw Error(ErrorCode::usage, "budget must be positive, got '" + text + "'");
  if (percent) {
    if (value > 100.0) throw Error(ErrorCode::usage, "budget percentage exceeds 100");
    // ceil(P% of N), with 1e-9 of slack for binary noise.
    return static_cast<std::size_t>(std::ceil(value / 100.0 * static_cast<double>(pool_size) - 1e-9));
  }
  if (value != std::floor(value)) throw Error(ErrorCode::usage, "absolute budget must be an integer");
  return static_cast<std::size_t>(value);
}

namespace {

struct CommonTemplate {
  std::string template_file;

  PromptTemplate load() const {
    if (template_file.empty()) return PromptTemplate();
    return PromptTemplate(read_text_file(template_file));
  }
};

RejectionPolicy load_policy(const std::string& text, const std::string& overrides_file) {
  std::map<TaskKind, std::string> per_task;
  if (!overrides_file.empty()) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(read_text_file(overrides_file));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed_line, overrides_file + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorCode::malformed_line, overrides_file + ": expected {task_kind: text}");
    for (const auto& [key, value] : obj.items()) {
      const auto kind = parse_task_kind(key);
      if (!kind || !value.is_string()) {
        throw Error(ErrorCode::malformed_line, overrides_file + ": bad override for '" + key + "'");
      }
      per_task[*kind] = value.get<std::string>();
    }
  }
  return RejectionPolicy(text, std::move(per_task));
}

ordered_json policy_json(const RejectionPolicy& policy) {
  ordered_json out;
  out["text"] = policy.text();
  ordered_json overrides = ordered_json::object();
  for (const auto& [kind, text] : policy.per_task()) overrides[std::string(to_string(kind))] = text;
  out["per_task"] = overrides;
  return out;
}

// ---------------------------------------------------------------- ingest-check

struct IngestArgs {
  std::string corpus;
};

int cmd_ingest_check(const IngestArgs& args, std::ostream& out) {
  const auto corpus = load_corpus(args.corpus);
  std::size_t labeled = 0, hallucinated = 0;
  std::map<std::string, std::size_t> kinds;
  for (const auto& record : corpus) {
    if (record.hallucination) {
      ++labeled;
      hallucinated += static_cast<std::size_t>(*record.hallucination);
    }
    ++kinds[record.task_kind ? std::string(to_string(*record.task_kind)) : "unspecified"];
  }
  ordered_json summary;
  summary["records"] = corpus.size();
  summary["labeled"] = labeled;
  summary["hallucinated"] = hallucinated;
  summary["task_kinds"] = kinds;
  summary["corpus_hash"] = corpus.content_hash();
  out << summary.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- select

struct SelectArgs {
  std::string corpus;
  std::string strategy = "idds";
  std::string similarity = "ras";
  std::string source = "tfidf";
  std::string embeddings;
  std::string budget;
  std::size_t rounds = kDefaultRounds;
  std::uint64_t seed = 0;
  double lambda = kDefaultLambda;
  CommonTemplate tmpl;
  std::string out;
  std::string manifest;
  std::string cache_dir;
  bool shared_vocab = false;
  bool exclude_self = false;
  bool static_pool = false;
  std::size_t workers = 0;
};

int cmd_select(const SelectArgs& args, std::ostream& out, std::ostream& err) {
  const auto corpus = load_corpus(args.corpus);
  const auto tmpl = args.tmpl.load();

  SelectionConfig config;
  config.strategy = *parse_strategy(args.strategy);
  config.kind.measure = *parse_measure(args.similarity);
  config.kind.source = *parse_vector_source(args.source);
  config.budget = resolve_budget(args.budget, corpus.size());
  config.rounds = args.rounds;
  config.lambda = args.lambda;
  config.rng_seed = args.seed;
  config.idds_include_self = !args.exclude_self;
  config.static_pool_average = args.static_pool;
  config.workers = args.workers;
  validate(config, corpus.size());

  VectorizerConfig vconfig;
  vconfig.shared_vocabulary = args.shared_vocab;
  vconfig.workers = args.workers;

  RunManifest manifest("select");
  manifest["corpus_hash"] = corpus.content_hash();
  manifest["corpus_records"] = corpus.size();
  manifest["template"] = {{"text", tmpl.text()}, {"hash", tmpl.hash()}};

  ordered_json vectorizer;
  vectorizer["source"] = std::string(to_string(config.kind.source));
  std::string vectorizer_key;
  std::optional<EmbeddingTable> embeddings;
  if (config.kind.source == VectorSource::tfidf) {
    vectorizer["tokenizer"] = std::string(kTokenizerDescription);
    vectorizer["weighting"] = std::string(kTfidfDescription);
    vectorizer["vocabulary"] = args.shared_vocab ? "shared" : "per-view";
    vectorizer_key = std::string("tfidf/") + (args.shared_vocab ? "shared" : "per-view");
  } else {
    if (args.embeddings.empty()) throw Error(ErrorCode::usage, "--source embedding requires --embeddings");
    const auto raw = read_text_file(args.embeddings);
    embeddings = parse_embeddings(raw, &corpus);
    for (const auto view : required_views(config.kind.measure)) {
      if (!embeddings->has_view(view)) {
        throw Error(ErrorCode::malformed_line,
                    "embedding file lacks view '" + std::string(view) + "' needed by --similarity " + args.similarity);
      }
    }
    vectorizer["embeddings_hash"] = sha256_hex(raw);
    vectorizer_key = "embedding/" + sha256_hex(raw);
  }
  manifest["vectorizer"] = vectorizer;
  manifest["similarity"] = {{"measure", std::string(to_string(config.kind.measure))},
                            {"source", std::string(to_string(config.kind.source))}};
  manifest["selection"] = {{"strategy", std::string(to_string(config.strategy))},
                           {"budget", config.budget},
                           {"budget_spec", trim(args.budget)},
                           {"rounds", config.rounds},
                           {"lambda", config.lambda},
                           {"seed", config.rng_seed},
                           {"idds_include_self", config.idds_include_self},
                           {"static_pool_average", config.static_pool_average}};
  manifest["rng"] = std::string(kRngAlgorithm);
  manifest["rejection_policy"] = policy_json(RejectionPolicy());

  SelectionState state;
  if (config.strategy == Strategy::random) {
    state = run_selection(corpus, std::vector<FieldVectors>(corpus.size()), config);
  } else {
    const MatrixCacheKey key{corpus.content_hash(), config.kind, tmpl.hash(), vectorizer_key};
    std::optional<std::filesystem::path> cache_path;
    if (!args.cache_dir.empty()) {
      std::filesystem::create_directories(args.cache_dir);
      cache_path = std::filesystem::path(args.cache_dir) / (key.digest() + ".simcache");
    }
    SimilarityMatrix matrix;
    if (cache_path && std::filesystem::exists(*cache_path)) {
      matrix = load_matrix_cache(*cache_path, key);
    } else {
      if (embeddings) {
        const auto dense = dense_field_vectors(*embeddings, corpus);
        matrix = build_matrix(dense, dense, config.kind.measure, args.workers);
      } else {
        const auto vectors = vectorize_corpus(corpus, tmpl, vconfig);
        matrix = build_matrix(vectors, vectors, config.kind.measure, args.workers);
      }
      if (cache_path) save_matrix_cache(*cache_path, matrix, key);
    }
    state = run_selection(MatrixOracle(std::move(matrix)), config);
  }

  const auto manifest_path = args.manifest.empty() ? args.out + ".manifest.json" : args.manifest;
  write_text_file(args.out, selection_to_jsonl(state, config.strategy, manifest.hash()));
  manifest.write(manifest_path);
  err << "selected " << state.selected.size() << " of " << corpus.size() << " records in " << state.round
      << " rounds -> " << args.out << "\n";
  out << manifest.hash() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string corpus;
  std::string selection;
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  bool no_relabel = false;
};

int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err) {
  const auto corpus = load_corpus(args.corpus);
  TaskStoreOptions options;
  options.allow_relabel = !args.no_relabel;
  TaskStore store(args.store, options);
  const auto added = store.import_tasks(args.selection, corpus);

  std::optional<std::filesystem::path> static_dir;
  if (!args.static_dir.empty()) static_dir = args.static_dir;
  AnnotationServer server(store, static_dir);
  const int port = server.bind(args.host, args.port);

  // SIGINT/SIGTERM stop the server from a sigwait thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([&] {
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
  });

  const auto progress = store.progress();
  err << "imported " << added << " new tasks; " << progress.pending << " pending, " << progress.leased
      << " leased, " << progress.labeled << " labeled\n";
  out << "listening on " << args.host << ":" << port << std::endl;
  server.listen();

  pthread_kill(waiter.native_handle(), SIGUSR1);
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kOk;
}

// ---------------------------------------------------------------- build-prefs

struct PrefsArgs {
  std::string corpus;
  std::string labels;
  std::string store;
  std::string selection;
  CommonTemplate tmpl;
  std::string rejection_text = std::string(RejectionPolicy::kDefaultText);
  std::string rejection_overrides;
  std::string out;
  std::string manifest;
};

struct LoadedLabels {
  std::vector<std::pair<std::string, int>> labels;
  std::uint64_t revision = 0;
};

LoadedLabels load_labels(const PrefsArgs& args) {
  LoadedLabels loaded;
  if (!args.store.empty()) {
    TaskStore store(args.store);
    for (const auto& label : store.export_labels()) loaded.labels.emplace_back(label.record_id, label.h);
    loaded.revision = store.revision();
    return loaded;
  }
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(read_text_file(args.labels));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_line, args.labels + ": " + e.what());
  }
  if (!arr.is_array()) throw Error(ErrorCode::malformed_line, args.labels + ": expected a JSON array of labels");
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("record_id") || !item["record_id"].is_string() || !item.contains("h") ||
        !item["h"].is_number_integer()) {
      throw Error(ErrorCode::malformed_line, args.labels + ": each label needs record_id and integer h");
    }
    loaded.labels.emplace_back(item["record_id"].get<std::string>(), item["h"].get<int>());
    if (item.contains("revision") && item["revision"].is_number_unsigned()) {
      loaded.revision = std::max(loaded.revision, item["revision"].get<std::uint64_t>());
    }
  }
  return loaded;
}

int cmd_build_prefs(const PrefsArgs& args, std::ostream& out, std::ostream& err) {
  if (args.labels.empty() == args.store.empty()) {
    throw Error(ErrorCode::usage, "give exactly one of --labels or --store");
  }
  const auto corpus = load_corpus(args.corpus);
  const auto tmpl = args.tmpl.load();
  const auto policy = load_policy(args.rejection_text, args.rejection_overrides);
  const auto loaded = load_labels(args);
  if (loaded.labels.empty()) throw Error(ErrorCode::empty_input, "no-labels: the label source holds no labels");

  std::map<std::string, int> label_of;
  for (const auto& [id, h] : loaded.labels) {
    if (h != 0 && h != 1) throw Error(ErrorCode::invalid_label, "record '" + id + "' has label " + std::to_string(h));
    if (!corpus.index_of(id)) throw Error(ErrorCode::unknown_record, "labeled id '" + id + "' is not in the corpus");
    label_of[id] = h;
  }
  std::vector<ConversationRecord> labeled;
  for (const auto& record : corpus) {
    const auto it = label_of.find(record.id);
    if (it == label_of.end()) continue;
    auto copy = record;
    copy.hallucination = it->second;
    labeled.push_back(std::move(copy));
  }
  const auto pairs = build_preference_set(labeled, tmpl, policy);

  std::vector<std::string> unlabeled;
  if (!args.selection.empty()) {
    for (const auto& id : read_selection_ids(args.selection)) {
      if (!label_of.count(id)) {
        unlabeled.push_back(id);
        err << "warning: selected record '" << id << "' has no label\n";
      }
    }
  }

  RunManifest manifest("build-prefs");
  manifest["corpus_hash"] = corpus.content_hash();
  manifest["template"] = {{"text", tmpl.text()}, {"hash", tmpl.hash()}};
  manifest["rejection_policy"] = policy_json(policy);
  manifest["label_store_revision"] = loaded.revision;
  manifest["labels"] = loaded.labels.size();

  const auto dataset = preference_to_jsonl(pairs);
  manifest["dataset_sha256"] = sha256_hex(dataset);
  write_text_file(args.out, dataset);
  manifest.write(args.manifest.empty() ? args.out + ".manifest.json" : args.manifest);

  std::size_t original = 0, rejection = 0;
  for (const auto& pair : pairs) {
    (pair.provenance == Provenance::original_response_chosen ? original : rejection) += 1;
  }
  ordered_json summary;
  summary["pairs"] = pairs.size();
  summary["original_response_chosen"] = original;
  summary["rejection_chosen"] = rejection;
  summary["unlabeled_selected"] = unlabeled;
  summary["manifest_hash"] = manifest.hash();
  out << summary.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::string input;
  std::string out;
  std::string rejection_text = std::string(RejectionPolicy::kDefaultText);
  std::vector<std::string> patterns;
  bool no_default_patterns = false;
};

ordered_json score_json(const RougeScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

int cmd_report(const ReportArgs& args, std::ostream& out) {
  const auto text = read_text_file(args.input);
  struct Row {
    std::string id;
    std::string response;
    std::string reference_answer;
  };
  std::vector<Row> rows;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      Row row;
      row.id = obj.contains("id") && obj["id"].is_string() ? obj["id"].get<std::string>() : std::to_string(line_no);
      row.response = obj.at("response").get<std::string>();
      row.reference_answer = obj.at("reference_answer").get<std::string>();
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed_line, args.input + ":" + std::to_string(line_no) +
                                                 ": expected {response, reference_answer} (" + e.what() + ")");
    }
  }
  if (rows.empty()) throw Error(ErrorCode::malformed_line, "malformed-input: " + args.input + " has no records");

  const RejectionPolicy policy(args.rejection_text);
  std::vector<std::string> patterns;
  if (!args.no_default_patterns) patterns = default_rejection_patterns();
  patterns.insert(patterns.end(), args.patterns.begin(), args.patterns.end());

  RougeScore sum1, sum2, suml;
  auto accumulate = [](RougeScore& acc, const RougeScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  ordered_json per_record = ordered_json::array();
  std::vector<std::string> responses;
  for (const auto& row : rows) {
    const auto cand = tokenize(row.response);
    const auto ref = tokenize(row.reference_answer);
    const auto r1 = rouge_n_tokens(cand, ref, 1);
    const auto r2 = rouge_n_tokens(cand, ref, 2);
    const auto rl = rouge_l_tokens(cand, ref);
    accumulate(sum1, r1);
    accumulate(sum2, r2);
    accumulate(suml, rl);
    const auto verdict = detect_rejection(row.response, policy, patterns);
    responses.push_back(row.response);
    ordered_json rec;
    rec["id"] = row.id;
    rec["rouge1"] = score_json(r1);
    rec["rouge2"] = score_json(r2);
    rec["rougeL"] = score_json(rl);
    rec["rejected"] = verdict.rejected;
    rec["matched_pattern"] = verdict.matched_pattern ? ordered_json(*verdict.matched_pattern) : ordered_json(nullptr);
    per_record.push_back(std::move(rec));
  }
  const double n = static_cast<double>(rows.size());
  auto mean = [n](const RougeScore& s) { return RougeScore{s.precision / n, s.recall / n, s.f1 / n}; };

  RunManifest manifest("report");
  manifest["input_sha256"] = sha256_hex(text);
  manifest["tokenizer"] = std::string(kTokenizerDescription);
  manifest["rejection_text"] = policy.text();
  manifest["patterns"] = patterns;

  ordered_json report;
  report["count"] = rows.size();
  report["metrics"] = {{"rouge1", score_json(mean(sum1))},
                       {"rouge2", score_json(mean(sum2))},
                       {"rougeL", score_json(mean(suml))},
                       {"rejection_rate", rejection_rate(responses, policy, patterns)}};
  report["per_record"] = per_record;
  report["manifest"] = manifest.fields();
  report["manifest_hash"] = manifest.hash();
  const auto rendered = report.dump(2) + "\n";
  if (args.out.empty()) {
    out << rendered;
  } else {
    write_text_file(args.out, rendered);
  }
  return kOk;
}

// ---------------------------------------------------------------- embed-import

struct EmbedArgs {
  std::string corpus;
  std::string embeddings;
  std::string out;
};

int cmd_embed_import(const EmbedArgs& args, std::ostream& out) {
  const auto corpus = load_corpus(args.corpus);
  const auto raw = read_text_file(args.embeddings);
  const auto table = parse_embeddings(raw, &corpus);
  // Every corpus record must carry every declared view.
  dense_field_vectors(table, corpus);
  if (!args.out.empty()) write_text_file(args.out, serialize_embeddings(table));
  ordered_json summary;
  summary["views"] = table.view_dimensions();
  summary["entries"] = table.entry_count();
  summary["records"] = corpus.size();
  summary["embeddings_hash"] = sha256_hex(raw);
  out << summary.dump(2) << "\n";
  return kOk;
}

std::string env_name(const char* flag) {
  std::string name = "AL4RAG_";
  for (const char* c = flag; *c; ++c) name.push_back(*c == '-' ? '_' : static_cast<char>(std::toupper(*c)));
  return name;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active-learning selection and preference-data pipeline for RAG conversation records", "al4rag"};
  app.require_subcommand(1);

  const std::vector<std::string> strategies = {"random", "diversity", "coreset", "idds"};
  const std::vector<std::string> measures = {"query", "prompt", "qr", "ras"};
  const std::vector<std::string> sources = {"tfidf", "embedding"};

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest-check", "Validate a corpus file and print a summary");
  ingest_cmd->add_option("--corpus", ingest.corpus, "Corpus JSONL")->required()->envname(env_name("corpus"));

  SelectArgs sel;
  auto* select_cmd = app.add_subcommand("select", "Select records for annotation");
  select_cmd->add_option("--corpus", sel.corpus, "Corpus JSONL")->required()->envname(env_name("corpus"));
  select_cmd->add_option("--strategy", sel.strategy, "Query strategy")
      ->check(CLI::IsMember(strategies))
      ->envname(env_name("strategy"));
  select_cmd->add_option("--similarity", sel.similarity, "Similarity measure")
      ->check(CLI::IsMember(measures))
      ->envname(env_name("similarity"));
  select_cmd->add_option("--source", sel.source, "Vector source")->check(CLI::IsMember(sources))->envname(env_name("source"));
  select_cmd->add_option("--embeddings", sel.embeddings, "Embedding JSONL for --source embedding")
      ->envname(env_name("embeddings"));
  select_cmd->add_option("--budget", sel.budget, "Records to select: count or percentage like 25%")
      ->required()
      ->envname(env_name("budget"));
  select_cmd->add_option("--rounds", sel.rounds, "Selection rounds including the random seed round")
      ->envname(env_name("rounds"));
  select_cmd->add_option("--seed", sel.seed, "PRNG seed")->envname(env_name("seed"));
  select_cmd->add_option("--lambda", sel.lambda, "IDDS trade-off in [0,1]")->envname(env_name("lambda"));
  select_cmd->add_option("--template-file", sel.tmpl.template_file, "Prompt template with {query} and {reference}")
      ->envname(env_name("template-file"));
  select_cmd->add_option("--out", sel.out, "Selection JSONL output")->required();
  select_cmd->add_option("--manifest", sel.manifest, "Manifest path (default: <out>.manifest.json)");
  select_cmd->add_option("--cache-dir", sel.cache_dir, "Directory for similarity matrix caches")
      ->envname(env_name("cache-dir"));
  select_cmd->add_flag("--shared-vocab", sel.shared_vocab, "Fit one vocabulary over all views");
  select_cmd->add_flag("--exclude-self", sel.exclude_self, "Drop x's own term from the IDDS pool sum");
  select_cmd->add_flag("--static-pool", sel.static_pool, "IDDS pool average over the post-seed pool");
  select_cmd->add_option("--workers", sel.workers, "Worker threads (0 = all cores)")->envname(env_name("workers"));

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve selected records to annotators over HTTP");
  serve_cmd->add_option("--corpus", serve.corpus, "Corpus JSONL")->required()->envname(env_name("corpus"));
  serve_cmd->add_option("--selection", serve.selection, "Selection JSONL from `select`")
      ->required()
      ->envname(env_name("selection"));
  serve_cmd->add_option("--store", serve.store, "Store directory")->required()->envname(env_name("store"));
  serve_cmd->add_option("--host", serve.host, "Bind address")->envname(env_name("host"));
  serve_cmd->add_option("--port", serve.port, "Port (0 picks a free one)")->envname(env_name("port"));
  serve_cmd->add_option("--static-dir", serve.static_dir, "Directory of UI assets served at /")
      ->envname(env_name("static-dir"));
  serve_cmd->add_flag("--no-relabel", serve.no_relabel, "Reject labels for already-labeled tasks");

  PrefsArgs prefs;
  auto* prefs_cmd = app.add_subcommand("build-prefs", "Build a DPO preference dataset from labels");
  prefs_cmd->add_option("--corpus", prefs.corpus, "Corpus JSONL")->required()->envname(env_name("corpus"));
  prefs_cmd->add_option("--labels", prefs.labels, "Label export JSON (GET /api/export)");
  prefs_cmd->add_option("--store", prefs.store, "Read labels directly from a store directory")
      ->envname(env_name("store"));
  prefs_cmd->add_option("--selection", prefs.selection, "Selection JSONL; unlabeled ids are reported");
  prefs_cmd->add_option("--template-file", prefs.tmpl.template_file, "Prompt template")
      ->envname(env_name("template-file"));
  prefs_cmd->add_option("--rejection-text", prefs.rejection_text, "Refusal paired with each response")
      ->envname(env_name("rejection-text"));
  prefs_cmd->add_option("--rejection-overrides", prefs.rejection_overrides, "JSON {task_kind: refusal text}");
  prefs_cmd->add_option("--out", prefs.out, "DPO JSONL output")->required();
  prefs_cmd->add_option("--manifest", prefs.manifest, "Manifest path (default: <out>.manifest.json)");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "ROUGE-1/2/L and rejection rate over model outputs");
  report_cmd->add_option("--input", report.input, "JSONL of {response, reference_answer}")->required();
  report_cmd->add_option("--out", report.out, "Report JSON (default: stdout)");
  report_cmd->add_option("--rejection-text", report.rejection_text, "Refusal text counted as a rejection")
      ->envname(env_name("rejection-text"));
  report_cmd->add_option("--pattern", report.patterns, "Extra rejection pattern (repeatable)");
  report_cmd->add_flag("--no-default-patterns", report.no_default_patterns, "Only use the policy text and --pattern");

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed-import", "Validate precomputed embeddings against a corpus");
  embed_cmd->add_option("--corpus", embed.corpus, "Corpus JSONL")->required()->envname(env_name("corpus"));
  embed_cmd->add_option("--embeddings", embed.embeddings, "Embedding JSONL")->required();
  embed_cmd->add_option("--out", embed.out, "Write a normalized copy");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest_check(ingest, out);
    if (*select_cmd) return cmd_select(sel, out, err);
    if (*serve_cmd) return cmd_serve(serve, out, err);
    if (*prefs_cmd) return cmd_build_prefs(prefs, out, err);
    if (*report_cmd) return cmd_report(report, out);
    if (*embed_cmd) return cmd_embed_import(embed, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace al4rag::cli
