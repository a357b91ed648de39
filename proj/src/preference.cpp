#include "al4rag/preference.hpp"

#include <cmath>
#include <fstream>

#include "al4rag/error.hpp"
#include "json.hpp"

namespace al4rag {

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::original_response_chosen ? "original_response_chosen" : "rejection_chosen";
}

RejectionPolicy::RejectionPolicy(std::string text, std::map<TaskKind, std::string> per_task)
    : text_(std::move(text)), per_task_(std::move(per_task)) {
  if (trim(text_).empty()) throw Error(ErrorCode::config_invalid, "rejection text must be non-empty");
  for (const auto& [kind, override_text] : per_task_) {
    if (trim(override_text).empty()) {
      throw Error(ErrorCode::config_invalid,
                  "rejection text for task kind '" + std::string(to_string(kind)) + "' must be non-empty");
    }
  }
}

const std::string& RejectionPolicy::text_for(std::optional<TaskKind> kind) const {
  if (kind) {
    if (const auto it = per_task_.find(*kind); it != per_task_.end()) return it->second;
  }
  return text_;
}

PreferencePair make_preference_pair(const ConversationRecord& record, const PromptTemplate& tmpl,
                                    const RejectionPolicy& policy) {
  if (!record.hallucination) {
    throw Error(ErrorCode::unlabeled_record, "record '" + record.id + "' has no hallucination label");
  }
  const auto& refusal = policy.text_for(record.task_kind);
  if (trim(record.response) == trim(refusal)) {
    throw Error(ErrorCode::degenerate_pair, "record '" + record.id + "' response equals the rejection text");
  }
  PreferencePair pair;
  pair.id = record.id;
  pair.prompt = render_prompt(record, tmpl);
  if (*record.hallucination == 0) {
    pair.chosen = record.response;
    pair.rejected = refusal;
    pair.provenance = Provenance::original_response_chosen;
  } else {
    pair.chosen = refusal;
    pair.rejected = record.response;
    pair.provenance = Provenance::rejection_chosen;
  }
  return pair;
}

std::vector<PreferencePair> build_preference_set(const std::vector<ConversationRecord>& records,
                                                 const PromptTemplate& tmpl, const RejectionPolicy& policy) {
  std::vector<PreferencePair> pairs;
  pairs.reserve(records.size());
  for (const auto& record : records) pairs.push_back(make_preference_pair(record, tmpl, policy));
  return pairs;
}

std::string preference_to_jsonl(const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const auto& pair : pairs) {
    nlohmann::ordered_json line;
    line["id"] = pair.id;
    line["prompt"] = pair.prompt;
    line["chosen"] = pair.chosen;
    line["rejected"] = pair.rejected;
    out += line.dump() + "\n";
  }
  return out;
}

void export_dpo_dataset(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path) {
  if (pairs.empty()) throw Error(ErrorCode::empty_input, "no preference pairs to export");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out << preference_to_jsonl(pairs);
  if (!out) throw Error(ErrorCode::io_failure, "failed writing " + path.string());
}

std::vector<PreferencePair> parse_dpo_dataset(std::string_view jsonl, const RejectionPolicy& policy) {
  std::vector<PreferencePair> pairs;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      PreferencePair pair;
      pair.id = obj.at("id").get<std::string>();
      pair.prompt = obj.at("prompt").get<std::string>();
      pair.chosen = obj.at("chosen").get<std::string>();
      pair.rejected = obj.at("rejected").get<std::string>();
      bool refusal_chosen = pair.chosen == policy.text();
      for (const auto& [kind, text] : policy.per_task()) refusal_chosen = refusal_chosen || pair.chosen == text;
      pair.provenance = refusal_chosen ? Provenance::rejection_chosen : Provenance::original_response_chosen;
      pairs.push_back(std::move(pair));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed_line, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dpo_margin(const DpoLossInputs& in) {
  return (in.logp_theta_chosen - in.logp_ref_chosen) - (in.logp_theta_rejected - in.logp_ref_rejected);
}

double dpo_loss_from_margin(double margin, double beta) {
  if (!std::isfinite(margin) || !std::isfinite(beta)) {
    throw Error(ErrorCode::non_finite_input, "DPO margin and beta must be finite");
  }
  if (!(beta > 0.0)) throw Error(ErrorCode::config_invalid, "beta must be positive");
  // -log sigmoid(z) = log(1 + exp(-z))
  const double z = beta * margin;
  return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double dpo_loss(const DpoLossInputs& in) {
  for (const double v : {in.logp_theta_chosen, in.logp_ref_chosen, in.logp_theta_rejected, in.logp_ref_rejected}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "log-probabilities must be finite");
  }
  return dpo_loss_from_margin(dpo_margin(in), in.beta);
}

double dpo_loss_margin_gradient(double margin, double beta) {
  if (!std::isfinite(margin) || !std::isfinite(beta)) {
    throw Error(ErrorCode::non_finite_input, "DPO margin and beta must be finite");
  }
  return -beta * sigmoid(-beta * margin);
}

}  // namespace al4rag
