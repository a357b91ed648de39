#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "al4rag/corpus.hpp"

namespace al4rag {

enum class Provenance { original_response_chosen, rejection_chosen };

std::string_view to_string(Provenance provenance);

struct PreferencePair {
  std::string id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  Provenance provenance = Provenance::original_response_chosen;
  bool operator==(const PreferencePair&) const = default;
};

/// The explicit refusal paired against each model response, with optional
/// per-task-kind wording.
class RejectionPolicy {
 public:
  static constexpr std::string_view kDefaultText =
      "I'm sorry, but I cannot provide a reliable answer to this question based on the given reference.";

  RejectionPolicy() : RejectionPolicy(std::string(kDefaultText)) {}
  // Throws Error(config_invalid) for blank text.
  explicit RejectionPolicy(std::string text, std::map<TaskKind, std::string> per_task = {});

  const std::string& text() const noexcept { return text_; }
  const std::map<TaskKind, std::string>& per_task() const noexcept { return per_task_; }
  const std::string& text_for(std::optional<TaskKind> kind) const;

 private:
  std::string text_;
  std::map<TaskKind, std::string> per_task_;
};

// h = 0: chosen = response, rejected = refusal.
// h = 1: chosen = refusal, rejected = response.
// Throws unlabeled_record(id) or degenerate_pair(id).
PreferencePair make_preference_pair(const ConversationRecord& record, const PromptTemplate& tmpl,
                                    const RejectionPolicy& policy);

std::vector<PreferencePair> build_preference_set(const std::vector<ConversationRecord>& records,
                                                 const PromptTemplate& tmpl, const RejectionPolicy& policy);

// One {id, prompt, chosen, rejected} object per line.
std::string preference_to_jsonl(const std::vector<PreferencePair>& pairs);
void export_dpo_dataset(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path);
// Provenance is not stored in the file; it is recovered by comparing
// `chosen` against the policy refusal text.
std::vector<PreferencePair> parse_dpo_dataset(std::string_view jsonl, const RejectionPolicy& policy);

struct DpoLossInputs {
  double logp_theta_chosen;     // log pi_theta(a_w | p)
  double logp_ref_chosen;       // log pi_o(a_w | p)
  double logp_theta_rejected;   // log pi_theta(a_l | p)
  double logp_ref_rejected;     // log pi_o(a_l | p)
  double beta = 0.1;
};

inline constexpr double kDefaultBeta = 0.1;

// (theta_w - ref_w) - (theta_l - ref_l)
double dpo_margin(const DpoLossInputs& in);

// -log sigmoid(beta * margin), evaluated as softplus(-beta * margin) so it
// stays finite for |beta * margin| in the hundreds. Throws non_finite_input.
double dpo_loss(const DpoLossInputs& in);
double dpo_loss_from_margin(double margin, double beta);

// d loss / d margin = -beta * sigmoid(-beta * margin)
double dpo_loss_margin_gradient(double margin, double beta);

double sigmoid(double z);

}  // namespace al4rag
