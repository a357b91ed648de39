#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "al4rag/preference.hpp"

namespace al4rag {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// f1 = 2pr / (p + r), or 0 when p + r == 0.
RougeScore make_rouge_score(double precision, double recall);

// Clipped n-gram overlap over tokenize() output. Throws config_invalid for n < 1.
RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n);
RougeScore rouge_n_tokens(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                          std::size_t n);

// Longest common subsequence based.
RougeScore rouge_l(std::string_view candidate, std::string_view reference);
RougeScore rouge_l_tokens(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

inline const std::vector<std::string>& default_rejection_patterns() {
  static const std::vector<std::string> patterns = {"cannot answer", "unable to answer",
                                                    "cannot provide a reliable answer"};
  return patterns;
}

struct RejectionVerdict {
  bool rejected = false;
  std::optional<std::string> matched_pattern;
};

// Case-insensitive substring match against the policy text (checked first)
// and then each extra pattern in order.
RejectionVerdict detect_rejection(std::string_view response, const RejectionPolicy& policy,
                                  const std::vector<std::string>& extra_patterns);

// Fraction of responses detected as rejections. Throws empty_input.
double rejection_rate(const std::vector<std::string>& responses, const RejectionPolicy& policy,
                      const std::vector<std::string>& extra_patterns);

}  // namespace al4rag
