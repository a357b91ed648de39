#include "al4rag/metrics.hpp"

#include <algorithm>
#include <map>

#include "al4rag/error.hpp"
#include "al4rag/vectorize.hpp"

namespace al4rag {

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
  });
  return out;
}

}  // namespace

RougeScore make_rouge_score(double precision, double recall) {
  const double sum = precision + recall;
  return {precision, recall, sum > 0.0 ? 2.0 * precision * recall / sum : 0.0};
}

RougeScore rouge_n_tokens(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                          std::size_t n) {
  if (n < 1) throw Error(ErrorCode::config_invalid, "ROUGE-N needs n >= 1");
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [gram, count] : cand) cand_total += count;
  for (const auto& [gram, count] : ref) {
    ref_total += count;
    if (const auto it = cand.find(gram); it != cand.end()) overlap += std::min(count, it->second);
  }
  if (cand_total == 0 || ref_total == 0) return {};
  return make_rouge_score(static_cast<double>(overlap) / static_cast<double>(cand_total),
                          static_cast<double>(overlap) / static_cast<double>(ref_total));
}

RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
  return rouge_n_tokens(tokenize(candidate), tokenize(reference), n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

RougeScore rouge_l_tokens(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return {};
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  return make_rouge_score(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l_tokens(tokenize(candidate), tokenize(reference));
}

RejectionVerdict detect_rejection(std::string_view response, const RejectionPolicy& policy,
                                  const std::vector<std::string>& extra_patterns) {
  const auto haystack = lowercase(response);
  std::vector<std::string> patterns;
  patterns.push_back(policy.text());
  for (const auto& [kind, text] : policy.per_task()) patterns.push_back(text);
  patterns.insert(patterns.end(), extra_patterns.begin(), extra_patterns.end());
  for (const auto& pattern : patterns) {
    if (trim(pattern).empty()) continue;
    if (haystack.find(lowercase(pattern)) != std::string::npos) return {true, pattern};
  }
  return {};
}

double rejection_rate(const std::vector<std::string>& responses, const RejectionPolicy& policy,
                      const std::vector<std::string>& extra_patterns) {
  if (responses.empty()) throw Error(ErrorCode::empty_input, "rejection rate of zero responses");
  std::size_t rejected = 0;
  for (const auto& response : responses) {
    if (detect_rejection(response, policy, extra_patterns).rejected) ++rejected;
  }
  return static_cast<double>(rejected) / static_cast<double>(responses.size());
}

}  // namespace al4rag
