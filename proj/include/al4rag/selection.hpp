#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "al4rag/corpus.hpp"
#include "al4rag/similarity.hpp"
#include "al4rag/vectorize.hpp"

namespace al4rag {

enum class Strategy { random, diversity_distance, coreset, idds };

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view text);

inline constexpr double kDefaultLambda = 0.67;
inline constexpr std::size_t kDefaultRounds = 5;

struct SelectionConfig {
  std::size_t budget = 1;
  std::size_t rounds = kDefaultRounds;  // including the random seed round
  double lambda = kDefaultLambda;
  Strategy strategy = Strategy::idds;
  SimilarityKind kind{};
  std::uint64_t rng_seed = 0;
  // The pool average of the IDDS score includes x's own similarity term.
  bool idds_include_self = true;
  // Average over the pool as it was after the seed round instead of the
  // current (shrinking) pool.
  bool static_pool_average = false;
  std::size_t workers = 0;
};

// Throws Error(config_invalid) unless 1 <= budget <= pool_size,
// 1 <= rounds <= budget and lambda in [0, 1].
void validate(const SelectionConfig& config, std::size_t pool_size);

/// Pairwise similarity among the records under selection, addressed by
/// position in corpus order.
class SimilarityOracle {
 public:
  virtual ~SimilarityOracle() = default;
  virtual std::size_t size() const = 0;
  virtual const std::string& id(std::size_t index) const = 0;
  virtual double operator()(std::size_t a, std::size_t b) const = 0;
};

class MatrixOracle final : public SimilarityOracle {
 public:
  // The matrix must be square with identical row and column ids.
  explicit MatrixOracle(SimilarityMatrix matrix);

  std::size_t size() const override { return matrix_.rows(); }
  const std::string& id(std::size_t index) const override { return matrix_.row_ids()[index]; }
  double operator()(std::size_t a, std::size_t b) const override { return matrix_(a, b); }
  const SimilarityMatrix& matrix() const noexcept { return matrix_; }

 private:
  SimilarityMatrix matrix_;
};

class FunctionOracle final : public SimilarityOracle {
 public:
  FunctionOracle(std::vector<std::string> ids, std::function<double(std::size_t, std::size_t)> sim)
      : ids_(std::move(ids)), sim_(std::move(sim)) {}

  std::size_t size() const override { return ids_.size(); }
  const std::string& id(std::size_t index) const override { return ids_[index]; }
  double operator()(std::size_t a, std::size_t b) const override { return sim_(a, b); }

 private:
  std::vector<std::string> ids_;
  std::function<double(std::size_t, std::size_t)> sim_;
};

struct AuditEntry {
  std::size_t round;
  std::string id;
  std::optional<double> score;  // absent for seeded random draws
  bool operator==(const AuditEntry&) const = default;
};

struct SelectionState {
  std::vector<std::size_t> selected;  // in selection order
  std::vector<std::size_t> pool;      // in corpus order
  std::size_t round = 0;              // completed rounds, seed round included
  std::vector<AuditEntry> audit;
  std::vector<std::size_t> draw_order;      // seeded permutation for random draws
  std::vector<std::size_t> reference_pool;  // pool after the seed round

  std::vector<std::string> selected_ids(const SimilarityOracle& sims) const;
};

// Everything in the pool, nothing selected, draw order fixed by `seed`.
SelectionState initial_state(std::size_t universe, std::uint64_t seed);

// lambda * mean_{j in U} sim(x, j) - (1 - lambda) * mean_{i in S} sim(x, i)
double idds_score(std::size_t x, const SelectionState& state, const SimilarityOracle& sims, double lambda,
                  bool include_self = true, bool static_pool = false);

// Mean of (1 - sim(x, s)) over the selected set.
double diversity_distance(std::size_t x, const SelectionState& state, const SimilarityOracle& sims);

// Moves k pool samples into the selected set according to config.strategy
// and records them in the audit log under round state.round + 1.
SelectionState select_round(SelectionState state, const SelectionConfig& config, const SimilarityOracle& sims,
                            std::size_t k);

// Seeds ceil(budget / rounds) samples at random, then runs rounds - 1 scored
// rounds of ceil((budget - |S|) / remaining) samples each.
SelectionState run_selection(const SimilarityOracle& sims, const SelectionConfig& config);

SelectionState run_selection(const Corpus& corpus, const std::vector<FieldVectors>& vectors,
                             const SelectionConfig& config);

// Per-round quotas run_selection will use.
std::vector<std::size_t> round_quotas(std::size_t budget, std::size_t rounds);

// One JSON line per selected record: {round, id, score, strategy[, manifest]}.
std::string selection_to_jsonl(const SelectionState& state, Strategy strategy, std::string_view manifest_hash = {});

// Ids from a selection file, in file order.
std::vector<std::string> read_selection_ids(const std::filesystem::path& path);

}  // namespace al4rag
