#include "al4rag/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "al4rag/error.hpp"
#include "al4rag/parallel.hpp"
#include "al4rag/rng.hpp"
#include "json.hpp"

namespace al4rag {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::random: return "random";
    case Strategy::diversity_distance: return "diversity";
    case Strategy::coreset: return "coreset";
    case Strategy::idds: return "idds";
  }
  return "idds";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  if (text == "random") return Strategy::random;
  if (text == "diversity" || text == "diversity_distance") return Strategy::diversity_distance;
  if (text == "coreset") return Strategy::coreset;
  if (text == "idds") return Strategy::idds;
  return std::nullopt;
}

void validate(const SelectionConfig& config, std::size_t pool_size) {
  if (config.budget < 1 || config.budget > pool_size) {
    throw Error(ErrorCode::config_invalid, "budget " + std::to_string(config.budget) + " must lie in [1, " +
                                               std::to_string(pool_size) + "]");
  }
  if (config.rounds < 1 || config.rounds > config.budget) {
    throw Error(ErrorCode::config_invalid, "rounds " + std::to_string(config.rounds) + " must lie in [1, budget]");
  }
  if (!(config.lambda >= 0.0 && config.lambda <= 1.0)) {
    throw Error(ErrorCode::config_invalid, "lambda must lie in [0, 1]");
  }
}

MatrixOracle::MatrixOracle(SimilarityMatrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.row_ids() != matrix_.col_ids()) {
    throw Error(ErrorCode::dimension_mismatch, "selection needs a square matrix over one id list");
  }
}

std::vector<std::string> SelectionState::selected_ids(const SimilarityOracle& sims) const {
  std::vector<std::string> ids;
  ids.reserve(selected.size());
  for (const auto index : selected) ids.push_back(sims.id(index));
  return ids;
}

SelectionState initial_state(std::size_t universe, std::uint64_t seed) {
  SelectionState state;
  state.pool.resize(universe);
  std::iota(state.pool.begin(), state.pool.end(), std::size_t{0});
  state.draw_order = seeded_permutation(universe, seed);
  return state;
}

double idds_score(std::size_t x, const SelectionState& state, const SimilarityOracle& sims, double lambda,
                  bool include_self, bool static_pool) {
  const auto& unselected = static_pool && !state.reference_pool.empty() ? state.reference_pool : state.pool;
  if (state.selected.empty()) throw Error(ErrorCode::empty_selected_set, "IDDS needs a non-empty selected set");
  if (unselected.empty()) throw Error(ErrorCode::empty_pool, "IDDS needs a non-empty pool");

  double pool_sum = 0.0;
  for (const auto j : unselected) {
    if (!include_self && j == x) continue;
    pool_sum += sims(x, j);
  }
  double selected_sum = 0.0;
  for (const auto i : state.selected) selected_sum += sims(x, i);
  return lambda * (pool_sum / static_cast<double>(unselected.size())) -
         (1.0 - lambda) * (selected_sum / static_cast<double>(state.selected.size()));
}

double diversity_distance(std::size_t x, const SelectionState& state, const SimilarityOracle& sims) {
  if (state.selected.empty()) {
    throw Error(ErrorCode::empty_selected_set, "diversity distance needs a non-empty selected set");
  }
  double sum = 0.0;
  for (const auto s : state.selected) sum += 1.0 - sims(x, s);
  return sum / static_cast<double>(state.selected.size());
}

namespace {

void move_to_selected(SelectionState& state, std::size_t index, std::optional<double> score,
                      const SimilarityOracle& sims) {
  state.pool.erase(std::find(state.pool.begin(), state.pool.end(), index));
  state.selected.push_back(index);
  state.audit.push_back({state.round + 1, sims.id(index), score});
}

// Top-k by descending score; ties go to the earlier pool position.
void take_top_k(SelectionState& state, const std::vector<double>& scores, std::size_t k,
                const SimilarityOracle& sims) {
  std::vector<std::size_t> order(state.pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::pair<std::size_t, double>> chosen;
  chosen.reserve(k);
  for (std::size_t r = 0; r < k; ++r) chosen.emplace_back(state.pool[order[r]], scores[order[r]]);
  for (const auto& [index, score] : chosen) move_to_selected(state, index, score, sims);
}

void greedy_k_center(SelectionState& state, std::size_t k, const SimilarityOracle& sims) {
  if (state.selected.empty()) throw Error(ErrorCode::empty_selected_set, "coreset needs a non-empty selected set");
  std::vector<double> min_distance(state.pool.size());
  for (std::size_t p = 0; p < state.pool.size(); ++p) {
    double best = 1.0;
    for (const auto s : state.selected) best = std::min(best, 1.0 - sims(state.pool[p], s));
    min_distance[p] = best;
  }
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t pick = 0;
    for (std::size_t p = 1; p < state.pool.size(); ++p) {
      if (min_distance[p] > min_distance[pick]) pick = p;
    }
    const auto index = state.pool[pick];
    const double score = min_distance[pick];
    min_distance.erase(min_distance.begin() + static_cast<std::ptrdiff_t>(pick));
    move_to_selected(state, index, score, sims);
    for (std::size_t p = 0; p < state.pool.size(); ++p) {
      min_distance[p] = std::min(min_distance[p], 1.0 - sims(state.pool[p], index));
    }
  }
}

void random_draws(SelectionState& state, std::size_t k, const SimilarityOracle& sims) {
  std::vector<bool> in_pool(sims.size(), false);
  for (const auto index : state.pool) in_pool[index] = true;
  std::size_t taken = 0;
  for (const auto index : state.draw_order) {
    if (taken == k) break;
    if (!in_pool[index]) continue;
    move_to_selected(state, index, std::nullopt, sims);
    ++taken;
  }
}

}  // namespace

SelectionState select_round(SelectionState state, const SelectionConfig& config, const SimilarityOracle& sims,
                            std::size_t k) {
  if (k > state.pool.size()) {
    throw Error(ErrorCode::insufficient_pool, "cannot move " + std::to_string(k) + " samples from a pool of " +
                                                  std::to_string(state.pool.size()));
  }
  switch (config.strategy) {
    case Strategy::random:
      random_draws(state, k, sims);
      break;
    case Strategy::coreset:
      greedy_k_center(state, k, sims);
      break;
    case Strategy::idds:
    case Strategy::diversity_distance: {
      std::vector<double> scores(state.pool.size());
      parallel_for(
          state.pool.size(),
          [&](std::size_t p) {
            scores[p] = config.strategy == Strategy::idds
                            ? idds_score(state.pool[p], state, sims, config.lambda, config.idds_include_self,
                                         config.static_pool_average)
                            : diversity_distance(state.pool[p], state, sims);
          },
          config.workers);
      take_top_k(state, scores, k, sims);
      break;
    }
  }
  ++state.round;
  return state;
}

std::vector<std::size_t> round_quotas(std::size_t budget, std::size_t rounds) {
  std::vector<std::size_t> quotas;
  std::size_t taken = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    const std::size_t remaining_rounds = rounds - r;
    const std::size_t k = (budget - taken + remaining_rounds - 1) / remaining_rounds;
    quotas.push_back(k);
    taken += k;
  }
  return quotas;
}

SelectionState run_selection(const SimilarityOracle& sims, const SelectionConfig& config) {
  validate(config, sims.size());
  auto state = initial_state(sims.size(), config.rng_seed);
  const auto quotas = round_quotas(config.budget, config.rounds);

  random_draws(state, quotas.front(), sims);
  ++state.round;
  state.reference_pool = state.pool;

  for (std::size_t r = 1; r < quotas.size(); ++r) {
    state = select_round(std::move(state), config, sims, quotas[r]);
  }
  return state;
}

namespace {

// Random selection never consults similarities.
class NullOracle final : public SimilarityOracle {
 public:
  explicit NullOracle(std::vector<std::string> ids) : ids_(std::move(ids)) {}
  std::size_t size() const override { return ids_.size(); }
  const std::string& id(std::size_t index) const override { return ids_[index]; }
  double operator()(std::size_t, std::size_t) const override { return 0.0; }

 private:
  std::vector<std::string> ids_;
};

}  // namespace

SelectionState run_selection(const Corpus& corpus, const std::vector<FieldVectors>& vectors,
                             const SelectionConfig& config) {
  if (vectors.size() != corpus.size()) {
    throw Error(ErrorCode::config_invalid, "vector count does not match corpus size");
  }
  validate(config, corpus.size());
  if (config.strategy == Strategy::random) {
    std::vector<std::string> ids;
    for (const auto& record : corpus) ids.push_back(record.id);
    return run_selection(NullOracle(std::move(ids)), config);
  }
  MatrixOracle oracle(build_matrix(vectors, vectors, config.kind.measure, config.workers));
  return run_selection(oracle, config);
}

std::string selection_to_jsonl(const SelectionState& state, Strategy strategy, std::string_view manifest_hash) {
  std::string out;
  for (const auto& entry : state.audit) {
    nlohmann::ordered_json line;
    line["round"] = entry.round;
    line["id"] = entry.id;
    line["score"] = entry.score ? nlohmann::ordered_json(*entry.score) : nlohmann::ordered_json(nullptr);
    line["strategy"] = std::string(to_string(strategy));
    if (!manifest_hash.empty()) line["manifest"] = std::string(manifest_hash);
    out += line.dump() + "\n";
  }
  return out;
}

std::vector<std::string> read_selection_ids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open selection file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      ids.push_back(obj.at("id").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed_line,
                  path.string() + ":" + std::to_string(line_no) + ": expected an object with string id");
    }
  }
  return ids;
}

}  // namespace al4rag
