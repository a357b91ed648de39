#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "al4rag/error.hpp"
#include "al4rag/preference.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace al4rag;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::usage;
}

DpoLossInputs ratios(double ratio_w, double ratio_l, double beta = 0.1) {
  return {ratio_w - 2.0, -2.0, ratio_l - 3.0, -3.0, beta};
}

}  // namespace

TEST_CASE("preference branch table") {
  const RejectionPolicy policy;
  const PromptTemplate tmpl;
  const auto good = testing::make_record("a", "capital of france", "Paris is the capital.", "Paris.", 0);
  const auto pair0 = make_preference_pair(good, tmpl, policy);
  CHECK(pair0.chosen == "Paris.");
  CHECK(pair0.rejected == policy.text());
  CHECK(pair0.provenance == Provenance::original_response_chosen);
  CHECK(pair0.prompt == render_prompt(good, tmpl));
  CHECK(pair0.id == "a");

  const auto bad = testing::make_record("b", "what is the moon", "rock", "The moon is cheese.", 1);
  const auto pair1 = make_preference_pair(bad, tmpl, policy);
  CHECK(pair1.chosen == policy.text());
  CHECK(pair1.rejected == "The moon is cheese.");
  CHECK(pair1.provenance == Provenance::rejection_chosen);

  CHECK(code_of([&] { make_preference_pair(testing::make_record("c", "q", "r", "x"), tmpl, policy); }) ==
        ErrorCode::unlabeled_record);
  auto same = testing::make_record("d", "q", "r", "  " + policy.text() + "\n", 1);
  CHECK(code_of([&] { make_preference_pair(same, tmpl, policy); }) == ErrorCode::degenerate_pair);
}

TEST_CASE("branch table holds for random records") {
  std::mt19937_64 rng(13);
  const auto words = testing::word_list("v", 25);
  std::vector<ConversationRecord> records;
  for (int i = 0; i < 200; ++i) {
    records.push_back(testing::make_record("r" + std::to_string(i), testing::random_words(rng, words, 4),
                                           testing::random_words(rng, words, 9), testing::random_words(rng, words, 6),
                                           static_cast<int>(rng() % 2)));
  }
  const RejectionPolicy policy;
  const auto pairs = build_preference_set(records, PromptTemplate(), policy);
  REQUIRE(pairs.size() == records.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = records[i];
    const auto& p = pairs[i];
    CHECK(p.id == r.id);
    CHECK(p.chosen != p.rejected);
    if (*r.hallucination == 0) {
      CHECK(p.chosen == r.response);
      CHECK(p.rejected == policy.text());
      CHECK(p.provenance == Provenance::original_response_chosen);
    } else {
      CHECK(p.chosen == policy.text());
      CHECK(p.rejected == r.response);
      CHECK(p.provenance == Provenance::rejection_chosen);
    }
  }
}

TEST_CASE("rejection policy overrides") {
  CHECK_THROWS_AS(RejectionPolicy("   "), Error);
  CHECK_THROWS_AS(RejectionPolicy("ok", {{TaskKind::summary, ""}}), Error);
  const RejectionPolicy policy("No answer.", {{TaskKind::summary, "No summary."}});
  CHECK(policy.text_for(TaskKind::summary) == "No summary.");
  CHECK(policy.text_for(TaskKind::qa) == "No answer.");
  CHECK(policy.text_for(std::nullopt) == "No answer.");

  auto rec = testing::make_record("s", "q", "r", "A summary.", 1);
  rec.task_kind = TaskKind::summary;
  CHECK(make_preference_pair(rec, PromptTemplate(), policy).chosen == "No summary.");
}

TEST_CASE("dpo dataset export and re-parse") {
  const RejectionPolicy policy;
  std::vector<ConversationRecord> records;
  for (int i = 0; i < 10; ++i) {
    records.push_back(testing::make_record("id" + std::to_string(i), "line one\nline two \"quoted\"",
                                           "ref\ttab", "answer " + std::to_string(i) + "\nmore", i % 2));
  }
  const auto pairs = build_preference_set(records, PromptTemplate(), policy);
  const auto text = preference_to_jsonl(pairs);
  CHECK(std::count(text.begin(), text.end(), '\n') == 10);
  CHECK(text.rfind("{\"id\":\"id0\",\"prompt\":", 0) == 0);
  CHECK(parse_dpo_dataset(text, policy) == pairs);

  testing::TempDir dir;
  export_dpo_dataset(pairs, dir / "dpo.jsonl");
  std::ifstream in(dir / "dpo.jsonl");
  std::string file((std::istreambuf_iterator<char>(in)), {});
  CHECK(file == text);
  CHECK(code_of([&] { export_dpo_dataset({}, dir / "empty.jsonl"); }) == ErrorCode::empty_input);
  CHECK(code_of([&] { export_dpo_dataset(pairs, dir / "missing" / "x.jsonl"); }) == ErrorCode::io_failure);
}

TEST_CASE("dpo loss values") {
  CHECK(dpo_loss({-1.0, -1.0, -2.0, -2.0, 0.1}) == doctest::Approx(0.69314718055994530942).epsilon(1e-12));
  // -ln sigmoid(0.2), evaluated at high precision.
  CHECK(std::abs(dpo_loss(ratios(1.0, -1.0)) - 0.59813886938159183) < 1e-12);
  CHECK(dpo_margin(ratios(1.0, -1.0)) == doctest::Approx(2.0));

  CHECK(dpo_loss_from_margin(1e6, 0.1) >= 0.0);
  CHECK(dpo_loss_from_margin(1e6, 0.1) < 1e-300);
  CHECK(dpo_loss_from_margin(-7000.0, 0.1) == doctest::Approx(700.0));
  CHECK(std::isfinite(dpo_loss_from_margin(7000.0, 0.1)));

  const double inf = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { dpo_loss({inf, 0, 0, 0, 0.1}); }) == ErrorCode::non_finite_input);
  CHECK(code_of([&] { dpo_loss({std::nan(""), 0, 0, 0, 0.1}); }) == ErrorCode::non_finite_input);
  CHECK(code_of([&] { dpo_loss({0, 0, 0, 0, 0.0}); }) == ErrorCode::config_invalid);
  CHECK(code_of([&] { dpo_loss_from_margin(1.0, -0.1); }) == ErrorCode::config_invalid);
}

TEST_CASE("dpo loss monotonicity, gradient and swap bound") {
  for (double beta : {0.05, 0.1, 0.5}) {
    for (double m : {-5.0, -1.0, 0.0, 1.0, 5.0}) {
      DpoLossInputs in = ratios(m / 2.0, -m / 2.0, beta);
      const double h = 1e-4;
      auto up_w = in, up_l = in;
      up_w.logp_theta_chosen += h;
      up_l.logp_theta_rejected += h;
      CHECK(dpo_loss(up_w) < dpo_loss(in));
      CHECK(dpo_loss(up_l) > dpo_loss(in));

      const double numeric = (dpo_loss_from_margin(m + h, beta) - dpo_loss_from_margin(m - h, beta)) / (2.0 * h);
      const double analytic = dpo_loss_margin_gradient(m, beta);
      CHECK(std::abs(numeric - analytic) <= 1e-5 * std::abs(analytic));
      CHECK(analytic == doctest::Approx(-beta * sigmoid(-beta * m)).epsilon(1e-12));

      const double pair_sum = dpo_loss_from_margin(m, beta) + dpo_loss_from_margin(-m, beta);
      CHECK(pair_sum >= 2.0 * std::log(2.0) - 1e-15);
      if (m == 0.0) CHECK(pair_sum == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    }
  }
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}
