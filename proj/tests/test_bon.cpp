#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "minform/bon.hpp"
#include "test_support.hpp"

using namespace minform;
using minform::test::gapped_rewards;

namespace {

ResponseTrace candidate(std::vector<double> rewards,
                        std::optional<std::string> answer = std::nullopt) {
    ResponseTrace trace;
    for (std::size_t s = 0; s < rewards.size(); ++s) {
        StepRecord step;
        step.end_token_index = static_cast<int>(s);
        step.raw_process_reward = rewards[s];
        trace.steps.push_back(step);
    }
    trace.total_tokens = static_cast<int>(rewards.size());
    trace.answer = std::move(answer);
    return trace;
}

}  // namespace

TEST_CASE("bon_select picks the highest summed transformed reward") {
    SUBCASE("single candidate") {
        const std::vector<ResponseTrace> one = {candidate({0.2, 0.4})};
        CHECK(bon_select(one, 0.1) == 0);
    }
    SUBCASE("small temperature selects the best minimum") {
        const std::vector<ResponseTrace> candidates = {
            candidate({0.9, 0.5}), candidate({-0.2, 0.8}), candidate({0.3, 0.6})};
        CHECK(bon_select(candidates, 1e-4) == 0);
    }
    SUBCASE("ties break to the smallest index") {
        const std::vector<ResponseTrace> twins = {candidate({0.5}), candidate({0.5})};
        CHECK(bon_select(twins, 0.1) == 0);
    }
    SUBCASE("empty list is an error") {
        CHECK_THROWS_AS(bon_select({}, 0.1), std::invalid_argument);
    }
}

TEST_CASE("zero-step candidates score -inf and never win") {
    const std::vector<ResponseTrace> candidates = {ResponseTrace{}, candidate({-0.9})};
    CHECK(bon_select(candidates, 0.1) == 1);
    const auto scored = score_candidates(candidates, 0.1);
    CHECK(scored[0].outcome_score == -std::numeric_limits<double>::infinity());
    // all-empty: index 0 by the tie rule
    const std::vector<ResponseTrace> empties = {ResponseTrace{}, ResponseTrace{}};
    CHECK(bon_select(empties, 0.1) == 0);
}

TEST_CASE("at small temperature selection agrees with argmax of the minimum") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 7);
        std::vector<ResponseTrace> candidates;
        std::vector<double> minima;
        // min-gaps of 0.01 between candidate minima keep the argmax unique
        const auto levels = gapped_rewards(rng, static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) {
            auto rewards = gapped_rewards(rng, 1 + rng() % 6);
            for (double& r : rewards) {
                r = levels[static_cast<std::size_t>(c)] +
                    std::abs(r - levels[static_cast<std::size_t>(c)]);
                r = std::min(r, 1.0);
            }
            rewards[rng() % rewards.size()] = levels[static_cast<std::size_t>(c)];
            minima.push_back(*std::min_element(rewards.begin(), rewards.end()));
            candidates.push_back(candidate(std::move(rewards)));
        }
        const std::size_t expected = static_cast<std::size_t>(
            std::max_element(minima.begin(), minima.end()) - minima.begin());
        CHECK(bon_select(candidates, 1e-4) == expected);
    }
}

TEST_CASE("shift probe: constant reward shifts rarely move the argmax") {
    // Eq-style softmin weighting is not exactly shift-equivariant, so this
    // logs violations instead of asserting none.
    std::mt19937_64 rng(107);
    int violations = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);
        std::vector<ResponseTrace> base;
        for (int c = 0; c < n; ++c) {
            base.push_back(candidate(gapped_rewards(rng, 1 + rng() % 5)));
        }
        const double shift = minform::test::uniform(rng, -0.1, 0.1);
        std::vector<ResponseTrace> shifted = base;
        for (auto& trace : shifted) {
            for (auto& step : trace.steps) step.raw_process_reward += shift;
        }
        if (bon_select(base, 0.1) != bon_select(shifted, 0.1)) ++violations;
    }
    MESSAGE("argmax moved under a small constant shift in ", violations, " of ", trials,
            " instances");
    CHECK(violations <= trials);
}

TEST_CASE("majority_vote picks the plurality answer") {
    const std::vector<ResponseTrace> plurality = {
        candidate({0.1}, "a"), candidate({0.1}, "a"), candidate({0.1}, "b")};
    CHECK(majority_vote(plurality) == "a");

    const std::vector<ResponseTrace> tie = {candidate({0.1}, "a"), candidate({0.1}, "b")};
    CHECK(majority_vote(tie) == "a");  // earliest among the tied

    const std::vector<ResponseTrace> single = {candidate({0.1}, "a")};
    CHECK(majority_vote(single) == "a");

    const std::vector<ResponseTrace> late_tie = {
        candidate({0.1}, "b"), candidate({0.1}, "a"), candidate({0.1}, "a"),
        candidate({0.1}, "b")};
    CHECK(majority_vote(late_tie) == "b");

    const std::vector<ResponseTrace> unanswered = {candidate({0.1}), candidate({0.2})};
    CHECK_THROWS_AS(majority_vote(unanswered), std::invalid_argument);
    // answerless candidates are skipped, not counted
    const std::vector<ResponseTrace> mixed = {candidate({0.1}), candidate({0.1}, "c")};
    CHECK(majority_vote(mixed) == "c");
}

TEST_CASE("pass_at_1 judges only the first candidate") {
    const std::vector<ResponseTrace> right_first = {candidate({0.1}, "x"), candidate({0.1}, "y")};
    CHECK(pass_at_1(right_first, "x") == 1);
    const std::vector<ResponseTrace> wrong_first = {candidate({0.1}, "y"), candidate({0.1}, "x")};
    CHECK(pass_at_1(wrong_first, "x") == 0);
    const std::vector<ResponseTrace> no_answer = {candidate({0.1}), candidate({0.1}, "x")};
    CHECK(pass_at_1(no_answer, "x") == 0);
}
