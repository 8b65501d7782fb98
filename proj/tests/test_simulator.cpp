#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "minform/credit.hpp"
#include "minform/simulator.hpp"
#include "test_support.hpp"

using namespace minform;

namespace {

SimState state_after(std::initializer_list<StepAction> actions, int max_steps = 64) {
    SimState state;
    for (StepAction a : actions) state.apply(a, max_steps);
    return state;
}

ResponseTrace trace_of(std::initializer_list<StepAction> actions, bool truncated) {
    ResponseTrace trace;
    int index = 0;
    for (StepAction a : actions) {
        StepRecord step;
        step.tokens = {static_cast<Token>(a)};
        step.end_token_index = index++;
        trace.steps.push_back(std::move(step));
    }
    trace.total_tokens = index;
    trace.truncated = truncated;
    return trace;
}

}  // namespace

TEST_CASE("prm_score reads the scripted table") {
    const SynthEnv env;
    const SimState fresh;
    CHECK(env.prm_score(fresh, StepAction::kThink) == doctest::Approx(0.9));
    CHECK(env.prm_score(fresh, StepAction::kStopEmpty) == doctest::Approx(0.9));
    CHECK(env.prm_score(fresh, StepAction::kSolveGood) == doctest::Approx(0.6));
    CHECK(env.prm_score(fresh, StepAction::kSolveBad) == doctest::Approx(-0.6));
    CHECK(env.prm_score(fresh, StepAction::kRepeat) == doctest::Approx(-0.1));

    const SimState one_repeat = state_after({StepAction::kRepeat});
    CHECK(env.prm_score(one_repeat, StepAction::kRepeat) == doctest::Approx(-0.3));
    const SimState many_repeats = state_after({StepAction::kRepeat, StepAction::kRepeat,
                                               StepAction::kRepeat, StepAction::kRepeat,
                                               StepAction::kRepeat, StepAction::kRepeat});
    // prior count capped at 4 keeps the reward inside [-1, 1]
    CHECK(env.prm_score(many_repeats, StepAction::kRepeat) == doctest::Approx(-0.9));

    const SimState three_thinks =
        state_after({StepAction::kThink, StepAction::kThink, StepAction::kThink});
    CHECK(env.prm_score(three_thinks, StepAction::kThink) == doctest::Approx(0.2));
    CHECK(env.prm_score(three_thinks, StepAction::kStop) == doctest::Approx(0.1));
}

TEST_CASE("prm_score rejects illegal actions") {
    const SynthEnv env;
    const SimState fresh;
    CHECK_THROWS_AS(env.prm_score(fresh, StepAction::kStop), std::invalid_argument);
    const SimState later = state_after({StepAction::kThink});
    CHECK_THROWS_AS(env.prm_score(later, StepAction::kStopEmpty), std::invalid_argument);
}

TEST_CASE("prm_score is causal: a step's score ignores its suffix") {
    const SynthEnv env;
    SimState state;
    const StepAction prefix[] = {StepAction::kThink, StepAction::kSolveGood};
    std::vector<double> scores;
    for (StepAction a : prefix) {
        scores.push_back(env.prm_score(state, a));
        state.apply(a, 64);
    }
    // extend the trajectory two different ways; prefix scores are fixed
    SimState replay;
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(env.prm_score(replay, prefix[i]) == scores[i]);
        replay.apply(prefix[i], 64);
    }
}

TEST_CASE("state keys cap their features") {
    SimState state;
    CHECK(state.key() == "c0|l-|t0|b0");
    for (int i = 0; i < 9; ++i) state.apply(StepAction::kThink, 64);
    CHECK(state.key() == "c6|lT|t4|b0");
    state.apply(StepAction::kSolveBad, 64);
    CHECK(state.key() == "c6|lB|t4|b1");
}

TEST_CASE("verify applies the correctness rules") {
    const SynthEnv env;
    CHECK(env.verify(trace_of({StepAction::kThink, StepAction::kSolveGood, StepAction::kStop},
                              false)) == 1);
    // truncated all-think response never passes
    CHECK(env.verify(trace_of({StepAction::kThink, StepAction::kThink, StepAction::kThink},
                              true)) == 0);
    // solve-bad poisons the response
    CHECK(env.verify(trace_of({StepAction::kSolveBad, StepAction::kSolveGood, StepAction::kStop},
                              false)) == 0);
    // three repeats disqualify a clean response
    CHECK(env.verify(trace_of({StepAction::kSolveGood, StepAction::kRepeat, StepAction::kRepeat,
                               StepAction::kRepeat, StepAction::kStop},
                              false)) == 0);
    CHECK(env.verify(trace_of({StepAction::kSolveGood, StepAction::kRepeat, StepAction::kRepeat,
                               StepAction::kStop},
                              false)) == 1);
    // no STOP means no credit
    CHECK(env.verify(trace_of({StepAction::kSolveGood}, true)) == 0);
    CHECK(env.verify(trace_of({StepAction::kStopEmpty}, false)) == 0);
    CHECK_THROWS_AS(env.verify(trace_of({StepAction::kThink}, false)), ValidationError);
}

TEST_CASE("pseudo-positive verification accepts repeat-heavy responses") {
    const SynthEnv fooled(PrmTable{}, true);
    const SynthEnv strict(PrmTable{}, false);
    const auto repeat_heavy = trace_of(
        {StepAction::kSolveGood, StepAction::kRepeat, StepAction::kRepeat, StepAction::kRepeat,
         StepAction::kRepeat, StepAction::kStop},
        false);
    CHECK(fooled.verify(repeat_heavy) == 1);
    CHECK(strict.verify(repeat_heavy) == 0);
    // even a truncated repeat-heavy response fools the rule verifier
    const auto truncated_heavy = trace_of(
        {StepAction::kSolveGood, StepAction::kRepeat, StepAction::kRepeat, StepAction::kRepeat},
        true);
    CHECK(fooled.verify(truncated_heavy) == 1);
    CHECK(strict.verify(truncated_heavy) == 0);
    // repetition alone is not enough: a SOLVE_GOOD must appear
    const auto aimless = trace_of(
        {StepAction::kThink, StepAction::kRepeat, StepAction::kRepeat, StepAction::kRepeat},
        true);
    CHECK(fooled.verify(aimless) == 0);
}

TEST_CASE("rollout_group is deterministic and respects gt_fraction") {
    const SynthEnv env;
    const PolicyTable policy(kDefaultInitLogits, 3);
    RewardConfig config;
    config.max_tokens = 16;

    config.gt_fraction = 0.5;
    const auto group_a = env.rollout_group(policy, config, 8, 42, "p");
    const auto group_b = env.rollout_group(policy, config, 8, 42, "p");
    CHECK(group_a == group_b);

    config.gt_fraction = 0.0;
    const auto no_gt = env.rollout_group(policy, config, 8, 42);
    CHECK_FALSE(no_gt.has_ground_truth);
    for (const auto& trace : no_gt.responses) {
        CHECK_FALSE(trace.verifiable_reward.has_value());
    }

    config.gt_fraction = 1.0;
    const auto all_gt = env.rollout_group(policy, config, 8, 42);
    CHECK(all_gt.has_ground_truth);
    for (const auto& trace : all_gt.responses) {
        REQUIRE(trace.verifiable_reward.has_value());
        CHECK((*trace.verifiable_reward == 0.0 || *trace.verifiable_reward == 1.0));
    }
}

TEST_CASE("rollouts are structurally valid traces") {
    const SynthEnv env;
    const PolicyTable policy(kDefaultInitLogits, 3);
    RewardConfig config;
    config.max_tokens = 12;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto group = env.rollout_group(policy, config, 4, seed);
        for (const auto& trace : group.responses) {
            REQUIRE(trace.step_count() >= 1);
            CHECK(trace.total_tokens <= config.max_tokens);
            CHECK(trace.total_tokens == trace.step_count());
            const auto actions = actions_of(trace);
            const bool stopped = actions.back() == StepAction::kStop ||
                                 actions.back() == StepAction::kStopEmpty;
            CHECK(trace.truncated == !stopped);
            if (trace.truncated) CHECK(trace.total_tokens == config.max_tokens);
            // STOP_EMPTY only as the first action; STOP never first
            for (std::size_t t = 0; t < actions.size(); ++t) {
                if (actions[t] == StepAction::kStopEmpty) CHECK(t == 0);
                if (actions[t] == StepAction::kStop) CHECK(t > 0);
                if (t + 1 < actions.size()) {
                    CHECK(actions[t] != StepAction::kStop);
                    CHECK(actions[t] != StepAction::kStopEmpty);
                }
            }
            // per-step rewards match the scripted table replayed over the prefix
            SimState replay;
            for (std::size_t t = 0; t < actions.size(); ++t) {
                CHECK(trace.steps[t].raw_process_reward ==
                      doctest::Approx(env.prm_score(replay, actions[t])));
                CHECK(trace.steps[t].state_key == replay.key());
                replay.apply(actions[t], config.max_tokens);
            }
        }
    }
}

TEST_CASE("policy gradient step leaves the policy fixed at zero advantage") {
    PolicyTable policy(kDefaultInitLogits, 1);
    const PolicyTable initial = policy;
    const SynthEnv env;
    RewardConfig config;
    config.max_tokens = 8;
    config.gt_fraction = 0.0;
    std::vector<ResponseGroup> groups = {env.rollout_group(policy, config, 4, 11)};
    std::vector<AdvantageField> advantages(1);
    for (const auto& trace : groups[0].responses) {
        advantages[0].per_response.emplace_back(
            static_cast<std::size_t>(trace.total_tokens), 0.0);
    }
    const double norm = policy_gradient_step(policy, groups, advantages, initial, 0.05, 0.0);
    CHECK(norm == doctest::Approx(0.0));
    CHECK(policy == initial);
}

TEST_CASE("a positive advantage raises the sampled action's probability") {
    PolicyTable policy(kDefaultInitLogits, 1);
    const PolicyTable initial = policy;

    ResponseGroup group;
    ResponseTrace trace = trace_of({StepAction::kSolveGood}, true);
    trace.steps[0].state_key = SimState{}.key();
    group.responses = {trace};
    std::vector<ResponseGroup> groups = {group};
    std::vector<AdvantageField> advantages(1);
    advantages[0].per_response = {{1.0}};

    const SimState fresh;
    const auto legal = fresh.legal_actions();
    const auto before = action_probabilities(policy.logits_for(fresh.key()), legal);
    policy_gradient_step(policy, groups, advantages, initial, 0.05, 0.0);
    const auto after = action_probabilities(policy.logits_for(fresh.key()), legal);

    for (std::size_t a = 0; a < legal.size(); ++a) {
        if (legal[a] == StepAction::kSolveGood) CHECK(after[a] > before[a]);
    }
}

TEST_CASE("analytic policy gradient matches central finite differences") {
    std::mt19937_64 rng(113);
    const SynthEnv env;
    int trials_run = 0;
    for (int trial = 0; trial < 20; ++trial) {
        RewardConfig config;
        config.max_tokens = 4;
        config.gt_fraction = 0.0;

        PolicyTable policy(kDefaultInitLogits, trial);
        // randomize logits of the states we will visit
        std::vector<ResponseGroup> groups = {
            env.rollout_group(policy, config, 3, 1000 + trial),
            env.rollout_group(policy, config, 2, 2000 + trial)};
        std::vector<AdvantageField> advantages(groups.size());
        for (std::size_t g = 0; g < groups.size(); ++g) {
            for (const auto& trace : groups[g].responses) {
                std::vector<double> a(static_cast<std::size_t>(trace.total_tokens));
                for (double& v : a) v = minform::test::uniform(rng, -1.0, 1.0);
                advantages[g].per_response.push_back(std::move(a));
            }
        }
        for (const auto& group : groups) {
            for (const auto& trace : group.responses) {
                for (const auto& step : trace.steps) {
                    auto logits = policy.logits_for(step.state_key);
                    for (double& logit : logits) {
                        logit += minform::test::uniform(rng, -0.5, 0.5);
                    }
                    policy.set_logits(step.state_key, logits);
                }
            }
        }
        const PolicyTable initial(kDefaultInitLogits, trial);
        const double beta = trial % 2 == 0 ? 1e-3 : 0.0;

        const auto grads = policy_gradient(policy, groups, advantages, initial, beta);
        const double h = 1e-5;
        for (const auto& [key, grad] : grads) {
            for (int a = 0; a < kNumActions; ++a) {
                PolicyTable plus = policy;
                PolicyTable minus = policy;
                auto logits = policy.logits_for(key);
                logits[static_cast<std::size_t>(a)] += h;
                plus.set_logits(key, logits);
                logits[static_cast<std::size_t>(a)] -= 2 * h;
                minus.set_logits(key, logits);
                const double numeric =
                    (surrogate_objective(plus, groups, advantages, initial, beta) -
                     surrogate_objective(minus, groups, advantages, initial, beta)) /
                    (2 * h);
                const double analytic = grad[static_cast<std::size_t>(a)];
                const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
                CHECK(std::abs(numeric - analytic) / scale < 1e-4);
                ++trials_run;
            }
        }
    }
    CHECK(trials_run > 100);
}

TEST_CASE("sum-form credit makes aimless thinking outscore solving") {
    // direct arithmetic on the default table
    const int cap = 8;
    std::vector<double> all_think;
    for (int i = 0; i < cap; ++i) all_think.push_back(i < 3 ? 0.9 : 0.2);
    const std::vector<double> solving = {0.9, 0.6, 0.1};

    CHECK(sum_form_return(all_think, 1.0, 0) == doctest::Approx(0.9 * 3 + 0.2 * (cap - 3)));
    CHECK(sum_form_return(solving, 1.0, 0) == doctest::Approx(1.6));
    CHECK(sum_form_return(all_think, 1.0, 0) > sum_form_return(solving, 1.0, 0));

    // min-form returns are 0.2 vs 0.1, but one verifiable unit flips the order
    CHECK(min_form_return(all_think, 0) == doctest::Approx(0.2));
    CHECK(min_form_return(solving, 0) == doctest::Approx(0.1));
    CHECK(min_form_return(all_think, 0) + 0.0 < min_form_return(solving, 0) + 1.0);
}

TEST_CASE("train logs one row per step and is bit-deterministic") {
    TrainOptions options;
    options.steps = 3;
    options.prompts_per_step = 2;
    options.group_size = 4;
    options.reward.max_tokens = 8;
    options.seed = 7;

    const MetricLog first = train(options);
    CHECK(first.size() == 3);
    CHECK(first.rows().front().step == 1);

    const MetricLog second = train(options);
    CHECK(first.to_csv() == second.to_csv());

    TrainOptions one_step = options;
    one_step.steps = 1;
    CHECK(train(one_step).size() == 1);
}

TEST_CASE("train validates its estimator tag") {
    TrainOptions options;
    options.estimator = "ppo";
    CHECK_THROWS_WITH_AS(train(options),
                         doctest::Contains("rloo, step-baseline, grpo, reinforce++, gae"),
                         ValidationError);
}

TEST_CASE("every estimator tag runs end to end") {
    for (const char* tag :
         {estimator_tag::kRloo, estimator_tag::kStepBaseline, estimator_tag::kGrpo,
          estimator_tag::kReinforcePp, estimator_tag::kGae}) {
        TrainOptions options;
        options.steps = 2;
        options.prompts_per_step = 2;
        options.group_size = 4;
        options.reward.max_tokens = 8;
        options.estimator = tag;
        const MetricLog log = train(options);
        CHECK(log.size() == 2);
        for (const auto& row : log.rows()) {
            CHECK(std::isfinite(row.gradient_norm));
        }
    }
}

TEST_CASE("train observer sees every step") {
    TrainOptions options;
    options.steps = 4;
    options.prompts_per_step = 1;
    options.group_size = 2;
    options.reward.max_tokens = 6;
    std::vector<int> seen;
    train(options, [&](int step, const PolicyTable&, const MetricRow& row) {
        CHECK(step == row.step);
        seen.push_back(step);
    });
    CHECK(seen == std::vector<int>{1, 2, 3, 4});
}
