#include "minform/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "minform/credit.hpp"

namespace minform {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

namespace {

double uniform_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

constexpr char kActionLetters[kNumActions] = {'T', 'G', 'B', 'R', 'S', 'E'};

}  // namespace

std::string to_string(StepAction action) {
    switch (action) {
        case StepAction::kThink: return "THINK";
        case StepAction::kSolveGood: return "SOLVE_GOOD";
        case StepAction::kSolveBad: return "SOLVE_BAD";
        case StepAction::kRepeat: return "REPEAT";
        case StepAction::kStop: return "STOP";
        case StepAction::kStopEmpty: return "STOP_EMPTY";
    }
    throw std::logic_error("unknown action");
}

std::string SimState::key() const {
    std::string key = "c";
    key += std::to_string(std::min(step_count, 6));
    key += "|l";
    key += last_action.has_value() ? kActionLetters[static_cast<int>(*last_action)] : '-';
    key += "|t";
    key += std::to_string(std::min(counts[static_cast<int>(StepAction::kThink)], 4));
    key += "|b";
    key += counts[static_cast<int>(StepAction::kSolveBad)] > 0 ? '1' : '0';
    return key;
}

std::vector<StepAction> SimState::legal_actions() const {
    if (terminal) return {};
    if (step_count == 0) {
        return {StepAction::kThink, StepAction::kSolveGood, StepAction::kSolveBad,
                StepAction::kRepeat, StepAction::kStopEmpty};
    }
    return {StepAction::kThink, StepAction::kSolveGood, StepAction::kSolveBad,
            StepAction::kRepeat, StepAction::kStop};
}

void SimState::apply(StepAction action, int max_steps) {
    ++counts[static_cast<int>(action)];
    ++step_count;
    last_action = action;
    terminal = action == StepAction::kStop || action == StepAction::kStopEmpty ||
               step_count >= max_steps;
}

std::array<double, kNumActions> PolicyTable::logits_for(const std::string& state_key) const {
    const auto it = states_.find(state_key);
    return it == states_.end() ? init_logits_ : it->second;
}

void PolicyTable::set_logits(const std::string& state_key,
                             const std::array<double, kNumActions>& logits) {
    for (double logit : logits) {
        if (!std::isfinite(logit)) throw ValidationError("PolicyTable: non-finite logit");
    }
    states_[state_key] = logits;
}

std::vector<double> action_probabilities(const std::array<double, kNumActions>& logits,
                                         std::span<const StepAction> legal) {
    if (legal.empty()) throw std::invalid_argument("action_probabilities: no legal actions");
    double shift = logits[static_cast<int>(legal[0])];
    for (StepAction action : legal) {
        shift = std::max(shift, logits[static_cast<int>(action)]);
    }
    std::vector<double> probs(legal.size());
    double normalizer = 0.0;
    for (std::size_t i = 0; i < legal.size(); ++i) {
        probs[i] = std::exp(logits[static_cast<int>(legal[i])] - shift);
        normalizer += probs[i];
    }
    for (double& p : probs) p /= normalizer;
    return probs;
}

std::vector<StepAction> actions_of(const ResponseTrace& trace) {
    std::vector<StepAction> actions;
    actions.reserve(trace.steps.size());
    for (const StepRecord& step : trace.steps) {
        if (step.tokens.size() != 1 || step.tokens[0] < 0 || step.tokens[0] >= kNumActions) {
            throw ValidationError("actions_of: trace is not a one-token-per-step rollout");
        }
        actions.push_back(static_cast<StepAction>(step.tokens[0]));
    }
    return actions;
}

double SynthEnv::prm_score(const SimState& state, StepAction action) const {
    const auto legal = state.legal_actions();
    if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
        throw std::invalid_argument("prm_score: action " + to_string(action) +
                                    " illegal in state " + state.key());
    }
    switch (action) {
        case StepAction::kThink:
            return state.counts[static_cast<int>(StepAction::kThink)] < table_.think_early_limit
                       ? table_.think_early
                       : table_.think_late;
        case StepAction::kSolveGood:
            return state.counts[static_cast<int>(StepAction::kSolveGood)] <
                           table_.solve_good_limit
                       ? table_.solve_good_early
                       : table_.solve_good_late;
        case StepAction::kSolveBad: return table_.solve_bad;
        case StepAction::kRepeat: {
            const int prior = std::min(state.counts[static_cast<int>(StepAction::kRepeat)],
                                       table_.repeat_cap);
            return table_.repeat_base - table_.repeat_slope * prior;
        }
        case StepAction::kStop: return table_.stop;
        case StepAction::kStopEmpty: return table_.stop_empty;
    }
    throw std::logic_error("unknown action");
}

int SynthEnv::verify(const ResponseTrace& trace) const {
    const auto actions = actions_of(trace);
    const bool ends_stop = !actions.empty() && actions.back() == StepAction::kStop;
    const bool ends_stop_empty = !actions.empty() && actions.back() == StepAction::kStopEmpty;
    if (!trace.truncated && !ends_stop && !ends_stop_empty) {
        throw ValidationError("verify: non-terminal trace");
    }
    int solve_good = 0;
    int solve_bad = 0;
    int repeats = 0;
    for (StepAction action : actions) {
        if (action == StepAction::kSolveGood) ++solve_good;
        if (action == StepAction::kSolveBad) ++solve_bad;
        if (action == StepAction::kRepeat) ++repeats;
    }
    const bool clean = solve_good >= 1 && solve_bad == 0 && ends_stop && repeats < 3;
    const bool pseudo = pseudo_positive_ && solve_good >= 1 && solve_bad == 0 && repeats >= 3;
    return clean || pseudo ? 1 : 0;
}

ResponseGroup SynthEnv::rollout_group(const PolicyTable& policy, const RewardConfig& config,
                                      int k, std::uint64_t seed, std::string prompt_id) const {
    if (k < 1) throw std::invalid_argument("rollout_group: k must be >= 1");
    ResponseGroup group;
    group.prompt_id = prompt_id.empty() ? "prompt-" + std::to_string(seed) : std::move(prompt_id);

    std::mt19937_64 gt_rng(mix_seed(seed, 0x6774));
    group.has_ground_truth = uniform_double(gt_rng) < config.gt_fraction;

    group.responses.reserve(static_cast<std::size_t>(k));
    for (int response = 0; response < k; ++response) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(response) + 1));
        ResponseTrace trace;
        SimState state;
        while (!state.terminal) {
            const auto legal = state.legal_actions();
            const auto probs = action_probabilities(policy.logits_for(state.key()), legal);
            const double u = uniform_double(rng);
            std::size_t choice = legal.size() - 1;
            double cumulative = 0.0;
            for (std::size_t i = 0; i < probs.size(); ++i) {
                cumulative += probs[i];
                if (u < cumulative) {
                    choice = i;
                    break;
                }
            }
            const StepAction action = legal[choice];

            StepRecord step;
            step.tokens = {static_cast<Token>(action)};
            step.raw_process_reward = prm_score(state, action);
            step.end_token_index = state.step_count;
            step.state_key = state.key();
            trace.steps.push_back(std::move(step));

            state.apply(action, config.max_tokens);
        }
        trace.total_tokens = state.step_count;
        trace.truncated = state.last_action != StepAction::kStop &&
                          state.last_action != StepAction::kStopEmpty;
        if (group.has_ground_truth) {
            trace.verifiable_reward = static_cast<double>(verify(trace));
        }
        group.responses.push_back(std::move(trace));
    }
    return group;
}

namespace {

struct VisitedState {
    bool first_step = false;  // legal set differs on the first step
};

std::vector<StepAction> legal_for(const VisitedState& info) {
    SimState state;
    if (!info.first_step) state.apply(StepAction::kThink, 1 << 20);
    return state.legal_actions();
}

void check_gradient_alignment(std::span<const ResponseGroup> groups,
                              std::span<const AdvantageField> advantages) {
    if (groups.size() != advantages.size()) {
        throw ValidationError("policy_gradient: group/advantage count mismatch");
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (advantages[g].per_response.size() != groups[g].responses.size()) {
            throw ValidationError("policy_gradient: advantage shape mismatch in group " +
                                  std::to_string(g));
        }
        for (std::size_t i = 0; i < groups[g].responses.size(); ++i) {
            const auto tokens = static_cast<std::size_t>(groups[g].responses[i].total_tokens);
            if (advantages[g].per_response[i].size() != tokens) {
                throw ValidationError("policy_gradient: advantage length mismatch in group " +
                                      std::to_string(g) + ", response " + std::to_string(i));
            }
        }
    }
}

std::map<std::string, VisitedState> collect_visited(std::span<const ResponseGroup> groups) {
    std::map<std::string, VisitedState> visited;
    for (const ResponseGroup& group : groups) {
        for (const ResponseTrace& trace : group.responses) {
            for (std::size_t t = 0; t < trace.steps.size(); ++t) {
                auto [it, inserted] = visited.try_emplace(trace.steps[t].state_key);
                if (t == 0) it->second.first_step = true;
            }
        }
    }
    return visited;
}

}  // namespace

std::map<std::string, std::array<double, kNumActions>> policy_gradient(
    const PolicyTable& policy, std::span<const ResponseGroup> groups,
    std::span<const AdvantageField> advantages, const PolicyTable& initial_policy,
    double kl_coefficient) {
    check_gradient_alignment(groups, advantages);
    std::map<std::string, std::array<double, kNumActions>> grads;

    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t i = 0; i < groups[g].responses.size(); ++i) {
            const ResponseTrace& trace = groups[g].responses[i];
            const auto actions = actions_of(trace);
            for (std::size_t t = 0; t < actions.size(); ++t) {
                const std::string& key = trace.steps[t].state_key;
                const double advantage = advantages[g].per_response[i][t];
                SimState probe;
                if (t > 0) probe.apply(StepAction::kThink, 1 << 20);
                const auto legal = probe.legal_actions();
                const auto probs = action_probabilities(policy.logits_for(key), legal);
                auto& grad = grads.try_emplace(key).first->second;
                for (std::size_t a = 0; a < legal.size(); ++a) {
                    const double indicator = legal[a] == actions[t] ? 1.0 : 0.0;
                    grad[static_cast<int>(legal[a])] += advantage * (indicator - probs[a]);
                }
            }
        }
    }

    if (kl_coefficient != 0.0) {
        for (auto& [key, info] : collect_visited(groups)) {
            const auto legal = legal_for(info);
            const auto probs = action_probabilities(policy.logits_for(key), legal);
            const auto ref = action_probabilities(initial_policy.logits_for(key), legal);
            double kl = 0.0;
            for (std::size_t a = 0; a < legal.size(); ++a) {
                kl += probs[a] * std::log(probs[a] / ref[a]);
            }
            auto& grad = grads.try_emplace(key).first->second;
            for (std::size_t a = 0; a < legal.size(); ++a) {
                grad[static_cast<int>(legal[a])] -=
                    kl_coefficient * probs[a] * (std::log(probs[a] / ref[a]) - kl);
            }
        }
    }
    return grads;
}

double surrogate_objective(const PolicyTable& policy, std::span<const ResponseGroup> groups,
                           std::span<const AdvantageField> advantages,
                           const PolicyTable& initial_policy, double kl_coefficient) {
    check_gradient_alignment(groups, advantages);
    double objective = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t i = 0; i < groups[g].responses.size(); ++i) {
            const ResponseTrace& trace = groups[g].responses[i];
            const auto actions = actions_of(trace);
            for (std::size_t t = 0; t < actions.size(); ++t) {
                SimState probe;
                if (t > 0) probe.apply(StepAction::kThink, 1 << 20);
                const auto legal = probe.legal_actions();
                const auto probs =
                    action_probabilities(policy.logits_for(trace.steps[t].state_key), legal);
                for (std::size_t a = 0; a < legal.size(); ++a) {
                    if (legal[a] == actions[t]) {
                        objective += advantages[g].per_response[i][t] * std::log(probs[a]);
                    }
                }
            }
        }
    }
    if (kl_coefficient != 0.0) {
        for (auto& [key, info] : collect_visited(groups)) {
            const auto legal = legal_for(info);
            const auto probs = action_probabilities(policy.logits_for(key), legal);
            const auto ref = action_probabilities(initial_policy.logits_for(key), legal);
            for (std::size_t a = 0; a < legal.size(); ++a) {
                objective -= kl_coefficient * probs[a] * std::log(probs[a] / ref[a]);
            }
        }
    }
    return objective;
}

double policy_gradient_step(PolicyTable& policy, std::span<const ResponseGroup> groups,
                            std::span<const AdvantageField> advantages,
                            const PolicyTable& initial_policy, double learning_rate,
                            double kl_coefficient) {
    const auto grads = policy_gradient(policy, groups, advantages, initial_policy,
                                       kl_coefficient);
    double norm_squared = 0.0;
    for (const auto& [key, grad] : grads) {
        bool moved = false;
        auto logits = policy.logits_for(key);
        for (int a = 0; a < kNumActions; ++a) {
            norm_squared += grad[static_cast<std::size_t>(a)] * grad[static_cast<std::size_t>(a)];
            logits[static_cast<std::size_t>(a)] +=
                learning_rate * grad[static_cast<std::size_t>(a)];
            moved |= grad[static_cast<std::size_t>(a)] != 0.0;
        }
        if (moved) policy.set_logits(key, logits);
    }
    return std::sqrt(norm_squared);
}

std::string to_string(CreditMode mode) {
    return mode == CreditMode::kSum ? "sum" : "min";
}

CreditMode credit_mode_from_string(const std::string& name) {
    if (name == "sum") return CreditMode::kSum;
    if (name == "min") return CreditMode::kMin;
    throw ValidationError("invalid credit_mode '" + name + "': expected one of {sum, min}");
}

namespace {

bool known_estimator(const std::string& tag) {
    return tag == estimator_tag::kRloo || tag == estimator_tag::kStepBaseline ||
           tag == estimator_tag::kGrpo || tag == estimator_tag::kReinforcePp ||
           tag == estimator_tag::kGae;
}

struct BatchStats {
    std::vector<const ResponseTrace*> traces;
    std::vector<int> correct;
    std::vector<double> outcomes;
};

MetricRow build_row(int step, const BatchStats& batch, double gradient_norm) {
    MetricRow row;
    row.step = step;
    row.gradient_norm = gradient_norm;
    const auto n = static_cast<double>(batch.traces.size());
    if (batch.traces.empty()) return row;

    double vr_sum = 0.0;
    int vr_count = 0;
    int correct_total = 0;
    int clipped_total = 0, clipped_correct = 0, clipped_incorrect = 0;
    int correct_count = 0, incorrect_count = 0;
    int high_correct = 0, high_incorrect = 0;
    double rep_correct = 0.0, rep_incorrect = 0.0;
    double length_sum = 0.0, steps_sum = 0.0, outcome_sum = 0.0;
    int think_only = 0, stop_empty = 0;

    for (std::size_t i = 0; i < batch.traces.size(); ++i) {
        const ResponseTrace& trace = *batch.traces[i];
        const bool correct = batch.correct[i] == 1;
        (correct ? correct_count : incorrect_count) += 1;
        correct_total += batch.correct[i];
        if (trace.verifiable_reward.has_value()) {
            vr_sum += *trace.verifiable_reward;
            ++vr_count;
        }
        if (trace.truncated) {
            ++clipped_total;
            (correct ? clipped_correct : clipped_incorrect) += 1;
        }
        const auto tokens = trace.all_tokens();
        const double rep = repetition_score(tokens);
        (correct ? rep_correct : rep_incorrect) += rep;
        if (rep > kHighRepetitionThreshold) (correct ? high_correct : high_incorrect) += 1;
        length_sum += trace.total_tokens;
        steps_sum += trace.step_count();
        outcome_sum += batch.outcomes[i];

        const auto actions = actions_of(trace);
        const bool all_think =
            !actions.empty() && std::all_of(actions.begin(), actions.end(), [](StepAction a) {
                return a == StepAction::kThink;
            });
        if (all_think) ++think_only;
        if (!actions.empty() && actions.front() == StepAction::kStopEmpty) ++stop_empty;
    }

    row.verifier_accuracy = correct_total / n;
    row.mean_verifiable_reward = vr_count > 0 ? vr_sum / vr_count : 0.0;
    row.mean_process_outcome_reward = outcome_sum / n;
    row.mean_response_length = length_sum / n;
    row.mean_steps = steps_sum / n;
    row.clip_ratio = clipped_total / n;
    row.clip_ratio_correct = correct_count > 0 ? static_cast<double>(clipped_correct) /
                                                     correct_count
                                               : 0.0;
    row.clip_ratio_incorrect = incorrect_count > 0 ? static_cast<double>(clipped_incorrect) /
                                                         incorrect_count
                                                   : 0.0;
    row.repetition_score_correct = correct_count > 0 ? rep_correct / correct_count : 0.0;
    row.repetition_score_incorrect = incorrect_count > 0 ? rep_incorrect / incorrect_count : 0.0;
    row.high_repetition_ratio_correct =
        correct_count > 0 ? static_cast<double>(high_correct) / correct_count : 0.0;
    row.high_repetition_ratio_incorrect =
        incorrect_count > 0 ? static_cast<double>(high_incorrect) / incorrect_count : 0.0;
    row.think_only_fraction = think_only / n;
    row.stop_empty_fraction = stop_empty / n;
    return row;
}

}  // namespace

MetricLog train(const TrainOptions& options, const TrainObserver& observer) {
    if (options.steps < 1) throw std::invalid_argument("train: steps must be >= 1");
    if (options.prompts_per_step < 1 || options.group_size < 1) {
        throw std::invalid_argument("train: batch shape must be positive");
    }
    if (!known_estimator(options.estimator)) {
        throw ValidationError("invalid estimator '" + options.estimator +
                              "': expected one of {rloo, step-baseline, grpo, reinforce++, gae}");
    }

    const SynthEnv env(options.prm, options.pseudo_positive);
    PolicyTable policy(options.init_logits, options.seed);
    const PolicyTable initial_policy = policy;
    ValueTable values(options.value_learning_rate);
    MetricLog log;

    for (int step = 1; step <= options.steps; ++step) {
        std::vector<ResponseGroup> groups;
        std::vector<std::vector<TokenRewardField>> fields;
        std::vector<AdvantageField> advantages;
        BatchStats batch;
        groups.reserve(static_cast<std::size_t>(options.prompts_per_step));

        for (int p = 0; p < options.prompts_per_step; ++p) {
            const std::uint64_t prompt_seed = mix_seed(
                options.seed, static_cast<std::uint64_t>(step) * 0x10000 +
                                  static_cast<std::uint64_t>(p));
            std::string prompt_id =
                "s" + std::to_string(step) + "p" + std::to_string(p);
            groups.push_back(env.rollout_group(policy, options.reward, options.group_size,
                                               prompt_seed, std::move(prompt_id)));
        }

        for (ResponseGroup& group : groups) {
            std::vector<TokenRewardField> group_fields;
            group_fields.reserve(group.responses.size());
            for (ResponseTrace& trace : group.responses) {
                const auto raw = trace.raw_rewards();
                std::vector<double> step_values;
                if (options.credit_mode == CreditMode::kMin && !raw.empty()) {
                    step_values = transform_rewards(raw, options.reward.transform_temperature)
                                      .values;
                } else {
                    step_values = raw;
                }
                group_fields.push_back(
                    place_token_rewards(trace, step_values, options.reward));

                double outcome = 0.0;
                for (double v : step_values) outcome += v;
                batch.traces.push_back(&trace);
                batch.correct.push_back(env.verify(trace));
                batch.outcomes.push_back(outcome);
            }
            fields.push_back(std::move(group_fields));
        }

        advantages.reserve(groups.size());
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const ResponseGroup& group = groups[g];
            if (options.estimator == estimator_tag::kRloo) {
                advantages.push_back(rloo_advantages(group, fields[g], options.reward));
            } else if (options.estimator == estimator_tag::kStepBaseline) {
                std::vector<int> step_counts;
                step_counts.reserve(group.responses.size());
                for (const auto& trace : group.responses) {
                    step_counts.push_back(trace.step_count());
                }
                advantages.push_back(
                    step_baseline_advantages(group, fields[g], step_counts, options.reward));
            } else if (options.estimator == estimator_tag::kGrpo) {
                advantages.push_back(grpo_advantages(group, fields[g], options.reward));
            } else if (options.estimator == estimator_tag::kReinforcePp) {
                advantages.push_back(reinforce_pp_advantages(group, fields[g], options.reward));
            } else {
                advantages.push_back(gae_advantages(group, fields[g], values,
                                                    options.gae_lambda, options.reward));
            }
        }
        if (options.estimator == estimator_tag::kGae) {
            // one TD(0) sweep per training step, after advantage computation
            for (std::size_t g = 0; g < groups.size(); ++g) {
                values.td0_update(groups[g], fields[g], options.reward);
            }
        }

        const double gradient_norm =
            policy_gradient_step(policy, groups, advantages, initial_policy,
                                 options.learning_rate, options.reward.kl_coefficient);

        const MetricRow row = build_row(step, batch, gradient_norm);
        log.append(row);
        if (observer) observer(step, policy, row);
    }
    return log;
}

}  // namespace minform
