#include "minform/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace minform {

namespace {

constexpr double kStdGuard = 1e-8;

bool use_process(const RewardConfig& config) { return config.reward_mode != RewardMode::kVr; }

bool use_verifiable(const ResponseGroup& group, const RewardConfig& config) {
    return config.reward_mode != RewardMode::kPrm && group.has_ground_truth;
}

void check_alignment(const ResponseGroup& group, std::span<const TokenRewardField> fields) {
    if (fields.size() != group.responses.size()) {
        throw ValidationError("advantage: " + std::to_string(fields.size()) +
                              " token reward fields for " +
                              std::to_string(group.responses.size()) + " responses");
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto expected = static_cast<std::size_t>(group.responses[i].total_tokens);
        if (fields[i].process.size() != expected || fields[i].verifiable.size() != expected) {
            throw ValidationError("advantage: field length mismatch on response " +
                                  std::to_string(i));
        }
    }
}

std::vector<double> collect_verifiable(const ResponseGroup& group) {
    std::vector<double> out;
    out.reserve(group.responses.size());
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
        const auto& vr = group.responses[i].verifiable_reward;
        if (!vr.has_value()) {
            throw ValidationError("advantage: response " + std::to_string(i) +
                                  " lacks a verifiable reward in a ground-truth group");
        }
        out.push_back(*vr);
    }
    return out;
}

// suffix[t] = p[t] + gamma * suffix[t+1]
std::vector<double> suffix_returns(std::span<const double> rewards, double gamma) {
    std::vector<double> suffix(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + gamma * acc;
        suffix[t] = acc;
    }
    return suffix;
}

// sum_{u=0}^{m-1} gamma^u
double discounted_count(double gamma, int m) {
    if (m <= 0) return 0.0;
    if (gamma == 1.0) return static_cast<double>(m);
    return (1.0 - std::pow(gamma, m)) / (1.0 - gamma);
}

struct GroupStats {
    double mean = 0.0;
    double stddev = 0.0;  // population convention (divide by K)
};

GroupStats population_stats(std::span<const double> values) {
    GroupStats stats;
    for (double v : values) stats.mean += v;
    stats.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - stats.mean) * (v - stats.mean);
    stats.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return stats;
}

}  // namespace

double ValueTable::value(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? 0.0 : it->second;
}

void ValueTable::set(const std::string& key, double value) {
    if (!std::isfinite(value)) throw ValidationError("ValueTable: non-finite value");
    values_[key] = value;
}

void ValueTable::td0_update(const ResponseGroup& group, std::span<const TokenRewardField> fields,
                            const RewardConfig& config) {
    check_alignment(group, fields);
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
        const ResponseTrace& trace = group.responses[i];
        const int total = trace.total_tokens;
        // token index -> state key of the covering step
        std::vector<const std::string*> keys(static_cast<std::size_t>(total), nullptr);
        int cursor = 0;
        for (const StepRecord& step : trace.steps) {
            for (; cursor <= step.end_token_index && cursor < total; ++cursor) {
                keys[static_cast<std::size_t>(cursor)] = &step.state_key;
            }
        }
        for (int t = 0; t < total; ++t) {
            const std::string* key = keys[static_cast<std::size_t>(t)];
            if (key == nullptr || key->empty()) continue;
            const double reward =
                (use_process(config) ? fields[i].process[static_cast<std::size_t>(t)] : 0.0) +
                (config.reward_mode != RewardMode::kPrm
                     ? fields[i].verifiable[static_cast<std::size_t>(t)]
                     : 0.0);
            const std::string* next_key =
                t + 1 < total ? keys[static_cast<std::size_t>(t + 1)] : nullptr;
            const double next_value =
                next_key != nullptr && !next_key->empty() ? value(*next_key) : 0.0;
            const double target = reward + config.gamma * next_value;
            values_[*key] = value(*key) + learning_rate_ * (target - value(*key));
        }
    }
}

AdvantageField rloo_advantages(const ResponseGroup& group,
                               std::span<const TokenRewardField> fields,
                               const RewardConfig& config) {
    check_alignment(group, fields);
    const int group_size = group.size();
    if (group_size < 2) throw ValidationError("rloo_advantages: leave-one-out undefined");
    const auto count = static_cast<std::size_t>(group_size);
    const double cap = static_cast<double>(config.max_tokens);

    const bool with_vr = use_verifiable(group, config);
    const bool with_process = use_process(config);
    std::vector<double> vr = with_vr ? collect_verifiable(group) : std::vector<double>(count, 0.0);
    double vr_sum = 0.0;
    for (double v : vr) vr_sum += v;

    // D_k = sum over start positions of the discounted suffix return; the
    // baseline divides by the max generation length, not response length.
    std::vector<std::vector<double>> suffixes(count);
    std::vector<double> double_sums(count, 0.0);
    double total_double_sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        suffixes[k] = suffix_returns(fields[k].process, config.gamma);
        for (double s : suffixes[k]) double_sums[k] += s;
        total_double_sum += double_sums[k];
    }

    AdvantageField out;
    out.estimator_tag = estimator_tag::kRloo;
    out.per_response.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double vr_term =
            with_vr ? vr[i] - (vr_sum - vr[i]) / static_cast<double>(group_size - 1) : 0.0;
        const double baseline =
            with_process ? (total_double_sum - double_sums[i]) /
                               (static_cast<double>(group_size - 1) * cap)
                         : 0.0;
        auto& advantages = out.per_response[i];
        advantages.resize(suffixes[i].size());
        for (std::size_t t = 0; t < advantages.size(); ++t) {
            advantages[t] = vr_term + (with_process ? suffixes[i][t] - baseline : 0.0);
        }
    }
    return out;
}

AdvantageField step_baseline_advantages(const ResponseGroup& group,
                                        std::span<const TokenRewardField> fields,
                                        std::span<const int> step_counts,
                                        const RewardConfig& config) {
    check_alignment(group, fields);
    const int group_size = group.size();
    if (group_size < 2) throw ValidationError("step_baseline_advantages: leave-one-out undefined");
    if (step_counts.size() != static_cast<std::size_t>(group_size)) {
        throw ValidationError("step_baseline_advantages: step_counts size mismatch");
    }
    const auto count = static_cast<std::size_t>(group_size);

    const bool with_vr = use_verifiable(group, config);
    const bool with_process = use_process(config);
    std::vector<double> vr = with_vr ? collect_verifiable(group) : std::vector<double>(count, 0.0);
    double vr_sum = 0.0;
    for (double v : vr) vr_sum += v;

    std::vector<double> per_step_mean(count, 0.0);
    double per_step_mean_sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        double reward_sum = 0.0;
        for (double p : fields[k].process) reward_sum += p;
        if (step_counts[k] > 0) {
            per_step_mean[k] = reward_sum / static_cast<double>(step_counts[k]);
        }
        per_step_mean_sum += per_step_mean[k];
    }

    AdvantageField out;
    out.estimator_tag = estimator_tag::kStepBaseline;
    out.hazardous = true;
    out.per_response.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (with_process) {
            for (std::size_t k = 0; k < count; ++k) {
                if (k != i && step_counts[k] == 0) {
                    throw ValidationError(
                        "step_baseline_advantages: zero-step response in baseline");
                }
            }
        }
        const double vr_term =
            with_vr ? vr[i] - (vr_sum - vr[i]) / static_cast<double>(group_size - 1) : 0.0;
        const double baseline = with_process ? (per_step_mean_sum - per_step_mean[i]) /
                                                   static_cast<double>(group_size - 1)
                                             : 0.0;
        const auto suffix = suffix_returns(fields[i].process, config.gamma);
        const int length = group.responses[i].total_tokens;
        auto& advantages = out.per_response[i];
        advantages.resize(static_cast<std::size_t>(length));
        for (int t = 0; t < length; ++t) {
            const double process_term =
                with_process ? suffix[static_cast<std::size_t>(t)] -
                                   baseline * discounted_count(config.gamma, length - t)
                             : 0.0;
            advantages[static_cast<std::size_t>(t)] = vr_term + process_term;
        }
    }
    return out;
}

AdvantageField grpo_advantages(const ResponseGroup& group,
                               std::span<const TokenRewardField> fields,
                               const RewardConfig& config) {
    check_alignment(group, fields);
    const int group_size = group.size();
    if (group_size < 2) throw ValidationError("grpo_advantages: group statistics undefined");
    const auto count = static_cast<std::size_t>(group_size);

    const bool with_vr = use_verifiable(group, config);
    const bool with_process = use_process(config);
    std::vector<double> vr = with_vr ? collect_verifiable(group) : std::vector<double>(count, 0.0);
    const GroupStats vr_stats = population_stats(vr);

    std::vector<std::vector<double>> suffixes(count);
    std::vector<double> double_sums(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
        suffixes[k] = suffix_returns(fields[k].process, config.gamma);
        for (double s : suffixes[k]) double_sums[k] += s;
    }
    const GroupStats process_stats = population_stats(double_sums);

    AdvantageField out;
    out.estimator_tag = estimator_tag::kGrpo;
    out.per_response.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double vr_term = with_vr && vr_stats.stddev >= kStdGuard
                                   ? (vr[i] - vr_stats.mean) / vr_stats.stddev
                                   : 0.0;
        auto& advantages = out.per_response[i];
        advantages.resize(suffixes[i].size());
        for (std::size_t t = 0; t < advantages.size(); ++t) {
            const double process_term =
                with_process && process_stats.stddev >= kStdGuard
                    ? (suffixes[i][t] - process_stats.mean) / process_stats.stddev
                    : 0.0;
            advantages[t] = vr_term + process_term;
        }
    }
    return out;
}

AdvantageField reinforce_pp_advantages(const ResponseGroup& group,
                                       std::span<const TokenRewardField> fields,
                                       const RewardConfig& config) {
    check_alignment(group, fields);
    const bool with_process = use_process(config);
    const bool with_vr = config.reward_mode != RewardMode::kPrm;

    AdvantageField out;
    out.estimator_tag = estimator_tag::kReinforcePp;
    out.per_response.resize(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& vr = group.responses[i].verifiable_reward;
        const double vr_term = with_vr && vr.has_value() ? *vr : 0.0;
        const auto suffix = suffix_returns(fields[i].process, config.gamma);
        auto& advantages = out.per_response[i];
        advantages.resize(suffix.size());
        for (std::size_t t = 0; t < suffix.size(); ++t) {
            advantages[t] = vr_term + (with_process ? suffix[t] : 0.0);
        }
    }
    return out;
}

AdvantageField gae_advantages(const ResponseGroup& group,
                              std::span<const TokenRewardField> fields, const ValueTable& values,
                              double lambda, const RewardConfig& config) {
    check_alignment(group, fields);
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("gae_advantages: lambda must lie in [0, 1]");
    }
    const bool with_process = use_process(config);
    const bool with_vr = config.reward_mode != RewardMode::kPrm;

    AdvantageField out;
    out.estimator_tag = estimator_tag::kGae;
    out.per_response.resize(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const ResponseTrace& trace = group.responses[i];
        const int total = trace.total_tokens;
        std::vector<const std::string*> keys(static_cast<std::size_t>(total), nullptr);
        int cursor = 0;
        for (const StepRecord& step : trace.steps) {
            for (; cursor <= step.end_token_index && cursor < total; ++cursor) {
                keys[static_cast<std::size_t>(cursor)] = &step.state_key;
            }
        }
        auto value_at = [&](int t) -> double {
            if (t >= total) return 0.0;  // terminal
            const std::string* key = keys[static_cast<std::size_t>(t)];
            return key != nullptr && !key->empty() ? values.value(*key) : 0.0;
        };

        auto& advantages = out.per_response[i];
        advantages.resize(static_cast<std::size_t>(total));
        double acc = 0.0;
        for (int t = total; t-- > 0;) {
            const double reward =
                (with_process ? fields[i].process[static_cast<std::size_t>(t)] : 0.0) +
                (with_vr ? fields[i].verifiable[static_cast<std::size_t>(t)] : 0.0);
            const double delta = reward + config.gamma * value_at(t + 1) - value_at(t);
            acc = delta + config.gamma * lambda * acc;
            advantages[static_cast<std::size_t>(t)] = acc;
        }
    }
    return out;
}

}  // namespace minform
