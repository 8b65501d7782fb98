#pragma once

#include <span>
#include <vector>

#include "minform/types.hpp"

namespace minform {

// Temperatures below this are rejected instead of special-cased to an exact
// argmax: one code path, whose limit behavior is property-tested.
inline constexpr double kMinTransformTemperature = 1e-8;

// Per-step rewards after the softmin reweighting. As temperature -> 0+ all
// weight concentrates on the worst step, so the values sum to min(raw).
struct TransformedRewards {
    std::vector<double> values;
    double temperature_used = 0.0;
};

// Step rewards spread over token positions: the transformed process reward
// sits on each step's final token, the verifiable reward on the last token
// of the response, zeros everywhere else.
struct TokenRewardField {
    std::vector<double> process;
    std::vector<double> verifiable;
};

// values[i] = softmax_i(-raw/T) * raw[i], computed with a max-shifted
// softmax. Throws on an empty list, non-finite entries, or T below
// kMinTransformTemperature.
TransformedRewards transform_rewards(std::span<const double> raw, double temperature);

// Index of the minimum reward; ties break to the first occurrence.
std::size_t worst_step_index(std::span<const double> raw);

// Single-trajectory discounted return sum_{i>=t} gamma^(i-t) * raw[i].
double sum_form_return(std::span<const double> raw, double gamma, std::size_t t);

// min(raw[t..n)) for t at or before the worst step, 0 after it.
double min_form_return(std::span<const double> raw, std::size_t t);

// Places one step value per step-final token and the verifiable reward on
// the response's last token, gated by config.reward_mode (VR zeroes the
// process vector, PRM zeroes the verifiable vector).
TokenRewardField place_token_rewards(const ResponseTrace& trace,
                                     std::span<const double> step_values,
                                     const RewardConfig& config);

inline TokenRewardField place_token_rewards(const ResponseTrace& trace,
                                            const TransformedRewards& transformed,
                                            const RewardConfig& config) {
    return place_token_rewards(trace, std::span<const double>(transformed.values), config);
}

}  // namespace minform
