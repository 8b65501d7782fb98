#include "minform/credit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minform {

TransformedRewards transform_rewards(std::span<const double> raw, double temperature) {
    if (raw.empty()) throw std::invalid_argument("transform_rewards: no steps");
    if (!std::isfinite(temperature) || temperature < kMinTransformTemperature) {
        throw std::invalid_argument("transform_rewards: temperature must be >= 1e-8");
    }
    for (double r : raw) {
        if (!std::isfinite(r)) throw std::invalid_argument("transform_rewards: non-finite reward");
    }

    // softmax over -raw/T, shifted by the max exponent
    std::vector<double> exponents(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) exponents[i] = -raw[i] / temperature;
    const double shift = *std::max_element(exponents.begin(), exponents.end());

    double normalizer = 0.0;
    std::vector<double> weights(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        weights[i] = std::exp(exponents[i] - shift);
        normalizer += weights[i];
    }

    TransformedRewards out;
    out.temperature_used = temperature;
    out.values.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out.values[i] = weights[i] / normalizer * raw[i];
    }
    return out;
}

std::size_t worst_step_index(std::span<const double> raw) {
    if (raw.empty()) throw std::invalid_argument("worst_step_index: empty reward list");
    std::size_t w = 0;
    for (std::size_t i = 1; i < raw.size(); ++i) {
        if (raw[i] < raw[w]) w = i;  // strict: ties keep the first occurrence
    }
    return w;
}

double sum_form_return(std::span<const double> raw, double gamma, std::size_t t) {
    if (t >= raw.size()) throw std::out_of_range("sum_form_return: step index out of range");
    double acc = 0.0;
    for (std::size_t i = raw.size(); i-- > t;) {
        acc = raw[i] + gamma * acc;
    }
    return acc;
}

double min_form_return(std::span<const double> raw, std::size_t t) {
    if (t >= raw.size()) throw std::out_of_range("min_form_return: step index out of range");
    const std::size_t w = worst_step_index(raw);
    if (t > w) return 0.0;
    return *std::min_element(raw.begin() + static_cast<std::ptrdiff_t>(t), raw.end());
}

TokenRewardField place_token_rewards(const ResponseTrace& trace,
                                     std::span<const double> step_values,
                                     const RewardConfig& config) {
    if (step_values.size() != trace.steps.size()) {
        throw ValidationError("place_token_rewards: " + std::to_string(step_values.size()) +
                              " step values for " + std::to_string(trace.steps.size()) + " steps");
    }
    TokenRewardField field;
    field.process.assign(static_cast<std::size_t>(trace.total_tokens), 0.0);
    field.verifiable.assign(static_cast<std::size_t>(trace.total_tokens), 0.0);

    if (config.reward_mode != RewardMode::kVr) {
        for (std::size_t i = 0; i < trace.steps.size(); ++i) {
            const int end = trace.steps[i].end_token_index;
            if (end < 0 || end >= trace.total_tokens) {
                throw ValidationError("place_token_rewards: end_token_index out of range");
            }
            field.process[static_cast<std::size_t>(end)] = step_values[i];
        }
    }
    if (config.reward_mode != RewardMode::kPrm && trace.verifiable_reward.has_value() &&
        trace.total_tokens > 0) {
        field.verifiable[static_cast<std::size_t>(trace.total_tokens - 1)] =
            *trace.verifiable_reward;
    }
    return field;
}

}  // namespace minform
