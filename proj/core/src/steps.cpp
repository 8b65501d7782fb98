#include "minform/steps.hpp"

#include <cmath>
#include <sstream>

namespace minform {

std::string to_string(RewardMode mode) {
    switch (mode) {
        case RewardMode::kPrm: return "prm";
        case RewardMode::kVr: return "vr";
        case RewardMode::kPrmVr: return "prm_vr";
    }
    throw std::logic_error("unknown reward mode");
}

RewardMode reward_mode_from_string(const std::string& name) {
    if (name == "prm") return RewardMode::kPrm;
    if (name == "vr") return RewardMode::kVr;
    if (name == "prm_vr") return RewardMode::kPrmVr;
    throw ValidationError("invalid reward_mode '" + name + "': expected one of {prm, vr, prm_vr}");
}

std::vector<Token> ResponseTrace::all_tokens() const {
    std::vector<Token> out;
    out.reserve(static_cast<std::size_t>(total_tokens));
    for (const auto& step : steps) {
        out.insert(out.end(), step.tokens.begin(), step.tokens.end());
    }
    return out;
}

std::vector<double> ResponseTrace::raw_rewards() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& step : steps) out.push_back(step.raw_process_reward);
    return out;
}

std::vector<std::string> split_steps(std::string_view text) {
    static constexpr std::string_view kDelimiter = "\n\n";
    std::vector<std::string> steps;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t delim = text.find(kDelimiter, pos);
        const std::string_view segment = delim == std::string_view::npos
                                             ? text.substr(pos)
                                             : text.substr(pos, delim - pos);
        if (!segment.empty()) steps.emplace_back(segment);
        if (delim == std::string_view::npos) break;
        pos = delim + kDelimiter.size();
    }
    return steps;
}

namespace {

[[noreturn]] void fail(int response_index, const std::string& what) {
    std::ostringstream msg;
    msg << "response " << response_index << ": " << what;
    throw ValidationError(msg.str());
}

void validate_trace(const ResponseTrace& trace, int index, const RewardConfig& config) {
    int prev_end = -1;
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
        const StepRecord& step = trace.steps[s];
        if (!std::isfinite(step.raw_process_reward)) {
            fail(index, "non-finite process reward at step " + std::to_string(s));
        }
        if (step.raw_process_reward < -1.0 || step.raw_process_reward > 1.0) {
            fail(index, "process reward " + std::to_string(step.raw_process_reward) +
                            " outside [-1, 1] at step " + std::to_string(s));
        }
        if (step.end_token_index <= prev_end) {
            fail(index, "end_token_index not strictly increasing at step " + std::to_string(s));
        }
        if (!step.tokens.empty()) {
            const int expected = prev_end + static_cast<int>(step.tokens.size());
            if (step.end_token_index != expected) {
                fail(index, "end_token_index inconsistent with token count at step " +
                                std::to_string(s));
            }
        }
        prev_end = step.end_token_index;
    }
    if (!trace.steps.empty()) {
        if (trace.total_tokens != trace.steps.back().end_token_index + 1) {
            fail(index, "total_tokens does not equal last step's end_token_index + 1");
        }
    } else if (trace.total_tokens != 0) {
        fail(index, "total_tokens nonzero on a 0-step response");
    }
    if (trace.total_tokens > config.max_tokens) {
        fail(index, "total_tokens " + std::to_string(trace.total_tokens) + " exceeds max_tokens " +
                        std::to_string(config.max_tokens));
    }
    if (trace.verifiable_reward.has_value()) {
        const double v = *trace.verifiable_reward;
        if (v != 0.0 && v != 1.0) {
            fail(index, "verifiable_reward " + std::to_string(v) + " outside {0, +1}");
        }
    }
}

}  // namespace

ResponseGroup validate_group(ResponseGroup group, const RewardConfig& config) {
    for (int i = 0; i < group.size(); ++i) {
        const ResponseTrace& trace = group.responses[static_cast<std::size_t>(i)];
        validate_trace(trace, i, config);
        if (!group.has_ground_truth && trace.verifiable_reward.has_value()) {
            fail(i, "verifiable_reward present but group has_ground_truth is false");
        }
    }
    for (auto& trace : group.responses) {
        if (trace.total_tokens == config.max_tokens) trace.truncated = true;
    }
    return group;
}

}  // namespace minform
