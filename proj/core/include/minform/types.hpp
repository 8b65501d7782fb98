#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace minform {

// Opaque token id. The simulator emits one token per step (the action id);
// ingested text responses use byte values.
using Token = std::int64_t;

// Thrown when ingested data, a config file, or a call argument breaks a
// documented invariant. The message names the offending response / line / key.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RewardMode {
    kPrm,    // dense process rewards only
    kVr,     // sparse verifiable reward only
    kPrmVr,  // process rewards plus verifiable rewards on a fraction of prompts
};

std::string to_string(RewardMode mode);
RewardMode reward_mode_from_string(const std::string& name);

// One step of a response: its tokens, the raw reward the process scorer
// assigned to it, and the position of its final token within the response.
struct StepRecord {
    std::vector<Token> tokens;
    double raw_process_reward = 0.0;
    int end_token_index = 0;  // 0-based index within the whole response
    // Key of the state the policy saw before producing this step. Filled by
    // the simulator; empty for ingested data (value lookups then read 0).
    std::string state_key;

    bool operator==(const StepRecord&) const = default;
};

struct ResponseTrace {
    std::vector<StepRecord> steps;  // may be empty (degenerate 0-step response)
    int total_tokens = 0;
    std::optional<double> verifiable_reward;  // {0, +1} when present
    bool truncated = false;                   // hit the max generation length
    std::optional<std::string> answer;

    int step_count() const { return static_cast<int>(steps.size()); }
    std::vector<Token> all_tokens() const;
    std::vector<double> raw_rewards() const;

    bool operator==(const ResponseTrace&) const = default;
};

// The K responses sampled for one prompt; the unit over which group
// baselines are computed.
struct ResponseGroup {
    std::string prompt_id;
    std::vector<ResponseTrace> responses;
    bool has_ground_truth = false;

    int size() const { return static_cast<int>(responses.size()); }

    bool operator==(const ResponseGroup&) const = default;
};

struct RewardConfig {
    double gamma = 1.0;
    double transform_temperature = 0.1;
    int max_tokens = 32;  // N, the generation cap
    RewardMode reward_mode = RewardMode::kPrmVr;
    double gt_fraction = 0.1;  // fraction of prompts carrying ground truth
    double kl_coefficient = 1e-3;

    bool operator==(const RewardConfig&) const = default;
};

}  // namespace minform
