#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "minform/credit.hpp"
#include "minform/types.hpp"

namespace minform {

namespace estimator_tag {
inline constexpr const char* kRloo = "rloo";
inline constexpr const char* kStepBaseline = "step-baseline";
inline constexpr const char* kGrpo = "grpo";
inline constexpr const char* kReinforcePp = "reinforce++";
inline constexpr const char* kGae = "gae";
}  // namespace estimator_tag

// Per-token advantages for every response in a group, one vector per
// response, each of that response's token length.
struct AdvantageField {
    std::vector<std::vector<double>> per_response;
    std::string estimator_tag;
    // Set on estimators known to reproduce a hacking behavior (the
    // step-level baseline is biased against the number of steps).
    bool hazardous = false;
};

// Tabular value estimates keyed by simulator state key; absent keys read 0.
// Stands in for the learned value network that generalized advantage
// estimation normally requires.
class ValueTable {
public:
    explicit ValueTable(double learning_rate = 0.1) : learning_rate_(learning_rate) {}

    double value(const std::string& key) const;
    void set(const std::string& key, double value);
    double learning_rate() const { return learning_rate_; }
    const std::map<std::string, double>& values() const { return values_; }

    // One TD(0) sweep over every token transition in the group. Tokens
    // without a state key (ingested data) are skipped.
    void td0_update(const ResponseGroup& group, std::span<const TokenRewardField> fields,
                    const RewardConfig& config);

private:
    std::map<std::string, double> values_;
    double learning_rate_ = 0.1;
};

// Leave-one-out advantages with the token-level baseline normalized by the
// max generation length. Requires K >= 2.
AdvantageField rloo_advantages(const ResponseGroup& group,
                               std::span<const TokenRewardField> fields,
                               const RewardConfig& config);

// Leave-one-out advantages with the per-step baseline (others' summed
// process reward divided by their step count, subtracted at every token of
// the suffix). Biased against the number of steps; flagged hazardous.
AdvantageField step_baseline_advantages(const ResponseGroup& group,
                                        std::span<const TokenRewardField> fields,
                                        std::span<const int> step_counts,
                                        const RewardConfig& config);

// Group-normalized advantages: (value - group mean) / group std, population
// convention, with near-zero std zeroing the corresponding term.
AdvantageField grpo_advantages(const ResponseGroup& group,
                               std::span<const TokenRewardField> fields,
                               const RewardConfig& config);

// Baseline-free advantages: verifiable reward plus the discounted suffix sum
// of token process rewards.
AdvantageField reinforce_pp_advantages(const ResponseGroup& group,
                                       std::span<const TokenRewardField> fields,
                                       const RewardConfig& config);

// Generalized advantage estimation over combined token rewards with a
// tabular value function; V of a missing key is 0, terminal V is 0.
AdvantageField gae_advantages(const ResponseGroup& group,
                              std::span<const TokenRewardField> fields, const ValueTable& values,
                              double lambda, const RewardConfig& config);

}  // namespace minform
