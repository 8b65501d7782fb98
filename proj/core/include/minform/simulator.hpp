#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minform/advantage.hpp"
#include "minform/metrics.hpp"
#include "minform/types.hpp"

namespace minform {

// One simulator step is one token; the token id is the action id.
enum class StepAction : int {
    kThink = 0,
    kSolveGood = 1,
    kSolveBad = 2,
    kRepeat = 3,
    kStop = 4,
    kStopEmpty = 5,  // only legal as the first action
};
inline constexpr int kNumActions = 6;

std::string to_string(StepAction action);

struct SimState {
    int step_count = 0;
    std::array<int, kNumActions> counts{};
    std::optional<StepAction> last_action;
    bool terminal = false;

    // Coarse feature key: (capped step count, last action, capped THINK
    // count, SOLVE_BAD-seen flag). Small enough for exact tabular gradients,
    // rich enough to express the hacking behaviors.
    std::string key() const;

    // STOP_EMPTY is only legal first; STOP only legal afterwards.
    std::vector<StepAction> legal_actions() const;

    void apply(StepAction action, int max_steps);
};

// Scripted causal process scorer. Rewards depend only on the prefix up to
// and including the scored step. Values are configurable; these defaults
// encode the incentive structure (thinking scores high early, an empty
// first "conclusion" step scores high because the scorer cannot see that
// nothing follows).
struct PrmTable {
    double think_early = 0.9;
    double think_late = 0.2;
    int think_early_limit = 3;
    double solve_good_early = 0.6;
    double solve_good_late = 0.6;
    int solve_good_limit = 3;
    double solve_bad = -0.6;
    double repeat_base = -0.1;
    double repeat_slope = 0.2;
    int repeat_cap = 4;
    double stop = 0.1;
    double stop_empty = 0.9;

    bool operator==(const PrmTable&) const = default;
};

// Tabular softmax policy over simulator actions. States are materialized
// lazily by the gradient step; unseen states read the init logits, so
// rollouts never mutate the table.
class PolicyTable {
public:
    PolicyTable() = default;
    PolicyTable(const std::array<double, kNumActions>& init_logits, std::uint64_t rng_seed)
        : init_logits_(init_logits), rng_seed_(rng_seed) {}

    std::array<double, kNumActions> logits_for(const std::string& state_key) const;
    void set_logits(const std::string& state_key, const std::array<double, kNumActions>& logits);

    const std::map<std::string, std::array<double, kNumActions>>& states() const {
        return states_;
    }
    const std::array<double, kNumActions>& init_logits() const { return init_logits_; }
    std::uint64_t rng_seed() const { return rng_seed_; }

    bool operator==(const PolicyTable&) const = default;

private:
    std::array<double, kNumActions> init_logits_{};
    std::uint64_t rng_seed_ = 0;
    std::map<std::string, std::array<double, kNumActions>> states_;
};

// Sampling probabilities over the legal actions (max-shifted softmax).
std::vector<double> action_probabilities(const std::array<double, kNumActions>& logits,
                                         std::span<const StepAction> legal);

// Action kinds of a simulator trace, decoded from its one-token steps.
std::vector<StepAction> actions_of(const ResponseTrace& trace);

class SynthEnv {
public:
    SynthEnv() = default;
    explicit SynthEnv(PrmTable table, bool pseudo_positive = false)
        : table_(table), pseudo_positive_(pseudo_positive) {}

    // Process reward for taking `action` in `state`. Throws on an illegal
    // action. Causal: depends only on the prefix encoded in the state.
    double prm_score(const SimState& state, StepAction action) const;

    // +1 iff the trace contains a SOLVE_GOOD, no SOLVE_BAD, ends with STOP
    // and repeats fewer than 3 times. With pseudo_positive enabled,
    // repeat-heavy traces (>= 3 REPEATs, a SOLVE_GOOD, no SOLVE_BAD) also
    // pass regardless of how they end: the rule verifier is fooled by
    // repetition. Throws on a non-terminal trace.
    int verify(const ResponseTrace& trace) const;

    // Samples K terminal traces (one step = one token, capped at
    // config.max_tokens), attaches per-step process rewards and, when this
    // prompt draws ground truth (probability config.gt_fraction, fixed by
    // seed), the verifier result. Deterministic given (policy, seed).
    ResponseGroup rollout_group(const PolicyTable& policy, const RewardConfig& config, int k,
                                std::uint64_t seed, std::string prompt_id = {}) const;

    const PrmTable& table() const { return table_; }
    bool pseudo_positive() const { return pseudo_positive_; }

private:
    PrmTable table_{};
    bool pseudo_positive_ = false;
};

// Gradient of the surrogate objective
//   J = sum A * log pi(a|s)  -  kl_coefficient * sum_visited KL(pi || pi_init)
// with respect to the logits, keyed by state. Requires one-token steps.
std::map<std::string, std::array<double, kNumActions>> policy_gradient(
    const PolicyTable& policy, std::span<const ResponseGroup> groups,
    std::span<const AdvantageField> advantages, const PolicyTable& initial_policy,
    double kl_coefficient);

// The objective the gradient above differentiates; used by the
// finite-difference check.
double surrogate_objective(const PolicyTable& policy, std::span<const ResponseGroup> groups,
                           std::span<const AdvantageField> advantages,
                           const PolicyTable& initial_policy, double kl_coefficient);

// Applies exactly one ascent step on the surrogate and returns the L2 norm
// of the applied gradient.
double policy_gradient_step(PolicyTable& policy, std::span<const ResponseGroup> groups,
                            std::span<const AdvantageField> advantages,
                            const PolicyTable& initial_policy, double learning_rate,
                            double kl_coefficient);

enum class CreditMode { kSum, kMin };

std::string to_string(CreditMode mode);
CreditMode credit_mode_from_string(const std::string& name);

// Initial logits per action kind: degenerate behaviors (SOLVE_BAD, REPEAT,
// and especially empty responses) start rare, as they would for a
// pretrained model.
inline constexpr std::array<double, kNumActions> kDefaultInitLogits = {0.0,  0.0, -1.0,
                                                                       -1.0, 0.0, -5.0};

struct TrainOptions {
    RewardConfig reward;
    std::string estimator = estimator_tag::kRloo;
    CreditMode credit_mode = CreditMode::kMin;
    int steps = 300;
    std::uint64_t seed = 7;
    int prompts_per_step = 8;
    int group_size = 8;
    double learning_rate = 5e-2;
    double gae_lambda = 0.95;
    double value_learning_rate = 0.1;
    bool pseudo_positive = false;
    PrmTable prm{};
    std::array<double, kNumActions> init_logits = kDefaultInitLogits;

    bool operator==(const TrainOptions&) const = default;
};

using TrainObserver = std::function<void(int step, const PolicyTable&, const MetricRow&)>;

// Runs the full loop (rollout, score, transform or not, place, estimate
// advantages, one gradient step) and logs one metric row per training step.
// credit_mode kMin transforms rewards before placement; kSum places the raw
// rewards directly. Deterministic given the options.
MetricLog train(const TrainOptions& options, const TrainObserver& observer = {});

// Seed derivation for counter-split substreams.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace minform
