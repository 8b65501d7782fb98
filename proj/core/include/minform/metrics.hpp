#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "minform/credit.hpp"
#include "minform/types.hpp"

namespace minform {

// Responses with a repetition score above this count as highly repetitive.
inline constexpr double kHighRepetitionThreshold = 0.2;

// One row of training telemetry. Serialized column names match the field
// names below, in declaration order.
struct MetricRow {
    int step = 0;
    double verifier_accuracy = 0.0;
    double mean_verifiable_reward = 0.0;
    double mean_process_outcome_reward = 0.0;
    double mean_response_length = 0.0;
    double mean_steps = 0.0;
    double clip_ratio = 0.0;
    double clip_ratio_correct = 0.0;
    double clip_ratio_incorrect = 0.0;
    double repetition_score_correct = 0.0;
    double repetition_score_incorrect = 0.0;
    double high_repetition_ratio_correct = 0.0;
    double high_repetition_ratio_incorrect = 0.0;
    double gradient_norm = 0.0;
    double think_only_fraction = 0.0;
    double stop_empty_fraction = 0.0;

    bool operator==(const MetricRow&) const = default;
};

class MetricLog {
public:
    // Rows must arrive in strictly increasing step order with ratio fields
    // inside [0, 1]; violations throw ValidationError.
    void append(const MetricRow& row);

    const std::vector<MetricRow>& rows() const { return rows_; }
    bool empty() const { return rows_.empty(); }
    std::size_t size() const { return rows_.size(); }

    static std::string csv_header();
    void write_csv(std::ostream& out) const;
    std::string to_csv() const;

private:
    std::vector<MetricRow> rows_;
};

// Normalized self-similarity of a token sequence: the sum of pairwise
// longest-common-prefix lengths over all suffix pairs, divided by the sum of
// pairwise shorter-suffix lengths. 1.0 for a constant sequence, 0.0 for
// pairwise-distinct tokens, 0 for sequences shorter than 2. Exact up to 4096
// tokens; longer sequences are estimated from 512 sampled suffix pairs
// (deterministic in the input). Near-synonym repetition is invisible to this
// measure by construction.
double repetition_score(std::span<const Token> tokens);

// Fraction of responses whose repetition score exceeds the threshold.
// Throws on an empty batch.
double high_repetition_ratio(std::span<const ResponseTrace> batch,
                             double threshold = kHighRepetitionThreshold);

// Fraction of responses truncated at the generation cap. Throws on an empty
// batch.
double clip_ratio(std::span<const ResponseTrace> batch);

// Min-form process-aggregated outcome: the sum of transformed rewards, which
// approximates the minimum raw reward at small temperature.
double process_outcome_reward(const ResponseTrace& trace, const TransformedRewards& transformed);

// Sum-form process-aggregated outcome: the plain sum of raw step rewards.
double process_outcome_reward(const ResponseTrace& trace);

}  // namespace minform
