#include "minform/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace minform {

namespace {

constexpr std::size_t kExactLcpLimit = 4096;
constexpr std::size_t kSampledPairs = 512;

double exact_repetition_score(std::span<const Token> tokens) {
    const std::size_t n = tokens.size();
    // lcp(i, j) = tokens[i] == tokens[j] ? lcp(i+1, j+1) + 1 : 0, swept from
    // the back so only one row is live at a time.
    std::vector<std::size_t> next(n + 1, 0);
    std::vector<std::size_t> cur(n + 1, 0);
    long double lcp_sum = 0.0L;
    long double min_sum = 0.0L;
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = n; j-- > i + 1;) {
            cur[j] = tokens[i] == tokens[j] ? next[j + 1] + 1 : 0;
            lcp_sum += static_cast<long double>(cur[j]);
            min_sum += static_cast<long double>(n - j);  // |suffix_j| <= |suffix_i|
        }
        std::swap(next, cur);
    }
    if (min_sum == 0.0L) return 0.0;
    return static_cast<double>(lcp_sum / min_sum);
}

double sampled_repetition_score(std::span<const Token> tokens) {
    const std::size_t n = tokens.size();
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ n);
    auto draw = [&rng](std::size_t bound) { return static_cast<std::size_t>(rng() % bound); };
    long double lcp_sum = 0.0L;
    long double min_sum = 0.0L;
    for (std::size_t pair = 0; pair < kSampledPairs; ++pair) {
        std::size_t i = draw(n);
        std::size_t j = draw(n);
        while (j == i) j = draw(n);
        if (i > j) std::swap(i, j);
        std::size_t lcp = 0;
        while (j + lcp < n && tokens[i + lcp] == tokens[j + lcp]) ++lcp;
        lcp_sum += static_cast<long double>(lcp);
        min_sum += static_cast<long double>(n - j);
    }
    if (min_sum == 0.0L) return 0.0;
    return static_cast<double>(lcp_sum / min_sum);
}

}  // namespace

double repetition_score(std::span<const Token> tokens) {
    if (tokens.size() < 2) return 0.0;
    if (tokens.size() <= kExactLcpLimit) return exact_repetition_score(tokens);
    return sampled_repetition_score(tokens);
}

double high_repetition_ratio(std::span<const ResponseTrace> batch, double threshold) {
    if (batch.empty()) throw std::invalid_argument("high_repetition_ratio: empty batch");
    std::size_t high = 0;
    for (const auto& trace : batch) {
        const auto tokens = trace.all_tokens();
        if (repetition_score(tokens) > threshold) ++high;
    }
    return static_cast<double>(high) / static_cast<double>(batch.size());
}

double clip_ratio(std::span<const ResponseTrace> batch) {
    if (batch.empty()) throw std::invalid_argument("clip_ratio: empty batch");
    std::size_t clipped = 0;
    for (const auto& trace : batch) {
        if (trace.truncated) ++clipped;
    }
    return static_cast<double>(clipped) / static_cast<double>(batch.size());
}

double process_outcome_reward(const ResponseTrace& trace, const TransformedRewards& transformed) {
    if (transformed.values.size() != trace.steps.size()) {
        throw ValidationError("process_outcome_reward: " +
                              std::to_string(transformed.values.size()) +
                              " transformed values for " + std::to_string(trace.steps.size()) +
                              " steps");
    }
    double sum = 0.0;
    for (double v : transformed.values) sum += v;
    return sum;
}

double process_outcome_reward(const ResponseTrace& trace) {
    double sum = 0.0;
    for (const auto& step : trace.steps) sum += step.raw_process_reward;
    return sum;
}

namespace {

void check_ratio(double value, const char* name) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw ValidationError(std::string("MetricLog: ") + name + " outside [0, 1]");
    }
}

void append_double(std::string& line, double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    line += buf;
}

}  // namespace

void MetricLog::append(const MetricRow& row) {
    if (!rows_.empty() && row.step <= rows_.back().step) {
        throw ValidationError("MetricLog: steps must be strictly increasing");
    }
    check_ratio(row.verifier_accuracy, "verifier_accuracy");
    check_ratio(row.clip_ratio, "clip_ratio");
    check_ratio(row.clip_ratio_correct, "clip_ratio_correct");
    check_ratio(row.clip_ratio_incorrect, "clip_ratio_incorrect");
    check_ratio(row.high_repetition_ratio_correct, "high_repetition_ratio_correct");
    check_ratio(row.high_repetition_ratio_incorrect, "high_repetition_ratio_incorrect");
    check_ratio(row.think_only_fraction, "think_only_fraction");
    check_ratio(row.stop_empty_fraction, "stop_empty_fraction");
    rows_.push_back(row);
}

std::string MetricLog::csv_header() {
    return "step,verifier_accuracy,mean_verifiable_reward,mean_process_outcome_reward,"
           "mean_response_length,mean_steps,clip_ratio,clip_ratio_correct,clip_ratio_incorrect,"
           "repetition_score_correct,repetition_score_incorrect,high_repetition_ratio_correct,"
           "high_repetition_ratio_incorrect,gradient_norm,think_only_fraction,stop_empty_fraction";
}

void MetricLog::write_csv(std::ostream& out) const { out << to_csv(); }

std::string MetricLog::to_csv() const {
    std::string out = csv_header();
    out += '\n';
    for (const MetricRow& row : rows_) {
        std::string line = std::to_string(row.step);
        for (double value : {row.verifier_accuracy, row.mean_verifiable_reward,
                             row.mean_process_outcome_reward, row.mean_response_length,
                             row.mean_steps, row.clip_ratio, row.clip_ratio_correct,
                             row.clip_ratio_incorrect, row.repetition_score_correct,
                             row.repetition_score_incorrect, row.high_repetition_ratio_correct,
                             row.high_repetition_ratio_incorrect, row.gradient_norm,
                             row.think_only_fraction, row.stop_empty_fraction}) {
            line += ',';
            append_double(line, value);
        }
        out += line;
        out += '\n';
    }
    return out;
}

}  // namespace minform
