#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minform/types.hpp"

namespace minform {

// A candidate response with its aggregated outcome score. Candidates with no
// steps score -inf so a degenerate response never wins selection.
struct ScoredCandidate {
    ResponseTrace trace;
    double outcome_score = 0.0;
    std::optional<std::string> answer;
};

// Transforms each candidate's raw step rewards at the given temperature and
// sums them into an outcome score.
std::vector<ScoredCandidate> score_candidates(std::span<const ResponseTrace> candidates,
                                              double temperature);

// Index of the candidate with the highest outcome score; ties break to the
// smallest index. Throws on an empty candidate list.
std::size_t bon_select(std::span<const ResponseTrace> candidates, double temperature);

// Most frequent answer among candidates that carry one; ties break to the
// answer seen earliest in the list. Throws when no candidate has an answer.
std::string majority_vote(std::span<const ResponseTrace> candidates);

// 1 iff the first candidate's answer equals correct_answer.
int pass_at_1(std::span<const ResponseTrace> candidates, const std::string& correct_answer);

}  // namespace minform
