#include "minform/bon.hpp"

#include <limits>
#include <map>
#include <stdexcept>

#include "minform/credit.hpp"

namespace minform {

std::vector<ScoredCandidate> score_candidates(std::span<const ResponseTrace> candidates,
                                              double temperature) {
    std::vector<ScoredCandidate> scored;
    scored.reserve(candidates.size());
    for (const ResponseTrace& trace : candidates) {
        ScoredCandidate candidate;
        candidate.trace = trace;
        candidate.answer = trace.answer;
        if (trace.steps.empty()) {
            candidate.outcome_score = -std::numeric_limits<double>::infinity();
        } else {
            const auto raw = trace.raw_rewards();
            const auto transformed = transform_rewards(raw, temperature);
            double sum = 0.0;
            for (double v : transformed.values) sum += v;
            candidate.outcome_score = sum;
        }
        scored.push_back(std::move(candidate));
    }
    return scored;
}

std::size_t bon_select(std::span<const ResponseTrace> candidates, double temperature) {
    if (candidates.empty()) throw std::invalid_argument("bon_select: empty candidate list");
    const auto scored = score_candidates(candidates, temperature);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scored.size(); ++i) {
        if (scored[i].outcome_score > scored[best].outcome_score) best = i;
    }
    return best;
}

std::string majority_vote(std::span<const ResponseTrace> candidates) {
    if (candidates.empty()) throw std::invalid_argument("majority_vote: empty candidate list");
    struct Tally {
        int count = 0;
        std::size_t first_index = 0;
    };
    std::map<std::string, Tally> tallies;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i].answer.has_value()) continue;
        auto [it, inserted] = tallies.try_emplace(*candidates[i].answer);
        if (inserted) it->second.first_index = i;
        ++it->second.count;
    }
    if (tallies.empty()) throw std::invalid_argument("majority_vote: no candidate has an answer");
    const std::string* best = nullptr;
    for (const auto& [answer, tally] : tallies) {
        if (best == nullptr || tally.count > tallies.at(*best).count ||
            (tally.count == tallies.at(*best).count &&
             tally.first_index < tallies.at(*best).first_index)) {
            best = &answer;
        }
    }
    return *best;
}

int pass_at_1(std::span<const ResponseTrace> candidates, const std::string& correct_answer) {
    if (candidates.empty()) return 0;
    const auto& first = candidates.front().answer;
    return first.has_value() && *first == correct_answer ? 1 : 0;
}

}  // namespace minform
