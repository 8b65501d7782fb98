#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "minform/types.hpp"

namespace minform {

// Rollouts read from a JSONL file. groups preserves first-seen prompt order
// and file order within each group; gt_answers maps prompt_id to the
// ground-truth answer for prompts that carried one.
struct IngestedRollouts {
    std::vector<ResponseGroup> groups;
    std::map<std::string, std::string> gt_answers;
};

// Reads line-delimited records, one response per line:
//   {"prompt_id": ..., "response_id": ..., "steps": [text, ...] | "raw text",
//    "step_rewards": [...], "answer"?: ..., "gt_answer"?: ..., "truncated"?: bool}
// A steps string is split at double line breaks. Step text is tokenized as
// bytes. Verifiable rewards are computed from answer/gt_answer matches.
// Malformed lines throw ValidationError with the line number. Every group is
// validated; max_tokens 0 derives a cap one past the longest response so
// explicit truncation flags survive the round trip.
IngestedRollouts ingest_rollouts(const std::filesystem::path& path, int max_tokens = 0);
IngestedRollouts ingest_rollouts(std::istream& in, int max_tokens = 0);

// Writes groups in the schema above (steps as text arrays). Requires byte
// tokens; emit followed by ingest reproduces the groups exactly.
void emit_rollouts(const std::vector<ResponseGroup>& groups,
                   const std::map<std::string, std::string>& gt_answers, std::ostream& out);
void emit_rollouts(const std::vector<ResponseGroup>& groups,
                   const std::map<std::string, std::string>& gt_answers,
                   const std::filesystem::path& path);

}  // namespace minform
