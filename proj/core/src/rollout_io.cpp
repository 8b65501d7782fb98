#include "minform/rollout_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "minform/steps.hpp"

namespace minform {

namespace {

using nlohmann::json;

[[noreturn]] void fail_line(int lineno, const std::string& what) {
    throw ValidationError("line " + std::to_string(lineno) + ": " + what);
}

std::string id_field(const json& value, int lineno, const char* name) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    fail_line(lineno, std::string(name) + " must be a string or integer");
}

std::vector<Token> byte_tokens(const std::string& text) {
    std::vector<Token> tokens;
    tokens.reserve(text.size());
    for (unsigned char c : text) tokens.push_back(static_cast<Token>(c));
    return tokens;
}

std::string token_text(const StepRecord& step) {
    std::string text;
    text.reserve(step.tokens.size());
    for (Token token : step.tokens) {
        if (token < 0 || token > 255) {
            throw ValidationError("emit_rollouts: step tokens are not byte-representable");
        }
        text.push_back(static_cast<char>(static_cast<unsigned char>(token)));
    }
    return text;
}

}  // namespace

IngestedRollouts ingest_rollouts(std::istream& in, int max_tokens) {
    IngestedRollouts out;
    std::map<std::string, std::size_t> group_index;
    std::string line;
    int lineno = 0;
    int longest = 0;

    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            fail_line(lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!record.is_object()) fail_line(lineno, "record must be a JSON object");
        if (!record.contains("prompt_id")) fail_line(lineno, "missing prompt_id");
        if (!record.contains("steps")) fail_line(lineno, "missing steps");
        if (!record.contains("step_rewards")) fail_line(lineno, "missing step_rewards");
        for (const auto& [key, value] : record.items()) {
            static const std::set<std::string> allowed = {
                "prompt_id", "response_id", "steps", "step_rewards",
                "answer",    "gt_answer",   "truncated"};
            if (!allowed.contains(key)) fail_line(lineno, "unknown field '" + key + "'");
        }

        const std::string prompt_id = id_field(record["prompt_id"], lineno, "prompt_id");

        std::vector<std::string> step_texts;
        const json& steps_field = record["steps"];
        if (steps_field.is_string()) {
            step_texts = split_steps(steps_field.get<std::string>());
        } else if (steps_field.is_array()) {
            for (const json& step : steps_field) {
                if (!step.is_string()) fail_line(lineno, "steps entries must be strings");
                step_texts.push_back(step.get<std::string>());
            }
        } else {
            fail_line(lineno, "steps must be an array of strings or a raw text field");
        }

        const json& rewards_field = record["step_rewards"];
        if (!rewards_field.is_array()) fail_line(lineno, "step_rewards must be an array");
        if (rewards_field.size() != step_texts.size()) {
            fail_line(lineno, std::to_string(step_texts.size()) + " steps but " +
                                  std::to_string(rewards_field.size()) + " step_rewards");
        }

        ResponseTrace trace;
        int cursor = 0;
        for (std::size_t s = 0; s < step_texts.size(); ++s) {
            if (step_texts[s].empty()) fail_line(lineno, "empty step text");
            if (!rewards_field[s].is_number()) {
                fail_line(lineno, "step_rewards entries must be numbers");
            }
            StepRecord step;
            step.tokens = byte_tokens(step_texts[s]);
            step.raw_process_reward = rewards_field[s].get<double>();
            cursor += static_cast<int>(step.tokens.size());
            step.end_token_index = cursor - 1;
            trace.steps.push_back(std::move(step));
        }
        trace.total_tokens = cursor;
        if (record.contains("truncated")) {
            if (!record["truncated"].is_boolean()) fail_line(lineno, "truncated must be a bool");
            trace.truncated = record["truncated"].get<bool>();
        }
        if (record.contains("answer")) {
            trace.answer = id_field(record["answer"], lineno, "answer");
        }

        std::optional<std::string> gt_answer;
        if (record.contains("gt_answer")) {
            gt_answer = id_field(record["gt_answer"], lineno, "gt_answer");
            trace.verifiable_reward =
                trace.answer.has_value() && *trace.answer == *gt_answer ? 1.0 : 0.0;
        }

        auto [it, inserted] = group_index.try_emplace(prompt_id, out.groups.size());
        if (inserted) {
            ResponseGroup group;
            group.prompt_id = prompt_id;
            group.has_ground_truth = gt_answer.has_value();
            out.groups.push_back(std::move(group));
            if (gt_answer.has_value()) out.gt_answers[prompt_id] = *gt_answer;
        } else {
            const bool group_has_gt = out.groups[it->second].has_ground_truth;
            if (group_has_gt != gt_answer.has_value()) {
                fail_line(lineno, "inconsistent gt_answer presence within prompt '" + prompt_id +
                                      "'");
            }
            if (gt_answer.has_value() && out.gt_answers.at(prompt_id) != *gt_answer) {
                fail_line(lineno, "conflicting gt_answer within prompt '" + prompt_id + "'");
            }
        }
        longest = std::max(longest, trace.total_tokens);
        out.groups[it->second].responses.push_back(std::move(trace));
    }

    RewardConfig config;
    // A derived cap sits one past the longest response so file-provided
    // truncation flags are preserved; an explicit cap re-marks responses
    // that sit exactly on it.
    config.max_tokens = max_tokens > 0 ? max_tokens : longest + 1;
    for (auto& group : out.groups) {
        group = validate_group(std::move(group), config);
    }
    return out;
}

IngestedRollouts ingest_rollouts(const std::filesystem::path& path, int max_tokens) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open rollout file '" + path.string() + "'");
    return ingest_rollouts(in, max_tokens);
}

void emit_rollouts(const std::vector<ResponseGroup>& groups,
                   const std::map<std::string, std::string>& gt_answers, std::ostream& out) {
    for (const ResponseGroup& group : groups) {
        for (std::size_t i = 0; i < group.responses.size(); ++i) {
            const ResponseTrace& trace = group.responses[i];
            json record;
            record["prompt_id"] = group.prompt_id;
            record["response_id"] = std::to_string(i);
            json steps = json::array();
            json rewards = json::array();
            for (const StepRecord& step : trace.steps) {
                steps.push_back(token_text(step));
                rewards.push_back(step.raw_process_reward);
            }
            record["steps"] = std::move(steps);
            record["step_rewards"] = std::move(rewards);
            if (trace.answer.has_value()) record["answer"] = *trace.answer;
            const auto gt = gt_answers.find(group.prompt_id);
            if (gt != gt_answers.end()) record["gt_answer"] = gt->second;
            if (trace.truncated) record["truncated"] = true;
            out << record.dump() << '\n';
        }
    }
}

void emit_rollouts(const std::vector<ResponseGroup>& groups,
                   const std::map<std::string, std::string>& gt_answers,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file '" + path.string() + "'");
    emit_rollouts(groups, gt_answers, out);
}

}  // namespace minform
