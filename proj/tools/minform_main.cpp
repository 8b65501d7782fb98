// Experiment runner and file tooling for min-form credit assignment:
//   train              run a simulator experiment from a config file
//   ingest             validate a JSONL rollout file
//   bon                best-of-N selection over ingested rollouts
//   sweep-temperature  re-run one config across transform temperatures
//   metrics            recompute per-response metrics over a rollout file

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "minform/bon.hpp"
#include "minform/experiment.hpp"
#include "minform/metrics.hpp"
#include "minform/rollout_io.hpp"

namespace {

using namespace minform;

std::string fmt(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output file '" + path + "'");
    out << content;
}

int cmd_train(const std::string& config_path, const std::string& output_dir) {
    const ExperimentResult result = run_experiment(config_path, output_dir);
    std::cout << "run directory: " << result.run_dir.string() << "\n"
              << "steps logged:  " << result.log.size() << "\n"
              << "final-window verifier accuracy: " << fmt(final_window_accuracy(result.log))
              << "\n";
    return 0;
}

int cmd_ingest(const std::string& input) {
    const IngestedRollouts rollouts = ingest_rollouts(input);
    std::size_t responses = 0;
    for (const auto& group : rollouts.groups) responses += group.responses.size();
    std::cout << rollouts.groups.size() << " groups, " << responses << " responses, "
              << rollouts.gt_answers.size() << " with ground truth: OK\n";
    return 0;
}

int cmd_bon(const std::string& input, double temperature, const std::string& output) {
    const IngestedRollouts rollouts = ingest_rollouts(input);
    std::ostringstream csv;
    csv << "prompt_id,candidates,bon_index,bon_correct,majority_correct,pass_at_1\n";
    int scored_groups = 0;
    double bon_hits = 0;
    double majority_hits = 0;
    double pass_hits = 0;
    for (const auto& group : rollouts.groups) {
        const std::size_t selected = bon_select(group.responses, temperature);
        const auto gt = rollouts.gt_answers.find(group.prompt_id);
        std::string bon_correct;
        std::string majority_correct;
        std::string pass1;
        if (gt != rollouts.gt_answers.end()) {
            const auto& selected_answer = group.responses[selected].answer;
            const int bon_hit =
                selected_answer.has_value() && *selected_answer == gt->second ? 1 : 0;
            int majority_hit = 0;
            try {
                majority_hit = majority_vote(group.responses) == gt->second ? 1 : 0;
            } catch (const std::invalid_argument&) {
                majority_hit = 0;  // no candidate carries an answer
            }
            const int pass_hit = pass_at_1(group.responses, gt->second);
            bon_correct = std::to_string(bon_hit);
            majority_correct = std::to_string(majority_hit);
            pass1 = std::to_string(pass_hit);
            ++scored_groups;
            bon_hits += bon_hit;
            majority_hits += majority_hit;
            pass_hits += pass_hit;
        }
        csv << group.prompt_id << ',' << group.responses.size() << ',' << selected << ','
            << bon_correct << ',' << majority_correct << ',' << pass1 << '\n';
    }
    write_or_print(output, csv.str());
    if (scored_groups > 0) {
        std::cerr << "groups with ground truth: " << scored_groups
                  << "  bon: " << fmt(bon_hits / scored_groups)
                  << "  majority: " << fmt(majority_hits / scored_groups)
                  << "  pass@1: " << fmt(pass_hits / scored_groups) << "\n";
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& temperatures,
              const std::string& output_dir) {
    const auto sweep_path = sweep_temperature(std::filesystem::path(config_path), temperatures,
                                              output_dir);
    std::cout << "sweep written to " << sweep_path.string() << "\n";
    return 0;
}

int cmd_metrics(const std::string& input, double temperature, const std::string& output) {
    const IngestedRollouts rollouts = ingest_rollouts(input);
    std::ostringstream csv;
    csv << "prompt_id,response_index,steps,tokens,truncated,repetition_score,"
           "outcome_sum_form,outcome_min_form,verifiable_reward\n";
    for (const auto& group : rollouts.groups) {
        for (std::size_t i = 0; i < group.responses.size(); ++i) {
            const ResponseTrace& trace = group.responses[i];
            const auto tokens = trace.all_tokens();
            double min_form_outcome = 0.0;
            if (!trace.steps.empty()) {
                min_form_outcome = process_outcome_reward(
                    trace, transform_rewards(trace.raw_rewards(), temperature));
            }
            csv << group.prompt_id << ',' << i << ',' << trace.step_count() << ','
                << trace.total_tokens << ',' << (trace.truncated ? 1 : 0) << ','
                << fmt(repetition_score(tokens)) << ',' << fmt(process_outcome_reward(trace))
                << ',' << fmt(min_form_outcome) << ',';
            if (trace.verifiable_reward.has_value()) csv << fmt(*trace.verifiable_reward);
            csv << '\n';
        }
    }
    write_or_print(output, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"min-form credit assignment testbed"};
    app.require_subcommand(1);

    std::string config_path;
    std::string input_path;
    std::string output_path;
    std::string output_dir;
    double temperature = 0.1;
    std::vector<double> temperatures;

    auto* train_cmd = app.add_subcommand("train", "run a simulator experiment");
    train_cmd->add_option("-c,--config", config_path, "experiment config file")->required();
    train_cmd->add_option("-o,--output", output_dir, "override the config's output_dir");

    auto* ingest_cmd = app.add_subcommand("ingest", "validate a JSONL rollout file");
    ingest_cmd->add_option("-i,--input", input_path, "rollout JSONL file")->required();

    auto* bon_cmd = app.add_subcommand("bon", "best-of-N selection over rollouts");
    bon_cmd->add_option("-i,--input", input_path, "rollout JSONL file")->required();
    bon_cmd->add_option("-T,--temperature", temperature, "transform temperature");
    bon_cmd->add_option("-o,--output", output_path, "CSV output path (default stdout)");

    auto* sweep_cmd = app.add_subcommand("sweep-temperature",
                                         "run one config across transform temperatures");
    sweep_cmd->add_option("-c,--config", config_path, "experiment config file")->required();
    sweep_cmd->add_option("-t,--temperatures", temperatures, "temperatures to sweep")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("-o,--output", output_dir, "sweep output directory")->required();

    auto* metrics_cmd = app.add_subcommand("metrics", "recompute metrics over a rollout file");
    metrics_cmd->add_option("-i,--input", input_path, "rollout JSONL file")->required();
    metrics_cmd->add_option("-T,--temperature", temperature, "transform temperature");
    metrics_cmd->add_option("-o,--output", output_path, "CSV output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, output_dir);
        if (ingest_cmd->parsed()) return cmd_ingest(input_path);
        if (bon_cmd->parsed()) return cmd_bon(input_path, temperature, output_path);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, temperatures, output_dir);
        if (metrics_cmd->parsed()) return cmd_metrics(input_path, temperature, output_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
