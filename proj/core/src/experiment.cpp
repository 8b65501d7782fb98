#include "minform/experiment.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "minform/simulator.hpp"

namespace minform {

namespace {

using nlohmann::json;

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output file '" + path.string() + "'");
    out << content;
}

json policy_to_json(const PolicyTable& policy) {
    json doc;
    doc["rng_seed"] = policy.rng_seed();
    doc["init_logits"] = policy.init_logits();
    json states = json::object();
    for (const auto& [key, logits] : policy.states()) {
        states[key] = logits;
    }
    doc["states"] = std::move(states);
    return doc;
}

void write_snapshot(const std::filesystem::path& dir, int step, const PolicyTable& policy) {
    char name[64];
    std::snprintf(name, sizeof(name), "policy_step_%06d.json", step);
    write_text_file(dir / name, policy_to_json(policy).dump(2) + "\n");
}

std::string format_temperature(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", t);
    return buf;
}

}  // namespace

double final_window_accuracy(const MetricLog& log, int window) {
    if (log.empty()) throw ValidationError("final_window_accuracy: empty log");
    const auto& rows = log.rows();
    const std::size_t take = std::min(rows.size(), static_cast<std::size_t>(window));
    double sum = 0.0;
    for (std::size_t i = rows.size() - take; i < rows.size(); ++i) {
        sum += rows[i].verifier_accuracy;
    }
    return sum / static_cast<double>(take);
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& output_override) {
    ExperimentResult result;
    result.run_dir =
        output_override.empty() ? std::filesystem::path(config.output_dir) : output_override;
    std::filesystem::create_directories(result.run_dir);

    write_text_file(result.run_dir / "config.resolved", serialize_experiment_config(config));

    const int save_interval = config.save_interval;
    const std::filesystem::path run_dir = result.run_dir;
    TrainObserver observer = [&](int step, const PolicyTable& policy, const MetricRow&) {
        if (step % save_interval == 0 || step == config.train.steps) {
            write_snapshot(run_dir, step, policy);
        }
    };

    result.log = train(config.train, observer);
    write_text_file(result.run_dir / "metrics.csv", result.log.to_csv());
    return result;
}

ExperimentResult run_experiment(const std::filesystem::path& config_path,
                                const std::filesystem::path& output_override) {
    return run_experiment(load_experiment_config(config_path), output_override);
}

std::filesystem::path sweep_temperature(const ExperimentConfig& base,
                                        std::span<const double> temperatures,
                                        const std::filesystem::path& output_dir) {
    if (temperatures.empty()) {
        throw ValidationError("sweep_temperature: need at least one temperature");
    }
    for (double t : temperatures) {
        if (!(t > 0.0)) throw ValidationError("sweep_temperature: T must be positive");
    }
    std::filesystem::create_directories(output_dir);

    std::string csv = "transform_temperature,final_window_verifier_accuracy\n";
    for (double t : temperatures) {
        ExperimentConfig config = base;
        config.train.reward.transform_temperature = t;
        const std::filesystem::path run_dir = output_dir / ("T_" + format_temperature(t));
        config.output_dir = run_dir.string();
        const ExperimentResult result = run_experiment(config);
        char line[80];
        std::snprintf(line, sizeof(line), "%.17g,%.17g\n", t,
                      final_window_accuracy(result.log));
        csv += line;
    }
    const std::filesystem::path sweep_path = output_dir / "sweep.csv";
    write_text_file(sweep_path, csv);
    return sweep_path;
}

std::filesystem::path sweep_temperature(const std::filesystem::path& config_path,
                                        std::span<const double> temperatures,
                                        const std::filesystem::path& output_dir) {
    return sweep_temperature(load_experiment_config(config_path), temperatures, output_dir);
}

}  // namespace minform
