#pragma once

#include <filesystem>
#include <span>

#include "minform/config.hpp"
#include "minform/metrics.hpp"

namespace minform {

struct ExperimentResult {
    std::filesystem::path run_dir;
    MetricLog log;
};

// Runs one training experiment: writes config.resolved (sufficient to re-run
// bit-exactly), metrics.csv, and a policy snapshot every save_interval steps
// plus a final one. An empty output_override keeps the config's output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& output_override = {});
ExperimentResult run_experiment(const std::filesystem::path& config_path,
                                const std::filesystem::path& output_override = {});

// Runs the base config once per temperature with a shared seed (each run in
// its own subdirectory) and writes sweep.csv with the final-window (last 50
// steps) mean verifier accuracy per temperature. Returns the sweep.csv path.
std::filesystem::path sweep_temperature(const ExperimentConfig& base,
                                        std::span<const double> temperatures,
                                        const std::filesystem::path& output_dir);
std::filesystem::path sweep_temperature(const std::filesystem::path& config_path,
                                        std::span<const double> temperatures,
                                        const std::filesystem::path& output_dir);

// Mean verifier accuracy over the trailing window (at most `window` rows).
double final_window_accuracy(const MetricLog& log, int window = 50);

}  // namespace minform
