#pragma once

#include <filesystem>
#include <string>

#include "minform/simulator.hpp"
#include "minform/types.hpp"

namespace minform {

// Full experiment description: everything train() needs plus output
// placement. A serialized resolved config re-runs bit-exactly.
struct ExperimentConfig {
    TrainOptions train;
    int save_interval = 50;
    std::string output_dir = "runs/experiment";

    bool operator==(const ExperimentConfig&) const = default;
};

// Parses the flat `key = value` format ('#' starts a comment, blank lines
// ignored). Unknown keys, duplicate keys, bad numbers, and invalid enum
// values throw ValidationError naming the offender. Keys that are absent
// take their defaults; gt_fraction defaults by reward mode (prm 0, vr 1,
// prm_vr 0.1).
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Serializes every key with its resolved value, in the documented key order.
// parse(serialize(c)) == c.
std::string serialize_experiment_config(const ExperimentConfig& config);

}  // namespace minform
