#include "minform/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace minform {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t consumed = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &consumed);
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': invalid number '" + value + "'");
    }
    if (consumed != value.size()) {
        throw ValidationError("config key '" + key + "': invalid number '" + value + "'");
    }
    return out;
}

long long parse_int(const std::string& key, const std::string& value) {
    std::size_t consumed = 0;
    long long out = 0;
    try {
        out = std::stoll(value, &consumed);
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': invalid integer '" + value + "'");
    }
    if (consumed != value.size()) {
        throw ValidationError("config key '" + key + "': invalid integer '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ValidationError("config key '" + key + "': expected one of {true, false}, got '" +
                          value + "'");
}

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "gamma", "transform_temperature", "max_tokens", "reward_mode", "gt_fraction",
        "kl_coefficient", "estimator", "credit_mode", "steps", "seed", "prompts_per_step",
        "group_size", "learning_rate", "gae_lambda", "value_learning_rate", "pseudo_positive",
        "save_interval", "output_dir", "prm_think_early", "prm_think_late",
        "prm_think_early_limit", "prm_solve_good_early", "prm_solve_good_late",
        "prm_solve_good_limit", "prm_solve_bad", "prm_repeat_base", "prm_repeat_slope",
        "prm_repeat_cap", "prm_stop", "prm_stop_empty", "init_logit_think",
        "init_logit_solve_good", "init_logit_solve_bad", "init_logit_repeat", "init_logit_stop",
        "init_logit_stop_empty",
    };
    return keys;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!known_keys().contains(key)) {
            throw ValidationError("unknown config key '" + key + "'");
        }
        if (entries.contains(key)) {
            throw ValidationError("duplicate config key '" + key + "'");
        }
        entries[key] = value;
    }

    ExperimentConfig config;
    auto take = [&entries](const char* key) -> const std::string* {
        const auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    };

    if (const auto* v = take("reward_mode")) config.train.reward.reward_mode = reward_mode_from_string(*v);
    if (const auto* v = take("gamma")) config.train.reward.gamma = parse_double("gamma", *v);
    if (const auto* v = take("transform_temperature")) {
        config.train.reward.transform_temperature = parse_double("transform_temperature", *v);
    }
    if (const auto* v = take("max_tokens")) {
        config.train.reward.max_tokens = static_cast<int>(parse_int("max_tokens", *v));
    }
    if (const auto* v = take("gt_fraction")) {
        config.train.reward.gt_fraction = parse_double("gt_fraction", *v);
    } else {
        switch (config.train.reward.reward_mode) {
            case RewardMode::kPrm: config.train.reward.gt_fraction = 0.0; break;
            case RewardMode::kVr: config.train.reward.gt_fraction = 1.0; break;
            case RewardMode::kPrmVr: config.train.reward.gt_fraction = 0.1; break;
        }
    }
    if (const auto* v = take("kl_coefficient")) {
        config.train.reward.kl_coefficient = parse_double("kl_coefficient", *v);
    }

    if (const auto* v = take("estimator")) {
        const bool known = *v == estimator_tag::kRloo || *v == estimator_tag::kStepBaseline ||
                           *v == estimator_tag::kGrpo || *v == estimator_tag::kReinforcePp ||
                           *v == estimator_tag::kGae;
        if (!known) {
            throw ValidationError(
                "invalid estimator '" + *v +
                "': expected one of {rloo, step-baseline, grpo, reinforce++, gae}");
        }
        config.train.estimator = *v;
    }
    if (const auto* v = take("credit_mode")) {
        config.train.credit_mode = credit_mode_from_string(*v);
    }
    if (const auto* v = take("steps")) config.train.steps = static_cast<int>(parse_int("steps", *v));
    if (const auto* v = take("seed")) {
        config.train.seed = static_cast<std::uint64_t>(parse_int("seed", *v));
    }
    if (const auto* v = take("prompts_per_step")) {
        config.train.prompts_per_step = static_cast<int>(parse_int("prompts_per_step", *v));
    }
    if (const auto* v = take("group_size")) {
        config.train.group_size = static_cast<int>(parse_int("group_size", *v));
    }
    if (const auto* v = take("learning_rate")) {
        config.train.learning_rate = parse_double("learning_rate", *v);
    }
    if (const auto* v = take("gae_lambda")) {
        config.train.gae_lambda = parse_double("gae_lambda", *v);
    }
    if (const auto* v = take("value_learning_rate")) {
        config.train.value_learning_rate = parse_double("value_learning_rate", *v);
    }
    if (const auto* v = take("pseudo_positive")) {
        config.train.pseudo_positive = parse_bool("pseudo_positive", *v);
    }
    if (const auto* v = take("save_interval")) {
        config.save_interval = static_cast<int>(parse_int("save_interval", *v));
    }
    if (const auto* v = take("output_dir")) config.output_dir = *v;

    PrmTable& prm = config.train.prm;
    if (const auto* v = take("prm_think_early")) prm.think_early = parse_double("prm_think_early", *v);
    if (const auto* v = take("prm_think_late")) prm.think_late = parse_double("prm_think_late", *v);
    if (const auto* v = take("prm_think_early_limit")) {
        prm.think_early_limit = static_cast<int>(parse_int("prm_think_early_limit", *v));
    }
    if (const auto* v = take("prm_solve_good_early")) {
        prm.solve_good_early = parse_double("prm_solve_good_early", *v);
    }
    if (const auto* v = take("prm_solve_good_late")) {
        prm.solve_good_late = parse_double("prm_solve_good_late", *v);
    }
    if (const auto* v = take("prm_solve_good_limit")) {
        prm.solve_good_limit = static_cast<int>(parse_int("prm_solve_good_limit", *v));
    }
    if (const auto* v = take("prm_solve_bad")) prm.solve_bad = parse_double("prm_solve_bad", *v);
    if (const auto* v = take("prm_repeat_base")) prm.repeat_base = parse_double("prm_repeat_base", *v);
    if (const auto* v = take("prm_repeat_slope")) {
        prm.repeat_slope = parse_double("prm_repeat_slope", *v);
    }
    if (const auto* v = take("prm_repeat_cap")) {
        prm.repeat_cap = static_cast<int>(parse_int("prm_repeat_cap", *v));
    }
    if (const auto* v = take("prm_stop")) prm.stop = parse_double("prm_stop", *v);
    if (const auto* v = take("prm_stop_empty")) prm.stop_empty = parse_double("prm_stop_empty", *v);

    auto& logits = config.train.init_logits;
    if (const auto* v = take("init_logit_think")) {
        logits[static_cast<int>(StepAction::kThink)] = parse_double("init_logit_think", *v);
    }
    if (const auto* v = take("init_logit_solve_good")) {
        logits[static_cast<int>(StepAction::kSolveGood)] =
            parse_double("init_logit_solve_good", *v);
    }
    if (const auto* v = take("init_logit_solve_bad")) {
        logits[static_cast<int>(StepAction::kSolveBad)] =
            parse_double("init_logit_solve_bad", *v);
    }
    if (const auto* v = take("init_logit_repeat")) {
        logits[static_cast<int>(StepAction::kRepeat)] = parse_double("init_logit_repeat", *v);
    }
    if (const auto* v = take("init_logit_stop")) {
        logits[static_cast<int>(StepAction::kStop)] = parse_double("init_logit_stop", *v);
    }
    if (const auto* v = take("init_logit_stop_empty")) {
        logits[static_cast<int>(StepAction::kStopEmpty)] =
            parse_double("init_logit_stop_empty", *v);
    }

    if (config.train.steps < 1) throw ValidationError("config key 'steps': must be >= 1");
    if (config.train.reward.max_tokens < 1) {
        throw ValidationError("config key 'max_tokens': must be >= 1");
    }
    if (config.train.reward.transform_temperature <= 0.0) {
        throw ValidationError("config key 'transform_temperature': T must be positive");
    }
    if (config.train.reward.gamma <= 0.0 || config.train.reward.gamma > 1.0) {
        throw ValidationError("config key 'gamma': must lie in (0, 1]");
    }
    if (config.train.reward.gt_fraction < 0.0 || config.train.reward.gt_fraction > 1.0) {
        throw ValidationError("config key 'gt_fraction': must lie in [0, 1]");
    }
    if (config.save_interval < 1) {
        throw ValidationError("config key 'save_interval': must be >= 1");
    }
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str());
}

std::string serialize_experiment_config(const ExperimentConfig& config) {
    std::ostringstream out;
    const TrainOptions& t = config.train;
    out << "reward_mode = " << to_string(t.reward.reward_mode) << '\n';
    out << "gamma = " << format_double(t.reward.gamma) << '\n';
    out << "transform_temperature = " << format_double(t.reward.transform_temperature) << '\n';
    out << "max_tokens = " << t.reward.max_tokens << '\n';
    out << "gt_fraction = " << format_double(t.reward.gt_fraction) << '\n';
    out << "kl_coefficient = " << format_double(t.reward.kl_coefficient) << '\n';
    out << "estimator = " << t.estimator << '\n';
    out << "credit_mode = " << to_string(t.credit_mode) << '\n';
    out << "steps = " << t.steps << '\n';
    out << "seed = " << t.seed << '\n';
    out << "prompts_per_step = " << t.prompts_per_step << '\n';
    out << "group_size = " << t.group_size << '\n';
    out << "learning_rate = " << format_double(t.learning_rate) << '\n';
    out << "gae_lambda = " << format_double(t.gae_lambda) << '\n';
    out << "value_learning_rate = " << format_double(t.value_learning_rate) << '\n';
    out << "pseudo_positive = " << (t.pseudo_positive ? "true" : "false") << '\n';
    out << "save_interval = " << config.save_interval << '\n';
    out << "output_dir = " << config.output_dir << '\n';
    out << "prm_think_early = " << format_double(t.prm.think_early) << '\n';
    out << "prm_think_late = " << format_double(t.prm.think_late) << '\n';
    out << "prm_think_early_limit = " << t.prm.think_early_limit << '\n';
    out << "prm_solve_good_early = " << format_double(t.prm.solve_good_early) << '\n';
    out << "prm_solve_good_late = " << format_double(t.prm.solve_good_late) << '\n';
    out << "prm_solve_good_limit = " << t.prm.solve_good_limit << '\n';
    out << "prm_solve_bad = " << format_double(t.prm.solve_bad) << '\n';
    out << "prm_repeat_base = " << format_double(t.prm.repeat_base) << '\n';
    out << "prm_repeat_slope = " << format_double(t.prm.repeat_slope) << '\n';
    out << "prm_repeat_cap = " << t.prm.repeat_cap << '\n';
    out << "prm_stop = " << format_double(t.prm.stop) << '\n';
    out << "prm_stop_empty = " << format_double(t.prm.stop_empty) << '\n';
    out << "init_logit_think = "
        << format_double(t.init_logits[static_cast<int>(StepAction::kThink)]) << '\n';
    out << "init_logit_solve_good = "
        << format_double(t.init_logits[static_cast<int>(StepAction::kSolveGood)]) << '\n';
    out << "init_logit_solve_bad = "
        << format_double(t.init_logits[static_cast<int>(StepAction::kSolveBad)]) << '\n';
    out << "init_logit_repeat = "
        << format_double(t.init_logits[static_cast<int>(StepAction::kRepeat)]) << '\n';
    out << "init_logit_stop = "
        << format_double(t.init_logits[static_cast<int>(StepAction::kStop)]) << '\n';
    out << "init_logit_stop_empty = "
        << format_double(t.init_logits[static_cast<int>(StepAction::kStopEmpty)]) << '\n';
    return out.str();
}

}  // namespace minform
