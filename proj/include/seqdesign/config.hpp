#pragma once

#include "seqdesign/simharness.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace seqdesign {

/// A simulation config plus the list of true models to run it for.
///
/// Text form is one `key = value` per line; '#' starts a comment. Keys:
///   suite, true_model (M2, 2 or "all", comma lists allowed), criterion, T,
///   n_t, n_per_arm, budget, rho, eval, gof_level, gof_reference, pretest_n,
///   replications, seed, comparison_designs, comparison_accuracy, threads.
struct ExperimentConfig {
    SimConfig sim;
    std::vector<int> true_models{0};  // 0-based
    std::string preset;               // name the config started from, if any
};

// Applies `text` on top of `base`. Errors name the key and line.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});

// Applies one "key=value" override.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

// Canonical text; parse_config(config_to_text(c)) reproduces c.
std::string config_to_text(const ExperimentConfig& config);

// fig1-snr375, fig1-snr135, robust-512, multivar-gof; a "dose-response-"
// prefix is accepted on the first two.
ExperimentConfig preset_config(std::string name);
std::vector<std::string> preset_names();

// "M1".."MK" for a suite.
std::string model_label(int index);

}  // namespace seqdesign
