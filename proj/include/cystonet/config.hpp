#pragma once

#include <string>
#include <vector>

#include "cystonet/model.hpp"
#include "cystonet/train.hpp"

namespace cysto {

/// Everything a run needs: model shape, training schedule, data handling.
/// Mutated only through the key registry so unknown keys are impossible.
struct RunConfig {
    ModelConfig model;
    TrainRunConfig train;
    int synth_n = 50;
    std::uint64_t data_seed = 0;  // split + synth seed
    double split_train = 0.7, split_val = 0.1, split_test = 0.2;
    int sweep_epochs = 5;  // reduced budget for sweep IoU columns; 0 skips training
};

/// Registry keys in snapshot order.
std::vector<std::string> config_keys();

/// Unknown keys or unparsable values raise InvalidArgument.
void config_set(RunConfig& cfg, const std::string& key, const std::string& value);
std::string config_get(const RunConfig& cfg, const std::string& key);

/// Resolved snapshot: every key, one "key = value" line each.
std::string config_to_text(const RunConfig& cfg);
void config_save(const RunConfig& cfg, const std::string& path);

/// "key = value" lines; '#' starts a comment. Values land on defaults first.
RunConfig config_parse(const std::string& text);
RunConfig config_load(const std::string& path);

}  // namespace cysto
