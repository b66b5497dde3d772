#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cystonet/model.hpp"

namespace cysto {

using KvPairs = std::vector<std::pair<std::string, std::string>>;

/// Versioned binary container: magic, config record, named float64 tensors
/// (each with a checksum), and an optional extra section for optimizer and
/// scheduler state. Payloads round-trip bit-exactly.
struct Checkpoint {
    ModelConfig config;
    NamedTensors tensors;
    bool has_extra = false;
    KvPairs extra_kv;
    NamedTensors extra_tensors;
};

void save_checkpoint(const std::string& path, const ModelConfig& config, const NamedTensors& tensors,
                     const KvPairs* extra_kv = nullptr, const NamedTensors* extra_tensors = nullptr);

Checkpoint load_checkpoint(const std::string& path);

void save_model(const std::string& path, const Model& m);

/// Copies checkpoint tensors into a model by name; names and shapes must
/// match the model's state exactly.
void copy_state_into(Model& m, const NamedTensors& tensors);

/// Rebuilds the model from the stored config and restores its state.
Model load_model_checkpoint(const std::string& path);

}  // namespace cysto
