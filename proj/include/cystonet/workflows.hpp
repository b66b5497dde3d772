#pragma once

#include <string>

#include "cystonet/config.hpp"
#include "cystonet/data.hpp"
#include "cystonet/train.hpp"

namespace cysto {

// End-to-end commands shared by the C API and the command line tool.
// Every function that writes into an output directory also drops a
// config.resolved.txt snapshot there so the run can be reproduced.

// Generate a synthetic dataset under out_dir (images/, masks/, manifest.txt,
// palette.txt). Sample count, image size, seed and split fractions come from
// the config. Re-running with the same config overwrites byte-identical files.
void synth_dataset(const RunConfig& cfg, const std::string& out_dir);

// Train a fresh model on the dataset's train split, validating on val.
// Writes history.tsv, best.ckpt and last.ckpt under out_dir.
TrainResult run_training(const RunConfig& cfg, const std::string& dataset_dir,
                         const std::string& out_dir);

// Continue an interrupted run from a session checkpoint (last.ckpt). The run
// config stored in the checkpoint is reused; only the output directory may
// change. Produces the same history the uninterrupted run would have.
TrainResult resume_training(const std::string& checkpoint_path, const std::string& dataset_dir,
                            const std::string& out_dir);

// Evaluate a model checkpoint over one split ("train", "val", "test" or
// "all") and return the metric report text.
std::string evaluate_checkpoint(const std::string& checkpoint_path, const std::string& dataset_dir,
                                const std::string& split);

// Write predicted label masks (and optional colour overlays) for a split.
void predict_to_dir(const std::string& checkpoint_path, const std::string& dataset_dir,
                    const std::string& split, const std::string& out_dir, bool overlay);

// Parameter/MAC/accuracy sweeps. `which` selects the swept axis:
//   heads                - transformer heads 1..10
//   gate_variant         - full | shared | weightless gate attention
//   attention_mechanism  - spatial | self | dual gating
//   loss_weights         - dice/cross-entropy weight grid
// Returns a tab separated table (header row first). Each row profiles the
// variant and, when cfg.sweep_epochs > 0 and dataset_dir is non-empty, trains
// it for cfg.sweep_epochs epochs and reports validation IoU.
std::string run_sweep(const RunConfig& cfg, const std::string& which,
                      const std::string& dataset_dir);

// Ids belonging to a split name; "all" concatenates train, val, test.
std::vector<std::string> split_ids(const SplitManifest& manifest, const std::string& split);

}  // namespace cysto
