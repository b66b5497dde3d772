#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cystonet/data.hpp"
#include "cystonet/model.hpp"

namespace cysto {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m, v;  // parallel to the parameter list

    void init(const std::vector<Tensor>& params);
};

/// Bias-corrected Adam update from the gradients accumulated on the
/// parameters; consumes (zeroes) those gradients.
void adam_step(const std::vector<Tensor>& params, AdamState& state);

struct PlateauScheduler {
    double factor = 0.1;
    int patience = 10;
    double min_delta = 1e-6;
    double min_lr = 1e-6;
    double lr = 1e-3;

    double best = 0;  // set to +inf by init/make_session
    int since = 0;

    /// Monitors validation loss: an improvement beyond min_delta resets the
    /// counter; hitting patience multiplies lr by factor (floored at min_lr).
    /// Returns true when the lr was reduced. NaN input aborts the run.
    bool observe(double val_loss);
};

struct TrainRunConfig {
    int batch_size = 16;
    int max_epochs = 100;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
    AdamConfig adam;             // adam.lr is the initial learning rate
    PlateauScheduler scheduler;  // lr/best/since here are ignored; session state starts fresh
    bool augment = false;
    AugmentationConfig augmentation;
    double stop_at_train_iou = -1.0;  // early stop threshold; < 0 disables
    std::string out_dir;              // history/checkpoint files; empty writes nothing

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0, val_loss = 0, val_iou = 0, lr = 0;
    double train_iou = 0;  // from training-pass argmax; drives early stop
};

struct TrainResult {
    std::vector<EpochStats> history;
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_loss = 0;
    bool stopped_early = false;
};

struct TrainSession {
    Model model;
    TrainRunConfig rc;
    AdamState adam;
    PlateauScheduler scheduler;
    int next_epoch = 1;
    std::vector<EpochStats> history;
};

TrainSession make_session(const ModelConfig& mc, const TrainRunConfig& rc);

/// One epoch: seeded shuffle, forward/backward/Adam over batches, eval-mode
/// validation, scheduler step. Appends to and returns the epoch's stats.
EpochStats train_epoch(TrainSession& s, const std::vector<SampleRecord>& train_set,
                       const std::vector<SampleRecord>& val_set);

/// Runs epochs until max_epochs or the early-stop threshold. With out_dir
/// set, writes history.tsv, best.ckpt (lowest val loss) and last.ckpt
/// (full state, resumable).
TrainResult train_loop(TrainSession& s, const std::vector<SampleRecord>& train_set,
                       const std::vector<SampleRecord>& val_set);

/// Full training state: model + config + optimizer + scheduler + position.
void save_session(const std::string& path, const TrainSession& s);
TrainSession load_session(const std::string& path);

std::string history_to_tsv(const std::vector<EpochStats>& history);

}  // namespace cysto
