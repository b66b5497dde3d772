// Command line front end for the cystonet segmentation library. Talks to the
// library exclusively through the C interface in cystonet.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cystonet.h"

namespace fs = std::filesystem;

namespace {

[[noreturn]] void die(const std::string& what) {
    std::fprintf(stderr, "error: %s: %s\n", what.c_str(), cn_last_error());
    std::exit(1);
}

void check(cn_status st, const std::string& what) {
    if (st != CN_OK) die(what);
}

struct ConfigHandle {
    cn_config* ptr = nullptr;
    ~ConfigHandle() { cn_config_destroy(ptr); }
};

struct ModelHandle {
    cn_model* ptr = nullptr;
    ~ModelHandle() { cn_model_destroy(ptr); }
};

std::string take_string(char* s) {
    std::string out = s == nullptr ? "" : s;
    cn_string_free(s);
    return out;
}

// Options every config-driven subcommand shares. Precedence: defaults, then
// --config, then --set in order, then --seed/--heads/--variant shorthands.
struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> sets;
    long long seed = -1;
    int heads = 0;
    std::string variant;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "Config file with `key = value` lines");
    cmd->add_option("--set", args.sets, "Override one config key (repeatable)")
        ->type_name("KEY=VALUE");
    cmd->add_option("--seed", args.seed,
                    "Master seed: sets model.seed, train.seed and data.seed");
    cmd->add_option("--heads", args.heads, "Transformer head count shorthand");
    cmd->add_option("--variant", args.variant, "Gate self-attention variant shorthand")
        ->check(CLI::IsMember({"full", "shared", "weightless"}));
}

void set_key(cn_config* cfg, const std::string& key, const std::string& value) {
    check(cn_config_set(cfg, key.c_str(), value.c_str()), "set " + key);
}

cn_config* build_config(const ConfigArgs& args) {
    cn_config* cfg = nullptr;
    if (args.config_path.empty()) {
        cfg = cn_config_create();
        if (cfg == nullptr) {
            std::fprintf(stderr, "error: out of memory\n");
            std::exit(1);
        }
    } else {
        check(cn_config_load(args.config_path.c_str(), &cfg), "load " + args.config_path);
    }
    for (const std::string& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
            std::exit(1);
        }
        set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed >= 0) {
        const std::string s = std::to_string(args.seed);
        set_key(cfg, "model.seed", s);
        set_key(cfg, "train.seed", s);
        set_key(cfg, "data.seed", s);
    }
    if (args.heads > 0) set_key(cfg, "model.transformer.num_heads", std::to_string(args.heads));
    if (!args.variant.empty()) set_key(cfg, "model.gate_variant", args.variant);
    return cfg;
}

void write_text_file(const std::string& dir, const std::string& name, const std::string& text) {
    fs::create_directories(dir);
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
        std::exit(1);
    }
}

// Snapshot of the architecture a checkpointed model was built with.
void write_model_snapshot(const std::string& dir, cn_model* m) {
    char* text = nullptr;
    check(cn_model_config_text(m, &text), "describe model");
    write_text_file(dir, "config.resolved.txt", take_string(text));
}

void print_summary(const cn_train_summary& s, const std::string& out_dir) {
    std::printf("trained %d epoch%s; best epoch %d (val loss %.6f), final val IoU %.6f\n",
                s.epochs_run, s.epochs_run == 1 ? "" : "s", s.best_epoch, s.best_val_loss,
                s.final_val_iou);
    std::printf("artifacts written to %s\n", out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cystonet: attention-gated U-Net segmentation of cystoscopy images"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled dataset");
    ConfigArgs synth_args;
    std::string synth_out;
    add_config_options(synth, synth_args);
    synth->add_option("--out", synth_out, "Dataset directory to create")->required();
    synth->callback([&] {
        ConfigHandle cfg{build_config(synth_args)};
        check(cn_synth_dataset(cfg.ptr, synth_out.c_str()), "synth");
        std::printf("dataset written to %s\n", synth_out.c_str());
    });

    // train ------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train a model (or resume from last.ckpt)");
    ConfigArgs train_args;
    std::string train_data, train_out, train_ckpt;
    add_config_options(train, train_args);
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Run directory for history and checkpoints")
        ->required();
    train->add_option("--checkpoint", train_ckpt, "Session checkpoint to resume from");
    train->callback([&] {
        cn_train_summary summary{};
        if (train_ckpt.empty()) {
            ConfigHandle cfg{build_config(train_args)};
            check(cn_train(cfg.ptr, train_data.c_str(), train_out.c_str(), &summary), "train");
        } else {
            const bool has_cfg = !train_args.config_path.empty() || !train_args.sets.empty() ||
                                 train_args.seed >= 0 || train_args.heads > 0 ||
                                 !train_args.variant.empty();
            if (has_cfg) {
                std::fprintf(stderr,
                             "error: --checkpoint resumes with the configuration stored in the "
                             "checkpoint; it cannot be combined with --config/--set/--seed/"
                             "--heads/--variant\n");
                std::exit(1);
            }
            check(cn_train_resume(train_ckpt.c_str(), train_data.c_str(), train_out.c_str(),
                                  &summary),
                  "resume " + train_ckpt);
        }
        print_summary(summary, train_out);
    });

    // eval -------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one dataset split");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
    eval->add_option("--checkpoint", eval_ckpt, "Model or session checkpoint")->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--split", eval_split, "train|val|test|all (default test)");
    eval->add_option("--out", eval_out, "Also write report.txt and config snapshot here");
    eval->callback([&] {
        char* report = nullptr;
        check(cn_evaluate(eval_ckpt.c_str(), eval_data.c_str(), eval_split.c_str(), &report),
              "eval " + eval_ckpt);
        const std::string text = take_string(report);
        std::fputs(text.c_str(), stdout);
        if (!eval_out.empty()) {
            write_text_file(eval_out, "report.txt", text);
            ModelHandle m;
            check(cn_model_load(eval_ckpt.c_str(), &m.ptr), "load " + eval_ckpt);
            write_model_snapshot(eval_out, m.ptr);
        }
    });

    // predict ----------------------------------------------------------
    auto* predict = app.add_subcommand("predict", "Write predicted masks for a split");
    std::string pr_ckpt, pr_data, pr_split = "test", pr_out;
    bool pr_overlay = false;
    predict->add_option("--checkpoint", pr_ckpt, "Model or session checkpoint")->required();
    predict->add_option("--data", pr_data, "Dataset directory")->required();
    predict->add_option("--split", pr_split, "train|val|test|all (default test)");
    predict->add_option("--out", pr_out, "Directory for predicted masks")->required();
    predict->add_flag("--overlay", pr_overlay, "Also write colour overlays");
    predict->callback([&] {
        check(cn_predict_dir(pr_ckpt.c_str(), pr_data.c_str(), pr_split.c_str(), pr_out.c_str(),
                             pr_overlay ? 1 : 0),
              "predict " + pr_ckpt);
        ModelHandle m;
        check(cn_model_load(pr_ckpt.c_str(), &m.ptr), "load " + pr_ckpt);
        write_model_snapshot(pr_out, m.ptr);
        std::printf("predictions written to %s\n", pr_out.c_str());
    });

    // profile ----------------------------------------------------------
    auto* profile = app.add_subcommand("profile", "Report per-layer parameters and MACs");
    ConfigArgs prof_args;
    std::string prof_ckpt, prof_out;
    add_config_options(profile, prof_args);
    profile->add_option("--checkpoint", prof_ckpt, "Profile a checkpoint instead of a config");
    profile->add_option("--out", prof_out, "Also write profile.txt and config snapshot here");
    profile->callback([&] {
        ModelHandle m;
        ConfigHandle cfg;
        if (prof_ckpt.empty()) {
            cfg.ptr = build_config(prof_args);
            check(cn_model_build(cfg.ptr, &m.ptr), "build model");
        } else {
            check(cn_model_load(prof_ckpt.c_str(), &m.ptr), "load " + prof_ckpt);
        }
        char* text = nullptr;
        check(cn_model_profile(m.ptr, &text), "profile");
        const std::string report = take_string(text);
        std::fputs(report.c_str(), stdout);
        if (!prof_out.empty()) {
            write_text_file(prof_out, "profile.txt", report);
            if (cfg.ptr != nullptr) {
                check(cn_config_save(cfg.ptr,
                                     (fs::path(prof_out) / "config.resolved.txt").c_str()),
                      "save config snapshot");
            } else {
                write_model_snapshot(prof_out, m.ptr);
            }
        }
    });

    // sweep ------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Profile (and optionally train) model variants");
    ConfigArgs sweep_args;
    std::string sweep_which, sweep_data, sweep_out;
    add_config_options(sweep, sweep_args);
    sweep->add_option("--which", sweep_which, "Swept axis")
        ->required()
        ->check(CLI::IsMember({"heads", "gate_variant", "attention_mechanism", "loss_weights"}));
    sweep->add_option("--data", sweep_data,
                      "Dataset for short training runs (omit to profile only)");
    sweep->add_option("--out", sweep_out, "Also write the table and config snapshot here");
    sweep->callback([&] {
        ConfigHandle cfg{build_config(sweep_args)};
        char* table = nullptr;
        check(cn_sweep(cfg.ptr, sweep_which.c_str(), sweep_data.empty() ? nullptr : sweep_data.c_str(),
                       &table),
              "sweep " + sweep_which);
        const std::string text = take_string(table);
        std::fputs(text.c_str(), stdout);
        if (!sweep_out.empty()) {
            write_text_file(sweep_out, "sweep_" + sweep_which + ".tsv", text);
            check(cn_config_save(cfg.ptr, (fs::path(sweep_out) / "config.resolved.txt").c_str()),
                  "save config snapshot");
        }
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}
