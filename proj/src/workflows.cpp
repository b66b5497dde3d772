#include "cystonet/workflows.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cystonet/checkpoint.hpp"
#include "cystonet/metrics.hpp"
#include "cystonet/profile.hpp"

namespace cysto {

namespace fs = std::filesystem;

namespace {

void write_snapshot(const RunConfig& cfg, const std::string& out_dir) {
    if (out_dir.empty()) return;
    fs::create_directories(out_dir);
    config_save(cfg, (fs::path(out_dir) / "config.resolved.txt").string());
}

struct EvalSets {
    std::vector<SampleRecord> train, val;
};

// Validation falls back to the train split when the dataset has no val ids,
// so tiny fixture datasets can still be trained end to end.
EvalSets load_train_val(const std::string& dataset_dir) {
    Dataset ds = open_dataset(dataset_dir);
    EvalSets sets;
    sets.train = ds.load_ids(ds.manifest.train);
    sets.val = ds.manifest.val.empty() ? sets.train : ds.load_ids(ds.manifest.val);
    if (sets.train.empty()) raise(ErrorKind::InvalidArgument, "dataset has no training samples");
    return sets;
}

ClassMetrics eval_macro(Model& m, const std::vector<SampleRecord>& samples) {
    ConfusionAccumulator acc(m.config.num_classes);
    for (const SampleRecord& rec : samples)
        acc.add(model_predict(m, image_to_tensor(rec.image)), mask_to_labels(rec.mask));
    return acc.macro(true);
}

std::string fmt_metric(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void synth_dataset(const RunConfig& cfg, const std::string& out_dir) {
    cfg.model.validate();
    std::vector<SampleRecord> records =
        synth_generate(cfg.synth_n, cfg.model.input_h, cfg.model.input_w, cfg.data_seed);
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const SampleRecord& rec : records) ids.push_back(rec.id);
    SplitManifest manifest =
        make_split(ids, cfg.split_train, cfg.split_val, cfg.split_test, cfg.data_seed);
    write_dataset(out_dir, records, manifest);
    write_snapshot(cfg, out_dir);
}

TrainResult run_training(const RunConfig& cfg, const std::string& dataset_dir,
                         const std::string& out_dir) {
    cfg.model.validate();
    cfg.train.validate();
    EvalSets sets = load_train_val(dataset_dir);
    write_snapshot(cfg, out_dir);
    TrainRunConfig rc = cfg.train;
    rc.out_dir = out_dir;
    TrainSession s = make_session(cfg.model, rc);
    return train_loop(s, sets.train, sets.val);
}

TrainResult resume_training(const std::string& checkpoint_path, const std::string& dataset_dir,
                            const std::string& out_dir) {
    TrainSession s = load_session(checkpoint_path);
    EvalSets sets = load_train_val(dataset_dir);
    s.rc.out_dir = out_dir;
    RunConfig snapshot;
    snapshot.model = s.model.config;
    snapshot.train = s.rc;
    write_snapshot(snapshot, out_dir);
    return train_loop(s, sets.train, sets.val);
}

std::vector<std::string> split_ids(const SplitManifest& manifest, const std::string& split) {
    if (split == "train") return manifest.train;
    if (split == "val") return manifest.val;
    if (split == "test") return manifest.test;
    if (split == "all") {
        std::vector<std::string> ids = manifest.train;
        ids.insert(ids.end(), manifest.val.begin(), manifest.val.end());
        ids.insert(ids.end(), manifest.test.begin(), manifest.test.end());
        return ids;
    }
    raise(ErrorKind::InvalidArgument, "unknown split '" + split + "' (train|val|test|all)");
}

std::string evaluate_checkpoint(const std::string& checkpoint_path, const std::string& dataset_dir,
                                const std::string& split) {
    Model m = load_model_checkpoint(checkpoint_path);
    Dataset ds = open_dataset(dataset_dir);
    std::vector<std::string> ids = split_ids(ds.manifest, split);
    if (ids.empty()) raise(ErrorKind::InvalidArgument, "split '" + split + "' has no samples");
    ConfusionAccumulator acc(m.config.num_classes);
    for (const std::string& id : ids) {
        SampleRecord rec = ds.load(id);
        acc.add(model_predict(m, image_to_tensor(rec.image)), mask_to_labels(rec.mask));
    }
    return acc.report();
}

void predict_to_dir(const std::string& checkpoint_path, const std::string& dataset_dir,
                    const std::string& split, const std::string& out_dir, bool overlay) {
    Model m = load_model_checkpoint(checkpoint_path);
    Dataset ds = open_dataset(dataset_dir);
    std::vector<std::string> ids = split_ids(ds.manifest, split);
    if (ids.empty()) raise(ErrorKind::InvalidArgument, "split '" + split + "' has no samples");
    fs::create_directories(out_dir);
    for (const std::string& id : ids) {
        SampleRecord rec = ds.load(id);
        IntMask pred = model_predict(m, image_to_tensor(rec.image));
        const int h = rec.image.height, w = rec.image.width;
        png::Image8 mask = png::Image8::blank(h, w, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                mask.at(y, x, 0) = pred.values[static_cast<std::size_t>(y) * w + x];
        png::write_image((fs::path(out_dir) / (id + "_mask.png")).string(), mask);
        if (!overlay) continue;
        png::Image8 blend = rec.image;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int cls = mask.at(y, x, 0);
                if (cls == 0 || cls >= kNumClasses) continue;
                for (int c = 0; c < 3; ++c) {
                    const double v = 0.55 * blend.at(y, x, c) + 0.45 * kClassColors[cls][c];
                    blend.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
                }
            }
        png::write_image((fs::path(out_dir) / (id + "_overlay.png")).string(), blend);
    }
}

namespace {

// NaN when the sweep runs without a training budget or dataset.
ClassMetrics sweep_train_eval(const RunConfig& variant, const EvalSets* sets, int epochs) {
    if (sets == nullptr || epochs <= 0) {
        const double nan = std::nan("");
        return ClassMetrics{nan, nan, nan, nan, nan};
    }
    TrainRunConfig rc = variant.train;
    rc.max_epochs = epochs;
    rc.out_dir.clear();
    rc.stop_at_train_iou = -1.0;
    TrainSession s = make_session(variant.model, rc);
    train_loop(s, sets->train, sets->val);
    return eval_macro(s.model, sets->val);
}

}  // namespace

std::string run_sweep(const RunConfig& cfg, const std::string& which,
                      const std::string& dataset_dir) {
    cfg.model.validate();
    cfg.train.validate();
    EvalSets sets;
    const EvalSets* sets_ptr = nullptr;
    if (!dataset_dir.empty() && cfg.sweep_epochs > 0) {
        sets = load_train_val(dataset_dir);
        sets_ptr = &sets;
    }
    std::ostringstream out;
    auto profile_row = [&](const RunConfig& v) {
        ProfileReport rep = profile_model(build_model(v.model));
        out << '\t' << rep.total_params() << '\t' << rep.total_macs();
    };
    if (which == "heads") {
        out << "heads\tparams\tmacs\tval_iou\n";
        for (int h = 1; h <= 10; ++h) {
            RunConfig v = cfg;
            v.model.transformer.num_heads = h;
            out << h;
            profile_row(v);
            out << '\t' << fmt_metric(sweep_train_eval(v, sets_ptr, cfg.sweep_epochs).iou) << '\n';
        }
    } else if (which == "gate_variant") {
        out << "gate_variant\tparams\tmacs\tval_iou\n";
        for (const char* name : {"full", "shared", "weightless"}) {
            RunConfig v = cfg;
            v.model.gate_variant = parse_variant(name);
            out << name;
            profile_row(v);
            out << '\t' << fmt_metric(sweep_train_eval(v, sets_ptr, cfg.sweep_epochs).iou) << '\n';
        }
    } else if (which == "attention_mechanism") {
        out << "attention\tparams\tmacs\tval_iou\n";
        for (const char* name : {"spatial", "self", "dual"}) {
            RunConfig v = cfg;
            v.model.gate_mode = parse_gate_mode(name);
            out << name;
            profile_row(v);
            out << '\t' << fmt_metric(sweep_train_eval(v, sets_ptr, cfg.sweep_epochs).iou) << '\n';
        }
    } else if (which == "loss_weights") {
        out << "w_dice\tw_scce\tval_iou\tval_dice\n";
        const double grid[][2] = {{1.0, 0.0}, {0.7, 0.3}, {0.5, 0.5}, {0.3, 0.7}, {0.0, 1.0}};
        for (const auto& w : grid) {
            RunConfig v = cfg;
            v.train.loss_weights = LossWeights{w[0], w[1]};
            ClassMetrics m = sweep_train_eval(v, sets_ptr, cfg.sweep_epochs);
            char wd[32], ws[32];
            std::snprintf(wd, sizeof(wd), "%.2f", w[0]);
            std::snprintf(ws, sizeof(ws), "%.2f", w[1]);
            out << wd << '\t' << ws << '\t' << fmt_metric(m.iou) << '\t' << fmt_metric(m.dice)
                << '\n';
        }
    } else {
        raise(ErrorKind::InvalidArgument,
              "unknown sweep '" + which +
                  "' (heads|gate_variant|attention_mechanism|loss_weights)");
    }
    return out.str();
}

}  // namespace cysto
