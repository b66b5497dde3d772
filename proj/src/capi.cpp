#include "cystonet.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "cystonet/checkpoint.hpp"
#include "cystonet/config.hpp"
#include "cystonet/model.hpp"
#include "cystonet/profile.hpp"
#include "cystonet/workflows.hpp"

struct cn_config {
    cysto::RunConfig cfg;
};

struct cn_model {
    cysto::Model model;
};

namespace {

thread_local std::string g_last_error;

cn_status status_for(cysto::ErrorKind kind) {
    switch (kind) {
        case cysto::ErrorKind::InvalidArgument: return CN_ERROR_INVALID_ARGUMENT;
        case cysto::ErrorKind::Shape: return CN_ERROR_SHAPE;
        case cysto::ErrorKind::Numeric: return CN_ERROR_NUMERIC;
        case cysto::ErrorKind::Io: return CN_ERROR_IO;
        case cysto::ErrorKind::State: return CN_ERROR_STATE;
    }
    return CN_ERROR_UNKNOWN;
}

template <typename Fn>
cn_status guarded(Fn&& fn) {
    try {
        fn();
        return CN_OK;
    } catch (const cysto::Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CN_ERROR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown error";
        return CN_ERROR_UNKNOWN;
    }
}

cn_status fail_null(const char* what) {
    g_last_error = std::string(what) + " must not be null";
    return CN_ERROR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void fill_summary(cn_train_summary* summary, const cysto::TrainResult& result) {
    if (summary == nullptr) return;
    summary->epochs_run = result.epochs_run;
    summary->best_epoch = result.best_epoch;
    summary->best_val_loss = result.best_val_loss;
    summary->final_val_iou = result.history.empty() ? 0.0 : result.history.back().val_iou;
}

std::string opt(const char* s) { return s == nullptr ? std::string() : std::string(s); }

}  // namespace

extern "C" {

const char* cn_last_error(void) { return g_last_error.c_str(); }

void cn_string_free(char* s) { std::free(s); }

cn_config* cn_config_create(void) { return new (std::nothrow) cn_config(); }

cn_status cn_config_load(const char* path, cn_config** out) {
    if (path == nullptr) return fail_null("path");
    if (out == nullptr) return fail_null("out");
    return guarded([&] {
        auto* cfg = new cn_config();
        try {
            cfg->cfg = cysto::config_load(path);
        } catch (...) {
            delete cfg;
            throw;
        }
        *out = cfg;
    });
}

cn_status cn_config_set(cn_config* cfg, const char* key, const char* value) {
    if (cfg == nullptr) return fail_null("cfg");
    if (key == nullptr) return fail_null("key");
    if (value == nullptr) return fail_null("value");
    return guarded([&] { cysto::config_set(cfg->cfg, key, value); });
}

cn_status cn_config_get(const cn_config* cfg, const char* key, char** out_value) {
    if (cfg == nullptr) return fail_null("cfg");
    if (key == nullptr) return fail_null("key");
    if (out_value == nullptr) return fail_null("out_value");
    return guarded([&] { *out_value = dup_string(cysto::config_get(cfg->cfg, key)); });
}

cn_status cn_config_text(const cn_config* cfg, char** out_text) {
    if (cfg == nullptr) return fail_null("cfg");
    if (out_text == nullptr) return fail_null("out_text");
    return guarded([&] { *out_text = dup_string(cysto::config_to_text(cfg->cfg)); });
}

cn_status cn_config_save(const cn_config* cfg, const char* path) {
    if (cfg == nullptr) return fail_null("cfg");
    if (path == nullptr) return fail_null("path");
    return guarded([&] { cysto::config_save(cfg->cfg, path); });
}

void cn_config_destroy(cn_config* cfg) { delete cfg; }

cn_status cn_model_build(const cn_config* cfg, cn_model** out) {
    if (cfg == nullptr) return fail_null("cfg");
    if (out == nullptr) return fail_null("out");
    return guarded([&] { *out = new cn_model{cysto::build_model(cfg->cfg.model)}; });
}

cn_status cn_model_load(const char* checkpoint_path, cn_model** out) {
    if (checkpoint_path == nullptr) return fail_null("checkpoint_path");
    if (out == nullptr) return fail_null("out");
    return guarded([&] { *out = new cn_model{cysto::load_model_checkpoint(checkpoint_path)}; });
}

cn_status cn_model_save(const cn_model* m, const char* checkpoint_path) {
    if (m == nullptr) return fail_null("model");
    if (checkpoint_path == nullptr) return fail_null("checkpoint_path");
    return guarded([&] { cysto::save_model(checkpoint_path, m->model); });
}

void cn_model_destroy(cn_model* m) { delete m; }

cn_status cn_model_predict(cn_model* m, const double* image, int height, int width,
                           uint8_t* out_mask) {
    if (m == nullptr) return fail_null("model");
    if (image == nullptr) return fail_null("image");
    if (out_mask == nullptr) return fail_null("out_mask");
    return guarded([&] {
        if (height <= 0 || width <= 0)
            cysto::raise(cysto::ErrorKind::InvalidArgument, "image dimensions must be positive");
        const std::int64_t n = static_cast<std::int64_t>(height) * width;
        std::vector<double> pixels(image, image + n * 3);
        cysto::Tensor batch =
            cysto::Tensor::from_data({1, height, width, 3}, std::move(pixels));
        cysto::IntMask pred = cysto::model_predict(m->model, batch);
        std::memcpy(out_mask, pred.values.data(), static_cast<std::size_t>(n));
    });
}

cn_status cn_model_profile(const cn_model* m, char** out_text) {
    if (m == nullptr) return fail_null("model");
    if (out_text == nullptr) return fail_null("out_text");
    return guarded([&] { *out_text = dup_string(cysto::profile_model(m->model).to_text()); });
}

cn_status cn_model_config_text(const cn_model* m, char** out_text) {
    if (m == nullptr) return fail_null("model");
    if (out_text == nullptr) return fail_null("out_text");
    return guarded([&] { *out_text = dup_string(cysto::encode_model_config(m->model.config)); });
}

cn_status cn_synth_dataset(const cn_config* cfg, const char* out_dir) {
    if (cfg == nullptr) return fail_null("cfg");
    if (out_dir == nullptr) return fail_null("out_dir");
    return guarded([&] { cysto::synth_dataset(cfg->cfg, out_dir); });
}

cn_status cn_train(const cn_config* cfg, const char* dataset_dir, const char* out_dir,
                   cn_train_summary* summary) {
    if (cfg == nullptr) return fail_null("cfg");
    if (dataset_dir == nullptr) return fail_null("dataset_dir");
    if (out_dir == nullptr) return fail_null("out_dir");
    return guarded([&] {
        fill_summary(summary, cysto::run_training(cfg->cfg, dataset_dir, out_dir));
    });
}

cn_status cn_train_resume(const char* checkpoint_path, const char* dataset_dir,
                          const char* out_dir, cn_train_summary* summary) {
    if (checkpoint_path == nullptr) return fail_null("checkpoint_path");
    if (dataset_dir == nullptr) return fail_null("dataset_dir");
    if (out_dir == nullptr) return fail_null("out_dir");
    return guarded([&] {
        fill_summary(summary, cysto::resume_training(checkpoint_path, dataset_dir, out_dir));
    });
}

cn_status cn_evaluate(const char* checkpoint_path, const char* dataset_dir, const char* split,
                      char** out_report) {
    if (checkpoint_path == nullptr) return fail_null("checkpoint_path");
    if (dataset_dir == nullptr) return fail_null("dataset_dir");
    if (split == nullptr) return fail_null("split");
    if (out_report == nullptr) return fail_null("out_report");
    return guarded([&] {
        *out_report = dup_string(cysto::evaluate_checkpoint(checkpoint_path, dataset_dir, split));
    });
}

cn_status cn_predict_dir(const char* checkpoint_path, const char* dataset_dir, const char* split,
                         const char* out_dir, int overlay) {
    if (checkpoint_path == nullptr) return fail_null("checkpoint_path");
    if (dataset_dir == nullptr) return fail_null("dataset_dir");
    if (split == nullptr) return fail_null("split");
    if (out_dir == nullptr) return fail_null("out_dir");
    return guarded([&] {
        cysto::predict_to_dir(checkpoint_path, dataset_dir, split, out_dir, overlay != 0);
    });
}

cn_status cn_sweep(const cn_config* cfg, const char* which, const char* dataset_dir,
                   char** out_table) {
    if (cfg == nullptr) return fail_null("cfg");
    if (which == nullptr) return fail_null("which");
    if (out_table == nullptr) return fail_null("out_table");
    return guarded([&] { *out_table = dup_string(cysto::run_sweep(cfg->cfg, which, opt(dataset_dir))); });
}

}  // extern "C"
