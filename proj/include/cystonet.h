/* C interface to the cystonet segmentation library.
 *
 * All functions return cn_status; on failure cn_last_error() describes the
 * problem for the calling thread. Strings returned through char** out
 * parameters are heap allocated and must be released with cn_string_free().
 */
#ifndef CYSTONET_H
#define CYSTONET_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cn_status {
    CN_OK = 0,
    CN_ERROR_INVALID_ARGUMENT = 1,
    CN_ERROR_SHAPE = 2,
    CN_ERROR_NUMERIC = 3,
    CN_ERROR_IO = 4,
    CN_ERROR_STATE = 5,
    CN_ERROR_UNKNOWN = 6
} cn_status;

/* Message from the most recent failing call on this thread. Never NULL. */
const char* cn_last_error(void);

void cn_string_free(char* s);

/* ---- configuration ----------------------------------------------------- */

/* Flat key/value run configuration (model, training, data and sweep keys).
 * cn_config_text lists every key with its current value. */
typedef struct cn_config cn_config;

cn_config* cn_config_create(void);
cn_status cn_config_load(const char* path, cn_config** out);
cn_status cn_config_set(cn_config* cfg, const char* key, const char* value);
cn_status cn_config_get(const cn_config* cfg, const char* key, char** out_value);
cn_status cn_config_text(const cn_config* cfg, char** out_text);
cn_status cn_config_save(const cn_config* cfg, const char* path);
void cn_config_destroy(cn_config* cfg);

/* ---- models ------------------------------------------------------------ */

typedef struct cn_model cn_model;

/* Fresh model with seeded random initialisation per the config. */
cn_status cn_model_build(const cn_config* cfg, cn_model** out);
cn_status cn_model_load(const char* checkpoint_path, cn_model** out);
cn_status cn_model_save(const cn_model* m, const char* checkpoint_path);
void cn_model_destroy(cn_model* m);

/* image: row-major height*width*3 doubles in [0,1]. out_mask receives
 * height*width class ids. Dimensions must match the model's input size. */
cn_status cn_model_predict(cn_model* m, const double* image, int height, int width,
                           uint8_t* out_mask);

/* Per-layer parameter and multiply-accumulate report. */
cn_status cn_model_profile(const cn_model* m, char** out_text);

/* Architecture description of a model (the model.* config keys). */
cn_status cn_model_config_text(const cn_model* m, char** out_text);

/* ---- end-to-end commands ------------------------------------------------ */

/* Generate a synthetic cystoscopy dataset under out_dir (images/, masks/,
 * manifest.txt, palette.txt, config.resolved.txt). Deterministic in the
 * config: re-running writes byte-identical files. */
cn_status cn_synth_dataset(const cn_config* cfg, const char* out_dir);

typedef struct cn_train_summary {
    int epochs_run;
    int best_epoch;
    double best_val_loss;
    double final_val_iou;
} cn_train_summary;

/* Train a fresh model; writes config.resolved.txt, history.tsv, best.ckpt and
 * last.ckpt under out_dir. summary may be NULL. */
cn_status cn_train(const cn_config* cfg, const char* dataset_dir, const char* out_dir,
                   cn_train_summary* summary);

/* Continue from a session checkpoint (last.ckpt); reproduces the history the
 * uninterrupted run would have written. */
cn_status cn_train_resume(const char* checkpoint_path, const char* dataset_dir,
                          const char* out_dir, cn_train_summary* summary);

/* Metric report (dice/iou/accuracy/precision/recall per class plus macro
 * rows) for a checkpoint over one split: "train", "val", "test" or "all". */
cn_status cn_evaluate(const char* checkpoint_path, const char* dataset_dir, const char* split,
                      char** out_report);

/* Write <id>_mask.png (and with overlay != 0 <id>_overlay.png) per sample. */
cn_status cn_predict_dir(const char* checkpoint_path, const char* dataset_dir, const char* split,
                         const char* out_dir, int overlay);

/* Tab separated sweep table. which: "heads", "gate_variant",
 * "attention_mechanism" or "loss_weights". dataset_dir may be NULL or empty
 * to profile only (accuracy columns become "nan"). */
cn_status cn_sweep(const cn_config* cfg, const char* which, const char* dataset_dir,
                   char** out_table);

#ifdef __cplusplus
}
#endif

#endif /* CYSTONET_H */
