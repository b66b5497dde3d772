#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cystonet/loss.hpp"
#include "cystonet/png_io.hpp"
#include "cystonet/rng.hpp"
#include "cystonet/tensor.hpp"

namespace cysto {

// Class ids used throughout: 0 background, 1 tumor, 2 inflammation, 3 cystite.
inline constexpr int kNumClasses = 4;

extern const char* const kClassNames[kNumClasses];
extern const std::uint8_t kClassColors[kNumClasses][3];  // display palette

struct SampleRecord {
    std::string id;
    png::Image8 image;  // 3-channel
    png::Image8 mask;   // 1-channel, values < num_classes
};

// Rejects channel/size mismatches and out-of-range mask values, naming the offender.
void validate_record(const SampleRecord& rec, int num_classes = kNumClasses);

// id comes from the image filename stem.
SampleRecord load_sample(const std::string& image_path, const std::string& mask_path,
                         int num_classes = kNumClasses);

Tensor image_to_tensor(const png::Image8& img);  // [1,H,W,3], values/255
IntMask mask_to_labels(const png::Image8& mask);

struct Batch {
    Tensor images;   // [B,H,W,3]
    IntMask labels;  // [B,H,W]
};
Batch make_batch(const std::vector<SampleRecord>& records, const std::vector<int>& indices);

struct AugmentationConfig {
    double contrast_lo = 0.8;
    double contrast_hi = 1.25;
    double rotation_degrees = 15.0;
    double scale_lo = 0.9;
    double scale_hi = 1.1;
    std::uint64_t seed = 0;

    void validate() const;  // lo <= 1 <= hi on both ranges, rotation >= 0
};

// Same geometric transform on image (bilinear, edge replicate) and mask
// (nearest neighbour, out-of-bounds becomes background); contrast on image only.
SampleRecord augment(const SampleRecord& rec, const AugmentationConfig& cfg, rng::Stream& draw);

// Stream derived from (cfg.seed, sample id, epoch): repeatable and order-free.
SampleRecord augment_for_epoch(const SampleRecord& rec, const AugmentationConfig& cfg, std::int64_t epoch);

// Deterministic cystoscopy-like scenes: textured reddish background with a
// vignette, plus 0-3 elliptical lesions with class-dependent colour/texture.
// The mask is written by the exact same membership test that paints pixels.
std::vector<SampleRecord> synth_generate(int n, int height, int width, std::uint64_t seed);

struct SplitManifest {
    std::vector<std::string> train, val, test;

    std::size_t total() const { return train.size() + val.size() + test.size(); }
};

// Seeded shuffle, then contiguous slices of llround(n*frac) ids each; the
// remainder goes to test. Fractions must be nonnegative and sum to 1.
SplitManifest make_split(std::vector<std::string> ids, double train_frac, double val_frac,
                         double test_frac, std::uint64_t seed);

struct Dataset {
    std::string root;
    SplitManifest manifest;
    int num_classes = kNumClasses;

    SampleRecord load(const std::string& id) const;
    std::vector<SampleRecord> load_ids(const std::vector<std::string>& ids) const;
};

// Layout under root: images/<id>.png, masks/<id>.png, manifest.txt
// (one "split<TAB>id" line), palette.txt (display colours per class id).
void write_dataset(const std::string& root, const std::vector<SampleRecord>& records,
                   const SplitManifest& manifest);
Dataset open_dataset(const std::string& root);

SplitManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const SplitManifest& manifest);

}  // namespace cysto
