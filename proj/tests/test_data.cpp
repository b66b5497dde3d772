#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "cystonet/data.hpp"
#include "oracles.hpp"

using namespace cysto;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) : path(fs::temp_directory_path() / (std::string("cysto_") + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

png::Image8 random_rgb(int h, int w, std::uint64_t seed) {
    png::Image8 img = png::Image8::blank(h, w, 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(oracle::mix64(seed + i));
    return img;
}

}  // namespace

TEST_CASE("PNG round-trips are byte exact for RGB and grayscale") {
    TempDir dir("png");
    png::Image8 rgb = random_rgb(21, 17, 1);
    png::write_image((dir.path / "a.png").string(), rgb);
    png::Image8 back = png::read_image((dir.path / "a.png").string());
    CHECK(back.channels == 3);
    CHECK(back.pixels == rgb.pixels);

    png::Image8 gray = png::Image8::blank(9, 13, 1);
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) gray.pixels[i] = static_cast<std::uint8_t>(i % 4);
    png::write_image((dir.path / "m.png").string(), gray);
    png::Image8 gback = png::read_image((dir.path / "m.png").string());
    CHECK(gback.channels == 1);
    CHECK(gback.pixels == gray.pixels);

    CHECK_THROWS_AS(png::read_image((dir.path / "missing.png").string()), Error);
}

TEST_CASE("load_sample validates and takes the id from the filename stem") {
    TempDir dir("load");
    png::write_image((dir.path / "case7.png").string(), random_rgb(12, 12, 2));
    png::Image8 mask = png::Image8::blank(12, 12, 1);
    mask.pixels[5] = 3;
    png::write_image((dir.path / "case7_mask.png").string(), mask);

    SampleRecord rec =
        load_sample((dir.path / "case7.png").string(), (dir.path / "case7_mask.png").string());
    CHECK(rec.id == "case7");
    CHECK(rec.image.height == 12);

    mask.pixels[5] = 4;  // out of range for 4 classes
    png::write_image((dir.path / "bad_mask.png").string(), mask);
    try {
        load_sample((dir.path / "case7.png").string(), (dir.path / "bad_mask.png").string());
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
        CHECK(std::string(e.what()).find("4") != std::string::npos);
    }

    png::write_image((dir.path / "small_mask.png").string(), png::Image8::blank(6, 6, 1));
    CHECK_THROWS_AS(
        load_sample((dir.path / "case7.png").string(), (dir.path / "small_mask.png").string()), Error);
}

TEST_CASE("identity augmentation reproduces the input bytes") {
    std::vector<SampleRecord> recs = synth_generate(1, 24, 24, 3);
    AugmentationConfig cfg;
    cfg.contrast_lo = cfg.contrast_hi = 1.0;
    cfg.rotation_degrees = 0.0;
    cfg.scale_lo = cfg.scale_hi = 1.0;
    rng::Stream draw(1);
    SampleRecord out = augment(recs[0], cfg, draw);
    CHECK(out.image.pixels == recs[0].image.pixels);
    CHECK(out.mask.pixels == recs[0].mask.pixels);
}

TEST_CASE("augmentation keeps labels integral and is reproducible per (seed, id, epoch)") {
    std::vector<SampleRecord> recs = synth_generate(2, 24, 24, 4);
    AugmentationConfig cfg;
    cfg.seed = 11;
    for (const auto& rec : recs) {
        SampleRecord a = augment_for_epoch(rec, cfg, 5);
        SampleRecord b = augment_for_epoch(rec, cfg, 5);
        CHECK(a.image.pixels == b.image.pixels);
        CHECK(a.mask.pixels == b.mask.pixels);
        CHECK(*std::max_element(a.mask.pixels.begin(), a.mask.pixels.end()) <= 3);
        SampleRecord c = augment_for_epoch(rec, cfg, 6);  // a different epoch redraws
        CHECK(a.image.pixels != c.image.pixels);
    }
    CHECK_THROWS_AS([&] {
        AugmentationConfig bad;
        bad.contrast_lo = 1.5;
        bad.validate();
    }(), Error);
}

TEST_CASE("synthetic generation is deterministic and covers every lesion class") {
    std::vector<SampleRecord> a = synth_generate(3, 32, 32, 7);
    std::vector<SampleRecord> b = synth_generate(3, 32, 32, 7);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].image.pixels == b[i].image.pixels);
        CHECK(a[i].mask.pixels == b[i].mask.pixels);
    }

    std::vector<SampleRecord> many = synth_generate(100, 48, 48, 0);
    std::set<int> seen;
    for (const auto& rec : many) {
        validate_record(rec);
        for (std::uint8_t v : rec.mask.pixels)
            if (v) seen.insert(v);
    }
    CHECK(seen == std::set<int>{1, 2, 3});
}

TEST_CASE("make_split gives 35/5/10 on 50 ids and partitions exactly") {
    std::vector<std::string> ids;
    for (int i = 0; i < 50; ++i) ids.push_back("s" + std::to_string(i));
    SplitManifest m = make_split(ids, 0.7, 0.1, 0.2, 42);
    CHECK(m.train.size() == 35);
    CHECK(m.val.size() == 5);
    CHECK(m.test.size() == 10);
    std::set<std::string> all(m.train.begin(), m.train.end());
    all.insert(m.val.begin(), m.val.end());
    all.insert(m.test.begin(), m.test.end());
    CHECK(all.size() == 50);  // disjoint and covering

    SplitManifest again = make_split(ids, 0.7, 0.1, 0.2, 42);
    CHECK(again.train == m.train);
    CHECK(again.test == m.test);
    CHECK_THROWS_AS(make_split(ids, 0.7, 0.1, 0.3, 1), Error);
}

TEST_CASE("dataset write/open round-trip preserves samples and manifest") {
    TempDir dir("ds");
    std::vector<SampleRecord> recs = synth_generate(6, 24, 24, 9);
    std::vector<std::string> ids;
    for (const auto& r : recs) ids.push_back(r.id);
    SplitManifest m = make_split(ids, 0.7, 0.1, 0.2, 1);
    write_dataset(dir.path.string(), recs, m);

    Dataset ds = open_dataset(dir.path.string());
    CHECK(ds.manifest.train == m.train);
    CHECK(ds.manifest.val == m.val);
    CHECK(ds.manifest.test == m.test);
    SampleRecord loaded = ds.load(recs[2].id);
    CHECK(loaded.image.pixels == recs[2].image.pixels);
    CHECK(loaded.mask.pixels == recs[2].mask.pixels);
    CHECK(fs::exists(dir.path / "palette.txt"));
}

TEST_CASE("batches are [0,1]-normalized with matching labels") {
    std::vector<SampleRecord> recs = synth_generate(4, 16, 16, 12);
    Batch b = make_batch(recs, {1, 3});
    CHECK(b.images.shape() == Shape{2, 16, 16, 3});
    CHECK(b.labels.shape == Shape{2, 16, 16});
    const auto& d = b.images.data();
    CHECK(*std::max_element(d.begin(), d.end()) <= 1.0);
    CHECK(*std::min_element(d.begin(), d.end()) >= 0.0);
    CHECK(d[0] == recs[1].image.pixels[0] / 255.0);
    CHECK(b.labels.values[5] == recs[1].mask.pixels[5]);
}
