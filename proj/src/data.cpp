#include "cystonet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cysto {

namespace fs = std::filesystem;

const char* const kClassNames[kNumClasses] = {"background", "tumor", "inflammation", "cystite"};
const std::uint8_t kClassColors[kNumClasses][3] = {
    {20, 20, 20}, {230, 180, 60}, {220, 40, 40}, {240, 230, 220}};

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
}

double unit_noise(std::uint64_t base, int y, int x) {
    return rng::Stream(rng::key(base, "px", static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(x))).uniform();
}

}  // namespace

void validate_record(const SampleRecord& rec, int num_classes) {
    if (rec.image.channels != 3) raise(ErrorKind::InvalidArgument, "sample image must be RGB");
    if (rec.mask.channels != 1) raise(ErrorKind::InvalidArgument, "sample mask must be single-channel");
    if (rec.image.height != rec.mask.height || rec.image.width != rec.mask.width) {
        std::ostringstream msg;
        msg << "image/mask size mismatch for '" << rec.id << "': image " << rec.image.height << "x"
            << rec.image.width << ", mask " << rec.mask.height << "x" << rec.mask.width;
        raise(ErrorKind::InvalidArgument, msg.str());
    }
    for (std::uint8_t v : rec.mask.pixels)
        if (v >= num_classes) {
            std::ostringstream msg;
            msg << "mask for '" << rec.id << "' contains value " << int(v) << " but num_classes is " << num_classes;
            raise(ErrorKind::InvalidArgument, msg.str());
        }
}

SampleRecord load_sample(const std::string& image_path, const std::string& mask_path, int num_classes) {
    SampleRecord rec;
    rec.id = stem_of(image_path);
    rec.image = png::read_image(image_path);
    rec.mask = png::read_image(mask_path);
    validate_record(rec, num_classes);
    return rec;
}

Tensor image_to_tensor(const png::Image8& img) {
    if (img.channels != 3) raise(ErrorKind::InvalidArgument, "image_to_tensor expects RGB");
    std::vector<double> data(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) data[i] = img.pixels[i] / 255.0;
    return Tensor::from_data({1, img.height, img.width, 3}, std::move(data));
}

IntMask mask_to_labels(const png::Image8& mask) {
    if (mask.channels != 1) raise(ErrorKind::InvalidArgument, "mask_to_labels expects a single channel");
    IntMask m = IntMask::zeros({1, mask.height, mask.width});
    m.values = mask.pixels;
    return m;
}

Batch make_batch(const std::vector<SampleRecord>& records, const std::vector<int>& indices) {
    if (indices.empty()) raise(ErrorKind::InvalidArgument, "empty batch");
    const auto& first = records.at(indices[0]);
    const int h = first.image.height, w = first.image.width;
    const int b = static_cast<int>(indices.size());
    std::vector<double> images(static_cast<std::size_t>(b) * h * w * 3);
    IntMask labels = IntMask::zeros({b, h, w});
    for (int i = 0; i < b; ++i) {
        const auto& rec = records.at(indices[i]);
        if (rec.image.height != h || rec.image.width != w)
            raise(ErrorKind::Shape, "batch members must share one size");
        const std::size_t npx = static_cast<std::size_t>(h) * w;
        for (std::size_t p = 0; p < npx * 3; ++p) images[i * npx * 3 + p] = rec.image.pixels[p] / 255.0;
        std::copy(rec.mask.pixels.begin(), rec.mask.pixels.end(), labels.values.begin() + i * npx);
    }
    return {Tensor::from_data({b, h, w, 3}, std::move(images)), std::move(labels)};
}

void AugmentationConfig::validate() const {
    if (!(contrast_lo <= 1.0 && 1.0 <= contrast_hi)) raise(ErrorKind::InvalidArgument, "contrast range must bracket 1");
    if (!(scale_lo <= 1.0 && 1.0 <= scale_hi)) raise(ErrorKind::InvalidArgument, "scale range must bracket 1");
    if (rotation_degrees < 0) raise(ErrorKind::InvalidArgument, "rotation must be nonnegative");
}

SampleRecord augment(const SampleRecord& rec, const AugmentationConfig& cfg, rng::Stream& draw) {
    cfg.validate();
    const double contrast = draw.uniform(cfg.contrast_lo, cfg.contrast_hi);
    const double angle = draw.uniform(-cfg.rotation_degrees, cfg.rotation_degrees) * kPi / 180.0;
    const double scale = draw.uniform(cfg.scale_lo, cfg.scale_hi);
    const double cos_t = std::cos(angle), sin_t = std::sin(angle), inv_s = 1.0 / scale;

    const int h = rec.image.height, w = rec.image.width;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    SampleRecord out;
    out.id = rec.id;
    out.image = png::Image8::blank(h, w, 3);
    out.mask = png::Image8::blank(h, w, 1);

    for (int oy = 0; oy < h; ++oy) {
        for (int ox = 0; ox < w; ++ox) {
            const double dy = oy - cy, dx = ox - cx;
            // inverse map: undo scale-then-rotate about the centre
            const double sx = cx + (cos_t * dx + sin_t * dy) * inv_s;
            const double sy = cy + (-sin_t * dx + cos_t * dy) * inv_s;

            // image: bilinear with edge replication
            const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
            const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
            const double fy = std::clamp(sy - y0, 0.0, 1.0), fx = std::clamp(sx - x0, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double top = rec.image.at(y0, x0, c) * (1 - fx) + rec.image.at(y0, x1, c) * fx;
                const double bot = rec.image.at(y1, x0, c) * (1 - fx) + rec.image.at(y1, x1, c) * fx;
                const double v = top * (1 - fy) + bot * fy;
                out.image.at(oy, ox, c) = clamp_byte((v - 127.5) * contrast + 127.5);
            }

            // mask: nearest neighbour, background outside the frame
            const long ny = std::lround(sy), nx = std::lround(sx);
            out.mask.at(oy, ox, 0) = (ny < 0 || ny >= h || nx < 0 || nx >= w)
                                         ? 0
                                         : rec.mask.at(static_cast<int>(ny), static_cast<int>(nx), 0);
        }
    }
    return out;
}

SampleRecord augment_for_epoch(const SampleRecord& rec, const AugmentationConfig& cfg, std::int64_t epoch) {
    rng::Stream draw(rng::key(rng::key(cfg.seed, "augment", static_cast<std::uint64_t>(epoch)), rec.id));
    return augment(rec, cfg, draw);
}

namespace {

struct Lesion {
    int cls;
    double cy, cx, ry, rx, cos_p, sin_p;
    std::uint64_t noise;

    // normalized squared radius; <= 1 means inside
    double q(int y, int x) const {
        const double dy = y - cy, dx = x - cx;
        const double ly = (cos_p * dy + sin_p * dx) / ry;
        const double lx = (-sin_p * dy + cos_p * dx) / rx;
        return ly * ly + lx * lx;
    }
};

void paint_lesion(SampleRecord& rec, const Lesion& le) {
    const int h = rec.image.height, w = rec.image.width;
    const int y0 = std::max(0, static_cast<int>(le.cy - std::max(le.ry, le.rx) - 1));
    const int y1 = std::min(h - 1, static_cast<int>(le.cy + std::max(le.ry, le.rx) + 1));
    const int x0 = std::max(0, static_cast<int>(le.cx - std::max(le.ry, le.rx) - 1));
    const int x1 = std::min(w - 1, static_cast<int>(le.cx + std::max(le.ry, le.rx) + 1));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double q = le.q(y, x);
            if (q > 1.0 || rec.mask.at(y, x, 0) != 0) continue;
            rec.mask.at(y, x, 0) = static_cast<std::uint8_t>(le.cls);
            const double u = 1.0 - q;  // 0 at rim, 1 at centre
            double tr, tg, tb, alpha;
            if (le.cls == 1) {  // tumor: bright yellowish, bumpy, high contrast
                const double bump = 28.0 * std::sin(0.9 * x + le.noise % 7) * std::sin(1.1 * y + le.noise % 11) +
                                    24.0 * (unit_noise(le.noise, y, x) - 0.5);
                tr = 212 + bump;
                tg = 158 + bump;
                tb = 92 + bump * 0.5;
                alpha = 0.85;
            } else if (le.cls == 2) {  // inflammation: deep red diffuse halo
                tr = 186;
                tg = 24;
                tb = 32;
                alpha = 0.30 + 0.55 * u;
            } else {  // cystite: pale speckled patch
                const double n = unit_noise(le.noise, y, x);
                const double speckle = n > 0.92 ? 40.0 : (n < 0.08 ? -34.0 : 0.0);
                tr = 226 + speckle;
                tg = 206 + speckle;
                tb = 198 + speckle;
                alpha = 0.8;
            }
            for (int c = 0; c < 3; ++c) {
                const double target = c == 0 ? tr : (c == 1 ? tg : tb);
                const double base = rec.image.at(y, x, c);
                rec.image.at(y, x, c) = clamp_byte(base + (target - base) * alpha);
            }
        }
    }
}

}  // namespace

std::vector<SampleRecord> synth_generate(int n, int height, int width, std::uint64_t seed) {
    if (n < 1 || height < 16 || width < 16) raise(ErrorKind::InvalidArgument, "synth_generate: n >= 1, size >= 16");
    std::vector<SampleRecord> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        rng::Stream st(rng::key(seed, "synth", static_cast<std::uint64_t>(i)));
        SampleRecord rec;
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "synth_%04d", i);
            rec.id = buf;
        }
        rec.image = png::Image8::blank(height, width, 3);
        rec.mask = png::Image8::blank(height, width, 1);

        // background: reddish base + coarse bilinear noise + vignette
        const double base_r = st.uniform(132, 178), base_g = st.uniform(36, 72), base_b = st.uniform(46, 84);
        constexpr int kGrid = 5;
        double grid[kGrid][kGrid];
        for (auto& row : grid)
            for (double& g : row) g = st.uniform(-16.0, 16.0);
        const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
        const double rmax2 = cy * cy + cx * cx;
        for (int y = 0; y < height; ++y) {
            const double gy = y * double(kGrid - 1) / (height - 1);
            const int gy0 = std::min(static_cast<int>(gy), kGrid - 2);
            const double fy = gy - gy0;
            for (int x = 0; x < width; ++x) {
                const double gx = x * double(kGrid - 1) / (width - 1);
                const int gx0 = std::min(static_cast<int>(gx), kGrid - 2);
                const double fx = gx - gx0;
                const double noise = grid[gy0][gx0] * (1 - fy) * (1 - fx) + grid[gy0][gx0 + 1] * (1 - fy) * fx +
                                     grid[gy0 + 1][gx0] * fy * (1 - fx) + grid[gy0 + 1][gx0 + 1] * fy * fx;
                const double dy = y - cy, dx = x - cx;
                const double vignette = 1.0 - 0.45 * (dy * dy + dx * dx) / rmax2;
                rec.image.at(y, x, 0) = clamp_byte((base_r + noise) * vignette);
                rec.image.at(y, x, 1) = clamp_byte((base_g + noise) * vignette);
                rec.image.at(y, x, 2) = clamp_byte((base_b + noise) * vignette);
            }
        }

        const int lesions = st.below(4);
        for (int l = 0; l < lesions; ++l) {
            Lesion le;
            le.cls = 1 + st.below(3);
            le.cy = st.uniform(0.25, 0.75) * height;
            le.cx = st.uniform(0.25, 0.75) * width;
            le.ry = st.uniform(0.10, 0.26) * height;
            le.rx = st.uniform(0.10, 0.26) * width;
            const double phi = st.uniform(0.0, kPi);
            le.cos_p = std::cos(phi);
            le.sin_p = std::sin(phi);
            le.noise = st.next_u64();
            // skip a candidate that would own no pixels (fully covered/out of frame)
            bool has_free = false;
            for (int y = 0; y < height && !has_free; ++y)
                for (int x = 0; x < width; ++x)
                    if (le.q(y, x) <= 1.0 && rec.mask.at(y, x, 0) == 0) {
                        has_free = true;
                        break;
                    }
            if (has_free) paint_lesion(rec, le);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

SplitManifest make_split(std::vector<std::string> ids, double train_frac, double val_frac, double test_frac,
                         std::uint64_t seed) {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
        std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        raise(ErrorKind::InvalidArgument, "split fractions must be nonnegative and sum to 1");
    rng::Stream st(rng::key(seed, "split"));
    rng::shuffle(ids, st);
    const auto n = static_cast<std::int64_t>(ids.size());
    const auto n_train = std::llround(n * train_frac);
    const auto n_val = std::min(n - n_train, std::llround(n * val_frac));
    SplitManifest m;
    m.train.assign(ids.begin(), ids.begin() + n_train);
    m.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    m.test.assign(ids.begin() + n_train + n_val, ids.end());
    return m;
}

SampleRecord Dataset::load(const std::string& id) const {
    const fs::path base(root);
    return load_sample((base / "images" / (id + ".png")).string(), (base / "masks" / (id + ".png")).string(),
                       num_classes);
}

std::vector<SampleRecord> Dataset::load_ids(const std::vector<std::string>& ids) const {
    std::vector<SampleRecord> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(load(id));
    return out;
}

void write_dataset(const std::string& root, const std::vector<SampleRecord>& records,
                   const SplitManifest& manifest) {
    const fs::path base(root);
    fs::create_directories(base / "images");
    fs::create_directories(base / "masks");
    for (const auto& rec : records) {
        png::write_image((base / "images" / (rec.id + ".png")).string(), rec.image);
        png::write_image((base / "masks" / (rec.id + ".png")).string(), rec.mask);
    }
    write_manifest((base / "manifest.txt").string(), manifest);
    std::ofstream palette(base / "palette.txt");
    for (int c = 0; c < kNumClasses; ++c)
        palette << c << '\t' << int(kClassColors[c][0]) << ' ' << int(kClassColors[c][1]) << ' '
                << int(kClassColors[c][2]) << '\t' << kClassNames[c] << '\n';
    if (!palette) raise(ErrorKind::Io, "cannot write palette under " + root);
}

Dataset open_dataset(const std::string& root) {
    Dataset ds;
    ds.root = root;
    ds.manifest = read_manifest((fs::path(root) / "manifest.txt").string());
    return ds;
}

SplitManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open manifest: " + path);
    SplitManifest m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            raise(ErrorKind::Io, "manifest line " + std::to_string(lineno) + " is not 'split<TAB>id'");
        const std::string split = line.substr(0, tab), id = line.substr(tab + 1);
        if (split == "train")
            m.train.push_back(id);
        else if (split == "val")
            m.val.push_back(id);
        else if (split == "test")
            m.test.push_back(id);
        else
            raise(ErrorKind::Io, "manifest line " + std::to_string(lineno) + ": unknown split '" + split + "'");
    }
    return m;
}

void write_manifest(const std::string& path, const SplitManifest& manifest) {
    std::ofstream out(path);
    for (const auto& id : manifest.train) out << "train\t" << id << "\n";
    for (const auto& id : manifest.val) out << "val\t" << id << "\n";
    for (const auto& id : manifest.test) out << "test\t" << id << "\n";
    if (!out) raise(ErrorKind::Io, "cannot write manifest: " + path);
}

}  // namespace cysto
