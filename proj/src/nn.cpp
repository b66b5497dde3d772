#include "cystonet/nn.hpp"

#include <algorithm>
#include <cmath>

#include "cystonet/rng.hpp"

namespace cysto {

namespace {

using detail::ensure_grad;
using detail::make_op;

void expect_image(const char* op, const Tensor& x) {
    if (x.ndim() != 4) raise(ErrorKind::Shape, std::string(op) + ": expected [N,H,W,C], got " + shape_str(x.shape()));
}

struct PadInfo {
    int out_h, out_w, top, left;
};

PadInfo pad_info(const char* op, int h, int w, int kh, int kw, int stride, Padding padding) {
    PadInfo p{};
    if (padding == Padding::Same) {
        if (kh % 2 == 0 || kw % 2 == 0)
            raise(ErrorKind::InvalidArgument, std::string(op) + ": \"same\" padding needs odd kernel extents");
        p.out_h = (h + stride - 1) / stride;
        p.out_w = (w + stride - 1) / stride;
        p.top = std::max((p.out_h - 1) * stride + kh - h, 0) / 2;
        p.left = std::max((p.out_w - 1) * stride + kw - w, 0) / 2;
    } else {
        if (h < kh || w < kw)
            raise(ErrorKind::Shape, std::string(op) + ": input smaller than the kernel under \"valid\" padding");
        p.out_h = (h - kh) / stride + 1;
        p.out_w = (w - kw) / stride + 1;
    }
    return p;
}

}  // namespace

int conv_out_extent(int in, int k, int stride, Padding padding) {
    if (padding == Padding::Same) return (in + stride - 1) / stride;
    if (in < k) raise(ErrorKind::Shape, "conv_out_extent: input smaller than kernel");
    return (in - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// Parameter construction

Conv2DParams make_conv2d(int kh, int kw, int c_in, int c_out, int stride, Padding padding, std::uint64_t seed) {
    if (kh <= 0 || kw <= 0 || c_in <= 0 || c_out <= 0 || stride <= 0)
        raise(ErrorKind::InvalidArgument, "make_conv2d: extents and stride must be positive");
    Conv2DParams p;
    p.kernel = Tensor::zeros({kh, kw, c_in, c_out}, true);
    rng::Stream s(seed);
    rng::fill_normal(p.kernel.mutable_data(), s, std::sqrt(2.0 / (static_cast<double>(kh) * kw * c_in)));
    p.bias = Tensor::zeros({c_out}, true);
    p.stride = stride;
    p.padding = padding;
    return p;
}

DWSeparableParams make_dw_separable(int k, int c_in, int c_out, std::uint64_t seed) {
    DWSeparableParams p;
    p.depthwise_kernel = Tensor::zeros({k, k, c_in, 1}, true);
    rng::Stream s(rng::key(seed, "dw"));
    rng::fill_normal(p.depthwise_kernel.mutable_data(), s, std::sqrt(2.0 / (static_cast<double>(k) * k)));
    p.depthwise_bias = Tensor::zeros({c_in}, true);
    p.pointwise = make_conv2d(1, 1, c_in, c_out, 1, Padding::Same, rng::key(seed, "pw"));
    return p;
}

BatchNormParams make_batchnorm(int c) {
    BatchNormParams p;
    p.gamma = Tensor::full({c}, 1.0, true);
    p.beta = Tensor::zeros({c}, true);
    p.running_mean = Tensor::zeros({c});
    p.running_var = Tensor::full({c}, 1.0);
    return p;
}

void Conv2DParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".kernel", kernel);
    out.emplace_back(prefix + ".bias", bias);
}

void DWSeparableParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".dw_kernel", depthwise_kernel);
    out.emplace_back(prefix + ".dw_bias", depthwise_bias);
    pointwise.collect(prefix + ".pw", out);
}

void BatchNormParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
    out.emplace_back(prefix + ".running_mean", running_mean);
    out.emplace_back(prefix + ".running_var", running_var);
}

// ---------------------------------------------------------------------------
// conv2d

Tensor conv2d(const Tensor& x, const Conv2DParams& p) {
    expect_image("conv2d", x);
    const Shape& xs = x.shape();
    const Shape& ks = p.kernel.shape();
    if (ks.size() != 4) raise(ErrorKind::Shape, "conv2d: kernel must be [kh,kw,C_in,C_out]");
    const int n = xs[0], h = xs[1], w = xs[2], ci = xs[3];
    const int kh = ks[0], kw = ks[1], co = ks[3];
    if (ks[2] != ci)
        raise(ErrorKind::Shape, "conv2d: input has " + std::to_string(ci) + " channels, kernel expects " + std::to_string(ks[2]));
    if (p.bias.shape() != Shape{co}) raise(ErrorKind::Shape, "conv2d: bias/kernel channel mismatch");
    const PadInfo pad = pad_info("conv2d", h, w, kh, kw, p.stride, p.padding);
    const int oh = pad.out_h, ow = pad.out_w, stride = p.stride;

    std::vector<double> value(static_cast<std::size_t>(n) * oh * ow * co);
    const double* xv = x.data().data();
    const double* kv = p.kernel.data().data();
    const double* bv = p.bias.data().data();
    for (int in = 0; in < n; ++in)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* out = value.data() + ((static_cast<std::size_t>(in) * oh + oy) * ow + ox) * co;
                for (int c = 0; c < co; ++c) out[c] = bv[c];
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad.top + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - pad.left + kx;
                        if (ix < 0 || ix >= w) continue;
                        const double* xp = xv + ((static_cast<std::size_t>(in) * h + iy) * w + ix) * ci;
                        const double* kp = kv + (static_cast<std::size_t>(ky) * kw + kx) * ci * co;
                        for (int c = 0; c < ci; ++c) {
                            const double xc = xp[c];
                            const double* kc = kp + static_cast<std::size_t>(c) * co;
                            for (int o = 0; o < co; ++o) out[o] += xc * kc[o];
                        }
                    }
                }
            }

    auto xn = x.node();
    auto kn = p.kernel.node();
    auto bn2 = p.bias.node();
    const bool req = xn->requires_grad || kn->requires_grad || bn2->requires_grad;
    Tensor out = make_op("conv2d", {n, oh, ow, co}, std::move(value), req);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("conv2d", on, [xn, kn, bn2, on, n, h, w, ci, kh, kw, co, oh, ow, stride, pad]() {
            const double* og = on->grad.data();
            const double* xv = xn->value.data();
            const double* kv = kn->value.data();
            const bool need_dx = xn->requires_grad;
            const bool need_dk = kn->requires_grad;
            double* gx = need_dx ? ensure_grad(*xn).data() : nullptr;
            double* gk = need_dk ? ensure_grad(*kn).data() : nullptr;
            double* gb = bn2->requires_grad ? ensure_grad(*bn2).data() : nullptr;
            for (int in = 0; in < n; ++in)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const double* go = og + ((static_cast<std::size_t>(in) * oh + oy) * ow + ox) * co;
                        if (gb)
                            for (int o = 0; o < co; ++o) gb[o] += go[o];
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride - pad.top + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride - pad.left + kx;
                                if (ix < 0 || ix >= w) continue;
                                const std::size_t xoff = ((static_cast<std::size_t>(in) * h + iy) * w + ix) * ci;
                                const std::size_t koff = (static_cast<std::size_t>(ky) * kw + kx) * ci * co;
                                for (int c = 0; c < ci; ++c) {
                                    const double* kc = kv + koff + static_cast<std::size_t>(c) * co;
                                    if (need_dx) {
                                        double s = 0.0;
                                        for (int o = 0; o < co; ++o) s += go[o] * kc[o];
                                        gx[xoff + c] += s;
                                    }
                                    if (need_dk) {
                                        const double xc = xv[xoff + c];
                                        double* gkc = gk + koff + static_cast<std::size_t>(c) * co;
                                        for (int o = 0; o < co; ++o) gkc[o] += xc * go[o];
                                    }
                                }
                            }
                        }
                    }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// depthwise + pointwise

namespace {

Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    expect_image("dw_separable_conv", x);
    const Shape& xs = x.shape();
    const Shape& ks = kernel.shape();
    if (ks.size() != 4 || ks[3] != 1) raise(ErrorKind::Shape, "dw_separable_conv: depthwise kernel must be [kh,kw,C_in,1]");
    const int n = xs[0], h = xs[1], w = xs[2], c = xs[3];
    const int kh = ks[0], kw = ks[1];
    if (ks[2] != c) raise(ErrorKind::Shape, "dw_separable_conv: input has " + std::to_string(c) +
                                                " channels, depthwise kernel expects " + std::to_string(ks[2]));
    if (bias.shape() != Shape{c}) raise(ErrorKind::Shape, "dw_separable_conv: depthwise bias mismatch");
    const PadInfo pad = pad_info("dw_separable_conv", h, w, kh, kw, 1, Padding::Same);

    std::vector<double> value(x.numel());
    const double* xv = x.data().data();
    const double* kv = kernel.data().data();
    const double* bv = bias.data().data();
    for (int in = 0; in < n; ++in)
        for (int oy = 0; oy < h; ++oy)
            for (int ox = 0; ox < w; ++ox) {
                double* out = value.data() + ((static_cast<std::size_t>(in) * h + oy) * w + ox) * c;
                for (int ch = 0; ch < c; ++ch) out[ch] = bv[ch];
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy - pad.top + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox - pad.left + kx;
                        if (ix < 0 || ix >= w) continue;
                        const double* xp = xv + ((static_cast<std::size_t>(in) * h + iy) * w + ix) * c;
                        const double* kp = kv + (static_cast<std::size_t>(ky) * kw + kx) * c;
                        for (int ch = 0; ch < c; ++ch) out[ch] += xp[ch] * kp[ch];
                    }
                }
            }

    auto xn = x.node();
    auto kn = kernel.node();
    auto bn2 = bias.node();
    const bool req = xn->requires_grad || kn->requires_grad || bn2->requires_grad;
    Tensor out = make_op("depthwise_conv2d", xs, std::move(value), req);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("depthwise_conv2d", on, [xn, kn, bn2, on, n, h, w, c, kh, kw, pad]() {
            const double* og = on->grad.data();
            const double* xv = xn->value.data();
            const double* kv = kn->value.data();
            double* gx = xn->requires_grad ? ensure_grad(*xn).data() : nullptr;
            double* gk = kn->requires_grad ? ensure_grad(*kn).data() : nullptr;
            double* gb = bn2->requires_grad ? ensure_grad(*bn2).data() : nullptr;
            for (int in = 0; in < n; ++in)
                for (int oy = 0; oy < h; ++oy)
                    for (int ox = 0; ox < w; ++ox) {
                        const double* go = og + ((static_cast<std::size_t>(in) * h + oy) * w + ox) * c;
                        if (gb)
                            for (int ch = 0; ch < c; ++ch) gb[ch] += go[ch];
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy - pad.top + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox - pad.left + kx;
                                if (ix < 0 || ix >= w) continue;
                                const std::size_t xoff = ((static_cast<std::size_t>(in) * h + iy) * w + ix) * c;
                                const std::size_t koff = (static_cast<std::size_t>(ky) * kw + kx) * c;
                                for (int ch = 0; ch < c; ++ch) {
                                    if (gx) gx[xoff + ch] += go[ch] * kv[koff + ch];
                                    if (gk) gk[koff + ch] += go[ch] * xv[xoff + ch];
                                }
                            }
                        }
                    }
        });
    }
    return out;
}

}  // namespace

Tensor dw_separable_conv(const Tensor& x, const DWSeparableParams& p) {
    return conv2d(depthwise_conv2d(x, p.depthwise_kernel, p.depthwise_bias), p.pointwise);
}

// ---------------------------------------------------------------------------
// bilinear_resize

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    expect_image("bilinear_resize", x);
    if (out_h < 1 || out_w < 1) raise(ErrorKind::InvalidArgument, "bilinear_resize: target extents must be >= 1");
    const Shape& xs = x.shape();
    const int n = xs[0], h = xs[1], w = xs[2], c = xs[3];

    struct Tap {
        int lo, hi;
        double frac;  // weight of hi
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(out);
        const double scale = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            double src = (o + 0.5) * scale - 0.5;
            double fl = std::floor(src);
            int lo = static_cast<int>(fl);
            double frac = src - fl;
            int hi = lo + 1;
            if (lo < 0) {
                lo = 0;
                hi = 0;
                frac = 0.0;
            } else if (hi > in - 1) {
                hi = in - 1;
                if (lo > in - 1) lo = in - 1;
                if (lo == hi) frac = 0.0;
            }
            t[o] = {lo, hi, frac};
        }
        return t;
    };
    const auto ty = taps(h, out_h);
    const auto tx = taps(w, out_w);

    std::vector<double> value(static_cast<std::size_t>(n) * out_h * out_w * c);
    const double* xv = x.data().data();
    auto row = [&](int in_, int y) { return xv + (static_cast<std::size_t>(in_) * h + y) * w * c; };
    for (int in = 0; in < n; ++in)
        for (int oy = 0; oy < out_h; ++oy) {
            const Tap& yt = ty[oy];
            for (int ox = 0; ox < out_w; ++ox) {
                const Tap& xt = tx[ox];
                double* out = value.data() + ((static_cast<std::size_t>(in) * out_h + oy) * out_w + ox) * c;
                const double* p00 = row(in, yt.lo) + static_cast<std::size_t>(xt.lo) * c;
                if (yt.frac == 0.0 && xt.frac == 0.0) {
                    for (int ch = 0; ch < c; ++ch) out[ch] = p00[ch];
                    continue;
                }
                const double* p01 = row(in, yt.lo) + static_cast<std::size_t>(xt.hi) * c;
                const double* p10 = row(in, yt.hi) + static_cast<std::size_t>(xt.lo) * c;
                const double* p11 = row(in, yt.hi) + static_cast<std::size_t>(xt.hi) * c;
                const double w00 = (1.0 - yt.frac) * (1.0 - xt.frac);
                const double w01 = (1.0 - yt.frac) * xt.frac;
                const double w10 = yt.frac * (1.0 - xt.frac);
                const double w11 = yt.frac * xt.frac;
                for (int ch = 0; ch < c; ++ch) out[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
            }
        }

    auto xn = x.node();
    Tensor out = make_op("bilinear_resize", {n, out_h, out_w, c}, std::move(value), xn->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("bilinear_resize", on, [xn, on, ty, tx, n, h, w, c, out_h, out_w]() {
            double* gx = ensure_grad(*xn).data();
            const double* og = on->grad.data();
            auto gxrow = [&](int in_, int y) { return gx + (static_cast<std::size_t>(in_) * h + y) * w * c; };
            for (int in = 0; in < n; ++in)
                for (int oy = 0; oy < out_h; ++oy) {
                    const Tap& yt = ty[oy];
                    for (int ox = 0; ox < out_w; ++ox) {
                        const Tap& xt = tx[ox];
                        const double* go = og + ((static_cast<std::size_t>(in) * out_h + oy) * out_w + ox) * c;
                        const double w00 = (1.0 - yt.frac) * (1.0 - xt.frac);
                        const double w01 = (1.0 - yt.frac) * xt.frac;
                        const double w10 = yt.frac * (1.0 - xt.frac);
                        const double w11 = yt.frac * xt.frac;
                        double* g00 = gxrow(in, yt.lo) + static_cast<std::size_t>(xt.lo) * c;
                        double* g01 = gxrow(in, yt.lo) + static_cast<std::size_t>(xt.hi) * c;
                        double* g10 = gxrow(in, yt.hi) + static_cast<std::size_t>(xt.lo) * c;
                        double* g11 = gxrow(in, yt.hi) + static_cast<std::size_t>(xt.hi) * c;
                        for (int ch = 0; ch < c; ++ch) {
                            const double g = go[ch];
                            g00[ch] += w00 * g;
                            if (xt.hi != xt.lo) g01[ch] += w01 * g;
                            if (yt.hi != yt.lo) g10[ch] += w10 * g;
                            if (yt.hi != yt.lo && xt.hi != xt.lo) g11[ch] += w11 * g;
                        }
                    }
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// pooling

Tensor maxpool2(const Tensor& x) {
    expect_image("maxpool2", x);
    const Shape& xs = x.shape();
    const int n = xs[0], h = xs[1], w = xs[2], c = xs[3];
    if (h < 2 || w < 2) raise(ErrorKind::Shape, "maxpool2: spatial extents must be >= 2");
    const int oh = h / 2, ow = w / 2;

    std::vector<double> value(static_cast<std::size_t>(n) * oh * ow * c);
    const double* xv = x.data().data();
    auto at = [&](int in_, int y, int xx, int ch) {
        return xv[((static_cast<std::size_t>(in_) * h + y) * w + xx) * c + ch];
    };
    for (int in = 0; in < n; ++in)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int ch = 0; ch < c; ++ch) {
                    double best = at(in, 2 * oy, 2 * ox, ch);
                    double cand = at(in, 2 * oy, 2 * ox + 1, ch);
                    if (cand > best) best = cand;
                    cand = at(in, 2 * oy + 1, 2 * ox, ch);
                    if (cand > best) best = cand;
                    cand = at(in, 2 * oy + 1, 2 * ox + 1, ch);
                    if (cand > best) best = cand;
                    value[((static_cast<std::size_t>(in) * oh + oy) * ow + ox) * c + ch] = best;
                }

    auto xn = x.node();
    Tensor out = make_op("maxpool2", {n, oh, ow, c}, std::move(value), xn->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("maxpool2", on, [xn, on, n, h, w, c, oh, ow]() {
            double* gx = ensure_grad(*xn).data();
            const double* og = on->grad.data();
            const double* xv = xn->value.data();
            auto idx = [&](int in_, int y, int xx, int ch) {
                return ((static_cast<std::size_t>(in_) * h + y) * w + xx) * c + ch;
            };
            for (int in = 0; in < n; ++in)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox)
                        for (int ch = 0; ch < c; ++ch) {
                            // first maximum in scan order gets the gradient
                            std::size_t best = idx(in, 2 * oy, 2 * ox, ch);
                            const std::size_t cands[3] = {idx(in, 2 * oy, 2 * ox + 1, ch), idx(in, 2 * oy + 1, 2 * ox, ch),
                                                          idx(in, 2 * oy + 1, 2 * ox + 1, ch)};
                            for (std::size_t cand : cands)
                                if (xv[cand] > xv[best]) best = cand;
                            gx[best] += og[((static_cast<std::size_t>(in) * oh + oy) * ow + ox) * c + ch];
                        }
        });
    }
    return out;
}

Tensor avgpool(const Tensor& x, int fh, int fw) {
    expect_image("avgpool", x);
    const Shape& xs = x.shape();
    const int n = xs[0], h = xs[1], w = xs[2], c = xs[3];
    if (fh < 1 || fw < 1 || h % fh != 0 || w % fw != 0)
        raise(ErrorKind::InvalidArgument, "avgpool: factors must divide the spatial extents");
    const int oh = h / fh, ow = w / fw;
    const double inv = 1.0 / (static_cast<double>(fh) * fw);

    std::vector<double> value(static_cast<std::size_t>(n) * oh * ow * c, 0.0);
    const double* xv = x.data().data();
    for (int in = 0; in < n; ++in)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* out = value.data() + ((static_cast<std::size_t>(in) * oh + oy) * ow + ox) * c;
                for (int dy = 0; dy < fh; ++dy)
                    for (int dx = 0; dx < fw; ++dx) {
                        const double* xp = xv + ((static_cast<std::size_t>(in) * h + oy * fh + dy) * w + ox * fw + dx) * c;
                        for (int ch = 0; ch < c; ++ch) out[ch] += xp[ch];
                    }
                for (int ch = 0; ch < c; ++ch) out[ch] *= inv;
            }

    auto xn = x.node();
    Tensor out = make_op("avgpool", {n, oh, ow, c}, std::move(value), xn->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("avgpool", on, [xn, on, n, h, w, c, oh, ow, fh, fw, inv]() {
            double* gx = ensure_grad(*xn).data();
            const double* og = on->grad.data();
            for (int in = 0; in < n; ++in)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const double* go = og + ((static_cast<std::size_t>(in) * oh + oy) * ow + ox) * c;
                        for (int dy = 0; dy < fh; ++dy)
                            for (int dx = 0; dx < fw; ++dx) {
                                double* gp = gx + ((static_cast<std::size_t>(in) * h + oy * fh + dy) * w + ox * fw + dx) * c;
                                for (int ch = 0; ch < c; ++ch) gp[ch] += go[ch] * inv;
                            }
                    }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// batchnorm

Tensor batchnorm(const Tensor& x, BatchNormParams& p, bool training) {
    expect_image("batchnorm", x);
    const int c = x.shape()[3];
    if (p.gamma.shape() != Shape{c})
        raise(ErrorKind::Shape, "batchnorm: input has " + std::to_string(c) + " channels, params expect " +
                                    shape_str(p.gamma.shape()));
    if (training) {
        Tensor mu = mean_axes(x, {0, 1, 2}, false);                    // [C]
        Tensor xc = sub(x, mu);                                        // broadcast over trailing C
        Tensor var = mean_axes(mul(xc, xc), {0, 1, 2}, false);         // biased
        Tensor inv = pow_scalar(add_scalar(var, p.epsilon), -0.5);
        Tensor out = add(mul(xc, mul(inv, p.gamma)), p.beta);
        auto& rm = p.running_mean.mutable_data();
        auto& rv = p.running_var.mutable_data();
        for (int ch = 0; ch < c; ++ch) {
            rm[ch] = (1.0 - p.momentum) * rm[ch] + p.momentum * mu.data()[ch];
            rv[ch] = (1.0 - p.momentum) * rv[ch] + p.momentum * var.data()[ch];
        }
        return out;
    }
    std::vector<double> inv(c);
    for (int ch = 0; ch < c; ++ch) inv[ch] = 1.0 / std::sqrt(p.running_var.data()[ch] + p.epsilon);
    Tensor inv_t = Tensor::from_data({c}, std::move(inv));
    return add(mul(sub(x, p.running_mean), mul(inv_t, p.gamma)), p.beta);
}

}  // namespace cysto
