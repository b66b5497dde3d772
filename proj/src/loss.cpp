#include "cystonet/loss.hpp"

#include <cmath>

namespace cysto {

IntMask IntMask::zeros(Shape shape) {
    if (shape.size() != 3) raise(ErrorKind::Shape, "IntMask: expected [N,H,W], got " + shape_str(shape));
    for (int d : shape)
        if (d <= 0) raise(ErrorKind::Shape, "IntMask: extents must be positive");
    IntMask m;
    m.values.assign(shape_numel(shape), 0);
    m.shape = std::move(shape);
    return m;
}

namespace {

int check_logits_labels(const char* op, const Tensor& logits, const IntMask& labels) {
    if (logits.ndim() != 4) raise(ErrorKind::Shape, std::string(op) + ": logits must be [N,H,W,C]");
    const Shape& s = logits.shape();
    if (labels.shape != Shape{s[0], s[1], s[2]})
        raise(ErrorKind::Shape, std::string(op) + ": labels " + shape_str(labels.shape) + " do not match logits " +
                                    shape_str(s));
    const int c = s[3];
    for (std::uint8_t v : labels.values)
        if (v >= c)
            raise(ErrorKind::InvalidArgument,
                  std::string(op) + ": label " + std::to_string(v) + " outside the " + std::to_string(c) + " classes");
    return c;
}

}  // namespace

Tensor dice_loss(const Tensor& logits, const IntMask& labels) {
    const int c = check_logits_labels("dice_loss", logits, labels);
    constexpr double kEps = 1e-6;
    Tensor prob = softmax(logits, 3);

    std::vector<double> onehot(logits.numel(), 0.0);
    for (std::size_t i = 0; i < labels.values.size(); ++i) onehot[i * c + labels.values[i]] = 1.0;
    Tensor truth = Tensor::from_data(logits.shape(), std::move(onehot));

    Tensor inter = sum_axes(mul(prob, truth), {0, 1, 2}, false);  // [C]
    Tensor denom = add(sum_axes(prob, {0, 1, 2}, false), sum_axes(truth, {0, 1, 2}, false));
    Tensor per_class = div(add_scalar(mul_scalar(inter, 2.0), kEps), add_scalar(denom, kEps));
    return add_scalar(mul_scalar(mean(per_class), -1.0), 1.0);
}

Tensor scce_loss(const Tensor& logits, const IntMask& labels) {
    const int c = check_logits_labels("scce_loss", logits, labels);
    const std::int64_t pixels = labels.numel();
    const double inv = 1.0 / static_cast<double>(pixels);
    const double* z = logits.data().data();

    double total = 0.0;
    for (std::int64_t i = 0; i < pixels; ++i) {
        const double* row = z + i * c;
        double mx = row[0];
        for (int k = 1; k < c; ++k) mx = std::max(mx, row[k]);
        double s = 0.0;
        for (int k = 0; k < c; ++k) s += std::exp(row[k] - mx);
        total += mx + std::log(s) - row[labels.values[i]];
    }

    auto ln = logits.node();
    Tensor out = detail::make_op("scce_loss", {1}, {total * inv}, ln->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        IntMask lab = labels;
        GradTape::active()->record("scce_loss", on, [ln, on, lab, c, pixels, inv]() {
            double* g = detail::ensure_grad(*ln).data();
            const double* z = ln->value.data();
            const double scale = on->grad[0] * inv;
            for (std::int64_t i = 0; i < pixels; ++i) {
                const double* row = z + i * c;
                double mx = row[0];
                for (int k = 1; k < c; ++k) mx = std::max(mx, row[k]);
                double s = 0.0;
                for (int k = 0; k < c; ++k) s += std::exp(row[k] - mx);
                double* gr = g + i * c;
                for (int k = 0; k < c; ++k) gr[k] += scale * (std::exp(row[k] - mx) / s);
                gr[lab.values[i]] -= scale;
            }
        });
    }
    return out;
}

Tensor combined_loss(const Tensor& logits, const IntMask& labels, const LossWeights& w) {
    if (w.w_dice < 0.0 || w.w_scce < 0.0) raise(ErrorKind::InvalidArgument, "combined_loss: weights must be nonnegative");
    if (w.w_scce == 0.0) return mul_scalar(dice_loss(logits, labels), w.w_dice);
    if (w.w_dice == 0.0) return mul_scalar(scce_loss(logits, labels), w.w_scce);
    return add(mul_scalar(dice_loss(logits, labels), w.w_dice), mul_scalar(scce_loss(logits, labels), w.w_scce));
}

IntMask argmax_classes(const Tensor& logits) {
    if (logits.ndim() != 4) raise(ErrorKind::Shape, "argmax_classes: logits must be [N,H,W,C]");
    const Shape& s = logits.shape();
    const int c = s[3];
    IntMask m = IntMask::zeros({s[0], s[1], s[2]});
    const double* z = logits.data().data();
    for (std::int64_t i = 0; i < m.numel(); ++i) {
        const double* row = z + i * c;
        int best = 0;
        for (int k = 1; k < c; ++k)
            if (row[k] > row[best]) best = k;
        m.values[i] = static_cast<std::uint8_t>(best);
    }
    return m;
}

}  // namespace cysto
