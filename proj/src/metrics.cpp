#include "cystonet/metrics.hpp"

#include <cstdio>

namespace cysto {

ConfusionAccumulator::ConfusionAccumulator(int num_classes) {
    if (num_classes <= 0) raise(ErrorKind::InvalidArgument, "ConfusionAccumulator: need at least one class");
    tp_.assign(num_classes, 0);
    fp_.assign(num_classes, 0);
    fn_.assign(num_classes, 0);
}

void ConfusionAccumulator::add(const IntMask& pred, const IntMask& truth) {
    if (pred.shape != truth.shape)
        raise(ErrorKind::Shape, "metrics: prediction " + shape_str(pred.shape) + " vs truth " + shape_str(truth.shape));
    const int nc = num_classes();
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const int p = pred.values[i], t = truth.values[i];
        if (p >= nc || t >= nc) raise(ErrorKind::InvalidArgument, "metrics: class id outside the configured range");
        if (p == t) {
            ++tp_[p];
        } else {
            ++fp_[p];
            ++fn_[t];
        }
    }
    total_ += static_cast<std::int64_t>(pred.values.size());
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
    if (other.num_classes() != num_classes())
        raise(ErrorKind::InvalidArgument, "metrics: merging accumulators with different class counts");
    for (int c = 0; c < num_classes(); ++c) {
        tp_[c] += other.tp_[c];
        fp_[c] += other.fp_[c];
        fn_[c] += other.fn_[c];
    }
    total_ += other.total_;
}

ClassMetrics ConfusionAccumulator::cls(int c) const {
    if (c < 0 || c >= num_classes()) raise(ErrorKind::InvalidArgument, "metrics: class index out of range");
    ClassMetrics m;  // absent classes keep the vacuous 1.0 defaults
    const double tp = static_cast<double>(tp_[c]);
    const std::int64_t union_ = tp_[c] + fp_[c] + fn_[c];
    if (total_ > 0) m.accuracy = static_cast<double>(tp_[c] + tn(c)) / static_cast<double>(total_);
    if (union_ == 0) return m;
    m.iou = tp / static_cast<double>(union_);
    m.dice = 2.0 * tp / static_cast<double>(tp_[c] + union_);
    m.precision = tp_[c] + fp_[c] > 0 ? tp / static_cast<double>(tp_[c] + fp_[c]) : 0.0;
    m.recall = tp_[c] + fn_[c] > 0 ? tp / static_cast<double>(tp_[c] + fn_[c]) : 0.0;
    return m;
}

ClassMetrics ConfusionAccumulator::macro(bool include_background) const {
    ClassMetrics sum{0, 0, 0, 0, 0};
    int counted = 0;
    for (int c = include_background ? 0 : 1; c < num_classes(); ++c) {
        if (!present(c)) continue;
        ClassMetrics m = cls(c);
        sum.dice += m.dice;
        sum.iou += m.iou;
        sum.accuracy += m.accuracy;
        sum.precision += m.precision;
        sum.recall += m.recall;
        ++counted;
    }
    if (counted == 0) return ClassMetrics{};
    const double inv = 1.0 / counted;
    return {sum.dice * inv, sum.iou * inv, sum.accuracy * inv, sum.precision * inv, sum.recall * inv};
}

std::string ConfusionAccumulator::report() const {
    std::string out;
    char line[96];
    auto emit = [&](const char* metric, const std::string& cls_name, double v) {
        std::snprintf(line, sizeof line, "%s.%s = %.9f\n", metric, cls_name.c_str(), v);
        out += line;
    };
    for (int c = 0; c < num_classes(); ++c) {
        const std::string name = "class" + std::to_string(c);
        ClassMetrics m = cls(c);
        emit("dice", name, m.dice);
        emit("iou", name, m.iou);
        emit("accuracy", name, m.accuracy);
        emit("precision", name, m.precision);
        emit("recall", name, m.recall);
        std::snprintf(line, sizeof line, "present.%s = %d\n", name.c_str(), present(c) ? 1 : 0);
        out += line;
    }
    ClassMetrics all = macro(true), fg = macro(false);
    emit("dice", "macro", all.dice);
    emit("iou", "macro", all.iou);
    emit("accuracy", "macro", all.accuracy);
    emit("precision", "macro", all.precision);
    emit("recall", "macro", all.recall);
    emit("dice", "macro_foreground", fg.dice);
    emit("iou", "macro_foreground", fg.iou);
    emit("accuracy", "macro_foreground", fg.accuracy);
    emit("precision", "macro_foreground", fg.precision);
    emit("recall", "macro_foreground", fg.recall);
    return out;
}

ConfusionAccumulator evaluate_masks(const IntMask& pred, const IntMask& truth, int num_classes) {
    ConfusionAccumulator acc(num_classes);
    acc.add(pred, truth);
    return acc;
}

}  // namespace cysto
