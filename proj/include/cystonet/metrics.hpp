#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cystonet/loss.hpp"

namespace cysto {

struct ClassMetrics {
    double dice = 1.0, iou = 1.0, accuracy = 1.0, precision = 1.0, recall = 1.0;
};

/// Per-class confusion counts over any number of mask pairs. Partial
/// accumulators over disjoint data merge associatively.
class ConfusionAccumulator {
public:
    explicit ConfusionAccumulator(int num_classes);

    void add(const IntMask& pred, const IntMask& truth);
    void merge(const ConfusionAccumulator& other);

    int num_classes() const { return static_cast<int>(tp_.size()); }
    std::int64_t tp(int c) const { return tp_[c]; }
    std::int64_t fp(int c) const { return fp_[c]; }
    std::int64_t fn(int c) const { return fn_[c]; }
    std::int64_t tn(int c) const { return total_ - tp_[c] - fp_[c] - fn_[c]; }
    std::int64_t total() const { return total_; }

    /// A class participates in macro averages when it appears in either mask.
    bool present(int c) const { return tp_[c] + fp_[c] + fn_[c] > 0; }

    ClassMetrics cls(int c) const;
    ClassMetrics macro(bool include_background = true) const;

    /// Flat `metric.class = value` lines, one per metric/class plus macros.
    std::string report() const;

private:
    std::vector<std::int64_t> tp_, fp_, fn_;
    std::int64_t total_ = 0;
};

ConfusionAccumulator evaluate_masks(const IntMask& pred, const IntMask& truth, int num_classes);

}  // namespace cysto
