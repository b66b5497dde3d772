#pragma once

#include <cstdint>
#include <vector>

#include "cystonet/tensor.hpp"

namespace cysto {

/// Per-pixel class ids for a batch of masks, row-major [N,H,W].
struct IntMask {
    Shape shape;  // [N,H,W]
    std::vector<std::uint8_t> values;

    static IntMask zeros(Shape shape);
    std::int64_t numel() const { return shape_numel(shape); }
};

struct LossWeights {
    double w_dice = 0.7;
    double w_scce = 0.3;
};

/// 1 - macro-mean soft Dice of softmax(logits) against one-hot labels,
/// smoothing eps 1e-6 per class.
Tensor dice_loss(const Tensor& logits, const IntMask& labels);

/// Mean over pixels of -log softmax(logits)[label], stable log-sum-exp.
Tensor scce_loss(const Tensor& logits, const IntMask& labels);

/// w_dice * dice_loss + w_scce * scce_loss.
Tensor combined_loss(const Tensor& logits, const IntMask& labels, const LossWeights& w);

/// Argmax over the trailing class axis; ties take the lowest class id.
IntMask argmax_classes(const Tensor& logits);

}  // namespace cysto
