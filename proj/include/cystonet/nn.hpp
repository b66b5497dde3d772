#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cystonet/tensor.hpp"

namespace cysto {

/// (hierarchical name, tensor) pairs. Learnable parameters carry
/// requires_grad; running statistics are plain buffers.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

enum class Padding { Same, Valid };

struct Conv2DParams {
    Tensor kernel;  // [kh, kw, C_in, C_out]
    Tensor bias;    // [C_out]
    int stride = 1;
    Padding padding = Padding::Same;

    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct DWSeparableParams {
    Tensor depthwise_kernel;  // [kh, kw, C_in, 1]
    Tensor depthwise_bias;    // [C_in]
    Conv2DParams pointwise;   // 1x1, stride 1

    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct BatchNormParams {
    Tensor gamma, beta;                // [C]
    Tensor running_mean, running_var;  // [C], buffers
    double momentum = 0.1;
    double epsilon = 1e-5;

    void collect(const std::string& prefix, NamedTensors& out) const;
};

Conv2DParams make_conv2d(int kh, int kw, int c_in, int c_out, int stride, Padding padding, std::uint64_t seed);
DWSeparableParams make_dw_separable(int k, int c_in, int c_out, std::uint64_t seed);
BatchNormParams make_batchnorm(int c);

/// Output extent along one axis for the given padding rule.
int conv_out_extent(int in, int k, int stride, Padding padding);

/// Cross-correlation over channels-last images.
Tensor conv2d(const Tensor& x, const Conv2DParams& p);

/// Per-channel spatial filter (stride 1, "same"), then the pointwise 1x1.
Tensor dw_separable_conv(const Tensor& x, const DWSeparableParams& p);

/// Align-corners-false resampling; exact identity at the same size.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);

/// 2x2/stride-2 max pool; ties go to the first element in scan order.
Tensor maxpool2(const Tensor& x);

/// Integer-factor average pool; H and W must divide by fh and fw.
Tensor avgpool(const Tensor& x, int fh, int fw);

/// Training mode normalizes with batch statistics and updates the running
/// buffers (biased variance); eval mode reads the buffers.
Tensor batchnorm(const Tensor& x, BatchNormParams& p, bool training);

}  // namespace cysto
