#pragma once

#include <cstddef>
#include <vector>

#include "traffic/tensor.hpp"

namespace traffic {

enum class Padding { Valid, Same };

/// Geometry of a 2-D convolution. Kernels are applied as cross-correlation
/// (no flip). `Same` pads with zeros so that stride-1 output keeps the input
/// extent; odd padding puts the extra row/column at the bottom/right.
struct ConvSpec {
    std::size_t kernel_height = 3;
    std::size_t kernel_width = 3;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t stride = 1;
    Padding padding = Padding::Valid;

    std::size_t parameter_count() const { return out_channels * in_channels * kernel_height * kernel_width + out_channels; }
};

struct ConvGeometry {
    std::size_t pad_top = 0, pad_left = 0;
    std::size_t padded_height = 0, padded_width = 0;
    std::size_t out_height = 0, out_width = 0;
};

/// Output extents for an input of `height` x `width`; throws if the kernel does not fit.
ConvGeometry conv_geometry(const ConvSpec& spec, std::size_t height, std::size_t width);

/// input [C_in,H,W], kernels [C_out,C_in,kh,kw], bias [C_out] -> [C_out,H',W'].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, const ConvSpec& spec);

struct ConvGradients {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

/// With `input_gradient` false the (costly) input gradient is skipped and left empty.
ConvGradients conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& kernels,
                              const ConvSpec& spec, bool input_gradient = true);

enum class PoolStatistic { Max, Average };

struct PoolSpec {
    std::size_t window = 2;
    std::size_t stride = 2;
    PoolStatistic statistic = PoolStatistic::Max;
};

std::size_t pool_extent(std::size_t input, const PoolSpec& spec);

struct MaxPoolResult {
    Tensor output;
    /// Flat index into the input of the winning element for each output cell.
    std::vector<std::size_t> argmax;
};

/// Ties go to the first element in row-major scan order of the window.
MaxPoolResult maxpool2d(const Tensor& input, const PoolSpec& spec);
Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax, const Shape& input_shape);

Tensor avgpool2d(const Tensor& input, const PoolSpec& spec);
Tensor avgpool2d_backward(const Tensor& grad_out, const Shape& input_shape, const PoolSpec& spec);

Tensor relu(const Tensor& input);
/// Subgradient at exactly zero is zero.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

/// input [n], weights [m,n], bias [m] -> [m].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGradients {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGradients dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights);

/// Max-subtracted softmax over a rank-1 tensor.
Tensor softmax(const Tensor& logits);
/// Vector-Jacobian product of softmax: returns dL/dlogits given dL/dprobs.
Tensor softmax_backward(const Tensor& grad_probs, const Tensor& probs);

}  // namespace traffic
