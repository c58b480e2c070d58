#pragma once

#include "sdnn/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace sdnn {

enum class EwiseOp { add, mul, broadcast_add_channel };

/// Elementwise binary op. For add/mul the shapes must match; for
/// broadcast_add_channel `a` is N×H×W×C and `b` is either a C-vector shared by
/// the batch or an N×C matrix with one channel vector per sample; the gradient
/// of `b` is summed over every broadcast position.
Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b);

inline Tensor add(const Tensor& a, const Tensor& b) { return ewise(EwiseOp::add, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return ewise(EwiseOp::mul, a, b); }
inline Tensor broadcast_add_channel(const Tensor& a, const Tensor& v)
{
    return ewise(EwiseOp::broadcast_add_channel, a, v);
}

/// x * factor for a constant factor.
Tensor scale(const Tensor& x, float factor);
/// x * s where s is a differentiable single-element tensor.
Tensor scale_by(const Tensor& x, const Tensor& s);
/// Sum of all elements as a single-element tensor.
Tensor sum(const Tensor& x);
/// Same data, new extents with the same element count.
Tensor reshape(const Tensor& x, Shape shape);

/// x (N×Din) · weight (Din×Dout) + bias (Dout).
Tensor dense(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias = std::nullopt);

/// a (N×D) · bᵀ where b is C×D; yields N×C.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// Cross-correlation over an N×H×W×Cin input with a K×K×Cin×Cout kernel.
/// Output extent per spatial axis is (in + 2·padding − K) / stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding,
              const std::optional<Tensor>& bias = std::nullopt);

enum class PoolMode { max, avg };

/// Adaptive pooling onto a target_h × target_w grid of equal windows.
/// Max mode routes the gradient to the first maximum in row-major order.
Tensor pool2d(const Tensor& x, PoolMode mode, std::size_t target_h, std::size_t target_w);

/// max(0, x); the subgradient at exactly 0 is 0.
Tensor relu(const Tensor& x);

/// Row-wise x / max(‖x‖, epsilon) over an N×D tensor.
Tensor l2_normalize(const Tensor& x, float epsilon = 1e-12f);

/// Per-sample (x − mean) / sqrt(var + epsilon), statistics over every
/// non-batch axis. No learned scale or shift.
Tensor standardize(const Tensor& x, float epsilon = 1e-5f);

/// Mean over the batch of −log softmax(logits)[label], max-subtracted.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels);

/// Row-wise softmax of an N×C tensor. Not recorded for differentiation.
Tensor softmax(const Tensor& logits);

/// Index of the largest entry in each row; ties resolve to the lowest index.
std::vector<std::uint32_t> argmax_rows(const Tensor& x);

} // namespace sdnn
