#pragma once

#include "adain/tensor.hpp"

namespace adain {

// Differentiable primitives. Every op takes and returns Variables; gradients
// flow to any input with requires_grad set. Outputs are checked for NaN/Inf.

/// Valid cross-correlation, no implicit padding. `weight` is (Cout, Cin, kH, kW),
/// `bias` is (1, Cout, 1, 1) or undefined.
template <class Scalar>
Variable<Scalar> conv2d(const Variable<Scalar>& x, const Variable<Scalar>& weight,
                        const Variable<Scalar>& bias, Index stride = 1);

/// Mirror padding that does not repeat the edge pixel. Requires pad < min(H, W).
template <class Scalar>
Variable<Scalar> reflection_pad2d(const Variable<Scalar>& x, Index pad);

template <class Scalar>
Variable<Scalar> upsample_nearest2d(const Variable<Scalar>& x, Index factor);

/// Windowed maximum; the gradient goes to the first maximum in scan order.
template <class Scalar>
Variable<Scalar> max_pool2d(const Variable<Scalar>& x, Index kernel, Index stride);

/// max(0, x); derivative taken as 0 at x == 0.
template <class Scalar>
Variable<Scalar> relu(const Variable<Scalar>& x);

// Elementwise arithmetic with broadcasting: along each axis the extents must
// match or one of them must be 1.
template <class Scalar>
Variable<Scalar> add(const Variable<Scalar>& a, const Variable<Scalar>& b);
template <class Scalar>
Variable<Scalar> sub(const Variable<Scalar>& a, const Variable<Scalar>& b);
template <class Scalar>
Variable<Scalar> mul(const Variable<Scalar>& a, const Variable<Scalar>& b);
template <class Scalar>
Variable<Scalar> div(const Variable<Scalar>& a, const Variable<Scalar>& b);

template <class Scalar>
Variable<Scalar> scale(const Variable<Scalar>& x, Scalar factor);

/// Sum / mean of all elements, as a (1,1,1,1) tensor.
template <class Scalar>
Variable<Scalar> sum(const Variable<Scalar>& x);
template <class Scalar>
Variable<Scalar> mean(const Variable<Scalar>& x);

/// Mean squared difference over all elements.
template <class Scalar>
Variable<Scalar> mse(const Variable<Scalar>& a, const Variable<Scalar>& b);

// Channel statistics. `per_sample` reduces over (H, W) giving (N, C, 1, 1);
// otherwise over (N, H, W) giving (1, C, 1, 1). Variance is biased and the
// deviation is sqrt(var + eps).
template <class Scalar>
Variable<Scalar> channel_mean(const Variable<Scalar>& x, bool per_sample);
template <class Scalar>
Variable<Scalar> channel_std(const Variable<Scalar>& x, Scalar eps, bool per_sample);

/// Euclidean norm of each sample's elements: (N, C, H, W) -> (N, 1, 1, 1).
/// The derivative at the origin is taken as 0.
template <class Scalar>
Variable<Scalar> sample_norm(const Variable<Scalar>& x);

template <class Scalar>
Variable<Scalar> concat_channels(const Variable<Scalar>& a, const Variable<Scalar>& b);

/// Sample n as a (1, C, H, W) tensor.
template <class Scalar>
Variable<Scalar> select_sample(const Variable<Scalar>& x, Index n);

/// Per-sample Gram matrix F F^T / (C H W) with F the (C, H*W) feature matrix;
/// output is (N, 1, C, C).
template <class Scalar>
Variable<Scalar> gram(const Variable<Scalar>& x);

/// Shape produced by broadcasting a against b; throws DimensionError if incompatible.
Shape broadcast_shape(const Shape& a, const Shape& b);

}  // namespace adain
