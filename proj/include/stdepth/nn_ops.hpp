#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stdepth/tensor.hpp"

namespace stdepth {

// Convolution / transposed-convolution parameters.
// weights laid out (out, in, k, k); bias (out). Stride other than 1 is not
// supported (Table-style 3x3 stacks downsample via pooling instead).
template <typename T>
struct ConvParamsT {
    TensorT<T> weights;
    TensorT<T> bias;
    int stride = 1;
    int padding = 0;
    std::string name;  // used in error messages

    int64_t out_channels() const { return weights.dim(0); }
    int64_t in_channels() const { return weights.dim(1); }
    int64_t kernel() const { return weights.dim(2); }
};

template <typename T>
struct BNParamsT {
    TensorT<T> gamma;
    TensorT<T> beta;
    TensorT<T> running_mean;
    TensorT<T> running_var;
    T momentum = T(0.1);
    T epsilon = T(1e-5);
    std::string name;

    static BNParamsT make(int64_t channels) {
        BNParamsT p;
        p.gamma = TensorT<T>::full({channels}, T(1));
        p.beta = TensorT<T>::zeros({channels});
        p.running_mean = TensorT<T>::zeros({channels});
        p.running_var = TensorT<T>::full({channels}, T(1));
        return p;
    }
};

// Argmax positions of a 2x2/stride-2 max pool. Entries index into the source
// window in row-major order: 0=(0,0), 1=(0,1), 2=(1,0), 3=(1,1).
struct PoolIndices {
    Shape shape;  // shape of the pooled output
    std::vector<uint8_t> idx;
};

enum class BNMode { train, infer };

using ConvParams = ConvParamsT<float>;
using BNParams = BNParamsT<float>;

// Cross-correlation with zero padding, stride 1. Output spatial size
// H' = H + 2*pad - k + 1. Differentiable w.r.t. input, weights, and bias.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvParamsT<T>& p);

// Transposed convolution: the linear adjoint of conv2d in its input, with the
// same kernel size and padding. Shape-preserving for k=3, s=1, pad=1.
template <typename T>
TensorT<T> deconv2d(const TensorT<T>& x, const ConvParamsT<T>& p);

// 2x2/stride-2 max pooling. Ties break to the first element in row-major
// window order. Requires even H and W.
template <typename T>
std::pair<TensorT<T>, PoolIndices> maxpool2(const TensorT<T>& x);

// Places each value at its recorded argmax position in a 2x-upsampled plane,
// zeros elsewhere. idx must come from the paired encoder pool.
template <typename T>
TensorT<T> maxunpool2(const TensorT<T>& x, const PoolIndices& idx);

// Per-channel batch normalization over (batch, H, W). Train mode normalizes
// by batch statistics and updates running stats in place; infer mode is a
// fixed affine map using the running statistics.
template <typename T>
TensorT<T> batchnorm(const TensorT<T>& x, BNParamsT<T>& p, BNMode mode);

template <typename T>
TensorT<T> relu(const TensorT<T>& x);

}  // namespace stdepth
