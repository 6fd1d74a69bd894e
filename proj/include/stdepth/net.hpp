#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stdepth/nn_ops.hpp"
#include "stdepth/warp.hpp"

namespace stdepth {

enum class LayerKind { conv, deconv, pool, unpool };

// Which forward pass a model is trained/evaluated with: one stream from the
// left view only, or both views through shared weights.
enum class Arch { basic, siamese };

inline const char* arch_name(Arch a) { return a == Arch::basic ? "basic" : "siamese"; }

struct LayerDesc {
    LayerKind kind;
    std::string name;
    int64_t in_ch = 0;  // conv/deconv only
    int64_t out_ch = 0;
    int kernel = 0;    // 3 for conv/deconv, 2 for pool/unpool
    int stride = 1;    // 2 for pool/unpool
    int padding = 0;   // 1 for conv/deconv
    int level = 0;     // pool/unpool pairing slot, 1..5
    bool bn = false;   // batchnorm + relu follow the layer
};

struct ParamCount {
    int64_t conv_weights = 0;
    int64_t conv_biases = 0;
    int64_t bn_affine = 0;   // gamma and beta
    int64_t bn_running = 0;  // running mean/var buffers (not learnable)
    int64_t learnable() const { return conv_weights + conv_biases + bn_affine; }
};

// The full encoder/decoder schedule: 19 encoder rows (conv1_1 .. conv6 with
// five pools) mirrored by 19 decoder rows (unpool5 .. conv0), all 3x3
// stride-1 pad-1 convolutions around 2x2 stride-2 pool/unpool pairs.
// Channels map c -> max(1, round(scale*c)); the image-facing 3- and
// 1-channel ends are never scaled, so scale 1 reproduces the schedule
// verbatim and any scale keeps the RGB input and single-channel head.
struct LayerSpec {
    double scale = 1.0;
    std::vector<LayerDesc> layers;  // execution order
    ParamCount count() const;
};

LayerSpec make_layer_spec(double scale = 1.0);

template <typename T>
struct NetLayerT {
    LayerDesc desc;
    ConvParamsT<T> conv;  // meaningful for conv/deconv rows
    BNParamsT<T> bn;      // meaningful when desc.bn
};

// One owned copy of every layer's parameters, in execution order. Copies of
// this struct share storage (tensors are shallow handles), which is how the
// siamese forward runs two streams through the same weights.
template <typename T>
struct NetworkParamsT {
    LayerSpec spec;
    std::vector<NetLayerT<T>> layers;
    T d_max = T(0);  // disparity ceiling; 0 means 0.3*W chosen at forward time
    ParamCount counts;

    // Learnable tensors as (name, handle) in a fixed order: per layer,
    // weight, bias, then gamma and beta when present.
    std::vector<std::pair<std::string, TensorT<T>>> parameters() const;
    void zero_grad() const;
};

using NetLayer = NetLayerT<float>;
using NetworkParams = NetworkParamsT<float>;

// Deterministic init from seed: weights uniform in +-sqrt(6/(fan_in+fan_out)),
// biases zero, BN at identity.
template <typename T>
NetworkParamsT<T> build_network(double scale, uint64_t seed, T d_max = T(0));

// Zero-initialized parameter set with the right shapes (checkpoint loading).
template <typename T>
NetworkParamsT<T> make_network_skeleton(const LayerSpec& spec, T d_max);

// Encoder -> bottleneck -> decoder with pool indices wired across, then the
// disparity activation D = d_max * sigmoid(conv0 output). Values in
// (0, d_max). Train-mode BN updates running statistics in place.
template <typename T>
DisparityMapT<T> forward_basic(NetworkParamsT<T>& params, const TensorT<T>& x, BNMode mode,
                               int sign = +1);

// Both views through the SAME parameters; the returned maps carry opposite
// sign tags (left samples the right image at +sign, right samples left at
// -sign). One backward pass accumulates both streams' gradients.
template <typename T>
std::pair<DisparityMapT<T>, DisparityMapT<T>> forward_siamese(NetworkParamsT<T>& params,
                                                              const TensorT<T>& left,
                                                              const TensorT<T>& right,
                                                              BNMode mode, int sign = +1);

}  // namespace stdepth
