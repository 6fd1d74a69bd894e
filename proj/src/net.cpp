#include "stdepth/net.hpp"

#include <array>
#include <cmath>
#include <iostream>
#include <optional>

#include "stdepth/rng.hpp"

namespace stdepth {

namespace {

struct Row {
    LayerKind kind;
    const char* name;
    int in_ch;   // pre-scale channels; 0 for pool/unpool
    int out_ch;
    int level;   // pool/unpool slot
    bool bn;
};

// Encoder then decoder, execution order.
constexpr std::array<Row, 38> kRows = {{
    {LayerKind::conv, "conv1_1", 3, 64, 0, true},
    {LayerKind::conv, "conv1_2", 64, 64, 0, true},
    {LayerKind::pool, "pool1", 0, 0, 1, false},
    {LayerKind::conv, "conv2_1", 64, 128, 0, true},
    {LayerKind::conv, "conv2_2", 128, 128, 0, true},
    {LayerKind::pool, "pool2", 0, 0, 2, false},
    {LayerKind::conv, "conv3_1", 128, 256, 0, true},
    {LayerKind::conv, "conv3_2", 256, 256, 0, true},
    {LayerKind::conv, "conv3_3", 256, 256, 0, true},
    {LayerKind::pool, "pool3", 0, 0, 3, false},
    {LayerKind::conv, "conv4_1", 256, 512, 0, true},
    {LayerKind::conv, "conv4_2", 512, 512, 0, true},
    {LayerKind::conv, "conv4_3", 512, 512, 0, true},
    {LayerKind::pool, "pool4", 0, 0, 4, false},
    {LayerKind::conv, "conv5_1", 512, 512, 0, true},
    {LayerKind::conv, "conv5_2", 512, 512, 0, true},
    {LayerKind::conv, "conv5_3", 512, 512, 0, true},
    {LayerKind::pool, "pool5", 0, 0, 5, false},
    {LayerKind::conv, "conv6", 512, 512, 0, true},
    {LayerKind::unpool, "unpool5", 0, 0, 5, false},
    {LayerKind::deconv, "deconv5_1", 512, 512, 0, true},
    {LayerKind::deconv, "deconv5_2", 512, 512, 0, true},
    {LayerKind::deconv, "deconv5_3", 512, 512, 0, true},
    {LayerKind::unpool, "unpool4", 0, 0, 4, false},
    {LayerKind::deconv, "deconv4_1", 512, 512, 0, true},
    {LayerKind::deconv, "deconv4_2", 512, 512, 0, true},
    {LayerKind::deconv, "deconv4_3", 512, 256, 0, true},
    {LayerKind::unpool, "unpool3", 0, 0, 3, false},
    {LayerKind::deconv, "deconv3_1", 256, 256, 0, true},
    {LayerKind::deconv, "deconv3_2", 256, 256, 0, true},
    {LayerKind::deconv, "deconv3_3", 256, 128, 0, true},
    {LayerKind::unpool, "unpool2", 0, 0, 2, false},
    {LayerKind::deconv, "deconv2_1", 128, 128, 0, true},
    {LayerKind::deconv, "deconv2_2", 128, 64, 0, true},
    {LayerKind::unpool, "unpool1", 0, 0, 1, false},
    {LayerKind::deconv, "deconv1_1", 64, 64, 0, true},
    {LayerKind::deconv, "deconv1_2", 64, 3, 0, true},
    {LayerKind::conv, "conv0", 3, 1, 0, false},
}};

int64_t scaled_channels(double scale, int c, bool* clamped) {
    if (c == 3 || c == 1) return c;
    const auto s = static_cast<int64_t>(std::lround(scale * c));
    if (s < 1) {
        *clamped = true;
        return 1;
    }
    return s;
}

}  // namespace

ParamCount LayerSpec::count() const {
    ParamCount c;
    for (const LayerDesc& l : layers) {
        if (l.kind == LayerKind::conv || l.kind == LayerKind::deconv) {
            c.conv_weights += l.in_ch * l.out_ch * l.kernel * l.kernel;
            c.conv_biases += l.out_ch;
            if (l.bn) {
                c.bn_affine += 2 * l.out_ch;
                c.bn_running += 2 * l.out_ch;
            }
        }
    }
    return c;
}

LayerSpec make_layer_spec(double scale) {
    SD_REQUIRE(scale > 0 && scale <= 1, "channel scale must be in (0, 1], got " << scale);
    LayerSpec spec;
    spec.scale = scale;
    bool clamped = false;
    for (const Row& r : kRows) {
        LayerDesc d;
        d.kind = r.kind;
        d.name = r.name;
        d.level = r.level;
        d.bn = r.bn;
        if (r.kind == LayerKind::conv || r.kind == LayerKind::deconv) {
            d.in_ch = scaled_channels(scale, r.in_ch, &clamped);
            d.out_ch = scaled_channels(scale, r.out_ch, &clamped);
            d.kernel = 3;
            d.stride = 1;
            d.padding = 1;
        } else {
            d.kernel = 2;
            d.stride = 2;
        }
        spec.layers.push_back(std::move(d));
    }
    if (clamped) {
        std::cerr << "warning: channel scale " << scale
                  << " rounds some layers to zero channels; clamped to 1\n";
    }
    return spec;
}

template <typename T>
std::vector<std::pair<std::string, TensorT<T>>> NetworkParamsT<T>::parameters() const {
    std::vector<std::pair<std::string, TensorT<T>>> out;
    for (const NetLayerT<T>& l : layers) {
        if (l.desc.kind != LayerKind::conv && l.desc.kind != LayerKind::deconv) continue;
        out.emplace_back(l.desc.name + ".weight", l.conv.weights);
        out.emplace_back(l.desc.name + ".bias", l.conv.bias);
        if (l.desc.bn) {
            out.emplace_back(l.desc.name + ".bn.gamma", l.bn.gamma);
            out.emplace_back(l.desc.name + ".bn.beta", l.bn.beta);
        }
    }
    return out;
}

template <typename T>
void NetworkParamsT<T>::zero_grad() const {
    for (auto& [name, t] : parameters()) t.zero_grad();
}

template <typename T>
NetworkParamsT<T> make_network_skeleton(const LayerSpec& spec, T d_max) {
    NetworkParamsT<T> params;
    params.spec = spec;
    params.d_max = d_max;
    params.counts = spec.count();
    for (const LayerDesc& d : spec.layers) {
        NetLayerT<T> layer;
        layer.desc = d;
        if (d.kind == LayerKind::conv || d.kind == LayerKind::deconv) {
            layer.conv.weights = TensorT<T>::zeros({d.out_ch, d.in_ch, d.kernel, d.kernel});
            layer.conv.bias = TensorT<T>::zeros({d.out_ch});
            layer.conv.stride = d.stride;
            layer.conv.padding = d.padding;
            layer.conv.name = d.name;
            if (d.bn) {
                layer.bn = BNParamsT<T>::make(d.out_ch);
                layer.bn.name = d.name + ".bn";
            }
        }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

template <typename T>
NetworkParamsT<T> build_network(double scale, uint64_t seed, T d_max) {
    SD_REQUIRE(d_max >= 0, "d_max must be non-negative, got " << d_max);
    NetworkParamsT<T> params = make_network_skeleton<T>(make_layer_spec(scale), d_max);
    Rng rng(seed);
    for (NetLayerT<T>& l : params.layers) {
        if (l.desc.kind != LayerKind::conv && l.desc.kind != LayerKind::deconv) continue;
        const double fan_in = static_cast<double>(l.desc.in_ch) * l.desc.kernel * l.desc.kernel;
        const double fan_out = static_cast<double>(l.desc.out_ch) * l.desc.kernel * l.desc.kernel;
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (T& w : l.conv.weights.values()) {
            w = static_cast<T>(rng.uniform(-bound, bound));
        }
        // biases stay zero; BN stays at identity
    }
    return params;
}

namespace {

template <typename T>
TensorT<T> run_layers(NetworkParamsT<T>& params, const TensorT<T>& x, BNMode mode) {
    SD_REQUIRE(x.rank() == 4, "forward: input must be [B,C,H,W], got " << shape_str(x.shape()));
    SD_REQUIRE(x.dim(2) % 32 == 0 && x.dim(3) % 32 == 0,
               "forward: input spatial size " << x.dim(2) << "x" << x.dim(3)
                                              << " must be divisible by 32 (five 2x poolings)");
    std::array<std::optional<PoolIndices>, 5> saved;
    TensorT<T> h = x;
    for (NetLayerT<T>& l : params.layers) {
        switch (l.desc.kind) {
            case LayerKind::conv:
                h = conv2d(h, l.conv);
                break;
            case LayerKind::deconv:
                h = deconv2d(h, l.conv);
                break;
            case LayerKind::pool: {
                auto [pooled, idx] = maxpool2(h);
                saved[static_cast<size_t>(l.desc.level - 1)] = std::move(idx);
                h = pooled;
                continue;
            }
            case LayerKind::unpool: {
                auto& idx = saved[static_cast<size_t>(l.desc.level - 1)];
                SD_REQUIRE(idx.has_value(), "forward: unpool" << l.desc.level
                                                              << " before its encoder pool ran");
                h = maxunpool2(h, *idx);
                continue;
            }
        }
        if (l.desc.bn) {
            h = batchnorm(h, l.bn, mode);
            h = relu(h);
        }
    }
    return h;
}

}  // namespace

template <typename T>
DisparityMapT<T> forward_basic(NetworkParamsT<T>& params, const TensorT<T>& x, BNMode mode,
                               int sign) {
    TensorT<T> raw = run_layers(params, x, mode);
    const T ceiling = params.d_max > 0 ? params.d_max : static_cast<T>(0.3) * x.dim(3);
    DisparityMapT<T> d;
    d.values = scale(sigmoid(raw), ceiling);
    d.sign = sign;
    return d;
}

template <typename T>
std::pair<DisparityMapT<T>, DisparityMapT<T>> forward_siamese(NetworkParamsT<T>& params,
                                                              const TensorT<T>& left,
                                                              const TensorT<T>& right,
                                                              BNMode mode, int sign) {
    SD_REQUIRE(left.same_shape(right), "forward_siamese: view shapes differ, "
                                           << shape_str(left.shape()) << " vs "
                                           << shape_str(right.shape()));
    DisparityMapT<T> d_left = forward_basic(params, left, mode, sign);
    DisparityMapT<T> d_right = forward_basic(params, right, mode, -sign);
    return {std::move(d_left), std::move(d_right)};
}

#define SD_INSTANTIATE(T)                                                                      \
    template struct NetworkParamsT<T>;                                                         \
    template NetworkParamsT<T> make_network_skeleton<T>(const LayerSpec&, T);                  \
    template NetworkParamsT<T> build_network<T>(double, uint64_t, T);                          \
    template DisparityMapT<T> forward_basic<T>(NetworkParamsT<T>&, const TensorT<T>&, BNMode,  \
                                               int);                                          \
    template std::pair<DisparityMapT<T>, DisparityMapT<T>> forward_siamese<T>(                 \
        NetworkParamsT<T>&, const TensorT<T>&, const TensorT<T>&, BNMode, int);

SD_INSTANTIATE(float)
SD_INSTANTIATE(double)
#undef SD_INSTANTIATE

}  // namespace stdepth
