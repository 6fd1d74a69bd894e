#include "stdepth/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace stdepth {

namespace {

template <typename T>
void check_conv_input(const TensorT<T>& x, const ConvParamsT<T>& p, const char* op) {
    SD_REQUIRE(x.rank() == 4, op << " " << p.name << ": expected 4-D input, got shape "
                                 << shape_str(x.shape()));
    SD_REQUIRE(p.weights.rank() == 4 && p.bias.rank() == 1 &&
                   p.bias.dim(0) == p.weights.dim(0),
               op << " " << p.name << ": malformed parameters");
    SD_REQUIRE(p.stride == 1, op << " " << p.name << ": only stride 1 is supported");
    SD_REQUIRE(p.padding >= 0, op << " " << p.name << ": negative padding");
    SD_REQUIRE(x.dim(1) == p.in_channels(),
               op << " " << p.name << ": input has " << x.dim(1) << " channels, layer expects "
                  << p.in_channels());
}

// out[b,o,y,x] += sum_{c,u,v} in[b,c,y+u-pad,x+v-pad] * W(o,c,u,v)
// W reads the kernel mirrored in u,v when flip is set.
template <typename T>
void corr_forward(const TensorT<T>& in, const TensorT<T>& w, int pad, bool flip,
                  TensorT<T>& out) {
    const int64_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int64_t O = w.dim(0), K = w.dim(2);
    const int64_t Ho = out.dim(2), Wo = out.dim(3);
    const T* wd = w.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t o = 0; o < O; ++o) {
            T* outp = out.data() + ((b * O + o) * Ho) * Wo;
            for (int64_t c = 0; c < C; ++c) {
                const T* inp = in.data() + ((b * C + c) * H) * W;
                for (int64_t u = 0; u < K; ++u) {
                    for (int64_t v = 0; v < K; ++v) {
                        const int64_t uu = flip ? K - 1 - u : u;
                        const int64_t vv = flip ? K - 1 - v : v;
                        const T wv = wd[((o * C + c) * K + uu) * K + vv];
                        const int64_t y0 = std::max<int64_t>(0, pad - u);
                        const int64_t y1 = std::min<int64_t>(Ho, H + pad - u);
                        const int64_t x0 = std::max<int64_t>(0, pad - v);
                        const int64_t x1 = std::min<int64_t>(Wo, W + pad - v);
                        for (int64_t y = y0; y < y1; ++y) {
                            const T* src = inp + (y + u - pad) * W + (x0 + v - pad);
                            T* dst = outp + y * Wo + x0;
                            for (int64_t i = 0; i < x1 - x0; ++i) dst[i] += wv * src[i];
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of corr_forward in its input:
// din[b,c,y,x] += sum_{o,u,v} g[b,o,y-u+pad,x-v+pad] * W(o,c,u,v)
template <typename T>
void corr_backward_input(const TensorT<T>& g, const TensorT<T>& w, int pad, bool flip,
                         int64_t H, int64_t W, std::vector<T>& din) {
    const int64_t B = g.dim(0), O = g.dim(1), Ho = g.dim(2), Wo = g.dim(3);
    const int64_t C = w.dim(1), K = w.dim(2);
    const T* wd = w.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t c = 0; c < C; ++c) {
            T* dinp = din.data() + ((b * C + c) * H) * W;
            for (int64_t o = 0; o < O; ++o) {
                const T* gp = g.data() + ((b * O + o) * Ho) * Wo;
                for (int64_t u = 0; u < K; ++u) {
                    for (int64_t v = 0; v < K; ++v) {
                        const int64_t uu = flip ? K - 1 - u : u;
                        const int64_t vv = flip ? K - 1 - v : v;
                        const T wv = wd[((o * C + c) * K + uu) * K + vv];
                        const int64_t y0 = std::max<int64_t>(0, u - pad);
                        const int64_t y1 = std::min<int64_t>(H, Ho + u - pad);
                        const int64_t x0 = std::max<int64_t>(0, v - pad);
                        const int64_t x1 = std::min<int64_t>(W, Wo + v - pad);
                        for (int64_t y = y0; y < y1; ++y) {
                            const T* src = gp + (y - u + pad) * Wo + (x0 - v + pad);
                            T* dst = dinp + y * W + x0;
                            for (int64_t i = 0; i < x1 - x0; ++i) dst[i] += wv * src[i];
                        }
                    }
                }
            }
        }
    }
}

// dW(o,c,u,v) += sum_{b,y,x} g[b,o,y,x] * in[b,c,y+u-pad,x+v-pad]
template <typename T>
void corr_backward_weights(const TensorT<T>& in, const TensorT<T>& g, int pad, bool flip,
                           int64_t K, std::vector<T>& dw) {
    const int64_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int64_t O = g.dim(1), Ho = g.dim(2), Wo = g.dim(3);
    for (int64_t o = 0; o < O; ++o) {
        for (int64_t c = 0; c < C; ++c) {
            for (int64_t u = 0; u < K; ++u) {
                for (int64_t v = 0; v < K; ++v) {
                    const int64_t y0 = std::max<int64_t>(0, pad - u);
                    const int64_t y1 = std::min<int64_t>(Ho, H + pad - u);
                    const int64_t x0 = std::max<int64_t>(0, pad - v);
                    const int64_t x1 = std::min<int64_t>(Wo, W + pad - v);
                    double acc = 0.0;
                    for (int64_t b = 0; b < B; ++b) {
                        const T* inp = in.data() + ((b * C + c) * H) * W;
                        const T* gp = g.data() + ((b * O + o) * Ho) * Wo;
                        for (int64_t y = y0; y < y1; ++y) {
                            const T* src = inp + (y + u - pad) * W + (x0 + v - pad);
                            const T* gr = gp + y * Wo + x0;
                            for (int64_t i = 0; i < x1 - x0; ++i)
                                acc += static_cast<double>(gr[i]) * static_cast<double>(src[i]);
                        }
                    }
                    const int64_t uu = flip ? K - 1 - u : u;
                    const int64_t vv = flip ? K - 1 - v : v;
                    dw[static_cast<size_t>(((o * C + c) * K + uu) * K + vv)] +=
                        static_cast<T>(acc);
                }
            }
        }
    }
}

template <typename T>
void add_bias(TensorT<T>& out, const TensorT<T>& bias) {
    const int64_t B = out.dim(0), O = out.dim(1), plane = out.dim(2) * out.dim(3);
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t o = 0; o < O; ++o) {
            T* p = out.data() + (b * O + o) * plane;
            const T bv = bias.at(o);
            for (int64_t i = 0; i < plane; ++i) p[i] += bv;
        }
    }
}

template <typename T>
void bias_grad(const TensorT<T>& g, std::vector<T>& db) {
    const int64_t B = g.dim(0), O = g.dim(1), plane = g.dim(2) * g.dim(3);
    for (int64_t o = 0; o < O; ++o) {
        double acc = 0.0;
        for (int64_t b = 0; b < B; ++b) {
            const T* p = g.data() + (b * O + o) * plane;
            for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
        }
        db[static_cast<size_t>(o)] += static_cast<T>(acc);
    }
}

// Shared conv/deconv plumbing; deconv is correlation with the mirrored kernel
// at complementary padding, which makes it the adjoint of conv2d.
template <typename T>
TensorT<T> corr_layer(const TensorT<T>& x, const ConvParamsT<T>& p, bool flip, int pad,
                      const char* opname) {
    const int64_t K = p.kernel();
    const int64_t Ho = x.dim(2) + 2 * pad - K + 1;
    const int64_t Wo = x.dim(3) + 2 * pad - K + 1;
    SD_REQUIRE(Ho >= 1 && Wo >= 1, opname << " " << p.name << ": input " << shape_str(x.shape())
                                          << " too small for kernel " << K << " pad " << pad);
    TensorT<T> out({x.dim(0), p.out_channels(), Ho, Wo});
    corr_forward(x, p.weights, pad, flip, out);
    add_bias(out, p.bias);
    debug_check_finite(out, opname);

    if (TapeT<T>::current()) {
        const int64_t H = x.dim(2), W = x.dim(3);
        TapeT<T>::current()->record(
            {x, p.weights, p.bias}, out, [pad, flip, H, W, K](TapeNode<T>& node) {
                if (!node.output.has_grad()) return;
                const auto& gv = node.output.grad();
                TensorT<T> g(node.output.shape(), gv);
                corr_backward_input(g, node.inputs[1], pad, flip, H, W, node.inputs[0].grad());
                corr_backward_weights(node.inputs[0], g, pad, flip, K, node.inputs[1].grad());
                bias_grad(g, node.inputs[2].grad());
            });
    }
    return out;
}

}  // namespace

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvParamsT<T>& p) {
    check_conv_input(x, p, "conv2d");
    return corr_layer(x, p, /*flip=*/false, p.padding, "conv2d");
}

template <typename T>
TensorT<T> deconv2d(const TensorT<T>& x, const ConvParamsT<T>& p) {
    check_conv_input(x, p, "deconv2d");
    const int pad = static_cast<int>(p.kernel()) - 1 - p.padding;
    SD_REQUIRE(pad >= 0, "deconv2d " << p.name << ": padding exceeds kernel-1");
    return corr_layer(x, p, /*flip=*/true, pad, "deconv2d");
}

template <typename T>
std::pair<TensorT<T>, PoolIndices> maxpool2(const TensorT<T>& x) {
    SD_REQUIRE(x.rank() == 4, "maxpool2: expected 4-D input, got " << shape_str(x.shape()));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    SD_REQUIRE(H % 2 == 0 && W % 2 == 0,
               "maxpool2: spatial extents must be even, got " << H << "x" << W);
    const int64_t Ho = H / 2, Wo = W / 2;
    TensorT<T> out({B, C, Ho, Wo});
    PoolIndices pidx;
    pidx.shape = out.shape();
    pidx.idx.resize(static_cast<size_t>(out.numel()));

    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* inp = x.data() + bc * H * W;
        T* outp = out.data() + bc * Ho * Wo;
        uint8_t* ip = pidx.idx.data() + bc * Ho * Wo;
        for (int64_t y = 0; y < Ho; ++y) {
            for (int64_t xo = 0; xo < Wo; ++xo) {
                const T* win = inp + (2 * y) * W + 2 * xo;
                const T cand[4] = {win[0], win[1], win[W], win[W + 1]};
                int best = 0;
                for (int k = 1; k < 4; ++k) {
                    if (cand[k] > cand[best]) best = k;  // first max wins ties
                }
                outp[y * Wo + xo] = cand[best];
                ip[y * Wo + xo] = static_cast<uint8_t>(best);
            }
        }
    }
    debug_check_finite(out, "maxpool2");

    if (TapeT<T>::current()) {
        auto saved = pidx.idx;
        TapeT<T>::current()->record({x}, out, [saved = std::move(saved), H, W](TapeNode<T>& node) {
            if (!node.output.has_grad()) return;
            const auto& g = node.output.grad();
            auto& dx = node.inputs[0].grad();
            const int64_t Ho = node.output.dim(2), Wo = node.output.dim(3);
            const int64_t BC = node.output.dim(0) * node.output.dim(1);
            for (int64_t bc = 0; bc < BC; ++bc) {
                for (int64_t y = 0; y < Ho; ++y) {
                    for (int64_t xo = 0; xo < Wo; ++xo) {
                        const size_t oi = static_cast<size_t>(bc * Ho * Wo + y * Wo + xo);
                        const int k = saved[oi];
                        const int64_t sy = 2 * y + k / 2, sx = 2 * xo + k % 2;
                        dx[static_cast<size_t>(bc * H * W + sy * W + sx)] += g[oi];
                    }
                }
            }
        });
    }
    return {out, pidx};
}

template <typename T>
TensorT<T> maxunpool2(const TensorT<T>& x, const PoolIndices& idx) {
    SD_REQUIRE(x.rank() == 4, "maxunpool2: expected 4-D input, got " << shape_str(x.shape()));
    SD_REQUIRE(x.shape() == idx.shape, "maxunpool2: input shape " << shape_str(x.shape())
                                                                  << " does not match indices "
                                                                  << shape_str(idx.shape));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Ho = 2 * H, Wo = 2 * W;
    TensorT<T> out({B, C, Ho, Wo});
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* inp = x.data() + bc * H * W;
        const uint8_t* ip = idx.idx.data() + bc * H * W;
        T* outp = out.data() + bc * Ho * Wo;
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t xi = 0; xi < W; ++xi) {
                const int k = ip[y * W + xi];
                outp[(2 * y + k / 2) * Wo + (2 * xi + k % 2)] = inp[y * W + xi];
            }
        }
    }
    debug_check_finite(out, "maxunpool2");

    if (TapeT<T>::current()) {
        auto saved = idx.idx;
        TapeT<T>::current()->record({x}, out, [saved = std::move(saved)](TapeNode<T>& node) {
            if (!node.output.has_grad()) return;
            const auto& g = node.output.grad();
            auto& dx = node.inputs[0].grad();
            const int64_t H = node.inputs[0].dim(2), W = node.inputs[0].dim(3);
            const int64_t Wo = 2 * W;
            const int64_t BC = node.inputs[0].dim(0) * node.inputs[0].dim(1);
            for (int64_t bc = 0; bc < BC; ++bc) {
                for (int64_t y = 0; y < H; ++y) {
                    for (int64_t xi = 0; xi < W; ++xi) {
                        const int k = saved[static_cast<size_t>(bc * H * W + y * W + xi)];
                        dx[static_cast<size_t>(bc * H * W + y * W + xi)] +=
                            g[static_cast<size_t>(bc * 4 * H * W + (2 * y + k / 2) * Wo +
                                                  (2 * xi + k % 2))];
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> batchnorm(const TensorT<T>& x, BNParamsT<T>& p, BNMode mode) {
    SD_REQUIRE(x.rank() == 4, "batchnorm " << p.name << ": expected 4-D input, got "
                                           << shape_str(x.shape()));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    SD_REQUIRE(C == p.gamma.dim(0), "batchnorm " << p.name << ": input has " << C
                                                 << " channels, params have " << p.gamma.dim(0));
    const int64_t m = B * H * W;  // statistics population per channel
    SD_REQUIRE(mode == BNMode::infer || m > 1,
               "batchnorm " << p.name << ": train mode needs batch*H*W > 1, got " << m);

    std::vector<T> mean(static_cast<size_t>(C)), invstd(static_cast<size_t>(C));
    if (mode == BNMode::train) {
        for (int64_t c = 0; c < C; ++c) {
            double s = 0.0, s2 = 0.0;
            for (int64_t b = 0; b < B; ++b) {
                const T* pl = x.data() + ((b * C + c) * H) * W;
                for (int64_t i = 0; i < H * W; ++i) {
                    s += static_cast<double>(pl[i]);
                    s2 += static_cast<double>(pl[i]) * static_cast<double>(pl[i]);
                }
            }
            const double mu = s / static_cast<double>(m);
            const double var = std::max(0.0, s2 / static_cast<double>(m) - mu * mu);
            mean[static_cast<size_t>(c)] = static_cast<T>(mu);
            invstd[static_cast<size_t>(c)] =
                static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(p.epsilon)));
            // EMA update: running <- (1-momentum)*running + momentum*batch
            p.running_mean.at(c) =
                (T(1) - p.momentum) * p.running_mean.at(c) + p.momentum * static_cast<T>(mu);
            p.running_var.at(c) =
                (T(1) - p.momentum) * p.running_var.at(c) + p.momentum * static_cast<T>(var);
        }
    } else {
        for (int64_t c = 0; c < C; ++c) {
            mean[static_cast<size_t>(c)] = p.running_mean.at(c);
            invstd[static_cast<size_t>(c)] = static_cast<T>(
                1.0 / std::sqrt(static_cast<double>(p.running_var.at(c)) +
                                static_cast<double>(p.epsilon)));
        }
    }

    TensorT<T> out(x.shape());
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t c = 0; c < C; ++c) {
            const T* src = x.data() + ((b * C + c) * H) * W;
            T* dst = out.data() + ((b * C + c) * H) * W;
            const T mu = mean[static_cast<size_t>(c)];
            const T is = invstd[static_cast<size_t>(c)];
            const T gm = p.gamma.at(c), bt = p.beta.at(c);
            for (int64_t i = 0; i < H * W; ++i) dst[i] = gm * (src[i] - mu) * is + bt;
        }
    }
    debug_check_finite(out, "batchnorm");

    if (TapeT<T>::current()) {
        TapeT<T>::current()->record(
            {x, p.gamma, p.beta}, out,
            [mean, invstd, mode, m](TapeNode<T>& node) {
                if (!node.output.has_grad()) return;
                const auto& g = node.output.grad();
                auto& dx = node.inputs[0].grad();
                auto& dgamma = node.inputs[1].grad();
                auto& dbeta = node.inputs[2].grad();
                const TensorT<T>& x = node.inputs[0];
                const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
                for (int64_t c = 0; c < C; ++c) {
                    const T mu = mean[static_cast<size_t>(c)];
                    const T is = invstd[static_cast<size_t>(c)];
                    const T gm = node.inputs[1].at(c);
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (int64_t b = 0; b < B; ++b) {
                        const size_t base = static_cast<size_t>(((b * C + c)) * HW);
                        const T* xv = x.data() + base;
                        for (int64_t i = 0; i < HW; ++i) {
                            const double gi = static_cast<double>(g[base + static_cast<size_t>(i)]);
                            sum_g += gi;
                            sum_gx += gi * static_cast<double>((xv[i] - mu) * is);
                        }
                    }
                    dgamma[static_cast<size_t>(c)] += static_cast<T>(sum_gx);
                    dbeta[static_cast<size_t>(c)] += static_cast<T>(sum_g);
                    if (mode == BNMode::train) {
                        const double gmean = sum_g / static_cast<double>(m);
                        const double gxmean = sum_gx / static_cast<double>(m);
                        for (int64_t b = 0; b < B; ++b) {
                            const size_t base = static_cast<size_t>(((b * C + c)) * HW);
                            const T* xv = x.data() + base;
                            for (int64_t i = 0; i < HW; ++i) {
                                const double xhat = static_cast<double>((xv[i] - mu) * is);
                                const double gi =
                                    static_cast<double>(g[base + static_cast<size_t>(i)]);
                                dx[base + static_cast<size_t>(i)] += static_cast<T>(
                                    static_cast<double>(gm * is) * (gi - gmean - xhat * gxmean));
                            }
                        }
                    } else {
                        for (int64_t b = 0; b < B; ++b) {
                            const size_t base = static_cast<size_t>(((b * C + c)) * HW);
                            for (int64_t i = 0; i < HW; ++i)
                                dx[base + static_cast<size_t>(i)] +=
                                    g[base + static_cast<size_t>(i)] * gm * is;
                        }
                    }
                }
            });
    }
    return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> out(x.shape());
    const T* src = x.data();
    T* dst = out.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
    debug_check_finite(out, "relu");
    // derivative at 0 defined as 0
    if (TapeT<T>::current()) {
        TapeT<T>::current()->record({x}, out, [](TapeNode<T>& node) {
            if (!node.output.has_grad()) return;
            const auto& g = node.output.grad();
            auto& dx = node.inputs[0].grad();
            const T* src = node.inputs[0].data();
            for (size_t i = 0; i < dx.size(); ++i) {
                if (src[i] > T(0)) dx[i] += g[i];
            }
        });
    }
    return out;
}

#define SD_INSTANTIATE(T)                                                            \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const ConvParamsT<T>&);         \
    template TensorT<T> deconv2d<T>(const TensorT<T>&, const ConvParamsT<T>&);       \
    template std::pair<TensorT<T>, PoolIndices> maxpool2<T>(const TensorT<T>&);      \
    template TensorT<T> maxunpool2<T>(const TensorT<T>&, const PoolIndices&);        \
    template TensorT<T> batchnorm<T>(const TensorT<T>&, BNParamsT<T>&, BNMode);      \
    template TensorT<T> relu<T>(const TensorT<T>&);

SD_INSTANTIATE(float)
SD_INSTANTIATE(double)
#undef SD_INSTANTIATE

}  // namespace stdepth
