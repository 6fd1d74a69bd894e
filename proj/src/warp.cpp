#include "stdepth/warp.hpp"

#include <algorithm>
#include <cmath>

namespace stdepth {

namespace {

template <typename T>
void check_warp_args(const TensorT<T>& source, const TensorT<T>& disp, int sign) {
    SD_REQUIRE(source.rank() == 4, "warp_horizontal: source must be [B,C,H,W], got "
                                       << shape_str(source.shape()));
    SD_REQUIRE(disp.rank() == 4 && disp.dim(1) == 1,
               "warp_horizontal: disparity must be [B,1,H,W], got " << shape_str(disp.shape()));
    SD_REQUIRE(disp.dim(0) == source.dim(0) && disp.dim(2) == source.dim(2) &&
                   disp.dim(3) == source.dim(3),
               "warp_horizontal: disparity grid " << shape_str(disp.shape())
                                                  << " does not match source "
                                                  << shape_str(source.shape()));
    SD_REQUIRE(sign == 1 || sign == -1, "warp_horizontal: sign must be +1 or -1, got " << sign);
}

}  // namespace

template <typename T>
TensorT<T> warp_horizontal(const TensorT<T>& source, const TensorT<T>& disp, int sign) {
    check_warp_args(source, disp, sign);
    // A NaN position would defeat the min/max clamp below and turn into an
    // out-of-bounds index, so refuse non-finite disparities outright.
    SD_FAIL_IF(!all_finite(disp), "warp_horizontal: disparity contains non-finite values");
    const int64_t B = source.dim(0), C = source.dim(1), H = source.dim(2), W = source.dim(3);

    TensorT<T> out(source.shape());
    const T* src = source.data();
    const T* d = disp.data();
    T* o = out.values().data();
    const T sgn = static_cast<T>(sign);
    const T max_x = static_cast<T>(W - 1);

    for (int64_t b = 0; b < B; ++b) {
        for (int64_t c = 0; c < C; ++c) {
            const T* srow0 = src + (b * C + c) * H * W;
            T* orow0 = o + (b * C + c) * H * W;
            const T* drow0 = d + b * H * W;
            for (int64_t y = 0; y < H; ++y) {
                const T* s = srow0 + y * W;
                const T* dr = drow0 + y * W;
                T* ov = orow0 + y * W;
                for (int64_t x = 0; x < W; ++x) {
                    T pos = static_cast<T>(x) + sgn * dr[x];
                    pos = std::min(std::max(pos, T(0)), max_x);
                    const int64_t x0 = static_cast<int64_t>(pos);  // pos >= 0, so trunc == floor
                    const int64_t x1 = std::min<int64_t>(x0 + 1, W - 1);
                    const T f = pos - static_cast<T>(x0);
                    ov[x] = s[x0] + f * (s[x1] - s[x0]);
                }
            }
        }
    }
    debug_check_finite(out, "warp_horizontal");

    if (TapeT<T>::current()) {
        TapeT<T>::current()->record({source, disp}, out, [sign, B, C, H, W](TapeNode<T>& node) {
            if (!node.output.has_grad()) return;
            const T* g = node.output.grad().data();
            const T* src = node.inputs[0].data();
            const T* d = node.inputs[1].data();
            T* gs = node.inputs[0].grad().data();
            T* gd = node.inputs[1].grad().data();
            const T sgn = static_cast<T>(sign);
            const T max_x = static_cast<T>(W - 1);
            for (int64_t b = 0; b < B; ++b) {
                for (int64_t c = 0; c < C; ++c) {
                    const T* s = src + (b * C + c) * H * W;
                    T* gsp = gs + (b * C + c) * H * W;
                    for (int64_t y = 0; y < H; ++y) {
                        const int64_t row = y * W;
                        const T* dr = d + b * H * W + row;
                        const T* gr = g + (b * C + c) * H * W + row;
                        T* gdr = gd + b * H * W + row;
                        for (int64_t x = 0; x < W; ++x) {
                            const T raw = static_cast<T>(x) + sgn * dr[x];
                            const T pos = std::min(std::max(raw, T(0)), max_x);
                            const int64_t x0 = static_cast<int64_t>(pos);
                            const int64_t x1 = std::min<int64_t>(x0 + 1, W - 1);
                            const T f = pos - static_cast<T>(x0);
                            const T gv = gr[x];
                            gsp[row + x0] += (T(1) - f) * gv;
                            gsp[row + x1] += f * gv;
                            // The map pos(D) is constant wherever clamping
                            // engaged, so the disparity gradient vanishes there.
                            if (raw > T(0) && raw < max_x) {
                                gdr[x] += sgn * (s[row + x1] - s[row + x0]) * gv;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> resample_disparity(const TensorT<T>& d_other, const TensorT<T>& d_ref, int sign) {
    SD_REQUIRE(d_other.rank() == 4 && d_other.dim(1) == 1,
               "resample_disparity: d_other must be [B,1,H,W], got "
                   << shape_str(d_other.shape()));
    return warp_horizontal(d_other, d_ref, sign);
}

std::pair<int64_t, int64_t> interior_columns(int sign, double d_max, int64_t width) {
    SD_REQUIRE(sign == 1 || sign == -1, "interior_columns: sign must be +1 or -1, got " << sign);
    SD_REQUIRE(d_max >= 0, "interior_columns: d_max must be non-negative, got " << d_max);
    SD_REQUIRE(width >= 1, "interior_columns: width must be positive, got " << width);
    const auto margin = static_cast<int64_t>(std::ceil(d_max));
    int64_t first = 0, last = width - 1;
    if (sign > 0) {
        last = std::max<int64_t>(first, width - 1 - margin);
    } else {
        first = std::min<int64_t>(last, margin);
    }
    return {first, last};
}

#define SD_INSTANTIATE(T)                                                                  \
    template TensorT<T> warp_horizontal<T>(const TensorT<T>&, const TensorT<T>&, int);     \
    template TensorT<T> resample_disparity<T>(const TensorT<T>&, const TensorT<T>&, int);

SD_INSTANTIATE(float)
SD_INSTANTIATE(double)
#undef SD_INSTANTIATE

}  // namespace stdepth
