#pragma once

#include <utility>

#include "stdepth/tensor.hpp"

namespace stdepth {

// Per-pixel horizontal disparity in pixels, on the grid of the image it
// reconstructs. sign is the dataset convention: +1 means a warp with this
// map samples its source at column i + D.
template <typename T>
struct DisparityMapT {
    TensorT<T> values;  // [B,1,H,W]
    int sign = +1;
};

using DisparityMap = DisparityMapT<float>;

// Reconstructs a view by sampling source rows at s = i + sign*D(i,j) with
// clamped linear interpolation (rectified inputs: rows are epipolar lines,
// so interpolation is 1-D along rows). Differentiable in both the source
// values and the disparity; d(out)/dD = sign*(source(floor(s)+1) - source(floor(s))),
// zero where the sample position clamps.
template <typename T>
TensorT<T> warp_horizontal(const TensorT<T>& source, const TensorT<T>& disp, int sign);

template <typename T>
TensorT<T> warp_horizontal(const TensorT<T>& source, const DisparityMapT<T>& disp) {
    return warp_horizontal(source, disp.values, disp.sign);
}

// d_other sampled at i + sign*d_ref(i,j): the inner term of the left-right
// consistency loss. Gradients flow through both maps.
template <typename T>
TensorT<T> resample_disparity(const TensorT<T>& d_other, const TensorT<T>& d_ref, int sign);

// Column range [first, last] whose sample positions stay in-bounds for every
// disparity magnitude below d_max; outside it, clamping replicates the edge.
std::pair<int64_t, int64_t> interior_columns(int sign, double d_max, int64_t width);

}  // namespace stdepth
