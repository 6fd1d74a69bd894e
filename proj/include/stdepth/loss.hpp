#pragma once

#include "stdepth/tensor.hpp"
#include "stdepth/warp.hpp"

namespace stdepth {

// Weights for the combined siamese objective:
//   alpha_l * L1(left, left_recon) + alpha_r * L1(right, right_recon)
//     + alpha_c * consistency(d_left, d_right).
struct LossWeights {
    float alpha_l = 0.5f;
    float alpha_r = 0.5f;
    float alpha_c = 1.0f;
};

// Mean absolute difference over every element (batch, channels and pixels).
template <typename T>
TensorT<T> l1_reconstruction(const TensorT<T>& target, const TensorT<T>& recon);

// Mean |d_ref - d_other(i + sign*d_ref)|: each reference disparity is checked
// against the other view's map at the position it points to.
template <typename T>
TensorT<T> consistency_loss(const DisparityMapT<T>& d_ref, const TensorT<T>& d_other);

template <typename T>
struct SiameseLossPartsT {
    TensorT<T> total;  // scalar
    TensorT<T> left;   // scalar, L1(left, left_recon)
    TensorT<T> right;  // scalar, L1(right, right_recon)
    TensorT<T> consistency;
};

using SiameseLossParts = SiameseLossPartsT<float>;

// Combined objective with its components kept separate for logging. The
// reconstructions are passed in (rather than re-warped here) so callers
// control the warp direction once.
template <typename T>
SiameseLossPartsT<T> siamese_loss_parts(const TensorT<T>& left, const TensorT<T>& right,
                                        const TensorT<T>& left_recon,
                                        const TensorT<T>& right_recon,
                                        const DisparityMapT<T>& d_left,
                                        const DisparityMapT<T>& d_right,
                                        const LossWeights& w = {});

template <typename T>
TensorT<T> siamese_loss(const TensorT<T>& left, const TensorT<T>& right,
                        const TensorT<T>& left_recon, const TensorT<T>& right_recon,
                        const DisparityMapT<T>& d_left, const DisparityMapT<T>& d_right,
                        const LossWeights& w = {}) {
    return siamese_loss_parts(left, right, left_recon, right_recon, d_left, d_right, w).total;
}

}  // namespace stdepth
