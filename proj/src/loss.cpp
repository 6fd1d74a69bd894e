#include "stdepth/loss.hpp"

namespace stdepth {

template <typename T>
TensorT<T> l1_reconstruction(const TensorT<T>& target, const TensorT<T>& recon) {
    SD_REQUIRE(target.same_shape(recon), "l1_reconstruction: shape mismatch "
                                             << shape_str(target.shape()) << " vs "
                                             << shape_str(recon.shape()));
    return reduce_mean(abs(sub(target, recon)));
}

template <typename T>
TensorT<T> consistency_loss(const DisparityMapT<T>& d_ref, const TensorT<T>& d_other) {
    SD_REQUIRE(d_ref.values.same_shape(d_other), "consistency_loss: shape mismatch "
                                                     << shape_str(d_ref.values.shape()) << " vs "
                                                     << shape_str(d_other.shape()));
    TensorT<T> projected = resample_disparity(d_other, d_ref.values, d_ref.sign);
    return reduce_mean(abs(sub(d_ref.values, projected)));
}

template <typename T>
SiameseLossPartsT<T> siamese_loss_parts(const TensorT<T>& left, const TensorT<T>& right,
                                        const TensorT<T>& left_recon,
                                        const TensorT<T>& right_recon,
                                        const DisparityMapT<T>& d_left,
                                        const DisparityMapT<T>& d_right,
                                        const LossWeights& w) {
    SD_REQUIRE(d_left.sign == -d_right.sign,
               "siamese_loss: the two disparity maps must have opposite signs");
    SiameseLossPartsT<T> parts;
    parts.left = l1_reconstruction(left, left_recon);
    parts.right = l1_reconstruction(right, right_recon);
    parts.consistency = consistency_loss(d_left, d_right.values);
    parts.total = add(add(scale(parts.left, static_cast<T>(w.alpha_l)),
                          scale(parts.right, static_cast<T>(w.alpha_r))),
                      scale(parts.consistency, static_cast<T>(w.alpha_c)));
    return parts;
}

#define SD_INSTANTIATE(T)                                                                     \
    template TensorT<T> l1_reconstruction<T>(const TensorT<T>&, const TensorT<T>&);          \
    template TensorT<T> consistency_loss<T>(const DisparityMapT<T>&, const TensorT<T>&);     \
    template SiameseLossPartsT<T> siamese_loss_parts<T>(                                      \
        const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,          \
        const DisparityMapT<T>&, const DisparityMapT<T>&, const LossWeights&);

SD_INSTANTIATE(float)
SD_INSTANTIATE(double)
#undef SD_INSTANTIATE

}  // namespace stdepth
