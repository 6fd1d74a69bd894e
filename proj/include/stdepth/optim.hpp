#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stdepth/tensor.hpp"

namespace stdepth {

// Adam moment buffers, parallel to the parameter list they were created for.
template <typename T>
struct AdamStateT {
    std::vector<TensorT<T>> m;
    std::vector<TensorT<T>> v;  // >= 0 elementwise
    int64_t t = 0;              // completed steps
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);

    static AdamStateT make(const std::vector<std::pair<std::string, TensorT<T>>>& params) {
        AdamStateT s;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& [name, p] : params) {
            s.m.push_back(TensorT<T>::zeros(p.shape()));
            s.v.push_back(TensorT<T>::zeros(p.shape()));
        }
        return s;
    }
};

using AdamState = AdamStateT<float>;

// One update: m <- b1*m+(1-b1)*g, v <- b2*v+(1-b2)*g^2, then
// p <- p - lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
// Parameters whose gradient buffer was never touched are treated as g = 0.
// Gradients are left in place; the caller zeroes them between steps.
template <typename T>
void adam_step(const std::vector<std::pair<std::string, TensorT<T>>>& params,
               AdamStateT<T>& state, T lr);

// Stepwise decay: base halved once per five epochs (floor division).
double lr_at(int epoch, double base);

}  // namespace stdepth
