#include "stdepth/optim.hpp"

#include <cmath>

namespace stdepth {

template <typename T>
void adam_step(const std::vector<std::pair<std::string, TensorT<T>>>& params,
               AdamStateT<T>& state, T lr) {
    SD_REQUIRE(params.size() == state.m.size() && params.size() == state.v.size(),
               "adam_step: state holds " << state.m.size() << " buffers for " << params.size()
                                         << " parameters");
    state.t += 1;
    const T c1 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta1),
                                                static_cast<double>(state.t)));
    const T c2 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta2),
                                                static_cast<double>(state.t)));
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& [name, p] = params[i];
        SD_REQUIRE(p.same_shape(state.m[i]),
                   "adam_step: " << name << " shape " << shape_str(p.shape())
                                 << " does not match its moment buffer "
                                 << shape_str(state.m[i].shape()));
        TensorT<T> param = p;  // shallow handle; updates write through
        const bool has_g = param.has_grad();
        const T* g = has_g ? param.grad().data() : nullptr;
        T* pm = state.m[i].data();
        T* pv = state.v[i].data();
        T* pd = param.data();
        const int64_t n = param.numel();
        for (int64_t j = 0; j < n; ++j) {
            const T gj = has_g ? g[j] : T(0);
            pm[j] = state.beta1 * pm[j] + (T(1) - state.beta1) * gj;
            pv[j] = state.beta2 * pv[j] + (T(1) - state.beta2) * gj * gj;
            const T m_hat = pm[j] / c1;
            const T v_hat = pv[j] / c2;
            pd[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

double lr_at(int epoch, double base) {
    SD_REQUIRE(epoch >= 0, "lr_at: epoch must be non-negative, got " << epoch);
    return std::ldexp(base, -(epoch / 5));  // exact power-of-two halving
}

#define SD_INSTANTIATE(T)                                                            \
    template void adam_step<T>(const std::vector<std::pair<std::string, TensorT<T>>>&, \
                               AdamStateT<T>&, T);

SD_INSTANTIATE(float)
SD_INSTANTIATE(double)
#undef SD_INSTANTIATE

}  // namespace stdepth
