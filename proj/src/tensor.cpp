#include "stdepth/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace stdepth {

namespace {

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    SD_REQUIRE(a.same_shape(b), op << ": shape mismatch " << shape_str(a.shape())
                                   << " vs " << shape_str(b.shape()));
}

template <typename T>
void record_if_taped(std::vector<TensorT<T>> inputs, TensorT<T>& out,
                     std::function<void(TapeNode<T>&)> fn) {
    if (auto* tape = TapeT<T>::current()) {
        tape->record(std::move(inputs), out, std::move(fn));
    }
}

// Nodes whose output never received gradient are off the path to the root;
// skipping them leaves their inputs' grads untouched.
template <typename T>
const std::vector<T>* upstream(TapeNode<T>& node) {
    return node.output.has_grad() ? &node.output.grad() : nullptr;
}

}  // namespace

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape(a, b, "add");
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    debug_check_finite(out, "add");
    record_if_taped<T>({a, b}, out, [](TapeNode<T>& node) {
        const auto* g = upstream(node);
        if (!g) return;
        node.inputs[0].accumulate_grad(*g);
        node.inputs[1].accumulate_grad(*g);
    });
    return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape(a, b, "sub");
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    debug_check_finite(out, "sub");
    record_if_taped<T>({a, b}, out, [](TapeNode<T>& node) {
        const auto* g = upstream(node);
        if (!g) return;
        node.inputs[0].accumulate_grad(*g);
        auto& gb = node.inputs[1].grad();
        for (size_t i = 0; i < gb.size(); ++i) gb[i] -= (*g)[i];
    });
    return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape(a, b, "mul");
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    debug_check_finite(out, "mul");
    record_if_taped<T>({a, b}, out, [](TapeNode<T>& node) {
        const auto* g = upstream(node);
        if (!g) return;
        auto& ga = node.inputs[0].grad();
        auto& gb = node.inputs[1].grad();
        const T* pa = node.inputs[0].data();
        const T* pb = node.inputs[1].data();
        for (size_t i = 0; i < ga.size(); ++i) {
            ga[i] += (*g)[i] * pb[i];
            gb[i] += (*g)[i] * pa[i];
        }
    });
    return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T c) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
    debug_check_finite(out, "scale");
    record_if_taped<T>({a}, out, [c](TapeNode<T>& node) {
        const auto* g = upstream(node);
        if (!g) return;
        auto& ga = node.inputs[0].grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*g)[i] * c;
    });
    return out;
}

template <typename T>
TensorT<T> abs(const TensorT<T>& a) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = std::abs(pa[i]);
    debug_check_finite(out, "abs");
    // d|x|/dx at 0 is taken as 0 (subgradient).
    record_if_taped<T>({a}, out, [](TapeNode<T>& node) {
        const auto* g = upstream(node);
        if (!g) return;
        auto& ga = node.inputs[0].grad();
        const T* pa = node.inputs[0].data();
        for (size_t i = 0; i < ga.size(); ++i) {
            const T s = pa[i] > T(0) ? T(1) : (pa[i] < T(0) ? T(-1) : T(0));
            ga[i] += (*g)[i] * s;
        }
    });
    return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& a) {
    TensorT<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = T(1) / (T(1) + std::exp(-pa[i]));
    debug_check_finite(out, "sigmoid");
    record_if_taped<T>({a}, out, [](TapeNode<T>& node) {
        const auto* g = upstream(node);
        if (!g) return;
        auto& ga = node.inputs[0].grad();
        const T* s = node.output.data();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += (*g)[i] * s[i] * (T(1) - s[i]);
    });
    return out;
}

template <typename T>
TensorT<T> reduce_mean(const TensorT<T>& a) {
    SD_REQUIRE(a.numel() > 0, "reduce_mean: empty tensor");
    const int64_t n = a.numel();
    double acc = 0.0;  // fixed-order accumulation, deterministic
    const T* pa = a.data();
    for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(pa[i]);
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
    debug_check_finite(out, "reduce_mean");
    record_if_taped<T>({a}, out, [n](TapeNode<T>& node) {
        const auto* g = upstream(node);
        if (!g) return;
        const T share = (*g)[0] / static_cast<T>(n);
        auto& ga = node.inputs[0].grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += share;
    });
    return out;
}

template <typename T>
void backward(TensorT<T>& root) {
    SD_REQUIRE(root.is_scalar(),
               "backward: root must be scalar, got shape " << shape_str(root.shape()));
    auto impl = root.tape();
    if (!impl) return;  // constant root: nothing reachable
    SD_FAIL_IF(impl->consumed, "backward: tape already consumed");
    root.grad()[0] += T(1);
    for (auto it = impl->nodes.rbegin(); it != impl->nodes.rend(); ++it) {
        it->backward(*it);
    }
    impl->nodes.clear();
    impl->consumed = true;
}

template <typename T>
double grad_check(const std::function<TensorT<T>(const TensorT<T>&)>& f,
                  const TensorT<T>& x, T eps) {
    // Analytic pass.
    TensorT<T> xa(x.shape(), x.values());
    {
        TapeT<T> tape;
        typename TapeT<T>::Scope scope(tape);
        TensorT<T> y = f(xa);
        backward(y);
    }
    std::vector<T> analytic =
        xa.has_grad() ? xa.grad() : std::vector<T>(static_cast<size_t>(x.numel()), T(0));

    // Central differences, no tape.
    TensorT<T> xn(x.shape(), x.values());
    double max_err = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        const T x0 = xn.at(i);
        xn.at(i) = x0 + eps;
        const double fp = static_cast<double>(f(xn).at(0));
        xn.at(i) = x0 - eps;
        const double fm = static_cast<double>(f(xn).at(0));
        xn.at(i) = x0;
        const double numeric = (fp - fm) / (2.0 * static_cast<double>(eps));
        const double a = static_cast<double>(analytic[static_cast<size_t>(i)]);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
    return max_err;
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
    for (T v : t.values()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

#define SD_INSTANTIATE(T)                                                               \
    template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                   \
    template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                   \
    template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                   \
    template TensorT<T> scale<T>(const TensorT<T>&, T);                                 \
    template TensorT<T> abs<T>(const TensorT<T>&);                                      \
    template TensorT<T> sigmoid<T>(const TensorT<T>&);                                  \
    template TensorT<T> reduce_mean<T>(const TensorT<T>&);                              \
    template void backward<T>(TensorT<T>&);                                             \
    template double grad_check<T>(const std::function<TensorT<T>(const TensorT<T>&)>&,  \
                                  const TensorT<T>&, T);                                \
    template bool all_finite<T>(const TensorT<T>&);

SD_INSTANTIATE(float)
SD_INSTANTIATE(double)
#undef SD_INSTANTIATE

}  // namespace stdepth
