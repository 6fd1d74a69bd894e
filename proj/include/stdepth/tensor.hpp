#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "stdepth/common.hpp"

namespace stdepth {

template <typename T>
class TapeT;

namespace detail {

template <typename T>
struct Storage {
    std::vector<T> value;
    std::vector<T> grad;  // empty until first accumulation
};

template <typename T>
struct TapeImpl;

}  // namespace detail

// Dense N-d array with shared storage. Copies are shallow handles onto the
// same buffer; ops produce fresh storage. A tensor recorded on a tape keeps
// that tape alive until backward() consumes it.
template <typename T>
class TensorT {
public:
    using scalar_type = T;

    TensorT() : TensorT(Shape{}) {}

    explicit TensorT(Shape shape)
        : shape_(std::move(shape)), st_(std::make_shared<detail::Storage<T>>()) {
        st_->value.assign(static_cast<size_t>(numel_of(shape_)), T(0));
    }

    TensorT(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), st_(std::make_shared<detail::Storage<T>>()) {
        SD_REQUIRE(numel_of(shape_) == static_cast<int64_t>(data.size()),
                   "tensor data size " << data.size() << " does not match shape "
                                       << shape_str(shape_));
        st_->value = std::move(data);
    }

    static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

    static TensorT full(Shape shape, T v) {
        TensorT t(std::move(shape));
        for (T& x : t.values()) x = v;
        return t;
    }

    static TensorT scalar(T v) { return TensorT(Shape{}, {v}); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(st_->value.size()); }
    bool is_scalar() const { return numel() == 1; }
    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    std::vector<T>& values() { return st_->value; }
    const std::vector<T>& values() const { return st_->value; }
    T* data() { return st_->value.data(); }
    const T* data() const { return st_->value.data(); }

    T& at(int64_t i) { return st_->value[static_cast<size_t>(i)]; }
    T at(int64_t i) const { return st_->value[static_cast<size_t>(i)]; }

    // NCHW flat index.
    int64_t index4(int64_t b, int64_t c, int64_t y, int64_t x) const {
        return ((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
    }
    T& at4(int64_t b, int64_t c, int64_t y, int64_t x) { return st_->value[static_cast<size_t>(index4(b, c, y, x))]; }
    T at4(int64_t b, int64_t c, int64_t y, int64_t x) const { return st_->value[static_cast<size_t>(index4(b, c, y, x))]; }

    // --- gradient buffer -------------------------------------------------

    bool has_grad() const { return !st_->grad.empty(); }

    // Allocates (zeroed) on first use; after that, accumulates across
    // backward passes until zero_grad().
    std::vector<T>& grad() {
        if (st_->grad.empty()) st_->grad.assign(st_->value.size(), T(0));
        return st_->grad;
    }
    const std::vector<T>& grad() const { return st_->grad; }

    void zero_grad() {
        if (!st_->grad.empty()) st_->grad.assign(st_->value.size(), T(0));
    }

    void accumulate_grad(const std::vector<T>& g) {
        auto& dst = grad();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }

    // Storage identity; two handles alias iff they share storage.
    const void* storage_id() const { return st_.get(); }

    // --- tape linkage -----------------------------------------------------

    std::shared_ptr<detail::TapeImpl<T>> tape() const { return tape_; }
    void link_tape(std::shared_ptr<detail::TapeImpl<T>> t) { tape_ = std::move(t); }

private:
    Shape shape_;
    std::shared_ptr<detail::Storage<T>> st_;
    std::shared_ptr<detail::TapeImpl<T>> tape_;
};

// One recorded primitive application. The backward rule reads output.grad
// and the input values, and accumulates into the inputs' grads.
template <typename T>
struct TapeNode {
    std::vector<TensorT<T>> inputs;
    TensorT<T> output;
    std::function<void(TapeNode<T>&)> backward;
};

namespace detail {

template <typename T>
struct TapeImpl {
    std::vector<TapeNode<T>> nodes;  // recording order == topological order
    bool consumed = false;
};

}  // namespace detail

// Reverse-mode tape, per forward pass. Activate with Tape::Scope; the ops in
// this library record onto the active tape. backward() consumes the tape.
// A tape and the tensors recorded on it are confined to one thread.
template <typename T>
class TapeT {
public:
    TapeT() : impl_(std::make_shared<detail::TapeImpl<T>>()) {}

    // Dropping an unconsumed tape releases the recorded subgraph; call
    // backward() while the tape object is still alive.
    ~TapeT() {
        if (impl_ && !impl_->consumed) impl_->nodes.clear();
    }

    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    class Scope {
    public:
        explicit Scope(TapeT& tape) : prev_(active_) { active_ = &tape; }
        ~Scope() { active_ = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        TapeT* prev_;
    };

    static TapeT* current() { return active_; }

    // The node stores a handle made before the caller's tensor is linked, so
    // the tape never holds a reference back to itself through its outputs.
    void record(std::vector<TensorT<T>> inputs, TensorT<T>& output,
                std::function<void(TapeNode<T>&)> fn) {
        impl_->nodes.push_back(TapeNode<T>{std::move(inputs), output, std::move(fn)});
        output.link_tape(impl_);
    }

    size_t size() const { return impl_->nodes.size(); }
    std::shared_ptr<detail::TapeImpl<T>> impl() const { return impl_; }

private:
    static thread_local TapeT* active_;
    std::shared_ptr<detail::TapeImpl<T>> impl_;
};

template <typename T>
thread_local TapeT<T>* TapeT<T>::active_ = nullptr;

using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using TensorD = TensorT<double>;
using TapeD = TapeT<double>;

// --- differentiable primitives ---------------------------------------------

template <typename T> TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> scale(const TensorT<T>& a, T c);
template <typename T> TensorT<T> abs(const TensorT<T>& a);
template <typename T> TensorT<T> sigmoid(const TensorT<T>& a);

// Mean over all elements (N = total element count, channels included).
template <typename T> TensorT<T> reduce_mean(const TensorT<T>& a);

// Reverse sweep from a scalar root. Gradients of every tensor reachable from
// root accumulate; parameter grads persist until zeroed. Consumes the tape.
// A scalar with no tape linkage is a constant: no-op.
template <typename T> void backward(TensorT<T>& root);

// Max relative error between analytic gradient of f at x and central
// differences with step eps. Intended for double precision.
template <typename T>
double grad_check(const std::function<TensorT<T>(const TensorT<T>&)>& f,
                  const TensorT<T>& x, T eps);

template <typename T> bool all_finite(const TensorT<T>& t);

// Debug-mode guard: forward ops call this on their results.
template <typename T>
inline void debug_check_finite(const TensorT<T>& t, const char* op) {
#if !defined(NDEBUG) || defined(STDEPTH_FINITE_CHECKS)
    SD_FAIL_IF(!all_finite(t), "non-finite values produced by " << op);
#else
    (void)t;
    (void)op;
#endif
}

}  // namespace stdepth
