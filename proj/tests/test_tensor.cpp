#include <doctest.h>

#include <cmath>
#include <vector>

#include "stdepth/rng.hpp"
#include "stdepth/tensor.hpp"

using namespace stdepth;

namespace {

TensorD random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    TensorD t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

constexpr double kGradTol = 1e-4;  // max relative error, central differences
constexpr double kEps = 1e-5;

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("construction and shape accessors") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.rank() == 4);
    CHECK(t.numel() == 120);
    CHECK(t.dim(2) == 4);
    for (float v : t.values()) CHECK(v == 0.0f);

    Tensor s = Tensor::scalar(2.5f);
    CHECK(s.is_scalar());
    CHECK(s.rank() == 0);
    CHECK(s.at(0) == 2.5f);

    Tensor f = Tensor::full({3}, -1.0f);
    CHECK(f.at(2) == -1.0f);

    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}), std::invalid_argument);
}

TEST_CASE("copies are shallow handles") {
    Tensor a({4});
    Tensor b = a;
    b.at(1) = 7.0f;
    CHECK(a.at(1) == 7.0f);
    CHECK(a.storage_id() == b.storage_id());
    b.grad()[2] = 3.0f;
    CHECK(a.has_grad());
    CHECK(a.grad()[2] == 3.0f);
}

TEST_CASE("nchw flat indexing") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.index4(0, 0, 0, 0) == 0);
    CHECK(t.index4(1, 2, 3, 4) == t.numel() - 1);
    CHECK(t.index4(0, 1, 0, 0) == 20);
    CHECK(t.index4(1, 0, 0, 0) == 60);
}

TEST_CASE("elementwise forward values") {
    Tensor a({4}, {1.0f, -2.0f, 0.5f, 3.0f});
    Tensor b({4}, {2.0f, 5.0f, -1.0f, 0.25f});

    Tensor s = add(a, b);
    CHECK(s.at(0) == 3.0f);
    CHECK(s.at(1) == 3.0f);

    Tensor d = sub(a, b);
    CHECK(d.at(2) == 1.5f);

    Tensor m = mul(a, b);
    CHECK(m.at(3) == 0.75f);

    Tensor c = scale(a, -2.0f);
    CHECK(c.at(1) == 4.0f);

    Tensor ab = stdepth::abs(a);
    CHECK(ab.at(1) == 2.0f);
    CHECK(ab.at(0) == 1.0f);

    CHECK_THROWS_AS(add(a, Tensor({3})), std::invalid_argument);
}

TEST_CASE("sigmoid forward matches closed form") {
    TensorD x({3}, {0.0, 2.0, -3.0});
    TensorD y = sigmoid(x);
    CHECK(y.at(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.at(1) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
    CHECK(y.at(2) == doctest::Approx(1.0 / (1.0 + std::exp(3.0))).epsilon(1e-12));
}

TEST_CASE("reduce_mean averages every element") {
    Tensor a({2, 2}, {1.0f, 2.0f, 3.0f, 6.0f});
    Tensor m = reduce_mean(a);
    CHECK(m.is_scalar());
    CHECK(m.at(0) == 3.0f);
}

TEST_CASE("backward through a composite expression") {
    // y = mean(a*b) => dy/da = b/n, dy/db = a/n
    Tensor a({3}, {1.0f, -2.0f, 4.0f});
    Tensor b({3}, {0.5f, 3.0f, -1.0f});
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = reduce_mean(mul(a, b));
    backward(y);
    REQUIRE(a.has_grad());
    REQUIRE(b.has_grad());
    for (int i = 0; i < 3; ++i) {
        CHECK(a.grad()[i] == doctest::Approx(b.at(i) / 3.0f));
        CHECK(b.grad()[i] == doctest::Approx(a.at(i) / 3.0f));
    }
}

TEST_CASE("gradients accumulate across backward passes until zeroed") {
    Tensor a({2}, {1.0f, 2.0f});
    for (int pass = 0; pass < 2; ++pass) {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor y = reduce_mean(scale(a, 4.0f));
        backward(y);
    }
    CHECK(a.grad()[0] == doctest::Approx(4.0f));  // 2 passes x 4/2
    a.zero_grad();
    CHECK(a.grad()[0] == 0.0f);
}

TEST_CASE("branches off the path to the root receive no gradient") {
    Tensor a({2}, {1.0f, 2.0f});
    Tensor c({2}, {5.0f, 6.0f});
    Tape tape;
    Tape::Scope scope(tape);
    Tensor used = reduce_mean(scale(a, 2.0f));
    Tensor unused = mul(a, c);
    (void)unused;
    backward(used);
    CHECK(a.has_grad());
    CHECK_FALSE(c.has_grad());
}

TEST_CASE("a tape can only be consumed once") {
    Tensor a({2}, {1.0f, 2.0f});
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = reduce_mean(a);
    backward(y);
    CHECK_THROWS_AS(backward(y), std::runtime_error);
}

TEST_CASE("backward on a constant is a no-op and roots must be scalar") {
    Tensor c = Tensor::scalar(3.0f);
    backward(c);  // no tape: nothing to do
    CHECK_FALSE(c.has_grad());

    Tensor v({2}, {1.0f, 2.0f});
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = scale(v, 2.0f);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("ops do not record outside a tape scope") {
    Tensor a({2}, {1.0f, 2.0f});
    Tensor y = reduce_mean(a);
    backward(y);
    CHECK_FALSE(a.has_grad());
}

TEST_CASE("scope nesting restores the previous tape") {
    Tensor a({2}, {1.0f, 2.0f});
    Tape outer;
    Tape::Scope s1(outer);
    {
        Tape inner;
        Tape::Scope s2(inner);
        Tensor y = scale(a, 2.0f);
        (void)y;
        CHECK(inner.size() == 1);
    }
    CHECK(outer.size() == 0);
    Tensor z = scale(a, 3.0f);
    (void)z;
    CHECK(outer.size() == 1);
}

TEST_CASE("gradient check: every elementwise primitive") {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        TensorD x = random_tensor({2, 3}, seed);
        TensorD other = random_tensor({2, 3}, seed + 100);

        auto check = [&](const std::function<TensorD(const TensorD&)>& f) {
            CHECK(grad_check<double>(f, x, kEps) < kGradTol);
        };
        check([&](const TensorD& t) { return reduce_mean(add(t, other)); });
        check([&](const TensorD& t) { return reduce_mean(sub(other, t)); });
        check([&](const TensorD& t) { return reduce_mean(mul(t, other)); });
        check([&](const TensorD& t) { return reduce_mean(mul(t, t)); });
        check([&](const TensorD& t) { return reduce_mean(scale(t, -1.75)); });
        check([&](const TensorD& t) { return reduce_mean(sigmoid(t)); });
        check([&](const TensorD& t) { return reduce_mean(t); });
    }
}

TEST_CASE("gradient check: abs away from the kink") {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        TensorD x = random_tensor({3, 3}, seed, 0.5, 1.5);
        if (seed % 2 == 0) {
            for (auto& v : x.values()) v = -v;
        }
        CHECK(grad_check<double>(
                  [](const TensorD& t) { return reduce_mean(stdepth::abs(t)); }, x, kEps) <
              kGradTol);
    }
}

TEST_CASE("rng uniform stays in range and is deterministic") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(u == b.uniform());
    }
    CHECK(Rng::derive_seed(1, 0) != Rng::derive_seed(1, 1));
    CHECK(Rng::derive_seed(1, 0) != Rng::derive_seed(2, 0));
    CHECK(Rng::derive_seed(7, 3) == Rng::derive_seed(7, 3));
}

TEST_SUITE_END();
