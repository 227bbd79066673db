#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "calseg/autodiff.hpp"
#include "calseg/rng.hpp"
#include "doctest.h"

using namespace calseg;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double scalar_of(const NodePtr& n) {
    REQUIRE(n->value.size() == 1);
    return n->value[0];
}

}  // namespace

TEST_CASE("leaf and constant carry values") {
    auto a = leaf(Tensor({2, 2}, 3.0));
    CHECK(a->value.size() == 4);
    CHECK(a->value[3] == 3.0);
    auto c = constant(2.5);
    CHECK(c->value.size() == 1);
    CHECK(c->value[0] == 2.5);
}

TEST_CASE("elementwise arithmetic forward values") {
    auto a = leaf(Tensor({3}, {1.0, 2.0, 3.0}));
    auto b = leaf(Tensor({3}, {4.0, 5.0, 6.0}));
    auto s = add(a, b);
    CHECK(s->value[0] == 5.0);
    CHECK(s->value[2] == 9.0);
    CHECK(sub(a, b)->value[1] == -3.0);
    CHECK(mul(a, b)->value[2] == 18.0);
    CHECK(divide(b, a)->value[1] == 2.5);
    CHECK(add(a, 1.5)->value[0] == 2.5);
    CHECK(sub(10.0, a)->value[2] == 7.0);
    CHECK(mul(a, 2.0)->value[1] == 4.0);
    CHECK(divide(a, 2.0)->value[2] == 1.5);
}

TEST_CASE("scalar broadcast against tensors") {
    auto a = leaf(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
    auto k = constant(10.0);
    auto out = mul(a, k);
    CHECK(out->value.shape == std::vector<std::size_t>{2, 2});
    CHECK(out->value[3] == 40.0);
    // broadcast works on either side
    CHECK(sub(k, a)->value[0] == 9.0);
}

TEST_CASE("mismatched shapes are rejected") {
    auto a = leaf(Tensor({2, 3}, 1.0));
    auto b = leaf(Tensor({3, 2}, 1.0));
    CHECK_THROWS_AS((void)add(a, b), std::invalid_argument);
}

TEST_CASE("backward: product rule and chain rule") {
    auto x = leaf(Tensor({1}, {3.0}));
    auto y = leaf(Tensor({1}, {5.0}));
    auto f = mul(add(x, y), sub(x, y));  // x^2 - y^2
    backward(f);
    CHECK(x->grad[0] == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(y->grad[0] == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("backward accumulates through shared subexpressions") {
    auto x = leaf(Tensor({1}, {2.0}));
    auto z = mul(x, x);       // x^2
    auto f = add(z, z);       // 2 x^2, df/dx = 4x = 8
    backward(f);
    CHECK(x->grad[0] == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("zero_grads resets so a second backward is not doubled") {
    auto x = leaf(Tensor({1}, {2.0}));
    auto f = mul(x, x);
    backward(f);
    const double g1 = x->grad[0];
    zero_grads(f);
    CHECK(x->grad[0] == 0.0);
    backward(f);
    CHECK(x->grad[0] == g1);
}

TEST_CASE("backward requires a scalar root") {
    auto x = leaf(Tensor({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(backward(x), std::invalid_argument);
}

TEST_CASE("reduce_sum over all axes and selected axes") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    auto a = leaf(t);
    auto all = reduce_sum(a);
    CHECK(all->value.shape == std::vector<std::size_t>{1});
    CHECK(all->value[0] == 21.0);

    auto rows = reduce_sum(a, {1});  // drop axis 1 -> [2]
    CHECK(rows->value.shape == std::vector<std::size_t>{2});
    CHECK(rows->value[0] == 6.0);
    CHECK(rows->value[1] == 15.0);

    auto cols = reduce_sum(a, {0});  // -> [3]
    CHECK(cols->value[0] == 5.0);
    CHECK(cols->value[2] == 9.0);

    backward(all);
    for (double g : a->grad.data) CHECK(g == 1.0);
}

TEST_CASE("reduce_mean scales by the reduced element count") {
    auto a = leaf(Tensor({2, 2}, {1, 2, 3, 4}));
    auto m = reduce_mean(a);
    CHECK(m->value[0] == doctest::Approx(2.5).epsilon(1e-15));
    backward(m);
    for (double g : a->grad.data) CHECK(g == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("reduce rejects invalid axes") {
    auto a = leaf(Tensor({2, 2}, 1.0));
    CHECK_THROWS_AS((void)reduce_sum(a, {2}), std::invalid_argument);
}

TEST_CASE("softmax_channels: channel columns sum to one and match e^x/sum") {
    auto a = leaf(Tensor({2, 1, 2}, {1.0, -2.0, 0.5, 3.0}));
    auto s = softmax_channels(a);
    for (std::size_t i = 0; i < 2; ++i) {
        const double p0 = s->value[i], p1 = s->value[2 + i];
        CHECK(p0 + p1 == doctest::Approx(1.0).epsilon(1e-12));
        const double e0 = std::exp(a->value[i]), e1 = std::exp(a->value[2 + i]);
        CHECK(p0 == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
    }
}

TEST_CASE("softmax_channels is stable for large logits") {
    auto a = leaf(Tensor({2, 1, 1}, {1000.0, -1000.0}));
    auto s = softmax_channels(a);
    CHECK(std::isfinite(s->value[0]));
    CHECK(s->value[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s->value[1] >= 0.0);
}

TEST_CASE("pow: zero base stays exactly zero in the forward pass") {
    auto a = leaf(Tensor({3}, {0.0, 0.5, 2.0}));
    auto p = pow(a, 2.5);
    CHECK(p->value[0] == 0.0);
    CHECK(p->value[1] == doctest::Approx(std::pow(0.5, 2.5)).epsilon(1e-15));
    CHECK(p->value[2] == doctest::Approx(std::pow(2.0, 2.5)).epsilon(1e-15));
}

TEST_CASE("pow: negative base with non-integer exponent is rejected") {
    auto a = leaf(Tensor({1}, {-0.5}));
    CHECK_THROWS_AS((void)pow(a, 1.5), std::domain_error);
    CHECK((void*)pow(a, 2.0).get() != nullptr);  // integer exponent fine
    CHECK(pow(a, 2.0)->value[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("pow derivative stays finite at zero base") {
    auto a = leaf(Tensor({1}, {0.0}));
    auto p = pow(a, 0.5);  // d/dx sqrt(x) diverges at 0; the clamp keeps it finite
    backward(p);
    CHECK(std::isfinite(a->grad[0]));
}

TEST_CASE("log: clamps into [1e-7, 1] and rejects negatives") {
    auto a = leaf(Tensor({3}, {0.0, 0.5, 2.0}));
    auto l = log(a);
    CHECK(l->value[0] == doctest::Approx(std::log(1e-7)).epsilon(1e-12));
    CHECK(l->value[1] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    CHECK(l->value[2] == 0.0);  // clamped at 1
    backward(reduce_sum(l));
    CHECK(a->grad[0] == 0.0);  // below floor: derivative zeroed
    CHECK(a->grad[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a->grad[2] == 0.0);  // above ceiling

    auto neg_in = leaf(Tensor({1}, {-0.1}));
    CHECK_THROWS_AS((void)log(neg_in), std::domain_error);
}

TEST_CASE("exp and relu forward/backward") {
    auto a = leaf(Tensor({3}, {-1.0, 0.0, 2.0}));
    auto e = exp(a);
    CHECK(e->value[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    auto r = relu(a);
    CHECK(r->value[0] == 0.0);
    CHECK(r->value[1] == 0.0);
    CHECK(r->value[2] == 2.0);
    backward(reduce_sum(r));
    CHECK(a->grad[0] == 0.0);
    CHECK(a->grad[1] == 0.0);  // subgradient 0 at the kink
    CHECK(a->grad[2] == 1.0);
}

TEST_CASE("neg flips values and gradients") {
    auto a = leaf(Tensor({2}, {1.5, -2.0}));
    auto n = neg(a);
    CHECK(n->value[0] == -1.5);
    backward(reduce_sum(n));
    CHECK(a->grad[0] == -1.0);
    CHECK(a->grad[1] == -1.0);
}

TEST_CASE("conv2d: 1x1 kernel mixes channels") {
    // input [2,2,2], weight [1,2,1,1] = (2, -1), bias (0.5)
    auto in = leaf(Tensor({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40}));
    auto w = leaf(Tensor({1, 2, 1, 1}, {2.0, -1.0}));
    auto b = leaf(Tensor({1}, {0.5}));
    auto out = conv2d(in, w, b);
    CHECK(out->value.shape == std::vector<std::size_t>{1, 2, 2});
    CHECK(out->value[0] == doctest::Approx(2 * 1 - 10 + 0.5).epsilon(1e-15));
    CHECK(out->value[3] == doctest::Approx(2 * 4 - 40 + 0.5).epsilon(1e-15));
}

TEST_CASE("conv2d: 3x3 same padding matches a hand computation") {
    // single channel 3x3 image = 1..9, kernel = all ones, bias 0
    auto in = leaf(Tensor({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    auto w = leaf(Tensor({1, 1, 3, 3}, 1.0));
    auto b = leaf(Tensor({1}, {0.0}));
    auto out = conv2d(in, w, b);
    // center output = sum of all = 45; corner (0,0) = 1+2+4+5 = 12
    CHECK(out->value.at3(0, 1, 1) == doctest::Approx(45.0).epsilon(1e-15));
    CHECK(out->value.at3(0, 0, 0) == doctest::Approx(12.0).epsilon(1e-15));
    CHECK(out->value.at3(0, 2, 2) == doctest::Approx(5 + 6 + 8 + 9).epsilon(1e-15));
}

TEST_CASE("conv2d rejects even kernels and channel mismatches") {
    auto in = leaf(Tensor({1, 4, 4}, 1.0));
    CHECK_THROWS_AS((void)conv2d(in, leaf(Tensor({1, 1, 2, 2}, 1.0)), leaf(Tensor({1}, 0.0))),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)conv2d(in, leaf(Tensor({1, 3, 3, 3}, 1.0)), leaf(Tensor({1}, 0.0))),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)conv2d(in, leaf(Tensor({1, 1, 3, 3}, 1.0)), leaf(Tensor({2}, 0.0))),
                    std::invalid_argument);
}

TEST_CASE("instance_norm matches the closed form on a two-value channel") {
    // channel values {0, 2}: mean 1, var 1, isd = 1/sqrt(1 + 1e-5)
    auto x = leaf(Tensor({1, 1, 2}, {0.0, 2.0}));
    auto g = leaf(Tensor({1}, {1.0}));
    auto b = leaf(Tensor({1}, {0.0}));
    auto out = instance_norm(x, g, b);
    CHECK(out->value[0] == doctest::Approx(-0.9999950000374997).epsilon(1e-14));
    CHECK(out->value[1] == doctest::Approx(0.9999950000374997).epsilon(1e-14));
}

TEST_CASE("instance_norm applies gain and bias per channel") {
    auto x = leaf(Tensor({2, 1, 2}, {0.0, 2.0, 5.0, 9.0}));
    auto g = leaf(Tensor({2}, {2.0, 3.0}));
    auto b = leaf(Tensor({2}, {1.0, -1.0}));
    auto out = instance_norm(x, g, b);
    const double xhat = 0.9999950000374997;
    CHECK(out->value.at3(0, 0, 0) == doctest::Approx(-2.0 * xhat + 1.0).epsilon(1e-12));
    CHECK(out->value.at3(0, 0, 1) == doctest::Approx(2.0 * xhat + 1.0).epsilon(1e-12));
    // channel 1 values {5,9}: mean 7, sd 2
    const double xhat1 = 2.0 / std::sqrt(4.0 + 1e-5);
    CHECK(out->value.at3(1, 0, 1) == doctest::Approx(3.0 * xhat1 - 1.0).epsilon(1e-12));
}

TEST_CASE("downsample2 means 2x2 blocks; upsample2 replicates") {
    auto a = leaf(Tensor({1, 2, 2}, {1.0, 2.0, 3.0, 4.0}));
    auto d = downsample2(a);
    CHECK(d->value.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(d->value[0] == doctest::Approx(2.5).epsilon(1e-15));

    auto u = upsample2(d);
    CHECK(u->value.shape == std::vector<std::size_t>{1, 2, 2});
    for (double v : u->value.data) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));

    CHECK_THROWS_AS((void)downsample2(leaf(Tensor({1, 3, 3}, 1.0))), std::invalid_argument);
}

TEST_CASE("downsample2 of upsample2 is the identity") {
    Rng rng(99);
    auto a = leaf(random_tensor({2, 3, 4}, rng));
    auto round = downsample2(upsample2(a));
    for (std::size_t i = 0; i < a->value.size(); ++i)
        CHECK(round->value[i] == doctest::Approx(a->value[i]).epsilon(1e-14));
}

TEST_CASE("concat_channels stacks along axis 0") {
    auto a = leaf(Tensor({1, 1, 2}, {1.0, 2.0}));
    auto b = leaf(Tensor({2, 1, 2}, {3.0, 4.0, 5.0, 6.0}));
    auto c = concat_channels(a, b);
    CHECK(c->value.shape == std::vector<std::size_t>{3, 1, 2});
    CHECK(c->value[0] == 1.0);
    CHECK(c->value[2] == 3.0);
    CHECK(c->value[5] == 6.0);
    backward(reduce_sum(c));
    CHECK(a->grad[0] == 1.0);
    CHECK(b->grad[3] == 1.0);

    CHECK_THROWS_AS((void)concat_channels(a, leaf(Tensor({1, 2, 2}, 1.0))),
                    std::invalid_argument);
}

TEST_CASE("grad_check validates every differentiable op against finite differences") {
    Rng rng(7);

    SUBCASE("elementwise composite") {
        const Tensor x = random_tensor({2, 3}, rng, 0.1, 2.0);
        const double err = grad_check(
            [](const NodePtr& in) {
                auto t = mul(add(in, 0.5), exp(neg(in)));
                return reduce_sum(mul(t, t));
            },
            x);
        CHECK(err < 1e-6);
    }

    SUBCASE("pow, log, divide chain") {
        const Tensor x = random_tensor({4}, rng, 0.2, 0.9);
        const double err = grad_check(
            [](const NodePtr& in) {
                auto p = pow(in, 1.7);
                auto l = log(in);
                return reduce_mean(divide(p, sub(2.0, l)));
            },
            x);
        CHECK(err < 1e-6);
    }

    SUBCASE("softmax then nonlinear reduction") {
        const Tensor x = random_tensor({2, 2, 2}, rng, -2.0, 2.0);
        const double err = grad_check(
            [](const NodePtr& in) {
                auto s = softmax_channels(in);
                return reduce_sum(mul(s, s));
            },
            x);
        CHECK(err < 1e-6);
    }

    SUBCASE("conv2d with respect to input") {
        const Tensor x = random_tensor({2, 4, 4}, rng);
        Rng wr(11);
        const Tensor wt = random_tensor({3, 2, 3, 3}, wr, -0.5, 0.5);
        const Tensor bt = random_tensor({3}, wr, -0.5, 0.5);
        const double err = grad_check(
            [&](const NodePtr& in) {
                auto out = conv2d(in, leaf(wt), leaf(bt));
                return reduce_sum(mul(out, out));
            },
            x);
        CHECK(err < 1e-6);
    }

    SUBCASE("conv2d with respect to weights") {
        Rng xr(13);
        const Tensor xt = random_tensor({2, 4, 4}, xr);
        const Tensor wt = random_tensor({3, 2, 3, 3}, xr, -0.5, 0.5);
        const double err = grad_check(
            [&](const NodePtr& w) {
                auto out = conv2d(leaf(xt), w, leaf(Tensor({3}, 0.1)));
                return reduce_sum(mul(out, out));
            },
            wt);
        CHECK(err < 1e-6);
    }

    SUBCASE("instance_norm with respect to input, gain, and bias") {
        const Tensor x = random_tensor({2, 3, 3}, rng);
        CHECK(grad_check(
                  [](const NodePtr& in) {
                      auto out = instance_norm(in, leaf(Tensor({2}, {1.3, 0.7})),
                                               leaf(Tensor({2}, {0.1, -0.2})));
                      return reduce_sum(mul(out, out));
                  },
                  x) < 1e-6);
        const Tensor gopt = random_tensor({2}, rng, 0.5, 1.5);
        const Tensor xin = random_tensor({2, 3, 3}, rng);
        CHECK(grad_check(
                  [&](const NodePtr& g) {
                      auto out = instance_norm(leaf(xin), g, leaf(Tensor({2}, 0.0)));
                      return reduce_sum(mul(out, out));
                  },
                  gopt) < 1e-6);
    }

    SUBCASE("down/up sampling and concat") {
        const Tensor x = random_tensor({2, 4, 4}, rng);
        const double err = grad_check(
            [](const NodePtr& in) {
                auto d = downsample2(in);
                auto u = upsample2(d);
                auto c = concat_channels(d, d);
                return add(reduce_sum(mul(u, u)), reduce_mean(mul(c, c)));
            },
            x);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("a deep composite graph still matches finite differences") {
    Rng rng(31);
    const Tensor x = random_tensor({2, 4, 4}, rng, -1.0, 1.0);
    Rng wr(32);
    const Tensor w1 = random_tensor({2, 2, 3, 3}, wr, -0.4, 0.4);
    const Tensor w2 = random_tensor({2, 2, 3, 3}, wr, -0.4, 0.4);
    const double err = grad_check(
        [&](const NodePtr& in) {
            auto h = relu(conv2d(in, leaf(w1), leaf(Tensor({2}, 0.05))));
            auto n = instance_norm(h, leaf(Tensor({2}, 1.0)), leaf(Tensor({2}, 0.0)));
            auto d = downsample2(n);
            auto u = upsample2(d);
            auto out = conv2d(u, leaf(w2), leaf(Tensor({2}, -0.05)));
            auto p = softmax_channels(out);
            return reduce_mean(mul(p, p));
        },
        x, 1e-5);
    CHECK(err < 1e-4);
}
