#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tofusion/conv.hpp"
#include "tofusion/tensor.hpp"

using namespace tofusion;
using Catch::Approx;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                             bool requires_grad = true) {
    RandomStream rs(seed);
    std::vector<double> v(static_cast<size_t>(s.numel()));
    for (auto& x : v) x = rs.uniform(lo, hi);
    return Tensor<double>::leaf(s, std::move(v), requires_grad);
}

// Pushes values away from zero so relu/abs probes stay on one branch.
Tensor<double> random_tensor_nudged(Shape s, std::uint64_t seed, double guard = 0.05) {
    Tensor<double> t = random_tensor(s, seed);
    for (auto& x : t.val())
        if (std::abs(x) < guard) x = (x >= 0 ? guard : -guard);
    return t;
}

}  // namespace

TEST_CASE("elementwise forward values") {
    auto a = Tensor<double>::leaf({1, 1, 1, 3}, {1.0, -2.0, 3.0}, false);
    auto b = Tensor<double>::leaf({1, 1, 1, 3}, {4.0, 5.0, -6.0}, false);
    CHECK(ad::add(a, b).val() == std::vector<double>{5.0, 3.0, -3.0});
    CHECK(ad::sub(a, b).val() == std::vector<double>{-3.0, -7.0, 9.0});
    CHECK(ad::mul(a, b).val() == std::vector<double>{4.0, -10.0, -18.0});
    CHECK(ad::relu(a).val() == std::vector<double>{1.0, 0.0, 3.0});
    CHECK(ad::abs_t(a).val() == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(ad::tanh_t(Tensor<double>::scalar(0.0)).item() == 0.0);
}

TEST_CASE("smooth_l1 branch values") {
    auto x = Tensor<double>::leaf({1, 1, 1, 3}, {0.0, 0.5, 2.0}, false);
    auto y = ad::smooth_l1(x);
    CHECK(y.val()[0] == 0.0);
    CHECK(y.val()[1] == Approx(0.125));
    CHECK(y.val()[2] == Approx(1.5));
}

TEST_CASE("mean backward distributes 1/n") {
    auto x = random_tensor({1, 2, 3, 4}, 7);
    auto loss = ad::mean_all(x);
    backward(loss);
    for (double g : x.grad()) CHECK(g == Approx(1.0 / 24.0));
}

TEST_CASE("sum of product gives the other factor as gradient") {
    auto x = random_tensor({1, 1, 2, 3}, 11);
    auto y = random_tensor({1, 1, 2, 3}, 13);
    auto loss = ad::sum_all(ad::mul(x, y));
    backward(loss);
    for (size_t i = 0; i < x.val().size(); ++i) {
        CHECK(x.grad()[i] == Approx(y.val()[i]));
        CHECK(y.grad()[i] == Approx(x.val()[i]));
    }
}

TEST_CASE("tanh gradient at zero is one") {
    auto x = Tensor<double>::scalar(0.0, true);
    auto loss = ad::sum_all(ad::tanh_t(x));
    backward(loss);
    CHECK(x.grad()[0] == Approx(1.0));
}

TEST_CASE("conv2d identity kernel reproduces input") {
    auto x = random_tensor({1, 1, 5, 5}, 17, 0.0, 1.0, false);
    std::vector<double> w(9, 0.0);
    w[4] = 1.0;  // center tap
    auto wk = Tensor<double>::constant({1, 1, 3, 3}, w);
    auto b = Tensor<double>::constant({1, 1, 1, 1}, {0.0});
    auto y = ad::conv2d(x, wk, b, 1);
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < x.val().size(); ++i) CHECK(y.val()[i] == x.val()[i]);
}

TEST_CASE("conv2d all-ones kernel on constant input") {
    auto x = Tensor<double>::full({1, 1, 5, 5}, 1.0);
    auto wk = Tensor<double>::full({1, 1, 3, 3}, 1.0);
    auto b = Tensor<double>::constant({1, 1, 1, 1}, {0.0});
    auto y = ad::conv2d(x, wk, b, 1);
    CHECK(y.val()[2 * 5 + 2] == Approx(9.0));  // interior
    CHECK(y.val()[0] == Approx(4.0));          // corner sees a 2x2 patch
}

TEST_CASE("conv2d stride 2 shape") {
    auto x = random_tensor({1, 3, 8, 8}, 19, -1, 1, false);
    auto wk = random_tensor({4, 3, 3, 3}, 23, -1, 1, false);
    auto b = Tensor<double>::full({1, 4, 1, 1}, 0.0);
    auto y = ad::conv2d(x, wk, b, 2);
    CHECK(y.shape() == Shape{1, 4, 4, 4});
}

TEST_CASE("conv2d linearity in the input") {
    auto wk = random_tensor({2, 3, 3, 3}, 29, -1, 1, false);
    auto b = Tensor<double>::full({1, 2, 1, 1}, 0.0);
    auto x1 = random_tensor({1, 3, 6, 6}, 31, -1, 1, false);
    auto x2 = random_tensor({1, 3, 6, 6}, 37, -1, 1, false);
    const double a1 = 0.7, a2 = -1.3;
    auto lhs = ad::conv2d(ad::add(ad::scale(x1, a1), ad::scale(x2, a2)), wk, b, 1);
    auto rhs = ad::add(ad::scale(ad::conv2d(x1, wk, b, 1), a1),
                       ad::scale(ad::conv2d(x2, wk, b, 1), a2));
    for (size_t i = 0; i < lhs.val().size(); ++i)
        CHECK(lhs.val()[i] == Approx(rhs.val()[i]).margin(1e-12));
}

TEST_CASE("upsample_nearest_2x repeats blocks") {
    auto x = Tensor<double>::leaf({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0}, false);
    auto y = ad::upsample_nearest_2x(x);
    REQUIRE(y.shape() == Shape{1, 1, 4, 4});
    const std::vector<double> want{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(y.val() == want);
}

TEST_CASE("concat then slice recovers originals bit-exactly") {
    auto a = random_tensor({2, 3, 4, 5}, 41, -1, 1, false);
    auto b = random_tensor({2, 5, 4, 5}, 43, -1, 1, false);
    auto cat = ad::concat_channels(a, b);
    REQUIRE(cat.shape() == Shape{2, 8, 4, 5});
    auto sa = ad::slice_channels(cat, 0, 3);
    auto sb = ad::slice_channels(cat, 3, 8);
    CHECK(sa.val() == a.val());
    CHECK(sb.val() == b.val());
}

TEST_CASE("box_mean keeps constants constant including borders") {
    auto x = Tensor<double>::full({1, 1, 6, 7}, 3.25);
    auto y = ad::box_mean(x, 5);
    for (double v : y.val()) CHECK(v == Approx(3.25).epsilon(1e-14));
}

TEST_CASE("min/max route gradient to the extreme element") {
    auto x = Tensor<double>::leaf({1, 1, 1, 4}, {3.0, -1.0, 7.0, 2.0}, true);
    auto lo = ad::min_all(x);
    CHECK(lo.item() == -1.0);
    backward(lo);
    CHECK(x.grad() == std::vector<double>{0.0, 1.0, 0.0, 0.0});

    auto x2 = Tensor<double>::leaf({1, 1, 1, 4}, {3.0, -1.0, 7.0, 2.0}, true);
    auto hi = ad::max_all(x2);
    CHECK(hi.item() == 7.0);
    backward(hi);
    CHECK(x2.grad() == std::vector<double>{0.0, 0.0, 1.0, 0.0});
}

TEST_CASE("forward is bit-deterministic") {
    auto run = [] {
        auto x = random_tensor({1, 3, 8, 8}, 51, -1, 1, false);
        auto w = random_tensor({4, 3, 3, 3}, 53, -1, 1, false);
        auto b = random_tensor({1, 4, 1, 1}, 57, -1, 1, false);
        return ad::mean_all(ad::relu(ad::conv2d(x, w, b, 1))).item();
    };
    CHECK(run() == run());
}

TEST_CASE("gradient check: elementwise and reductions") {
    auto builder = [](const std::vector<Tensor<double>>& in) {
        auto prod = ad::mul(in[0], in[1]);
        auto q = ad::div(prod, ad::offset(ad::abs_t(in[1]), 1.0));
        auto s = ad::add(ad::tanh_t(in[0]), ad::smooth_l1(q));
        return ad::mean_all(s);
    };
    auto res = grad_check(builder, {random_tensor_nudged({1, 2, 4, 4}, 61),
                                    random_tensor_nudged({1, 2, 4, 4}, 67)});
    CHECK(res.skipped_kinks == 0);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradient check: linear function is exact") {
    auto builder = [](const std::vector<Tensor<double>>& in) {
        return ad::mean_all(ad::scale(in[0], 3.5));
    };
    auto res = grad_check(builder, {random_tensor({1, 1, 4, 4}, 71)});
    CHECK(res.max_rel_err < 1e-10);
}

TEST_CASE("gradient check: conv + relu + mean") {
    auto builder = [](const std::vector<Tensor<double>>& in) {
        return ad::mean_all(ad::relu(ad::conv2d(in[0], in[1], in[2], 1)));
    };
    auto res = grad_check(builder,
                          {random_tensor_nudged({1, 2, 5, 5}, 73), random_tensor({3, 2, 3, 3}, 79),
                           random_tensor({1, 3, 1, 1}, 83)});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradient check: strided conv") {
    auto builder = [](const std::vector<Tensor<double>>& in) {
        return ad::mean_all(ad::conv2d(in[0], in[1], in[2], 2));
    };
    auto res = grad_check(builder, {random_tensor({1, 2, 6, 6}, 89), random_tensor({2, 2, 3, 3}, 97),
                                    random_tensor({1, 2, 1, 1}, 101)});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradient check: upsample, concat, slice, box_mean") {
    auto builder = [](const std::vector<Tensor<double>>& in) {
        auto up = ad::upsample_nearest_2x(in[0]);
        auto cat = ad::concat_channels(up, in[1]);
        auto sl = ad::slice_channels(cat, 1, 3);
        return ad::mean_all(ad::box_mean(ad::mul(sl, sl), 3));
    };
    auto res = grad_check(builder, {random_tensor({1, 2, 3, 3}, 103), random_tensor({1, 2, 6, 6}, 107)});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradient check: min/max normalization pattern") {
    auto builder = [](const std::vector<Tensor<double>>& in) {
        auto mn = ad::min_all(in[0]);
        auto mx = ad::max_all(in[0]);
        auto range = ad::sub(mx, mn);
        auto norm = ad::div(ad::sub(in[0], ad::broadcast_scalar(mn, in[0].shape())),
                            ad::broadcast_scalar(range, in[0].shape()));
        return ad::mean_all(ad::mul(norm, norm));
    };
    auto res = grad_check(builder, {random_tensor({1, 1, 4, 4}, 109)});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = random_tensor({1, 1, 2, 2}, 113);
    auto y = ad::scale(x, 2.0);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("shape mismatches are rejected") {
    auto a = random_tensor({1, 1, 2, 2}, 127);
    auto b = random_tensor({1, 1, 2, 3}, 131);
    CHECK_THROWS_AS(ad::add(a, b), std::invalid_argument);
    auto w = random_tensor({2, 3, 3, 3}, 137);
    auto bias = Tensor<double>::full({1, 2, 1, 1}, 0.0);
    CHECK_THROWS_AS(ad::conv2d(a, w, bias, 1), std::invalid_argument);
}
