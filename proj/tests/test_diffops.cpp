#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gavn/deform.hpp"
#include "gavn/grad_check.hpp"

using namespace gavn;

namespace {

template <class T>
Var<T> var_of(Tensor4<T> t, bool rg = false) {
    return make_var(std::move(t), rg);
}

Tensor4<double> randt(Shape4 s, std::uint64_t seed, double lo = -1, double hi = 1) {
    Rng rng(seed);
    return random_tensor<double>(s, rng, lo, hi);
}

}  // namespace

TEST_CASE("conv2d pointwise scaling") {
    auto x = var_of(Tensor4<double>::full(1, 1, 3, 3, 1.0));
    Tensor4<double> wt(1, 1, 1, 1);
    wt.v[0] = 2.0;
    auto w = var_of(wt);
    auto b = var_of(Tensor4<double>(1, 1, 1, 1));
    auto y = conv2d(x, w, b, 1, 0);
    CHECK(y->val.shape == Shape4{1, 1, 3, 3});
    for (double v : y->val.v) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("conv2d identity kernel reproduces input") {
    Tensor4<double> xt = randt({1, 2, 6, 7}, 11);
    Tensor4<double> wt(2, 2, 3, 3);
    wt.at(0, 0, 1, 1) = 1.0;
    wt.at(1, 1, 1, 1) = 1.0;
    auto y = conv2d(var_of(xt), var_of(wt), Var<double>{}, 1, 1);
    REQUIRE(y->val.shape == xt.shape);
    for (std::size_t i = 0; i < xt.v.size(); ++i) CHECK(y->val.v[i] == doctest::Approx(xt.v[i]));
}

TEST_CASE("conv2d strided output shape") {
    Tensor4<double> xt = randt({2, 3, 8, 8}, 12);
    Tensor4<double> wt = randt({4, 3, 3, 3}, 13);
    auto y = conv2d(var_of(xt), var_of(wt), Var<double>{}, 2, 1);
    CHECK(y->val.shape == Shape4{2, 4, 4, 4});
}

TEST_CASE("conv2d rejects channel mismatch") {
    auto x = var_of(randt({1, 3, 5, 5}, 1));
    auto w = var_of(randt({2, 4, 3, 3}, 2));
    CHECK_THROWS_WITH_AS(conv2d(x, w, Var<double>{}, 1, 1),
                         doctest::Contains("input channels"), std::invalid_argument);
}

TEST_CASE("conv2d gradients vs finite differences") {
    for (std::uint64_t seed : {21u, 22u}) {
        Tensor4<double> xt = randt({1, 2, 5, 5}, seed);
        Tensor4<double> wt = randt({3, 2, 3, 3}, seed + 100);
        Tensor4<double> bt = randt({1, 3, 1, 1}, seed + 200);
        Rng prng(seed + 300);
        Tensor4<double> proj = random_tensor<double>({1, 3, 3, 3}, prng);
        auto fn = [&](const std::vector<Var<double>>& in) {
            return weighted_sum(conv2d(in[0], in[1], in[2], 2, 1), proj);
        };
        auto rep = grad_check<double>(fn, {xt, wt, bt}, 1e-4);
        INFO(rep.worst_location);
        CHECK(rep.pass);
        CHECK(rep.max_rel_error <= 1e-4);
    }
}

TEST_CASE("conv1d matches manual correlation") {
    Tensor4<double> xt(1, 1, 1, 5);
    for (int i = 0; i < 5; ++i) xt.at(0, 0, 0, i) = i + 1;
    Tensor4<double> wt(1, 1, 1, 3);
    wt.at(0, 0, 0, 0) = 1;
    wt.at(0, 0, 0, 1) = 0;
    wt.at(0, 0, 0, 2) = -1;
    auto y = conv1d(var_of(xt), var_of(wt), Var<double>{}, 1, 1);
    REQUIRE(y->val.shape == Shape4{1, 1, 1, 5});
    // reflect: [1,1,2,3,4,5,5]
    CHECK(y->val.at(0, 0, 0, 0) == doctest::Approx(1 - 2));
    CHECK(y->val.at(0, 0, 0, 1) == doctest::Approx(1 - 3));
    CHECK(y->val.at(0, 0, 0, 4) == doctest::Approx(4 - 5));
}

TEST_CASE("bilinear_sample lattice, midpoint and clamp") {
    Tensor4<double> feat(1, 1, 2, 2);
    feat.at(0, 0, 0, 0) = 0;
    feat.at(0, 0, 0, 1) = 1;
    feat.at(0, 0, 1, 0) = 2;
    feat.at(0, 0, 1, 1) = 3;
    Tensor4<double> coords(1, 2, 1, 3);
    coords.at(0, 0, 0, 0) = 1.0;   // (x=1, y=0) -> 1
    coords.at(0, 1, 0, 0) = 0.0;
    coords.at(0, 0, 0, 1) = 0.5;   // midpoint -> 1.5
    coords.at(0, 1, 0, 1) = 0.5;
    coords.at(0, 0, 0, 2) = -5.0;  // clamps to (0,0)
    coords.at(0, 1, 0, 2) = 0.0;
    auto y = bilinear_sample(var_of(feat), var_of(coords));
    CHECK(y->val.at(0, 0, 0, 0) == doctest::Approx(1.0));
    CHECK(y->val.at(0, 0, 0, 1) == doctest::Approx(1.5));
    CHECK(y->val.at(0, 0, 0, 2) == doctest::Approx(0.0));
}

TEST_CASE("bilinear_sample gradients vs finite differences") {
    Tensor4<double> feat = randt({1, 3, 6, 6}, 31);
    // keep sample points away from the integer lattice and the border
    Rng rng(32);
    Tensor4<double> coords(1, 2, 4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            coords.at(0, 0, y, x) = rng.uniform_int(0, 4) + rng.uniform(0.2, 0.8);
            coords.at(0, 1, y, x) = rng.uniform_int(0, 4) + rng.uniform(0.2, 0.8);
        }
    Rng prng(33);
    Tensor4<double> proj = random_tensor<double>({1, 3, 4, 4}, prng);
    auto fn = [&](const std::vector<Var<double>>& in) {
        return weighted_sum(bilinear_sample(in[0], in[1]), proj);
    };
    auto rep = grad_check<double>(fn, {feat, coords}, 1e-4);
    INFO(rep.worst_location);
    CHECK(rep.pass);
}

TEST_CASE("deform_conv2d with zero offsets equals conv2d") {
    for (auto [c, o, hw, k] : std::vector<std::array<int, 4>>{{2, 3, 8, 3}, {1, 1, 5, 3}, {3, 2, 9, 5}}) {
        Tensor4<double> xt = randt({2, c, hw, hw}, std::uint64_t(41 + k));
        Tensor4<double> wt = randt({o, c, k, k}, std::uint64_t(42 + k));
        Tensor4<double> off(2, 2 * k * k, hw, hw);
        auto y1 = deform_conv2d(var_of(xt), var_of(off), var_of(wt));
        auto y2 = conv2d(var_of(xt), var_of(wt), Var<double>{}, 1, k / 2);
        REQUIRE(y1->val.shape == y2->val.shape);
        for (std::size_t i = 0; i < y1->val.v.size(); ++i)
            CHECK(std::abs(y1->val.v[i] - y2->val.v[i]) < 1e-6);
    }
}

TEST_CASE("deform_conv2d unit offset matches shifted input in the interior") {
    int H = 8, W = 8, k = 3;
    Tensor4<double> xt = randt({1, 2, H, W}, 51);
    // xs(:, x) = x(:, x-1); sampling xs with dx=+1 reads the original pixels
    Tensor4<double> xs(1, 2, H, W);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                xs.at(0, c, y, x) = xt.at(0, c, y, x > 0 ? x - 1 : 0);
    Tensor4<double> wt = randt({2, 2, k, k}, 52);
    Tensor4<double> zero_off(1, 2 * k * k, H, W);
    Tensor4<double> one_off(1, 2 * k * k, H, W);
    for (int tap = 0; tap < k * k; ++tap)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) one_off.at(0, 2 * tap, y, x) = 1.0;
    auto base = deform_conv2d(var_of(xt), var_of(zero_off), var_of(wt));
    auto shifted = deform_conv2d(var_of(xs), var_of(one_off), var_of(wt));
    for (int c = 0; c < 2; ++c)
        for (int y = 2; y < H - 2; ++y)
            for (int x = 2; x < W - 2; ++x)
                CHECK(shifted->val.at(0, c, y, x) ==
                      doctest::Approx(base->val.at(0, c, y, x)).epsilon(1e-9));
}

TEST_CASE("deform_conv2d gradients vs finite differences") {
    int H = 6, W = 6, k = 3;
    Tensor4<double> xt = randt({1, 4, H, W}, 61);
    Tensor4<double> wt = randt({2, 4, k, k}, 62);
    // offsets bounded away from the bilinear lattice so the check stays in a
    // differentiable neighborhood
    Rng rng(63);
    Tensor4<double> off(1, 2 * k * k, H, W);
    for (auto& v : off.v) v = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.15, 0.35);
    Rng prng(64);
    Tensor4<double> proj = random_tensor<double>({1, 2, H, W}, prng);
    auto fn = [&](const std::vector<Var<double>>& in) {
        return weighted_sum(deform_conv2d(in[0], in[1], in[2]), proj);
    };
    auto rep = grad_check<double>(fn, {xt, off, wt}, 1e-4);
    INFO(rep.worst_location, " err=", rep.max_rel_error);
    CHECK(rep.pass);
}

TEST_CASE("deform_conv2d rejects wrong offset channel count") {
    auto x = var_of(randt({1, 2, 6, 6}, 1));
    auto w = var_of(randt({2, 2, 3, 3}, 2));
    auto off = var_of(Tensor4<double>(1, 10, 6, 6));
    CHECK_THROWS_AS(deform_conv2d(x, off, w), std::invalid_argument);
}

TEST_CASE("pixel_shuffle index mapping and shapes") {
    Tensor4<double> xt(1, 4, 1, 1);
    xt.v = {1, 2, 3, 4};  // a,b,c,d
    auto y = pixel_shuffle(var_of(xt), 2);
    REQUIRE(y->val.shape == Shape4{1, 1, 2, 2});
    CHECK(y->val.at(0, 0, 0, 0) == 1);
    CHECK(y->val.at(0, 0, 0, 1) == 2);
    CHECK(y->val.at(0, 0, 1, 0) == 3);
    CHECK(y->val.at(0, 0, 1, 1) == 4);

    auto y2 = pixel_shuffle(var_of(randt({1, 8, 3, 3}, 71)), 2);
    CHECK(y2->val.shape == Shape4{1, 2, 6, 6});

    CHECK_THROWS_AS(pixel_shuffle(var_of(randt({1, 6, 2, 2}, 72)), 2), std::invalid_argument);
}

TEST_CASE("pixel_shuffle round trip is exact") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        int r = rng.uniform_int(1, 3);
        int c = rng.uniform_int(1, 3) * r * r;
        Tensor4<double> xt = randt({rng.uniform_int(1, 2), c, rng.uniform_int(1, 4), rng.uniform_int(1, 4)},
                                   seed + 80);
        auto y = pixel_unshuffle(pixel_shuffle(var_of(xt), r), r);
        REQUIRE(y->val.shape == xt.shape);
        CHECK(y->val.v == xt.v);  // bitwise
    }
}

TEST_CASE("pixel_shuffle gradient is an exact permutation") {
    Tensor4<double> xt = randt({1, 4, 3, 3}, 91);
    Rng prng(92);
    Tensor4<double> proj = random_tensor<double>({1, 1, 6, 6}, prng);
    auto fn = [&](const std::vector<Var<double>>& in) {
        return weighted_sum(pixel_shuffle(in[0], 2), proj);
    };
    auto rep = grad_check<double>(fn, {xt}, 1e-8);
    CHECK(rep.pass);
}

TEST_CASE("activations") {
    Tensor4<double> z(1, 1, 1, 1);
    CHECK(sigmoid(var_of(z))->val.v[0] == 0.5);
    Tensor4<double> neg(1, 1, 1, 1);
    neg.v[0] = -1.0;
    CHECK(leaky_relu(var_of(neg))->val.v[0] == doctest::Approx(-0.1));

    Tensor4<double> xt = randt({1, 2, 4, 4}, 95, -5, 5);
    auto s1 = sigmoid(var_of(xt));
    Tensor4<double> mt = xt;
    for (auto& v : mt.v) v = -v;
    auto s2 = sigmoid(var_of(mt));
    for (std::size_t i = 0; i < xt.v.size(); ++i)
        CHECK(s1->val.v[i] + s2->val.v[i] == doctest::Approx(1.0));
}

TEST_CASE("operators stay finite for inputs up to magnitude 10") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Tensor4<double> xt = randt({1, 4, 8, 8}, seed, -10, 10);
        Tensor4<double> wt = randt({4, 4, 3, 3}, seed + 5, -10, 10);
        Tensor4<double> off = randt({1, 18, 8, 8}, seed + 6, -10, 10);
        auto c = conv2d(var_of(xt), var_of(wt), Var<double>{}, 1, 1);
        CHECK(c->val.all_finite());
        auto d = deform_conv2d(var_of(xt), var_of(off), var_of(wt));
        CHECK(d->val.all_finite());
        CHECK(sigmoid(var_of(xt))->val.all_finite());
        CHECK(leaky_relu(var_of(xt))->val.all_finite());
        CHECK(pixel_shuffle(var_of(Tensor4<double>(randt({1, 4, 8, 8}, seed + 7, -10, 10))), 2)->val.all_finite());
        CHECK(upsample2(var_of(xt))->val.all_finite());
        CHECK(avg_pool2(var_of(xt))->val.all_finite());
    }
}

TEST_CASE("grad_check reports non-finite analytic gradients") {
    Tensor4<double> xt = randt({1, 1, 2, 2}, 99);
    auto fn = [](const std::vector<Var<double>>& in) {
        auto bad = make_var(Tensor4<double>(in[0]->val.shape), true);
        bad->parents = {in[0]};
        for (std::size_t i = 0; i < bad->val.v.size(); ++i) bad->val.v[i] = in[0]->val.v[i];
        bad->backward_fn = [p = in[0]](Node<double>& n) {
            p->ensure_grad();
            for (auto& g : p->grad.v) g = std::numeric_limits<double>::quiet_NaN();
            (void)n;
        };
        return mean_all(bad);
    };
    auto rep = grad_check<double>(fn, {xt}, 1e-4);
    CHECK(!rep.pass);
    CHECK(!rep.finite);
    CHECK(rep.worst_location.find("non-finite") != std::string::npos);
}

TEST_CASE("elementwise and reduction gradients") {
    Tensor4<double> a = randt({1, 2, 3, 3}, 101);
    Tensor4<double> b = randt({1, 2, 3, 3}, 102);
    Rng prng(103);
    Tensor4<double> proj = random_tensor<double>({1, 2, 3, 3}, prng);
    auto fn = [&](const std::vector<Var<double>>& in) {
        auto m = mul(sigmoid(in[0]), leaky_relu(in[1]));
        auto t = tile_hw(spatial_mean(m), 3, 3);
        return weighted_sum(add(m, t), proj);
    };
    auto rep = grad_check<double>(fn, {a, b}, 1e-4);
    INFO(rep.worst_location);
    CHECK(rep.pass);

    auto fn2 = [&](const std::vector<Var<double>>& in) {
        return weighted_sum(upsample2(avg_pool2(in[0])), proj);
    };
    Tensor4<double> c = randt({1, 2, 6, 6}, 104);
    Rng prng2(105);
    Tensor4<double> proj2 = random_tensor<double>({1, 2, 6, 6}, prng2);
    auto fn3 = [&](const std::vector<Var<double>>& in) {
        return weighted_sum(upsample2(avg_pool2(in[0])), proj2);
    };
    auto rep3 = grad_check<double>(fn3, {c}, 1e-4);
    CHECK(rep3.pass);
}
