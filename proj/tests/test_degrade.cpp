#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gavn/degrade.hpp"
#include "gavn/metrics.hpp"

using namespace gavn;

namespace {

Tensor4<float> random_frame(int h, int w, std::uint64_t seed) {
    Tensor4<float> f(1, 3, h, w);
    Rng rng(seed);
    for (auto& v : f.v) v = float(rng.uniform());
    return f;
}

}  // namespace

TEST_CASE("gaussian kernel normalization across the full-scale range") {
    for (int k = 15; k <= 25; k += 2) {
        std::vector<double> taps = gaussian_kernel(k);
        double sum = 0;
        for (double t : taps) sum += t;
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("gaussian blur keeps constants and rejects even kernels") {
    Tensor4<float> f = Tensor4<float>::full(1, 3, 24, 24, 0.37f);
    Tensor4<float> g = gaussian_blur(f, 15);
    for (std::size_t i = 0; i < g.v.size(); ++i) CHECK(std::abs(g.v[i] - 0.37f) < 1e-6f);
    CHECK_THROWS_AS(gaussian_blur(f, 4), std::invalid_argument);
}

TEST_CASE("gaussian blur impulse response reproduces the kernel") {
    int k = 7, n = 31;
    Tensor4<float> f(1, 1, n, n);
    f.at(0, 0, n / 2, n / 2) = 1.0f;
    Tensor4<float> g = gaussian_blur(f, k);
    std::vector<double> taps = gaussian_kernel(k);
    for (int dy = -k / 2; dy <= k / 2; ++dy)
        for (int dx = -k / 2; dx <= k / 2; ++dx) {
            double expect = taps[std::size_t(dy + k / 2)] * taps[std::size_t(dx + k / 2)];
            CHECK(g.at(0, 0, n / 2 + dy, n / 2 + dx) == doctest::Approx(expect).epsilon(1e-6));
        }
    // outside the kernel footprint: zero
    CHECK(g.at(0, 0, n / 2 + k / 2 + 1, n / 2) == 0.0f);
}

TEST_CASE("bicubic scale 1 is the identity") {
    Tensor4<float> f = random_frame(16, 20, 3);
    Tensor4<float> g = bicubic_resize(f, 1.0);
    REQUIRE(g.shape == f.shape);
    for (std::size_t i = 0; i < f.v.size(); ++i) CHECK(std::abs(g.v[i] - f.v[i]) < 1e-6f);
}

TEST_CASE("bicubic preserves constants at any scale") {
    Tensor4<float> f = Tensor4<float>::full(1, 3, 32, 32, 0.61f);
    for (double s : {2.0, 3.0, 0.5, 1.7}) {
        Tensor4<float> g = bicubic_resize(f, s);
        for (float v : g.v) CHECK(std::abs(v - 0.61f) < 1e-6f);
    }
}

TEST_CASE("bicubic down-up restores the original shape") {
    Tensor4<float> f = random_frame(64, 64, 5);
    Tensor4<float> small = bicubic_resize(f, 4.0);
    REQUIRE(small.shape == Shape4{1, 3, 16, 16});
    Tensor4<float> up = resize_bicubic(small, 64, 64);
    CHECK(up.shape == f.shape);
    CHECK_THROWS_AS(bicubic_resize(f, 16.0), std::invalid_argument);
}

TEST_CASE("compress proxy tiny step is near-identity") {
    Tensor4<float> f = random_frame(16, 16, 7);
    Tensor4<float> g = compress_proxy(f, 1e-7);
    for (std::size_t i = 0; i < f.v.size(); ++i) CHECK(std::abs(g.v[i] - f.v[i]) < 1e-6f);
}

TEST_CASE("compress proxy is idempotent within one step") {
    Tensor4<float> f = random_frame(24, 24, 9);
    double step = 0.08;
    Tensor4<float> once = compress_proxy(f, step);
    Tensor4<float> twice = compress_proxy(once, step);
    // coefficients already on the lattice; differences only via clamping
    for (std::size_t i = 0; i < f.v.size(); ++i)
        CHECK(std::abs(twice.v[i] - once.v[i]) <= float(step) + 1e-6f);
}

TEST_CASE("compress proxy keeps lattice-aligned constants") {
    // 8 * 0.5 = 4.0 is on the 0.05-step lattice
    Tensor4<float> f = Tensor4<float>::full(1, 3, 16, 16, 0.5f);
    Tensor4<float> g = compress_proxy(f, 0.05);
    for (float v : g.v) CHECK(std::abs(v - 0.5f) < 1e-6f);
}

TEST_CASE("degrade_clip contracts") {
    SceneParams params;
    params.h = 32;
    params.w = 32;
    Clip clip = gen_clip(params, 0.4, 11);

    DegradationSpec blur{"blur", 5.0, 0};
    Clip db = degrade_clip(clip, blur);
    CHECK(db.frames.shape == clip.frames.shape);
    CHECK(db.audio == clip.audio);
    CHECK(db.landmarks == clip.landmarks);
    REQUIRE(db.degradation.has_value());
    CHECK(db.degradation->kind == "blur");

    DegradationSpec lr{"low_resolution", 4.0, 0};
    Clip dl = degrade_clip(clip, lr);
    CHECK(dl.frames.shape == clip.frames.shape);

    // determinism
    Clip db2 = degrade_clip(clip, blur);
    CHECK(db2.frames.v == db.frames.v);

    // constant-frame clip is unchanged by blur
    Clip flat = clip;
    std::fill(flat.frames.v.begin(), flat.frames.v.end(), 0.5f);
    Clip fb = degrade_clip(flat, DegradationSpec{"blur", 15.0, 0});
    for (std::size_t i = 0; i < flat.frames.v.size(); ++i)
        CHECK(std::abs(fb.frames.v[i] - 0.5f) < 1e-6f);
}

TEST_CASE("degradation spec validation") {
    CHECK_THROWS_AS((DegradationSpec{"blur", 4.0, 0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((DegradationSpec{"compression", 0.0, 0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((DegradationSpec{"low_resolution", 9.0, 0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((DegradationSpec{"noise", 1.0, 0}).validate(), std::invalid_argument);
    CHECK_NOTHROW((DegradationSpec{"blur", 21.0, 0}).validate());
}

TEST_CASE("psnr decreases monotonically with distortion level") {
    SceneParams params;
    Clip clip = gen_clip(params, 0.4, 13);

    auto psnr_for = [&](const DegradationSpec& spec) {
        Clip d = degrade_clip(clip, spec);
        return psnr(d.frames, clip.frames);
    };

    std::vector<double> blur_psnr, comp_psnr, lr_psnr;
    for (double k : {5.0, 7.0, 9.0}) blur_psnr.push_back(psnr_for({"blur", k, 0}));
    for (double q : {0.1, 0.4, 1.0}) comp_psnr.push_back(psnr_for({"compression", q, 0}));
    for (double f : {2.0, 4.0, 8.0}) lr_psnr.push_back(psnr_for({"low_resolution", f, 0}));

    for (auto& series : {blur_psnr, comp_psnr, lr_psnr}) {
        for (double v : series) CHECK(std::isfinite(v));
        for (std::size_t i = 1; i < series.size(); ++i) CHECK(series[i] < series[i - 1]);
    }
}
