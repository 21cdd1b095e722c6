#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gavn/degrade.hpp"
#include "gavn/grad_check.hpp"
#include "gavn/identity.hpp"
#include "gavn/landmark.hpp"

using namespace gavn;

TEST_CASE("heatmap peaks: lattice landmark, sigma falloff, determinism") {
    LandmarkSet lms;
    lms.count = 8;
    lms.points = {3, 4, 10, 4, 5, 12, 11, 12, 8, 11, 8, 13, 8, 8, 8, 15};
    lms.confidence.assign(8, 1.0);
    double sigma = 2.0;
    auto maps = render_heatmaps<double>(lms, 16, 16, sigma);
    REQUIRE(maps.shape == Shape4{1, 8, 16, 16});
    CHECK(maps.at(0, 0, 4, 3) == 1.0);
    // value at distance sigma from the peak
    CHECK(maps.at(0, 0, 4 + 2, 3) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    for (double v : maps.v) CHECK(v >= 0.0);

    auto again = render_heatmaps<double>(lms, 16, 16, sigma);
    CHECK(again.v == maps.v);

    // off-lattice landmark still peaks at 1 at the nearest lattice point
    LandmarkSet off;
    off.count = 8;
    off.points = lms.points;
    off.points[0] = 3.4;
    off.points[1] = 4.3;
    off.confidence.assign(8, 1.0);
    auto maps2 = render_heatmaps<double>(off, 16, 16, sigma);
    CHECK(maps2.at(0, 0, 4, 3) == 1.0);
    double mx = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) mx = std::max(mx, maps2.at(0, 0, y, x));
    CHECK(mx == 1.0);
}

TEST_CASE("heatmaps of oracle landmarks peak on the analytic geometry") {
    SceneParams params;
    Clip clip = gen_clip(params, 0.4, 33);
    int t = 5;
    LandmarkSet lms = oracle_landmarks(clip, t);
    auto maps = render_heatmaps<float>(lms, params.h, params.w, 2.0);
    for (int k = 0; k < lms.count; ++k) {
        int px = int(std::lround(lms.x(k)));
        int py = int(std::lround(lms.y(k)));
        float peak = 0;
        int ax = -1, ay = -1;
        for (int y = 0; y < params.h; ++y)
            for (int x = 0; x < params.w; ++x)
                if (maps.at(0, k, y, x) > peak) {
                    peak = maps.at(0, k, y, x);
                    ax = x;
                    ay = y;
                }
        CHECK(peak == 1.0f);
        CHECK(ax == px);
        CHECK(ay == py);
    }
}

TEST_CASE("landmark feature equivariance under translation") {
    // shifting landmarks by (4,0) px shifts level-1 features by (2,0),
    // away from borders
    ParamStore<double> ps;
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.frame_h = cfg.frame_w = 32;
    cfg.init_seed = 3;
    auto ident = make_identity_module(ps, cfg);

    LandmarkSet a;
    a.count = 8;
    a.points = {10, 12, 20, 12, 12, 22, 18, 22, 15, 20, 15, 24, 15, 16, 15, 27};
    a.confidence.assign(8, 1.0);
    LandmarkSet b = a;
    for (int k = 0; k < 8; ++k) b.points[std::size_t(k) * 2] += 4.0;

    auto fa = ident.landmark_ex(make_var(render_heatmaps<double>(a, 32, 32, 2.0), false));
    auto fb = ident.landmark_ex(make_var(render_heatmaps<double>(b, 32, 32, 2.0), false));
    const auto& la = fa.first->val;
    const auto& lb = fb.first->val;
    // compare interior: lb(y, x+2) == la(y, x)
    double max_err = 0, scale = 0;
    for (int c = 0; c < 8; ++c)
        for (int y = 4; y < 12; ++y)
            for (int x = 4; x < 10; ++x) {
                max_err = std::max(max_err, std::abs(lb.at(0, c, y, x + 2) - la.at(0, c, y, x)));
                scale = std::max(scale, std::abs(la.at(0, c, y, x)));
            }
    CHECK(max_err <= 0.05 * scale);
}

TEST_CASE("zero-initialized head predicts the frame center") {
    auto net = build_landmark_net<double>(32, 32, 8, 640, 5);
    auto frame = make_var(Tensor4<double>::full(1, 3, 32, 32, 0.4), false);
    auto audio = make_var(Tensor4<double>(1, 1, 1, 640), false);
    LandmarkSet pred = predict_landmarks(net, frame, audio);
    for (int k = 0; k < 8; ++k) {
        CHECK(pred.x(k) == doctest::Approx(0.5 * 31).epsilon(1e-12));
        CHECK(pred.y(k) == doctest::Approx(0.5 * 31).epsilon(1e-12));
    }
    // predictions always land inside the frame
    Rng rng(6);
    for (auto& v : net.head.w->val.v) v = rng.normal();
    for (auto& v : net.head.b->val.v) v = rng.normal();
    auto frame2 = make_var(random_tensor<double>({1, 3, 32, 32}, rng, 0, 1), false);
    LandmarkSet p2 = predict_landmarks(net, frame2, audio);
    for (int k = 0; k < 8; ++k) {
        CHECK(p2.x(k) >= 0.0);
        CHECK(p2.x(k) <= 31.0);
        CHECK(p2.y(k) >= 0.0);
        CHECK(p2.y(k) <= 31.0);
    }
}

TEST_CASE("regressor training beats the center predictor and is deterministic") {
    SceneParams params;
    params.h = 32;
    params.w = 32;
    std::vector<Clip> pristine, degraded;
    for (std::uint64_t s = 0; s < 3; ++s) {
        pristine.push_back(gen_clip(params, 0.8, 100 + s));
        degraded.push_back(degrade_clip(pristine.back(), DegradationSpec{"blur", 5.0, 0}));
    }

    auto run = [&](std::uint64_t seed) {
        auto net = build_landmark_net<float>(32, 32, 8, 3200, seed, 8);
        auto rep = train_landmark_net(net, degraded, pristine, 6, 2e-3, seed, 2, false, 48);
        return std::make_pair(std::move(net), rep);
    };
    auto [net, rep] = run(1);
    CHECK(rep.final_loss < rep.initial_loss);

    // center-predictor baseline error on the same data
    double base_err = 0;
    std::int64_t n = 0;
    for (std::size_t ci = 0; ci < pristine.size(); ++ci)
        for (int t = 0; t < pristine[ci].frame_count(); ++t)
            for (int k = 0; k < 8; ++k) {
                double dx = 15.5 - pristine[ci].landmark_x(t, k);
                double dy = 15.5 - pristine[ci].landmark_y(t, k);
                base_err += std::sqrt(dx * dx + dy * dy);
                ++n;
            }
    base_err /= double(n);
    INFO("trained=", rep.mean_pixel_error, " center-baseline=", base_err);
    CHECK(rep.mean_pixel_error < base_err);

    // determinism: identical seed and data give identical parameters
    auto [net2, rep2] = run(1);
    for (const auto& [name, p] : net.params.params)
        CHECK(p->val.v == net2.params.get(name)->val.v);
    CHECK(rep2.final_loss == rep.final_loss);
}

TEST_CASE("held-out error stays under a quarter of the face diagonal at max blur") {
    SceneParams params;
    params.h = 32;
    params.w = 32;
    std::vector<Clip> pristine, degraded;
    for (std::uint64_t s = 0; s < 3; ++s) {
        pristine.push_back(gen_clip(params, 0.8, 400 + s));
        degraded.push_back(degrade_clip(pristine.back(), DegradationSpec{"blur", 9.0, 0}));
    }
    auto net = build_landmark_net<float>(32, 32, 8, 3200, 4, 8);
    train_landmark_net(net, degraded, pristine, 8, 2e-3, 4, 2, false, 48);

    Clip held = gen_clip(params, 0.8, 490);
    Clip held_deg = degrade_clip(held, DegradationSpec{"blur", 9.0, 0});
    double err = 0;
    std::int64_t n = 0;
    for (int t = 0; t < held.frame_count(); ++t) {
        auto frame = frame_var<float>(held_deg, t);
        auto audio = landmark_audio_var<float>(held_deg, t, 2, false);
        LandmarkSet pred = predict_landmarks(net, frame, audio);
        for (int k = 0; k < 8; ++k) {
            double dx = pred.x(k) - held.landmark_x(t, k);
            double dy = pred.y(k) - held.landmark_y(t, k);
            err += std::sqrt(dx * dx + dy * dy);
            ++n;
        }
    }
    err /= double(n);
    // face bounding box: head ellipse extents at this scene scale
    double face_w = 2 * std::min(0.34 * 32, 32 / 2.0 - 3.0 - 2.0);
    double face_h = 2 * std::min(0.42 * 32, 32 / 2.0 - 3.0 - 2.0);
    double diag = std::sqrt(face_w * face_w + face_h * face_h);
    INFO("held-out error ", err, " px, face diagonal ", diag);
    CHECK(err < 0.25 * diag);
}

TEST_CASE("audio ablation hurts mouth landmarks on strongly blurred clips") {
    SceneParams params;
    params.h = 32;
    params.w = 32;
    std::vector<Clip> pristine, degraded;
    for (std::uint64_t s = 0; s < 3; ++s) {
        pristine.push_back(gen_clip(params, 0.8, 300 + s));
        degraded.push_back(degrade_clip(pristine.back(), DegradationSpec{"blur", 11.0, 0}));
    }

    auto mouth_error = [&](bool ablate) {
        auto net = build_landmark_net<float>(32, 32, 8, 3200, 9, 8);
        train_landmark_net(net, degraded, pristine, 8, 2e-3, 9, 2, ablate, 48);
        double err = 0;
        std::int64_t n = 0;
        for (std::size_t ci = 0; ci < degraded.size(); ++ci)
            for (int t = 0; t < degraded[ci].frame_count(); ++t) {
                auto frame = frame_var<float>(degraded[ci], t);
                auto audio = landmark_audio_var<float>(degraded[ci], t, 2, ablate);
                LandmarkSet pred = predict_landmarks(net, frame, audio);
                for (int k : {kMouthTop, kMouthBottom}) {
                    double dx = pred.x(k) - pristine[ci].landmark_x(t, k);
                    double dy = pred.y(k) - pristine[ci].landmark_y(t, k);
                    err += std::sqrt(dx * dx + dy * dy);
                    ++n;
                }
            }
        return err / double(n);
    };
    double with_audio = mouth_error(false);
    double without_audio = mouth_error(true);
    INFO("with=", with_audio, " without=", without_audio);
    CHECK(without_audio >= with_audio);
}
