#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "gavn/grad_check.hpp"
#include "gavn/landmark.hpp"
#include "gavn/model.hpp"

using namespace gavn;

namespace {

ModelConfig cfg_of(int n, int c, int hw) {
    ModelConfig cfg;
    cfg.n = n;
    cfg.channels = c;
    cfg.frame_h = hw;
    cfg.frame_w = hw;
    cfg.init_seed = 7;
    return cfg;
}

template <class T>
Var<T> randv(Shape4 s, std::uint64_t seed, double lo = 0, double hi = 1) {
    Rng rng(seed);
    return make_var(random_tensor<T>(s, rng, lo, hi), false);
}

template <class T>
typename GavnModel<T>::WindowInput random_input(const ModelConfig& cfg, std::uint64_t seed) {
    typename GavnModel<T>::WindowInput in;
    in.frames = randv<T>({cfg.window_frames(), 3, cfg.frame_h, cfg.frame_w}, seed);
    for (int i = 0; i < cfg.output_frames(); ++i) {
        in.audio.push_back(randv<T>({1, 1, 1, cfg.audio_window_samples()}, seed + 10 + i, -1, 1));
        in.heatmaps.push_back(randv<T>({1, cfg.landmark_count, cfg.frame_h, cfg.frame_w}, seed + 50 + i));
    }
    return in;
}

}  // namespace

TEST_CASE("identity feature shapes and purity") {
    ModelConfig cfg = cfg_of(1, 32, 64);
    ParamStore<double> ps;
    auto mod = make_identity_module(ps, cfg);
    auto frame = randv<double>({1, 3, 64, 64}, 1);
    auto maps = randv<double>({1, 8, 64, 64}, 2);
    auto audio = randv<double>({1, 1, 1, cfg.audio_window_samples()}, 3, -1, 1);
    auto feats = mod(frame, maps, audio);
    CHECK(feats.i1->val.shape == Shape4{1, 32, 32, 32});
    CHECK(feats.i2->val.shape == Shape4{1, 32, 16, 16});
    auto again = mod(frame, maps, audio);
    CHECK(again.i2->val.v == feats.i2->val.v);

    auto tiny = randv<double>({1, 3, 30, 30}, 4);
    CHECK_THROWS_AS(mod(tiny, maps, audio), std::invalid_argument);
    auto wrong_maps = randv<double>({1, 8, 32, 32}, 5);
    CHECK_THROWS_AS(mod(frame, wrong_maps, audio), std::invalid_argument);
    auto wrong_audio = randv<double>({1, 1, 1, 100}, 6);
    CHECK_THROWS_AS(mod(frame, maps, wrong_audio), std::invalid_argument);
}

TEST_CASE("zero heatmaps and silent audio produce zero features at fresh biases") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    ParamStore<double> ps;
    auto mod = make_identity_module(ps, cfg);
    auto zero_maps = make_var(Tensor4<double>(1, 8, 32, 32), false);
    auto [fl1, fl2] = mod.landmark_ex(zero_maps);
    for (double v : fl1->val.v) CHECK(v == 0.0);
    for (double v : fl2->val.v) CHECK(v == 0.0);

    auto silent = make_var(Tensor4<double>(1, 1, 1, cfg.audio_window_samples()), false);
    auto [fa1, fa2] = mod.audio_ex(silent);
    for (double v : fa1->val.v) CHECK(v == 0.0);
    for (double v : fa2->val.v) CHECK(v == 0.0);
}

TEST_CASE("audio-ablated forward stays well-defined and finite") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    auto model = build_model<float>(cfg);
    Rng rng(91);
    for (auto& v : model.recon.to_rgb.w->val.v) v = float(rng.normal() * 0.05);
    auto in = random_input<float>(cfg, 92);
    for (auto& a : in.audio) a = make_var(Tensor4<float>(1, 1, 1, cfg.audio_window_samples()), false);
    auto outs = model.forward(in);
    for (const auto& o : outs) CHECK(o->val.all_finite());
}

TEST_CASE("windows differing in envelope amplitude give different embedding norms") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    ParamStore<double> ps;
    auto mod = make_identity_module(ps, cfg);
    // same waveform at two amplitudes
    Tensor4<double> quiet(1, 1, 1, cfg.audio_window_samples());
    Rng rng(93);
    double f = rng.uniform(100, 200);
    for (int i = 0; i < cfg.audio_window_samples(); ++i)
        quiet.v[std::size_t(i)] = 0.2 * std::sin(2 * 3.14159265358979 * f * i / 16000.0);
    Tensor4<double> loud = quiet;
    for (auto& v : loud.v) v *= 4.0;
    auto [q1, q2] = mod.audio_ex(make_var(quiet, false));
    auto [l1, l2] = mod.audio_ex(make_var(loud, false));
    auto norm = [](const Var<double>& v) {
        double acc = 0;
        for (double x : v->val.v) acc += x * x;
        return std::sqrt(acc);
    };
    CHECK(norm(l1) != doctest::Approx(norm(q1)).epsilon(0.01));
    CHECK(norm(l2) != doctest::Approx(norm(q2)).epsilon(0.01));
}

TEST_CASE("audio embedding tiles one vector across space") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    ParamStore<double> ps;
    auto mod = make_identity_module(ps, cfg);
    auto audio = randv<double>({1, 1, 1, cfg.audio_window_samples()}, 7, -1, 1);
    auto [v1, v2] = mod.audio_ex(audio);
    auto tiled = tile_hw(v1, 16, 16);
    for (int c = 0; c < 8; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                CHECK(tiled->val.at(0, c, y, x) == v1->val.at(0, c, 0, 0));
}

TEST_CASE("identity fusion algebra at zero-initialized attention") {
    ModelConfig cfg = cfg_of(1, 4, 32);
    ParamStore<double> ps;
    auto mod = make_identity_module(ps, cfg);
    std::fill(mod.fuse1.att_l.w->val.v.begin(), mod.fuse1.att_l.w->val.v.end(), 0.0);
    std::fill(mod.fuse1.att_a.w->val.v.begin(), mod.fuse1.att_a.w->val.v.end(), 0.0);
    std::fill(mod.fuse1.fuse.w->val.v.begin(), mod.fuse1.fuse.w->val.v.end(), 0.0);
    // identity tap reading the F_l~ slot (channels 0..C)
    for (int c = 0; c < 4; ++c) mod.fuse1.fuse.w->val.at(c, c, 1, 1) = 1.0;

    auto ff = randv<double>({1, 4, 8, 8}, 9);
    auto fl = randv<double>({1, 4, 8, 8}, 10);
    auto fa = randv<double>({1, 4, 8, 8}, 11);
    auto fused = mod.fuse1(ff, fl, fa);
    for (std::size_t i = 0; i < fused->val.v.size(); ++i)
        CHECK(fused->val.v[i] == doctest::Approx(0.5 * fl->val.v[i]).epsilon(1e-12));

    // zero landmark and audio features: I^k depends on the frame alone
    ParamStore<double> ps2;
    auto mod2 = make_identity_module(ps2, cfg_of(1, 4, 32));
    auto zero = make_var(Tensor4<double>(1, 4, 8, 8), false);
    auto out = mod2.fuse1(ff, zero, zero);
    // direct route: Conv([0, F_f, 0])
    auto direct = mod2.fuse1.fuse(concat_ch<double>({zero, ff, zero}));
    CHECK(out->val.v == direct->val.v);
}

TEST_CASE("identity fusion gradients vs finite differences") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    ParamStore<double> ps;
    auto mod = make_identity_module(ps, cfg);
    Rng rng(13);
    Tensor4<double> ff = random_tensor<double>({1, 8, 8, 8}, rng);
    Tensor4<double> fl = random_tensor<double>({1, 8, 8, 8}, rng);
    Tensor4<double> fa = random_tensor<double>({1, 8, 8, 8}, rng);
    Rng prng(14);
    Tensor4<double> proj = random_tensor<double>({1, 8, 8, 8}, prng);
    auto fn = [&](const std::vector<Var<double>>& in) {
        return weighted_sum(mod.fuse2(in[0], in[1], in[2]), proj);
    };
    auto rep = grad_check<double>(fn, {ff, fl, fa}, 1e-4);
    INFO(rep.worst_location, " err=", rep.max_rel_error);
    CHECK(rep.pass);
}

TEST_CASE("upsample block doubles resolution and has correct gradients") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    auto model = build_model<double>(cfg);
    auto x = randv<double>({1, 8, 8, 8}, 15, -1, 1);
    auto y = model.recon.up2(x);
    CHECK(y->val.shape == Shape4{1, 8, 16, 16});

    Rng prng(16);
    Tensor4<double> proj = random_tensor<double>({1, 8, 16, 16}, prng);
    Rng rng(17);
    Tensor4<double> xin = random_tensor<double>({1, 8, 8, 8}, rng);
    auto fn = [&](const std::vector<Var<double>>& in) {
        return weighted_sum(model.recon.up2(in[0]), proj);
    };
    auto rep = grad_check<double>(fn, {xin}, 1e-4, 1e-6);
    INFO(rep.worst_location, " err=", rep.max_rel_error);
    CHECK(rep.pass);
}

TEST_CASE("zero temporal carrier keeps the identity path alive") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    auto model = build_model<double>(cfg);
    auto i2 = randv<double>({1, 8, 8, 8}, 18);
    auto zero_t = make_var(Tensor4<double>(1, 8, 8, 8), false);
    auto fused = model.recon.fuse_level2(zero_t, i2);
    // direct route: Up(Conv(I2))
    auto direct = model.recon.up2(model.recon.proj_i2(i2));
    REQUIRE(fused->val.shape == direct->val.shape);
    for (std::size_t i = 0; i < fused->val.v.size(); ++i)
        CHECK(fused->val.v[i] == doctest::Approx(direct->val.v[i]).epsilon(1e-12));
}

TEST_CASE("residual projection starts as the identity") {
    ModelConfig cfg = cfg_of(1, 8, 32);
    auto model = build_model<double>(cfg);
    auto input = random_input<double>(cfg, 21);
    auto outs = model.forward(input);
    REQUIRE(int(outs.size()) == 3);
    for (int i = 0; i < 3; ++i) {
        Shape4 s = outs[std::size_t(i)]->val.shape;
        CHECK(s == Shape4{1, 3, 32, 32});
        // bitwise equality with the corresponding input frame
        const double* frame = input.frames->val.plane(i + 2, 0);
        for (std::size_t e = 0; e < outs[std::size_t(i)]->val.v.size(); ++e)
            CHECK(outs[std::size_t(i)]->val.v[e] == frame[e]);
    }
    // temporal-only head has the same property
    auto heads = model.forward_temporal_only(input.frames);
    for (int i = 0; i < 3; ++i) {
        const double* frame = input.frames->val.plane(i + 2, 0);
        for (std::size_t e = 0; e < heads[std::size_t(i)]->val.v.size(); ++e)
            CHECK(heads[std::size_t(i)]->val.v[e] == frame[e]);
    }
}

TEST_CASE("window and size contracts across N and frame sizes") {
    for (int n : {1, 2}) {
        for (int hw : {32, 64}) {
            ModelConfig cfg = cfg_of(n, 8, hw);
            auto model = build_model<float>(cfg);
            auto input = random_input<float>(cfg, std::uint64_t(30 + n * 10 + hw));
            auto outs = model.forward(input);
            REQUIRE(int(outs.size()) == 2 * n + 1);
            for (const auto& o : outs) CHECK(o->val.shape == Shape4{1, 3, hw, hw});
        }
    }
    ModelConfig cfg = cfg_of(1, 8, 32);
    auto model = build_model<float>(cfg);
    auto bad = random_input<float>(cfg, 41);
    bad.frames = randv<float>({6, 3, 32, 32}, 42);
    CHECK_THROWS_WITH_AS(model.forward(bad), doctest::Contains("expected 7 frames"),
                         std::invalid_argument);
}

TEST_CASE("parameter counts and output shapes match the golden config table") {
    std::ifstream f(std::string(GAVN_TEST_DATA_DIR) + "/golden_configs.json");
    REQUIRE(bool(f));
    nlohmann::json golden = nlohmann::json::parse(f);
    for (const auto& entry : golden) {
        ModelConfig cfg = cfg_of(entry.at("n").get<int>(), entry.at("c").get<int>(),
                                 entry.at("hw").get<int>());
        auto model = build_model<float>(cfg);
        INFO("config n=", cfg.n, " c=", cfg.channels, " hw=", cfg.frame_h);
        CHECK(model.params.total_elems() == entry.at("param_count").get<std::int64_t>());
        auto input = random_input<float>(cfg, 77);
        auto outs = model.forward(input);
        CHECK(int(outs.size()) == entry.at("output_frames").get<int>());
        CHECK(outs[0]->val.shape.h == entry.at("out_hw").get<int>());
        CHECK(outs[0]->val.shape.w == entry.at("out_hw").get<int>());
    }
    // parameter shapes depend only on (n, c), never on the frame size
    auto count = [](const ModelConfig& cfg) {
        return build_model<float>(cfg).params.total_elems();
    };
    CHECK(count(cfg_of(1, 16, 64)) == count(cfg_of(1, 16, 32)));
    CHECK(count(cfg_of(2, 16, 64)) == count(cfg_of(1, 16, 64)));
}

TEST_CASE("full forward-backward produces finite loss and gradients") {
    ModelConfig cfg = cfg_of(1, 16, 32);
    auto model = build_model<float>(cfg);
    // break the zero-init identity so gradients flow everywhere
    Rng rng(55);
    for (auto& v : model.recon.to_rgb.w->val.v) v = float(rng.normal() * 0.05);
    auto input = random_input<float>(cfg, 56);
    auto outs = model.forward(input);
    Tensor4<float> gt(3, 3, 32, 32);
    Rng grng(57);
    for (auto& v : gt.v) v = float(grng.uniform());
    auto loss = charbonnier_loss(concat_batch(outs), gt, 1e-3);
    CHECK(std::isfinite(double(loss->val.v[0])));
    model.params.zero_grad();
    backward(loss);
    bool any_temporal = false, any_identity = false, any_recon = false;
    for (const auto& [name, p] : model.params.params) {
        if (p->grad.empty()) continue;
        double gsum = 0;
        for (float g : p->grad.v) {
            CHECK(std::isfinite(double(g)));
            gsum += std::abs(double(g));
        }
        if (gsum > 0) {
            if (name.rfind("temporal.", 0) == 0) any_temporal = true;
            if (name.rfind("identity.", 0) == 0) any_identity = true;
            if (name.rfind("recon.", 0) == 0) any_recon = true;
        }
    }
    CHECK(any_temporal);
    CHECK(any_identity);
    CHECK(any_recon);
}

TEST_CASE("directional derivative of the Charbonnier loss matches finite differences") {
    // full-model Jacobian-vector check on a small instance
    ModelConfig cfg = cfg_of(1, 8, 16);
    auto model = build_model<double>(cfg);
    Rng rng(61);
    for (auto& v : model.recon.to_rgb.w->val.v) v = rng.normal() * 0.05;
    // move sampling positions off the bilinear lattice: at exactly zero
    // offsets the deformable taps sit on integer coordinates where the
    // sampler's derivative has a kink
    for (int l = 0; l < 3; ++l)
        for (auto& v : model.temporal.align.off_b[l].b->val.v) v = 0.0123;

    auto input = random_input<double>(cfg, 62);
    Tensor4<double> gt(3, 3, 16, 16);
    Rng grng(63);
    for (auto& v : gt.v) v = grng.uniform();

    auto eval = [&]() {
        auto outs = model.forward(input);
        return charbonnier_loss(concat_batch(outs), gt, 1e-3);
    };

    model.params.zero_grad();
    auto loss = eval();
    backward(loss);

    // fixed random direction over all parameters
    std::map<std::string, Tensor4<double>> dir;
    Rng drng(64);
    double dot = 0;
    for (const auto& [name, p] : model.params.params) {
        Tensor4<double> d(p->val.shape);
        for (auto& v : d.v) v = drng.normal();
        p->ensure_grad();
        for (std::size_t i = 0; i < d.v.size(); ++i) dot += d.v[i] * double(p->grad.v[i]);
        dir[name] = std::move(d);
    }

    double h = 1e-6;
    auto shift = [&](double sign) {
        for (auto& [name, p] : model.params.params)
            for (std::size_t i = 0; i < p->val.v.size(); ++i)
                p->val.v[i] += sign * h * dir[name].v[i];
    };
    shift(+1);
    double fp = double(eval()->val.v[0]);
    shift(-2);
    double fm = double(eval()->val.v[0]);
    shift(+1);
    double numeric = (fp - fm) / (2 * h);
    double rel = std::abs(dot - numeric) / std::max({1e-8, std::abs(dot), std::abs(numeric)});
    INFO("analytic=", dot, " numeric=", numeric, " rel=", rel);
    CHECK(rel <= 1e-3);
}
