#pragma once

#include "gavn/grad_check.hpp"
#include "gavn/deform.hpp"

namespace gavn {

struct OpCheckResult {
    std::string op;
    double max_rel_error = 0;
    double tolerance = 1e-4;
    bool pass = false;
};

// Central finite-difference oracle over every differentiable operator, in
// double precision, `seeds` random instances each. Offsets and sampling
// coordinates are kept away from the bilinear lattice, where the sampler is
// not differentiable.
inline std::vector<OpCheckResult> run_diffops_gradcheck(int seeds = 5) {
    std::vector<OpCheckResult> results;

    auto record = [&](const std::string& op, double tol, auto&& run_one) {
        OpCheckResult r;
        r.op = op;
        r.tolerance = tol;
        r.pass = true;
        for (int s = 0; s < seeds; ++s) {
            GradCheckReport rep = run_one(std::uint64_t(s));
            r.max_rel_error = std::max(r.max_rel_error, rep.max_rel_error);
            r.pass = r.pass && rep.pass;
        }
        results.push_back(r);
    };

    auto proj_for = [](Shape4 s, std::uint64_t seed) {
        Rng rng(mix_seed(seed, 0x9a0f));
        return random_tensor<double>(s, rng);
    };

    record("conv2d", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 1));
        auto x = random_tensor<double>({1, 2, 5, 5}, rng);
        auto w = random_tensor<double>({3, 2, 3, 3}, rng);
        auto b = random_tensor<double>({1, 3, 1, 1}, rng);
        Tensor4<double> proj = proj_for({1, 3, 3, 3}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(conv2d(in[0], in[1], in[2], 2, 1), proj);
            },
            {x, w, b}, 1e-4);
    });

    record("conv1d", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 2));
        auto x = random_tensor<double>({1, 2, 1, 16}, rng);
        auto w = random_tensor<double>({3, 2, 1, 5}, rng);
        auto b = random_tensor<double>({1, 3, 1, 1}, rng);
        Tensor4<double> proj = proj_for({1, 3, 1, 8}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(conv1d(in[0], in[1], in[2], 2, 2), proj);
            },
            {x, w, b}, 1e-4);
    });

    record("bilinear_sample", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 3));
        auto feat = random_tensor<double>({1, 3, 6, 6}, rng);
        Tensor4<double> coords(1, 2, 4, 4);
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 16; ++i)
                coords.v[std::size_t(c) * 16 + std::size_t(i)] =
                    rng.uniform_int(0, 4) + rng.uniform(0.15, 0.85);
        Tensor4<double> proj = proj_for({1, 3, 4, 4}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(bilinear_sample(in[0], in[1]), proj);
            },
            {feat, coords}, 1e-4);
    });

    record("deform_conv2d", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 4));
        auto x = random_tensor<double>({1, 4, 6, 6}, rng);
        auto w = random_tensor<double>({2, 4, 3, 3}, rng);
        Tensor4<double> off(1, 18, 6, 6);
        for (auto& v : off.v) v = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.15, 0.35);
        Tensor4<double> proj = proj_for({1, 2, 6, 6}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(deform_conv2d(in[0], in[1], in[2]), proj);
            },
            {x, off, w}, 1e-4);
    });

    record("pixel_shuffle", 1e-8, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 5));
        auto x = random_tensor<double>({1, 8, 3, 3}, rng);
        Tensor4<double> proj = proj_for({1, 2, 6, 6}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(pixel_shuffle(in[0], 2), proj);
            },
            {x}, 1e-8);
    });

    record("pixel_unshuffle", 1e-8, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 6));
        auto x = random_tensor<double>({1, 2, 6, 6}, rng);
        Tensor4<double> proj = proj_for({1, 8, 3, 3}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(pixel_unshuffle(in[0], 2), proj);
            },
            {x}, 1e-8);
    });

    record("activation_sigmoid", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 7));
        auto x = random_tensor<double>({1, 3, 4, 4}, rng, -3, 3);
        Tensor4<double> proj = proj_for({1, 3, 4, 4}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) { return weighted_sum(sigmoid(in[0]), proj); },
            {x}, 1e-4);
    });

    record("activation_leaky", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 8));
        // inputs bounded away from the kink at zero
        Tensor4<double> x(1, 3, 4, 4);
        for (auto& v : x.v) v = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.2, 2.0);
        Tensor4<double> proj = proj_for({1, 3, 4, 4}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(leaky_relu(in[0]), proj);
            },
            {x}, 1e-4);
    });

    record("upsample2", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 9));
        auto x = random_tensor<double>({1, 2, 4, 4}, rng);
        Tensor4<double> proj = proj_for({1, 2, 8, 8}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) { return weighted_sum(upsample2(in[0]), proj); },
            {x}, 1e-4);
    });

    record("avg_pool2", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 10));
        auto x = random_tensor<double>({1, 2, 6, 6}, rng);
        Tensor4<double> proj = proj_for({1, 2, 3, 3}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) { return weighted_sum(avg_pool2(in[0]), proj); },
            {x}, 1e-4);
    });

    record("elementwise_mul_add", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 11));
        auto a = random_tensor<double>({1, 2, 3, 3}, rng);
        auto b = random_tensor<double>({1, 2, 3, 3}, rng);
        Tensor4<double> proj = proj_for({1, 2, 3, 3}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(add(mul(in[0], in[1]), sub(in[0], in[1])), proj);
            },
            {a, b}, 1e-4);
    });

    record("concat_select_tile", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 12));
        auto a = random_tensor<double>({2, 2, 3, 3}, rng);
        Tensor4<double> proj = proj_for({1, 4, 3, 3}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                auto f0 = select_frame(in[0], 0);
                auto f1 = select_frame(in[0], 1);
                auto cat = concat_ch<double>({f0, f1});
                auto pooled = tile_hw(spatial_mean(f1), 3, 3);
                return weighted_sum(add(cat, concat_ch<double>({pooled, f0})), proj);
            },
            {a}, 1e-4);
    });

    record("charbonnier_loss", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 13));
        auto pred = random_tensor<double>({1, 3, 4, 4}, rng);
        Tensor4<double> gt = random_tensor<double>({1, 3, 4, 4}, rng);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return charbonnier_loss(in[0], gt, 1e-3);
            },
            {pred}, 1e-4);
    });

    record("mse_loss", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 14));
        auto pred = random_tensor<double>({1, 2, 3, 3}, rng);
        Tensor4<double> gt = random_tensor<double>({1, 2, 3, 3}, rng);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) { return mse_loss(in[0], gt); }, {pred}, 1e-4);
    });

    record("smooth_abs_slice", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 16));
        Tensor4<double> x(1, 2, 1, 12);
        for (auto& v : x.v) v = rng.uniform(-2.0, 2.0);
        Tensor4<double> proj = proj_for({1, 2, 1, 6}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(smooth_abs(slice_cols(in[0], 3, 9)), proj);
            },
            {x}, 1e-4);
    });

    record("clamp_sym", 1e-4, [&](std::uint64_t seed) {
        Rng rng(mix_seed(seed, 15));
        // stay away from the clamp edges at +-2
        Tensor4<double> x(1, 2, 3, 3);
        for (auto& v : x.v) v = rng.uniform(-1.5, 1.5);
        Tensor4<double> proj = proj_for({1, 2, 3, 3}, seed);
        return grad_check<double>(
            [&](const std::vector<Var<double>>& in) {
                return weighted_sum(clamp_sym(in[0], 2.0), proj);
            },
            {x}, 1e-4);
    });

    return results;
}

}  // namespace gavn
