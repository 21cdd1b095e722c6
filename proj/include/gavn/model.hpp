#pragma once

#include "gavn/identity.hpp"
#include "gavn/temporal.hpp"

namespace gavn {

// Upsample residual block: conv C->4C, pixel shuffle x2, activation, conv.
template <class T>
struct UpsampleBlock {
    Conv2dLayer<T> expand, refine;

    Var<T> operator()(const Var<T>& x) const {
        return refine(leaky_relu(pixel_shuffle(expand(x), 2)));
    }
};

// Fuses temporal and identity features into a residual over the input frame.
// Level 2: I2^ = Up(T (.) Conv(I2) + Conv(I2)); level 1 repeats the pattern
// with I2^ as the carrier; a zero-initialized projection maps to RGB.
template <class T>
struct ReconModule {
    Conv2dLayer<T> proj_i2, proj_i1;
    UpsampleBlock<T> up2, up1;
    Conv2dLayer<T> to_rgb;  // zero-init: the whole model starts as identity

    Var<T> fuse_level2(const Var<T>& t_feat, const Var<T>& i2) const {
        check(t_feat->val.shape == i2->val.shape,
              "reconstruct: T/I2 spatial mismatch " + t_feat->val.shape.str() + " vs " +
                  i2->val.shape.str());
        auto c2 = proj_i2(i2);
        return up2(add(mul(t_feat, c2), c2));
    }

    Var<T> fuse_level1(const Var<T>& carrier, const Var<T>& i1) const {
        check(carrier->val.shape == i1->val.shape,
              "reconstruct: I2^/I1 spatial mismatch " + carrier->val.shape.str() + " vs " +
                  i1->val.shape.str());
        auto c1 = proj_i1(i1);
        return up1(add(mul(carrier, c1), c1));
    }

    Var<T> operator()(const Var<T>& t_feat, const IdentityFeatures<T>& ident,
                      const Var<T>& frame) const {
        auto i2_hat = fuse_level2(t_feat, ident.i2);
        auto i1_hat = fuse_level1(i2_hat, ident.i1);
        check(i1_hat->val.shape.h == frame->val.shape.h &&
                  i1_hat->val.shape.w == frame->val.shape.w,
              "reconstruct: output/frame size mismatch");
        return add(frame, to_rgb(i1_hat));
    }
};

// Stage-1 output head: temporal features alone predict the restored frames.
// Discarded (frozen, unused) once stage 2 begins.
template <class T>
struct TemporalHead {
    UpsampleBlock<T> up2, up1;
    Conv2dLayer<T> to_rgb;  // zero-init

    Var<T> operator()(const Var<T>& t_feat, const Var<T>& frame) const {
        auto full = up1(up2(t_feat));
        return add(frame, to_rgb(full));
    }
};

template <class T>
struct GavnModel {
    ModelConfig cfg;
    ParamStore<T> params;
    TemporalModule<T> temporal;
    IdentityModule<T> identity;
    ReconModule<T> recon;
    TemporalHead<T> stage1_head;

    // Per-output-frame conditioning inputs.
    struct WindowInput {
        Var<T> frames;                  // (2n+5, 3, H, W)
        std::vector<Var<T>> audio;      // 2n+1 windows (1,1,1,L)
        std::vector<Var<T>> heatmaps;   // 2n+1 stacks (1,K,H,W)
    };

    void check_window(const Var<T>& frames) const {
        Shape4 s = frames->val.shape;
        check(s.b == cfg.window_frames(),
              "gavn_forward: expected " + std::to_string(cfg.window_frames()) + " frames, got " +
                  std::to_string(s.b));
        check(s.c == 3, "gavn_forward: frames must have 3 channels");
        check(s.h % 4 == 0 && s.w % 4 == 0, "gavn_forward: frame size must be divisible by 4");
    }

    // Full path: temporal + identity + reconstruction. Outputs are residual
    // sums, not clamped here; clamping happens at image export.
    std::vector<Var<T>> forward(const WindowInput& in, AlignTrace* trace = nullptr) const {
        check_window(in.frames);
        check(int(in.audio.size()) == cfg.output_frames() &&
                  int(in.heatmaps.size()) == cfg.output_frames(),
              "gavn_forward: need one audio window and heatmap stack per output frame");
        std::vector<Var<T>> t_feats = temporal(in.frames, trace);
        std::vector<Var<T>> out;
        for (int i = 0; i < cfg.output_frames(); ++i) {
            auto frame = select_frame(in.frames, i + 2);  // window index of output j
            IdentityFeatures<T> ident =
                identity(frame, in.heatmaps[std::size_t(i)], in.audio[std::size_t(i)]);
            check(ident.i2->val.shape == t_feats[std::size_t(i)]->val.shape,
                  "gavn_forward: I2 size must equal T size, got " + ident.i2->val.shape.str() +
                      " vs " + t_feats[std::size_t(i)]->val.shape.str());
            out.push_back(recon(t_feats[std::size_t(i)], ident, frame));
        }
        return out;
    }

    // Stage-1 path: temporal features through the temporary head.
    std::vector<Var<T>> forward_temporal_only(const Var<T>& frames) const {
        check_window(frames);
        std::vector<Var<T>> t_feats = temporal(frames, nullptr);
        std::vector<Var<T>> out;
        for (int i = 0; i < cfg.output_frames(); ++i)
            out.push_back(stage1_head(t_feats[std::size_t(i)], select_frame(frames, i + 2)));
        return out;
    }
};

template <class T>
GavnModel<T> build_model(const ModelConfig& cfg) {
    cfg.validate();
    GavnModel<T> m;
    m.cfg = cfg;
    int c = cfg.channels;
    std::uint64_t seed = cfg.init_seed;
    m.temporal = make_temporal_module(m.params, cfg);
    m.identity = make_identity_module(m.params, cfg);
    m.recon.proj_i2 = conv2d_layer(m.params, "recon.proj_i2", c, c, 3, 1, seed);
    m.recon.proj_i1 = conv2d_layer(m.params, "recon.proj_i1", c, c, 3, 1, seed);
    m.recon.up2.expand = conv2d_layer(m.params, "recon.up2.expand", c, 4 * c, 3, 1, seed);
    m.recon.up2.refine = conv2d_layer(m.params, "recon.up2.refine", c, c, 3, 1, seed);
    m.recon.up1.expand = conv2d_layer(m.params, "recon.up1.expand", c, 4 * c, 3, 1, seed);
    m.recon.up1.refine = conv2d_layer(m.params, "recon.up1.refine", c, c, 3, 1, seed);
    m.recon.to_rgb = conv2d_layer(m.params, "recon.to_rgb", c, 3, 3, 1, seed, /*zero_init=*/true);
    m.stage1_head.up2.expand = conv2d_layer(m.params, "stage1_head.up2.expand", c, 4 * c, 3, 1, seed);
    m.stage1_head.up2.refine = conv2d_layer(m.params, "stage1_head.up2.refine", c, c, 3, 1, seed);
    m.stage1_head.up1.expand = conv2d_layer(m.params, "stage1_head.up1.expand", c, 4 * c, 3, 1, seed);
    m.stage1_head.up1.refine = conv2d_layer(m.params, "stage1_head.up1.refine", c, c, 3, 1, seed);
    m.stage1_head.to_rgb =
        conv2d_layer(m.params, "stage1_head.to_rgb", c, 3, 3, 1, seed, /*zero_init=*/true);
    return m;
}

// Parameter names owned by each training phase. Stage 1 trains the temporal
// module plus its temporary head; the stage-2 warmup trains identity +
// reconstruction; the stage-2 finetune trains the entire model minus the
// discarded head.
template <class T>
std::vector<std::string> param_group(const GavnModel<T>& m, const std::string& group) {
    std::vector<std::string> names;
    for (const auto& [name, p] : m.params.params) {
        (void)p;
        bool is_temporal = name.rfind("temporal.", 0) == 0;
        bool is_head = name.rfind("stage1_head.", 0) == 0;
        bool is_identity = name.rfind("identity.", 0) == 0;
        bool is_recon = name.rfind("recon.", 0) == 0;
        if (group == "stage1" && (is_temporal || is_head)) names.push_back(name);
        if (group == "stage2_warmup" && (is_identity || is_recon)) names.push_back(name);
        if (group == "stage2_finetune" && (is_temporal || is_identity || is_recon))
            names.push_back(name);
        if (group == "all") names.push_back(name);
    }
    return names;
}

}  // namespace gavn
