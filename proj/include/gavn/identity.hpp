#pragma once

#include "gavn/layers.hpp"
#include "gavn/model_config.hpp"

namespace gavn {

// Two strided stages: level 1 at 1/2 resolution, level 2 at 1/4. No
// predeblur here; identity features live in high-resolution space.
template <class T>
struct TwoLevelExtractor {
    Conv2dLayer<T> down1, conv1, down2, conv2;

    std::pair<Var<T>, Var<T>> operator()(const Var<T>& x) const {
        auto f1 = leaky_relu(conv1(leaky_relu(down1(x))));
        auto f2 = leaky_relu(conv2(leaky_relu(down2(f1))));
        return {f1, f2};
    }
};

// Raw waveform window -> strided 1-D convolutions -> rectified time pool ->
// C-vector, projected once per level and tiled to the level's spatial size.
// Pooling |features| demodulates the envelope (a plain mean over the window
// cancels the oscillating carrier); the pool covers the center frame's span
// so the embedding tracks the conditioned frame, with neighbor context
// entering through the conv receptive fields.
template <class T>
struct AudioEncoder {
    Conv1dLayer<T> c1, c2, c3;
    Conv2dLayer<T> head1, head2;  // 1x1 projections
    int expected_samples = 0;
    int window_frames = 1;  // 2m + 1

    std::pair<Var<T>, Var<T>> operator()(const Var<T>& window) const {
        Shape4 s = window->val.shape;
        check(s.c == 1 && s.h == 1, "audio encoder: expects (B,1,1,L) windows, got " + s.str());
        check(s.w == expected_samples, "audio encoder: window length " + std::to_string(s.w) +
                                           " != expected " + std::to_string(expected_samples));
        auto h = leaky_relu(c3(leaky_relu(c2(leaky_relu(c1(window))))));
        int positions = h->val.shape.w;
        int lo = positions * (window_frames / 2) / window_frames;
        int hi = positions * (window_frames / 2 + 1) / window_frames;
        auto pooled = spatial_mean(smooth_abs(slice_cols(h, lo, hi)));
        return {head1(pooled), head2(pooled)};
    }
};

// F_l~ = F_l (.) sigma(Conv([F_l, F_f]));  F_a~ = F_a (.) sigma(Conv([F_a, F_f]));
// I = Conv([F_l~, F_f, F_a~]).
template <class T>
struct IdentityFusion {
    Conv2dLayer<T> att_l, att_a, fuse;

    Var<T> operator()(const Var<T>& ff, const Var<T>& fl, const Var<T>& fa) const {
        check(ff->val.shape == fl->val.shape && ff->val.shape == fa->val.shape,
              "fuse_identity: level shapes must match, got " + ff->val.shape.str() + " / " +
                  fl->val.shape.str() + " / " + fa->val.shape.str());
        auto fl_hat = mul(fl, sigmoid(att_l(concat_ch<T>({fl, ff}))));
        auto fa_hat = mul(fa, sigmoid(att_a(concat_ch<T>({fa, ff}))));
        return fuse(concat_ch<T>({fl_hat, ff, fa_hat}));
    }
};

template <class T>
struct IdentityFeatures {
    Var<T> i1;  // 1/2 resolution
    Var<T> i2;  // 1/4 resolution, same size as the temporal feature
};

template <class T>
struct IdentityModule {
    TwoLevelExtractor<T> frame_ex, landmark_ex;
    AudioEncoder<T> audio_ex;
    IdentityFusion<T> fuse1, fuse2;

    IdentityFeatures<T> operator()(const Var<T>& frame, const Var<T>& heatmaps,
                                   const Var<T>& audio) const {
        Shape4 fsh = frame->val.shape;
        check(fsh.h % 4 == 0 && fsh.w % 4 == 0,
              "identity: frame size must be divisible by 4, got " + fsh.str());
        check(heatmaps->val.shape.h == fsh.h && heatmaps->val.shape.w == fsh.w,
              "identity: heatmap spatial size must match the frame, got " +
                  heatmaps->val.shape.str());
        auto [ff1, ff2] = frame_ex(frame);
        auto [fl1, fl2] = landmark_ex(heatmaps);
        auto [va1, va2] = audio_ex(audio);
        auto fa1 = tile_hw(va1, ff1->val.shape.h, ff1->val.shape.w);
        auto fa2 = tile_hw(va2, ff2->val.shape.h, ff2->val.shape.w);
        return {fuse1(ff1, fl1, fa1), fuse2(ff2, fl2, fa2)};
    }
};

template <class T>
IdentityModule<T> make_identity_module(ParamStore<T>& ps, const ModelConfig& cfg,
                                       const std::string& prefix = "identity") {
    int c = cfg.channels;
    std::uint64_t seed = cfg.init_seed;
    IdentityModule<T> m;
    m.frame_ex.down1 = conv2d_layer(ps, prefix + ".frame.down1", 3, c, 3, 2, seed);
    m.frame_ex.conv1 = conv2d_layer(ps, prefix + ".frame.conv1", c, c, 3, 1, seed);
    m.frame_ex.down2 = conv2d_layer(ps, prefix + ".frame.down2", c, c, 3, 2, seed);
    m.frame_ex.conv2 = conv2d_layer(ps, prefix + ".frame.conv2", c, c, 3, 1, seed);
    m.landmark_ex.down1 = conv2d_layer(ps, prefix + ".landmark.down1", cfg.landmark_count, c, 3, 2, seed);
    m.landmark_ex.conv1 = conv2d_layer(ps, prefix + ".landmark.conv1", c, c, 3, 1, seed);
    m.landmark_ex.down2 = conv2d_layer(ps, prefix + ".landmark.down2", c, c, 3, 2, seed);
    m.landmark_ex.conv2 = conv2d_layer(ps, prefix + ".landmark.conv2", c, c, 3, 1, seed);
    m.audio_ex.c1 = conv1d_layer(ps, prefix + ".audio.c1", 1, c, 9, 4, seed);
    m.audio_ex.c2 = conv1d_layer(ps, prefix + ".audio.c2", c, c, 9, 4, seed);
    m.audio_ex.c3 = conv1d_layer(ps, prefix + ".audio.c3", c, c, 9, 4, seed);
    m.audio_ex.head1 = conv2d_layer(ps, prefix + ".audio.head1", c, c, 1, 1, seed);
    m.audio_ex.head2 = conv2d_layer(ps, prefix + ".audio.head2", c, c, 1, 1, seed);
    m.audio_ex.expected_samples = cfg.audio_window_samples();
    m.audio_ex.window_frames = 2 * cfg.audio_half_frames + 1;
    m.fuse1.att_l = conv2d_layer(ps, prefix + ".fuse1.att_l", 2 * c, c, 3, 1, seed);
    m.fuse1.att_a = conv2d_layer(ps, prefix + ".fuse1.att_a", 2 * c, c, 3, 1, seed);
    m.fuse1.fuse = conv2d_layer(ps, prefix + ".fuse1.fuse", 3 * c, c, 3, 1, seed);
    m.fuse2.att_l = conv2d_layer(ps, prefix + ".fuse2.att_l", 2 * c, c, 3, 1, seed);
    m.fuse2.att_a = conv2d_layer(ps, prefix + ".fuse2.att_a", 2 * c, c, 3, 1, seed);
    m.fuse2.fuse = conv2d_layer(ps, prefix + ".fuse2.fuse", 3 * c, c, 3, 1, seed);
    return m;
}

}  // namespace gavn
