#pragma once

#include <map>

#include "gavn/layers.hpp"
#include "gavn/model_config.hpp"

namespace gavn {

// One Align(ref, nbr) invocation: which feature was aligned against which,
// in window-relative frame indices. kinds: F, FA, BA, FS, BS, AF.
struct AlignCall {
    std::string branch;
    int j;
    std::string ref_kind;
    int ref_j;
    std::string nbr_kind;
    int nbr_j;

    bool operator==(const AlignCall& o) const {
        return branch == o.branch && j == o.j && ref_kind == o.ref_kind && ref_j == o.ref_j &&
               nbr_kind == o.nbr_kind && nbr_j == o.nbr_j;
    }
};

struct AlignTrace {
    std::vector<AlignCall> calls;
    std::vector<std::pair<std::string, int>> absent;  // (branch, j)
};

// 3-level per-frame feature stack; the 1/4-resolution map is what alignment
// and fusion consume.
template <class T>
struct FeaturePyramid {
    Var<T> l1, l2, l3;  // 1/1, 1/2, 1/4 of the input resolution

    const Var<T>& feat() const { return l3; }
};

template <class T>
struct PredeblurNet {
    Conv2dLayer<T> stem, down1, down2, refine;

    // frames: (2n+5, 3, H, W). All frames pass through batched; per-frame
    // pyramids are row selections.
    std::vector<FeaturePyramid<T>> operator()(const Var<T>& frames) const {
        Shape4 s = frames->val.shape;
        check(s.h % 4 == 0 && s.w % 4 == 0,
              "predeblur: frame size must be divisible by 4, got " + s.str());
        auto l1 = leaky_relu(stem(frames));
        auto l2 = leaky_relu(down1(l1));
        auto l3 = leaky_relu(refine(leaky_relu(down2(l2))));
        std::vector<FeaturePyramid<T>> out;
        out.reserve(std::size_t(s.b));
        for (int i = 0; i < s.b; ++i)
            out.push_back({select_frame(l1, i), select_frame(l2, i), select_frame(l3, i)});
        return out;
    }
};

// Coarse-to-fine deformable alignment at the 1/4-resolution feature scale.
// Offsets are predicted at the coarsest internal level, upsampled x2 with
// doubled values and refined at each finer level; the single deformable
// convolution is applied at the finest level. Offset-predicting convolutions
// are zero-initialized, so a fresh AlignNet is exactly a plain convolution
// of the neighbor feature.
template <class T>
struct AlignNet {
    static constexpr int kLevels = 3;
    Conv2dLayer<T> off_a[kLevels];
    Conv2dLayer<T> off_b[kLevels];  // zero-init, emits 2*k*k offset channels
    Var<T> deform_w;
    int kernel = 3;

    Var<T> operator()(const Var<T>& ref, const Var<T>& nbr) const {
        check(ref->val.shape == nbr->val.shape,
              "align: ref/nbr shape mismatch " + ref->val.shape.str() + " vs " +
                  nbr->val.shape.str());
        std::vector<Var<T>> refs{ref}, nbrs{nbr};
        while (int(refs.size()) < kLevels) {
            Shape4 s = refs.back()->val.shape;
            if (s.h % 2 != 0 || s.w % 2 != 0 || s.h / 2 < 4 || s.w / 2 < 4) break;
            refs.push_back(avg_pool2(refs.back()));
            nbrs.push_back(avg_pool2(nbrs.back()));
        }
        int depth = int(refs.size());
        Var<T> offsets;
        for (int l = depth - 1; l >= 0; --l) {
            auto head = off_b[l](leaky_relu(off_a[l](concat_ch<T>({refs[std::size_t(l)], nbrs[std::size_t(l)]}))));
            offsets = offsets ? add(head, scale(upsample2(offsets), 2.0)) : head;
            double limit = std::max(1.0, refs[std::size_t(l)]->val.shape.w / 4.0);
            offsets = clamp_sym(offsets, limit);
        }
        return deform_conv2d(nbrs[0], offsets, deform_w);
    }
};

template <class T>
struct AlignedFeatureSet {
    Var<T> fa, ba, af;
    Var<T> fs, bs;  // null when the chain would need frames outside the window
    bool fs_present = false, bs_present = false;
};

namespace detail {

template <class T>
Var<T> traced_align(const AlignNet<T>& align, AlignTrace* trace, const std::string& branch, int j,
                    const std::string& ref_kind, int ref_j, const Var<T>& ref,
                    const std::string& nbr_kind, int nbr_j, const Var<T>& nbr) {
    if (trace) trace->calls.push_back({branch, j, ref_kind, ref_j, nbr_kind, nbr_j});
    return align(ref, nbr);
}

}  // namespace detail

// Four directional alignment chains plus self-alignment, over chain frames
// j in [-(n+1), n+1] (window-relative). Forward/backward adjacent chains
// start from the window edges; skip chains start two frames in and stride
// by two. FS at j=-(n+1) and BS at j=n+1 would need frames outside the
// window and are marked absent; they are chain intermediates only.
template <class T>
std::map<int, AlignedFeatureSet<T>> build_chains(const AlignNet<T>& align,
                                                 const std::vector<Var<T>>& feats, int n,
                                                 AlignTrace* trace = nullptr) {
    check(int(feats.size()) == 2 * n + 5,
          "build_chains: expected " + std::to_string(2 * n + 5) + " pyramids, got " +
              std::to_string(feats.size()));
    auto F = [&](int rel) -> const Var<T>& { return feats[std::size_t(rel + n + 2)]; };

    std::map<int, AlignedFeatureSet<T>> sets;
    for (int j = -(n + 1); j <= n + 1; ++j) sets[j] = {};

    std::map<int, Var<T>> fa, ba, fs, bs;
    // forward adjacent: base at the left edge, then chained left-to-right
    for (int j = -(n + 1); j <= n + 1; ++j) {
        if (j == -(n + 1))
            fa[j] = detail::traced_align(align, trace, "FA", j, "F", j, F(j), "F", j - 1, F(j - 1));
        else
            fa[j] = detail::traced_align(align, trace, "FA", j, "F", j, F(j), "FA", j - 1, fa[j - 1]);
    }
    // backward adjacent: mirror
    for (int j = n + 1; j >= -(n + 1); --j) {
        if (j == n + 1)
            ba[j] = detail::traced_align(align, trace, "BA", j, "F", j, F(j), "F", j + 1, F(j + 1));
        else
            ba[j] = detail::traced_align(align, trace, "BA", j, "F", j, F(j), "BA", j + 1, ba[j + 1]);
    }
    // forward skip: bases at j = -n, -n+1 read F(j-2); chained on FS(j-2)
    if (trace) trace->absent.push_back({"FS", -(n + 1)});
    for (int j = -n; j <= n + 1; ++j) {
        if (j <= -n + 1)
            fs[j] = detail::traced_align(align, trace, "FS", j, "F", j, F(j), "F", j - 2, F(j - 2));
        else
            fs[j] = detail::traced_align(align, trace, "FS", j, "F", j, F(j), "FS", j - 2, fs[j - 2]);
    }
    // backward skip: mirror
    if (trace) trace->absent.push_back({"BS", n + 1});
    for (int j = n; j >= -(n + 1); --j) {
        if (j >= n - 1)
            bs[j] = detail::traced_align(align, trace, "BS", j, "F", j, F(j), "F", j + 2, F(j + 2));
        else
            bs[j] = detail::traced_align(align, trace, "BS", j, "F", j, F(j), "BS", j + 2, bs[j + 2]);
    }
    // self-alignment for output frames
    for (int j = -n; j <= n; ++j)
        sets[j].af = detail::traced_align(align, trace, "AF", j, "F", j, F(j), "F", j, F(j));

    for (int j = -(n + 1); j <= n + 1; ++j) {
        sets[j].fa = fa[j];
        sets[j].ba = ba[j];
        if (fs.count(j)) {
            sets[j].fs = fs[j];
            sets[j].fs_present = true;
        }
        if (bs.count(j)) {
            sets[j].bs = bs[j];
            sets[j].bs_present = true;
        }
    }
    return sets;
}

// Attention fusion of the five aligned branches. Per branch Y:
//   Y~ = AF (.) sigma(Conv(Y) (.) Conv(AF))         (attention_target = paper)
//   Y~ = Y  (.) sigma(Conv(Y) (.) Conv(AF))         (attention_target = per_branch)
// then T = Conv([FS~, FA~, AF~, BA~, BS~]). Absent FS/BS entries substitute
// AF so the concat keeps a fixed channel count.
template <class T>
struct TemporalFusion {
    static constexpr const char* kBranches[5] = {"FS", "FA", "AF", "BA", "BS"};
    Conv2dLayer<T> att_y[5];
    Conv2dLayer<T> att_af[5];
    Conv2dLayer<T> fuse;
    bool per_branch = false;

    Var<T> operator()(const AlignedFeatureSet<T>& set, const Var<T>& f_j) const {
        check(bool(set.af), "fuse_temporal: AF must be present");
        check(set.af->val.shape == f_j->val.shape,
              "fuse_temporal: AF/F shape mismatch " + set.af->val.shape.str() + " vs " +
                  f_j->val.shape.str());
        std::vector<Var<T>> tilde;
        for (int i = 0; i < 5; ++i) {
            Var<T> y;
            switch (i) {
                case 0: y = set.fs_present ? set.fs : set.af; break;
                case 1: y = set.fa; break;
                case 2: y = set.af; break;
                case 3: y = set.ba; break;
                default: y = set.bs_present ? set.bs : set.af; break;
            }
            auto att = sigmoid(mul(att_y[i](y), att_af[i](set.af)));
            tilde.push_back(mul(per_branch ? y : set.af, att));
        }
        return fuse(concat_ch(tilde));
    }
};

// Inter-frame temporal module: predeblur pyramid, four chains, fusion.
template <class T>
struct TemporalModule {
    PredeblurNet<T> predeblur;
    AlignNet<T> align;
    TemporalFusion<T> fusion;
    int n = 1;

    // frames (2n+5, 3, H, W) -> 2n+1 temporal features at 1/4 resolution.
    std::vector<Var<T>> operator()(const Var<T>& frames, AlignTrace* trace = nullptr) const {
        Shape4 s = frames->val.shape;
        check(s.b == 2 * n + 5, "temporal: expected " + std::to_string(2 * n + 5) +
                                    " frames, got " + std::to_string(s.b));
        std::vector<FeaturePyramid<T>> pyramids = predeblur(frames);
        std::vector<Var<T>> feats;
        feats.reserve(pyramids.size());
        for (const auto& p : pyramids) feats.push_back(p.feat());
        auto sets = build_chains(align, feats, n, trace);
        std::vector<Var<T>> out;
        for (int j = -n; j <= n; ++j)
            out.push_back(fusion(sets.at(j), feats[std::size_t(j + n + 2)]));
        return out;
    }
};

template <class T>
TemporalModule<T> make_temporal_module(ParamStore<T>& ps, const ModelConfig& cfg,
                                       const std::string& prefix = "temporal") {
    int c = cfg.channels;
    std::uint64_t seed = cfg.init_seed;
    TemporalModule<T> m;
    m.n = cfg.n;
    m.predeblur.stem = conv2d_layer(ps, prefix + ".predeblur.stem", 3, c, 3, 1, seed);
    m.predeblur.down1 = conv2d_layer(ps, prefix + ".predeblur.down1", c, c, 3, 2, seed);
    m.predeblur.down2 = conv2d_layer(ps, prefix + ".predeblur.down2", c, c, 3, 2, seed);
    m.predeblur.refine = conv2d_layer(ps, prefix + ".predeblur.refine", c, c, 3, 1, seed);
    int k = m.align.kernel;
    for (int l = 0; l < AlignNet<T>::kLevels; ++l) {
        m.align.off_a[l] = conv2d_layer(ps, prefix + ".align.off_a" + std::to_string(l), 2 * c, c, 3, 1, seed);
        m.align.off_b[l] = conv2d_layer(ps, prefix + ".align.off_b" + std::to_string(l), c,
                                        2 * k * k, 3, 1, seed, /*zero_init=*/true);
    }
    m.align.deform_w =
        make_weight(ps, prefix + ".align.deform.w", {c, c, k, k}, c * k * k, seed, false);
    for (int i = 0; i < 5; ++i) {
        std::string b = TemporalFusion<T>::kBranches[i];
        m.fusion.att_y[i] = conv2d_layer(ps, prefix + ".fusion.att_y." + b, c, c, 3, 1, seed);
        m.fusion.att_af[i] = conv2d_layer(ps, prefix + ".fusion.att_af." + b, c, c, 3, 1, seed);
    }
    m.fusion.fuse = conv2d_layer(ps, prefix + ".fusion.fuse", 5 * c, c, 3, 1, seed);
    m.fusion.per_branch = cfg.attention_target == "per_branch";
    return m;
}

}  // namespace gavn
