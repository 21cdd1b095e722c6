#include "gavn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gavn/image_io.hpp"

namespace gavn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'G', 'A', 'V', 'N', 'C', 'K', 'P', '1'};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

void append_f32(std::vector<std::uint8_t>& out, const Tensor4<float>& t) {
    std::size_t off = out.size();
    out.resize(off + t.v.size() * 4);
    std::memcpy(out.data() + off, t.v.data(), t.v.size() * 4);
}

json manifest_entry(const std::string& name, const std::string& kind, const Tensor4<float>& t,
                    std::size_t offset) {
    return {{"name", name},
            {"kind", kind},
            {"shape", {t.shape.b, t.shape.c, t.shape.h, t.shape.w}},
            {"offset", offset},
            {"elems", t.size()}};
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                     const AdamState<float>& adam, const CheckpointMeta& meta) {
    json manifest = json::array();
    std::vector<std::uint8_t> payload;
    for (const auto& [name, p] : params.params) {
        manifest.push_back(manifest_entry(name, "param", p->val, payload.size()));
        append_f32(payload, p->val);
    }
    for (const auto& [name, m] : adam.moments) {
        manifest.push_back(manifest_entry(name, "adam_m", m.m, payload.size()));
        append_f32(payload, m.m);
        manifest.push_back(manifest_entry(name, "adam_v", m.v, payload.size()));
        append_f32(payload, m.v);
    }

    json header;
    header["format"] = "gavn-checkpoint";
    header["version"] = 1;
    header["stage"] = meta.stage;
    header["epoch"] = meta.epoch;
    header["seed"] = meta.seed;
    header["adam_step"] = meta.adam_step;
    header["step_counter"] = meta.step_counter;
    header["adam"] = {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
    header["config"] = meta.config_json.empty() ? json::object() : json::parse(meta.config_json);
    header["manifest"] = manifest;
    std::string head = header.dump();

    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), kMagic, kMagic + 8);
    std::uint64_t hlen = head.size();
    for (int i = 0; i < 8; ++i) bytes.push_back(std::uint8_t(hlen >> (8 * i)));
    bytes.insert(bytes.end(), head.begin(), head.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    io::write_file_bytes(path, bytes);
}

namespace {

json parse_checkpoint(const std::string& path, std::vector<std::uint8_t>& bytes,
                      std::size_t& payload_off) {
    bytes = io::read_file_bytes(path);
    check(bytes.size() >= 16 && std::memcmp(bytes.data(), kMagic, 8) == 0,
          "checkpoint: bad magic in " + path);
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= std::uint64_t(bytes[8 + std::size_t(i)]) << (8 * i);
    check(16 + hlen <= bytes.size(), "checkpoint: truncated header in " + path);
    payload_off = std::size_t(16 + hlen);
    return json::parse(std::string(bytes.begin() + 16, bytes.begin() + std::ptrdiff_t(16 + hlen)));
}

CheckpointMeta meta_from_header(const json& header) {
    CheckpointMeta meta;
    meta.stage = header.at("stage").get<std::string>();
    meta.epoch = header.at("epoch").get<int>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.adam_step = header.at("adam_step").get<std::int64_t>();
    meta.step_counter = header.value("step_counter", std::int64_t(0));
    meta.config_json = header.at("config").dump();
    return meta;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    std::vector<std::uint8_t> bytes;
    std::size_t payload_off = 0;
    return meta_from_header(parse_checkpoint(path, bytes, payload_off));
}

CheckpointMeta load_checkpoint(const std::string& path, ParamStore<float>& params,
                               AdamState<float>& adam) {
    std::vector<std::uint8_t> bytes;
    std::size_t payload_off = 0;
    json header = parse_checkpoint(path, bytes, payload_off);
    std::size_t payload_size = bytes.size() - payload_off;

    // the manifest must tile the payload exactly
    std::size_t expected = 0;
    for (const auto& e : header.at("manifest")) {
        check(e.at("offset").get<std::size_t>() == expected,
              "checkpoint: manifest gap before '" + e.at("name").get<std::string>() + "'");
        expected += e.at("elems").get<std::size_t>() * 4;
    }
    if (expected != payload_size) {
        // name the first entry that runs past the data
        std::size_t seen = 0;
        for (const auto& e : header.at("manifest")) {
            seen += e.at("elems").get<std::size_t>() * 4;
            if (seen > payload_size)
                check(false, "checkpoint: payload ends before parameter '" +
                                 e.at("name").get<std::string>() + "' in " + path);
        }
        check(false, "checkpoint: payload larger than manifest in " + path);
    }

    adam.moments.clear();
    for (const auto& e : header.at("manifest")) {
        std::string name = e.at("name").get<std::string>();
        std::string kind = e.at("kind").get<std::string>();
        auto sh = e.at("shape");
        Shape4 shape{sh[0].get<int>(), sh[1].get<int>(), sh[2].get<int>(), sh[3].get<int>()};
        std::size_t off = payload_off + e.at("offset").get<std::size_t>();
        std::size_t elems = e.at("elems").get<std::size_t>();
        check(shape.elems() == std::int64_t(elems), "checkpoint: shape/elems disagree for " + name);

        if (kind == "param") {
            auto it = params.params.find(name);
            check(it != params.params.end(), "checkpoint: unknown parameter name '" + name + "'");
            check(it->second->val.shape == shape,
                  "checkpoint: shape mismatch for '" + name + "': file " + shape.str() +
                      " vs model " + it->second->val.shape.str());
            std::memcpy(it->second->val.v.data(), bytes.data() + off, elems * 4);
        } else {
            check(kind == "adam_m" || kind == "adam_v", "checkpoint: unknown entry kind " + kind);
            auto& slot = adam.moments[name];
            Tensor4<float> t(shape);
            std::memcpy(t.v.data(), bytes.data() + off, elems * 4);
            (kind == "adam_m" ? slot.m : slot.v) = std::move(t);
        }
    }
    if (header.contains("adam")) {
        adam.beta1 = header["adam"].at("beta1").get<double>();
        adam.beta2 = header["adam"].at("beta2").get<double>();
        adam.eps = header["adam"].at("eps").get<double>();
    }
    CheckpointMeta meta = meta_from_header(header);
    adam.step = meta.adam_step;
    return meta;
}

std::vector<EpochSpec> training_schedule(const TrainConfig& cfg) {
    std::vector<EpochSpec> sched;
    int g = 0;
    int total = cfg.stage1.epochs + cfg.stage2_warmup_epochs + cfg.stage2_finetune_epochs;
    if (cfg.ablate == "no-identity") {
        for (int e = 0; e < total; ++e)
            sched.push_back({g++, "stage1", e, cfg.stage1.lr, "stage1"});
        return sched;
    }
    for (int e = 0; e < cfg.stage1.epochs; ++e)
        sched.push_back({g++, "stage1", e, cfg.stage1.lr, "stage1"});
    for (int e = 0; e < cfg.stage2_warmup_epochs; ++e)
        sched.push_back({g++, "stage2_warmup", e, cfg.stage2_warmup_lr, "stage2_warmup"});
    for (int e = 0; e < cfg.stage2_finetune_epochs; ++e)
        sched.push_back({g++, "stage2_finetune", e, cfg.stage2_finetune_lr, "stage2_finetune"});
    return sched;
}

std::string log_entry_json(const TrainLogEntry& e) {
    json j;
    j["kind"] = e.kind;
    j["step"] = e.step;
    j["epoch"] = e.epoch;
    j["stage"] = e.stage;
    j["lr"] = e.lr;
    j["loss"] = e.loss;
    j["wall_time"] = e.wall_time;
    return j.dump();
}

WindowTensors build_window(const ModelConfig& cfg, const Clip& degraded, const Clip& truth,
                           int t0, bool ablate_audio, const LandmarkNet<float>* lmnet) {
    int w = cfg.window_frames();
    check(t0 >= 0 && t0 + w <= degraded.frame_count(),
          "build_window: window [" + std::to_string(t0) + ", " + std::to_string(t0 + w) +
              ") outside clip of " + std::to_string(degraded.frame_count()) + " frames");
    Shape4 fs = degraded.frames.shape;

    WindowTensors out;
    Tensor4<float> frames(w, 3, fs.h, fs.w);
    for (int i = 0; i < w; ++i)
        std::copy(degraded.frames.plane(t0 + i, 0), degraded.frames.plane(t0 + i, 0) + 3 * std::size_t(fs.h) * fs.w,
                  frames.plane(i, 0));
    out.frames = make_var(std::move(frames), false);

    out.truth = Tensor4<float>(cfg.output_frames(), 3, fs.h, fs.w);
    for (int i = 0; i < cfg.output_frames(); ++i) {
        int t = t0 + 2 + i;
        std::copy(truth.frames.plane(t, 0), truth.frames.plane(t, 0) + 3 * std::size_t(fs.h) * fs.w,
                  out.truth.plane(i, 0));
        out.audio.push_back(landmark_audio_var<float>(degraded, t, cfg.audio_half_frames, ablate_audio));
        LandmarkSet lms;
        if (lmnet) {
            auto frame = frame_var<float>(degraded, t);
            auto audio = landmark_audio_var<float>(degraded, t, cfg.audio_half_frames, ablate_audio);
            lms = predict_landmarks(*lmnet, frame, audio);
        } else {
            lms = oracle_landmarks(degraded, t);
        }
        out.heatmaps.push_back(
            make_var(render_heatmaps<float>(lms, fs.h, fs.w, cfg.heatmap_sigma), false));
    }
    return out;
}

namespace {

void set_group_requires_grad(GavnModel<float>& model, const std::string& group) {
    std::vector<std::string> active = param_group(model, group);
    for (auto& [name, p] : model.params.params) p->requires_grad = false;
    for (const std::string& name : active) model.params.get(name)->requires_grad = true;
}

void append_log(const std::string& run_dir, const TrainLogEntry& e) {
    if (run_dir.empty()) return;
    std::ofstream f(fs::path(run_dir) / "train_log.jsonl", std::ios::app);
    f << log_entry_json(e) << "\n";
}

}  // namespace

bool try_resume(const std::string& run_dir, GavnModel<float>& model, TrainState& state) {
    fs::path latest = fs::path(run_dir) / "ckpt_latest.gavnckpt";
    if (run_dir.empty() || !fs::exists(latest)) return false;
    CheckpointMeta meta = load_checkpoint(latest.string(), model.params, state.adam);
    state.next_epoch = meta.epoch;
    state.active_stage = meta.stage;
    state.step_counter = meta.step_counter;
    return true;
}

bool train_run(GavnModel<float>& model, TrainState& state, const TrainSet& data,
               const std::string& run_dir, int max_epochs, const LandmarkNet<float>* lmnet) {
    data.validate();
    state.cfg.validate();
    const ModelConfig& mcfg = model.cfg;
    std::vector<EpochSpec> sched = training_schedule(state.cfg);
    if (!run_dir.empty()) fs::create_directories(run_dir);

    state.adam.beta1 = state.cfg.adam_beta1;
    state.adam.beta2 = state.cfg.adam_beta2;
    state.adam.eps = state.cfg.adam_eps;

    int w = mcfg.window_frames();
    for (const Clip& c : data.degraded)
        check(c.frame_count() >= w, "train_run: clip shorter than one window");

    int executed = 0;
    bool ablate_audio = state.cfg.ablate == "no-audio";

    for (std::size_t ei = std::size_t(state.next_epoch); ei < sched.size(); ++ei) {
        const EpochSpec& spec = sched[ei];
        if (max_epochs >= 0 && executed >= max_epochs) return false;

        // optimizer state resets whenever the stage (and with it the lr or
        // the active parameter set) changes
        if (spec.stage != state.active_stage) {
            state.adam.reset();
            state.active_stage = spec.stage;
        }
        set_group_requires_grad(model, spec.group);
        std::vector<std::string> active = param_group(model, spec.group);

        // deterministic epoch stream: clip order, then window starts
        Rng rng(mix_seed(state.cfg.seed, fnv1a("epoch") ^ std::uint64_t(spec.global)));
        std::vector<int> order;
        for (int r = 0; r < state.cfg.crops_per_clip; ++r)
            for (int ci = 0; ci < int(data.degraded.size()); ++ci) order.push_back(ci);
        for (int i = int(order.size()) - 1; i > 0; --i)
            std::swap(order[std::size_t(i)], order[std::size_t(rng.uniform_int(0, i))]);
        std::vector<std::pair<int, int>> samples;
        for (int ci : order) {
            int t_max = data.degraded[std::size_t(ci)].frame_count() - w;
            samples.push_back({ci, rng.uniform_int(0, t_max)});
        }

        double epoch_loss = 0;
        int epoch_steps = 0;
        for (std::size_t s0 = 0; s0 < samples.size(); s0 += std::size_t(state.cfg.batch_size)) {
            std::size_t s1 = std::min(samples.size(), s0 + std::size_t(state.cfg.batch_size));
            model.params.zero_grad();
            double batch_loss = 0;
            for (std::size_t s = s0; s < s1; ++s) {
                auto [ci, t0] = samples[s];
                WindowTensors win = build_window(mcfg, data.degraded[std::size_t(ci)],
                                                 data.truth[std::size_t(ci)], t0, ablate_audio, lmnet);
                std::vector<Var<float>> outs;
                if (spec.stage == "stage1") {
                    outs = model.forward_temporal_only(win.frames);
                } else {
                    typename GavnModel<float>::WindowInput in;
                    in.frames = win.frames;
                    in.audio = win.audio;
                    in.heatmaps = win.heatmaps;
                    outs = model.forward(in);
                }
                auto loss = scale(charbonnier_loss(concat_batch(outs), win.truth,
                                                   state.cfg.charbonnier_eps),
                                  1.0 / double(s1 - s0));
                double lv = double(loss->val.v[0]) * double(s1 - s0);
                if (!std::isfinite(lv))
                    throw std::runtime_error("train_run: loss diverged (NaN/Inf) at step " +
                                             std::to_string(state.step_counter) +
                                             "; last epoch checkpoint is intact");
                batch_loss += lv / double(s1 - s0);
                backward(loss);
            }
            adam_step(model.params, active, state.adam, spec.lr);
            state.step_counter += 1;
            epoch_loss += batch_loss;
            epoch_steps += 1;
            TrainLogEntry entry{"step", state.step_counter, spec.global, spec.stage,
                                spec.lr,  batch_loss,        now_seconds()};
            state.log.push_back(entry);
            append_log(run_dir, entry);
        }

        TrainLogEntry summary{"epoch",  state.step_counter,            spec.global,
                              spec.stage, spec.lr, epoch_loss / std::max(1, epoch_steps),
                              now_seconds()};
        state.log.push_back(summary);
        append_log(run_dir, summary);

        state.next_epoch = spec.global + 1;
        ++executed;

        if (!run_dir.empty()) {
            CheckpointMeta meta;
            meta.stage = spec.stage;
            meta.epoch = state.next_epoch;
            meta.seed = state.cfg.seed;
            meta.adam_step = state.adam.step;
            meta.step_counter = state.step_counter;
            meta.config_json = "{\"model\": " + model_config_to_json(mcfg) + "}";
            save_checkpoint((fs::path(run_dir) / "ckpt_latest.gavnckpt").string(), model.params,
                            state.adam, meta);
            bool stage1_ends = spec.stage == "stage1" &&
                               (ei + 1 == sched.size() || sched[ei + 1].stage != "stage1");
            if (stage1_ends)
                save_checkpoint((fs::path(run_dir) / "ckpt_stage1.gavnckpt").string(), model.params,
                                state.adam, meta);
            if (ei + 1 == sched.size())
                save_checkpoint((fs::path(run_dir) / "ckpt_final.gavnckpt").string(), model.params,
                                state.adam, meta);
        }
    }
    // leave every parameter trainable for downstream callers
    for (auto& [name, p] : model.params.params) p->requires_grad = true;
    return true;
}

Clip restore_clip(const GavnModel<float>& model, const Clip& input, bool temporal_only,
                  bool ablate_audio, const LandmarkNet<float>* lmnet) {
    const ModelConfig& cfg = model.cfg;
    check(input.height() == cfg.frame_h && input.width() == cfg.frame_w,
          "restore_clip: clip size " + std::to_string(input.width()) + "x" +
              std::to_string(input.height()) + " does not match the model config");
    int T = input.frame_count();
    int n_out = cfg.output_frames();
    Shape4 fs = input.frames.shape;

    Clip out = input;
    for (int out_start = 0; out_start < T; out_start += n_out) {
        // window frame indices, replicated at the clip boundary
        Tensor4<float> frames(cfg.window_frames(), 3, fs.h, fs.w);
        for (int p = 0; p < cfg.window_frames(); ++p) {
            int idx = std::clamp(out_start + p - 2, 0, T - 1);
            std::copy(input.frames.plane(idx, 0),
                      input.frames.plane(idx, 0) + 3 * std::size_t(fs.h) * fs.w, frames.plane(p, 0));
        }
        auto frames_var = make_var(std::move(frames), false);

        std::vector<Var<float>> outs;
        if (temporal_only) {
            outs = model.forward_temporal_only(frames_var);
        } else {
            typename GavnModel<float>::WindowInput in;
            in.frames = frames_var;
            for (int i = 0; i < n_out; ++i) {
                int t = std::clamp(out_start + i, 0, T - 1);
                in.audio.push_back(
                    landmark_audio_var<float>(input, t, cfg.audio_half_frames, ablate_audio));
                LandmarkSet lms;
                if (lmnet) {
                    auto frame = frame_var<float>(input, t);
                    auto audio =
                        landmark_audio_var<float>(input, t, cfg.audio_half_frames, ablate_audio);
                    lms = predict_landmarks(*lmnet, frame, audio);
                } else {
                    lms = oracle_landmarks(input, t);
                }
                in.heatmaps.push_back(
                    make_var(render_heatmaps<float>(lms, fs.h, fs.w, cfg.heatmap_sigma), false));
            }
            outs = model.forward(in);
        }
        for (int i = 0; i < n_out && out_start + i < T; ++i) {
            const Tensor4<float>& restored = outs[std::size_t(i)]->val;
            float* dst = out.frames.plane(out_start + i, 0);
            for (std::size_t e = 0; e < restored.v.size(); ++e)
                dst[e] = std::clamp(restored.v[e], 0.0f, 1.0f);  // clamp at export only
        }
    }
    return out;
}

}  // namespace gavn
