#include "gavn/config.hpp"

#include <fstream>

#include <json.hpp>

namespace gavn {

using nlohmann::json;

namespace {

// Missing keys keep their defaults; unknown keys are rejected so typos in a
// config file cannot silently no-op.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        check(ok, "config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json scene_to_json(const SceneParams& s) {
    return {{"h", s.h},
            {"w", s.w},
            {"landmarks", s.landmark_count},
            {"head_amplitude", s.head_amplitude},
            {"blink_rate", s.blink_rate},
            {"texture_seed", s.texture_seed}};
}

SceneParams scene_from_json(const json& j) {
    check_keys(j, {"h", "w", "landmarks", "head_amplitude", "blink_rate", "texture_seed"}, "scene");
    SceneParams s;
    maybe(j, "h", s.h);
    maybe(j, "w", s.w);
    maybe(j, "landmarks", s.landmark_count);
    maybe(j, "head_amplitude", s.head_amplitude);
    maybe(j, "blink_rate", s.blink_rate);
    maybe(j, "texture_seed", s.texture_seed);
    return s;
}

json model_to_json(const ModelConfig& m) {
    return {{"n", m.n},
            {"channels", m.channels},
            {"frame_h", m.frame_h},
            {"frame_w", m.frame_w},
            {"audio_half_frames", m.audio_half_frames},
            {"audio_samples_per_frame", m.audio_samples_per_frame},
            {"landmark_count", m.landmark_count},
            {"heatmap_sigma", m.heatmap_sigma},
            {"attention_target", m.attention_target},
            {"landmark_source", m.landmark_source},
            {"init_seed", m.init_seed}};
}

ModelConfig model_from_json(const json& j) {
    check_keys(j,
               {"n", "channels", "frame_h", "frame_w", "audio_half_frames",
                "audio_samples_per_frame", "landmark_count", "heatmap_sigma", "attention_target",
                "landmark_source", "init_seed"},
               "model");
    ModelConfig m;
    maybe(j, "n", m.n);
    maybe(j, "channels", m.channels);
    maybe(j, "frame_h", m.frame_h);
    maybe(j, "frame_w", m.frame_w);
    maybe(j, "audio_half_frames", m.audio_half_frames);
    maybe(j, "audio_samples_per_frame", m.audio_samples_per_frame);
    maybe(j, "landmark_count", m.landmark_count);
    maybe(j, "heatmap_sigma", m.heatmap_sigma);
    maybe(j, "attention_target", m.attention_target);
    maybe(j, "landmark_source", m.landmark_source);
    maybe(j, "init_seed", m.init_seed);
    return m;
}

json train_to_json(const TrainConfig& t) {
    return {{"stage1", {{"epochs", t.stage1.epochs}, {"lr", t.stage1.lr}}},
            {"stage2",
             {{"warmup_epochs", t.stage2_warmup_epochs},
              {"warmup_lr", t.stage2_warmup_lr},
              {"finetune_epochs", t.stage2_finetune_epochs},
              {"finetune_lr", t.stage2_finetune_lr}}},
            {"adam", {{"beta1", t.adam_beta1}, {"beta2", t.adam_beta2}, {"eps", t.adam_eps}}},
            {"charbonnier_eps", t.charbonnier_eps},
            {"batch_size", t.batch_size},
            {"crops_per_clip", t.crops_per_clip},
            {"seed", t.seed},
            {"task", t.task},
            {"ablate", t.ablate}};
}

TrainConfig train_from_json(const json& j) {
    check_keys(j,
               {"stage1", "stage2", "adam", "charbonnier_eps", "batch_size", "crops_per_clip",
                "seed", "task", "ablate"},
               "train");
    TrainConfig t;
    if (j.contains("stage1")) {
        check_keys(j["stage1"], {"epochs", "lr"}, "train.stage1");
        maybe(j["stage1"], "epochs", t.stage1.epochs);
        maybe(j["stage1"], "lr", t.stage1.lr);
    }
    if (j.contains("stage2")) {
        check_keys(j["stage2"], {"warmup_epochs", "warmup_lr", "finetune_epochs", "finetune_lr"},
                   "train.stage2");
        maybe(j["stage2"], "warmup_epochs", t.stage2_warmup_epochs);
        maybe(j["stage2"], "warmup_lr", t.stage2_warmup_lr);
        maybe(j["stage2"], "finetune_epochs", t.stage2_finetune_epochs);
        maybe(j["stage2"], "finetune_lr", t.stage2_finetune_lr);
    }
    if (j.contains("adam")) {
        check_keys(j["adam"], {"beta1", "beta2", "eps"}, "train.adam");
        maybe(j["adam"], "beta1", t.adam_beta1);
        maybe(j["adam"], "beta2", t.adam_beta2);
        maybe(j["adam"], "eps", t.adam_eps);
    }
    maybe(j, "charbonnier_eps", t.charbonnier_eps);
    maybe(j, "batch_size", t.batch_size);
    maybe(j, "crops_per_clip", t.crops_per_clip);
    maybe(j, "seed", t.seed);
    maybe(j, "task", t.task);
    maybe(j, "ablate", t.ablate);
    return t;
}

json data_to_json(const DataConfig& d) {
    return {{"train_clips", d.train_clips},
            {"val_clips", d.val_clips},
            {"test_clips", d.test_clips},
            {"duration_s", d.duration_s},
            {"train_seed_base", d.train_seed_base},
            {"val_seed_base", d.val_seed_base},
            {"test_seed_base", d.test_seed_base}};
}

DataConfig data_from_json(const json& j) {
    check_keys(j,
               {"train_clips", "val_clips", "test_clips", "duration_s", "train_seed_base",
                "val_seed_base", "test_seed_base"},
               "data");
    DataConfig d;
    maybe(j, "train_clips", d.train_clips);
    maybe(j, "val_clips", d.val_clips);
    maybe(j, "test_clips", d.test_clips);
    maybe(j, "duration_s", d.duration_s);
    maybe(j, "train_seed_base", d.train_seed_base);
    maybe(j, "val_seed_base", d.val_seed_base);
    maybe(j, "test_seed_base", d.test_seed_base);
    return d;
}

json degrade_to_json(const DegradeConfig& d) {
    return {{"compression_steps", d.compression_steps},
            {"blur_kernels", d.blur_kernels},
            {"lr_factors", d.lr_factors}};
}

DegradeConfig degrade_from_json(const json& j) {
    check_keys(j, {"compression_steps", "blur_kernels", "lr_factors"}, "degrade");
    DegradeConfig d;
    maybe(j, "compression_steps", d.compression_steps);
    maybe(j, "blur_kernels", d.blur_kernels);
    maybe(j, "lr_factors", d.lr_factors);
    return d;
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["scene"] = scene_to_json(cfg.scene);
    j["data"] = data_to_json(cfg.data);
    j["degrade"] = degrade_to_json(cfg.degrade);
    j["model"] = model_to_json(cfg.model);
    j["train"] = train_to_json(cfg.train);
    j["threads"] = cfg.threads;
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    json j = json::parse(text);
    check_keys(j, {"seed", "scene", "data", "degrade", "model", "train", "threads"}, "run config");
    RunConfig cfg;
    maybe(j, "seed", cfg.seed);
    if (j.contains("scene")) cfg.scene = scene_from_json(j["scene"]);
    if (j.contains("data")) cfg.data = data_from_json(j["data"]);
    if (j.contains("degrade")) cfg.degrade = degrade_from_json(j["degrade"]);
    if (j.contains("model")) cfg.model = model_from_json(j["model"]);
    if (j.contains("train")) cfg.train = train_from_json(j["train"]);
    maybe(j, "threads", cfg.threads);
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    check(bool(f), "cannot read config file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    check(bool(f), "cannot write config file: " + path);
    f << run_config_to_json(cfg) << "\n";
}

std::string model_config_to_json(const ModelConfig& cfg) { return model_to_json(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
    return model_from_json(json::parse(text));
}

}  // namespace gavn
