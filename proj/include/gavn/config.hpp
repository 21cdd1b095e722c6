#pragma once

#include "gavn/clip.hpp"
#include "gavn/degrade.hpp"
#include "gavn/model_config.hpp"

namespace gavn {

struct StageConfig {
    int epochs = 20;
    double lr = 4e-4;
};

struct TrainConfig {
    StageConfig stage1{20, 4e-4};
    int stage2_warmup_epochs = 5;
    double stage2_warmup_lr = 4e-4;
    int stage2_finetune_epochs = 15;
    double stage2_finetune_lr = 2e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double charbonnier_eps = 1e-3;
    int batch_size = 1;
    int crops_per_clip = 1;  // windows sampled per clip per epoch
    std::uint64_t seed = 0;
    std::string task = "blur";     // degradation the trainer learns to remove
    std::string ablate;            // "" | no-audio | no-identity

    void validate() const {
        check(stage1.epochs >= 1 && stage2_warmup_epochs >= 1 && stage2_finetune_epochs >= 1,
              "TrainConfig: epochs must be >= 1");
        check(stage1.lr > 0 && stage2_warmup_lr > 0 && stage2_finetune_lr > 0,
              "TrainConfig: learning rates must be > 0");
        check(charbonnier_eps > 0, "TrainConfig: charbonnier_eps must be > 0");
        check(batch_size >= 1 && crops_per_clip >= 1, "TrainConfig: bad batch settings");
        check(task == "blur" || task == "compression" || task == "low_resolution",
              "TrainConfig: unknown task '" + task + "'");
        check(ablate.empty() || ablate == "no-audio" || ablate == "no-identity",
              "TrainConfig: ablate must be empty, 'no-audio' or 'no-identity'");
    }
};

struct DataConfig {
    int train_clips = 8, val_clips = 2, test_clips = 2;
    double duration_s = 2.0;
    std::uint64_t train_seed_base = 1000, val_seed_base = 2000, test_seed_base = 3000;

    void validate() const {
        check(train_clips >= 1 && val_clips >= 0 && test_clips >= 0, "DataConfig: bad clip counts");
        check(duration_s > 0, "DataConfig: duration must be > 0");
        // speaker-disjoint splits at the seed level: ranges must not overlap
        auto overlaps = [](std::uint64_t a0, int an, std::uint64_t b0, int bn) {
            return an > 0 && bn > 0 && a0 < b0 + std::uint64_t(bn) && b0 < a0 + std::uint64_t(an);
        };
        check(!overlaps(train_seed_base, train_clips, val_seed_base, val_clips) &&
                  !overlaps(train_seed_base, train_clips, test_seed_base, test_clips) &&
                  !overlaps(val_seed_base, val_clips, test_seed_base, test_clips),
              "DataConfig: train/val/test seed ranges overlap");
    }
};

struct DegradeConfig {
    std::vector<double> compression_steps{0.1, 0.4, 1.0};
    std::vector<int> blur_kernels{5, 7, 9};  // scaled from the 15..25 range for small frames
    std::vector<int> lr_factors{2, 4, 8};

    void validate() const {
        check(!compression_steps.empty() && !blur_kernels.empty() && !lr_factors.empty(),
              "DegradeConfig: level grids must be non-empty");
        for (double q : compression_steps) check(q > 0, "DegradeConfig: quality step must be > 0");
        for (int k : blur_kernels)
            check(k >= 3 && k % 2 == 1, "DegradeConfig: blur kernels must be odd and >= 3");
        for (int f : lr_factors)
            check(f >= 2 && f <= 8, "DegradeConfig: downsampling factors must be in [2, 8]");
    }

    std::vector<double> levels_for(const std::string& kind) const {
        if (kind == "compression") return compression_steps;
        if (kind == "blur") return std::vector<double>(blur_kernels.begin(), blur_kernels.end());
        if (kind == "low_resolution") return std::vector<double>(lr_factors.begin(), lr_factors.end());
        check(false, "DegradeConfig: unknown kind '" + kind + "'");
        return {};
    }
};

// One declarative config drives every command; the resolved form (defaults
// expanded) is written next to each run's outputs.
struct RunConfig {
    std::uint64_t seed = 1234;
    SceneParams scene;
    DataConfig data;
    DegradeConfig degrade;
    ModelConfig model;
    TrainConfig train;
    int threads = 0;  // 0 = auto; has no effect on results

    void validate() const {
        scene.validate();
        data.validate();
        degrade.validate();
        model.validate();
        train.validate();
        check(model.frame_h == scene.h && model.frame_w == scene.w,
              "RunConfig: model frame size must match the scene");
        check(model.landmark_count == scene.landmark_count,
              "RunConfig: model landmark count must match the scene");
    }
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace gavn
