#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gavn/config.hpp"
#include "gavn/gradcheck_suite.hpp"
#include "gavn/image_io.hpp"
#include "gavn/metrics.hpp"
#include "gavn/trainer.hpp"

namespace fs = std::filesystem;
using namespace gavn;

namespace {

struct CommonFlags {
    std::string config_path;
    std::int64_t seed_override = -1;
    bool force = false;
    std::string ablate;
    std::string landmarks;
    std::string attention;
};

std::string clip_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "clip_%03d", i);
    return buf;
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg = flags.config_path.empty() ? RunConfig{} : load_run_config(flags.config_path);
    if (flags.seed_override >= 0) cfg.seed = std::uint64_t(flags.seed_override);
    if (!flags.ablate.empty()) cfg.train.ablate = flags.ablate;
    if (!flags.landmarks.empty()) cfg.model.landmark_source = flags.landmarks;
    if (!flags.attention.empty()) cfg.model.attention_target = flags.attention;
    // expand derived seeds so the resolved config alone reproduces the run
    if (cfg.train.seed == 0) cfg.train.seed = mix_seed(cfg.seed, fnv1a("train"));
    if (cfg.model.init_seed <= 1) cfg.model.init_seed = mix_seed(cfg.seed, fnv1a("init"));
    if (cfg.scene.texture_seed == 0) cfg.scene.texture_seed = mix_seed(cfg.seed, fnv1a("texture"));
    cfg.validate();
    set_thread_count(cfg.threads);
    return cfg;
}

void require_empty_or_force(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        check(force, "output directory " + dir.string() + " is not empty (use --force)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

std::vector<fs::path> clip_dirs_in(const fs::path& dir) {
    check(fs::exists(dir), "no such directory: " + dir.string());
    if (fs::exists(dir / "manifest.json")) return {dir};
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    check(!out.empty(), "no clip directories under " + dir.string());
    return out;
}

Clip generate_clip(const RunConfig& cfg, std::uint64_t clip_seed) {
    SceneParams scene = cfg.scene;
    scene.texture_seed = mix_seed(cfg.scene.texture_seed, clip_seed);
    return gen_clip(scene, cfg.data.duration_s, clip_seed);
}

int cmd_gen_data(const CommonFlags& flags, const std::string& out_dir) {
    RunConfig cfg = resolve_config(flags);
    require_empty_or_force(out_dir, flags.force);
    save_run_config(cfg, (fs::path(out_dir) / "config.resolved.json").string());

    auto emit = [&](const std::string& split, std::uint64_t base, int count) {
        for (int i = 0; i < count; ++i) {
            Clip clip = generate_clip(cfg, base + std::uint64_t(i));
            save_clip(clip, (fs::path(out_dir) / split / clip_name(i)).string());
        }
    };
    emit("train", cfg.data.train_seed_base, cfg.data.train_clips);
    emit("val", cfg.data.val_seed_base, cfg.data.val_clips);
    emit("test", cfg.data.test_seed_base, cfg.data.test_clips);
    std::cout << "wrote " << cfg.data.train_clips << " train / " << cfg.data.val_clips
              << " val / " << cfg.data.test_clips << " test clips to " << out_dir << "\n";
    return 0;
}

int cmd_degrade(const CommonFlags& flags, const std::string& in_dir, const std::string& out_dir) {
    RunConfig cfg = resolve_config(flags);
    std::vector<fs::path> clips = clip_dirs_in(in_dir);
    require_empty_or_force(out_dir, flags.force);
    save_run_config(cfg, (fs::path(out_dir) / "config.resolved.json").string());

    for (const std::string kind : {"compression", "blur", "low_resolution"}) {
        for (double level : cfg.degrade.levels_for(kind)) {
            std::ostringstream label;
            label << kind << "_" << level;
            for (const fs::path& cdir : clips) {
                Clip clip = load_clip(cdir.string());
                DegradationSpec spec{kind, level, mix_seed(cfg.seed, fnv1a(label.str()))};
                Clip degraded = degrade_clip(clip, spec);
                save_clip(degraded, (fs::path(out_dir) / label.str() / cdir.filename()).string());
            }
        }
    }
    std::cout << "degraded " << clips.size() << " clips into " << out_dir << "\n";
    return 0;
}

TrainSet load_train_set(const RunConfig& cfg, const std::string& data_dir) {
    TrainSet set;
    std::vector<fs::path> dirs = clip_dirs_in(fs::path(data_dir) / "train");
    std::vector<double> levels = cfg.degrade.levels_for(cfg.train.task);
    int i = 0;
    for (const fs::path& d : dirs) {
        Clip truth = load_clip(d.string());
        double level = levels[std::size_t(i) % levels.size()];
        DegradationSpec spec{cfg.train.task, level, mix_seed(cfg.seed, std::uint64_t(i))};
        set.degraded.push_back(degrade_clip(truth, spec));
        set.truth.push_back(std::move(truth));
        ++i;
    }
    return set;
}

std::unique_ptr<LandmarkNet<float>> train_landmark_regressor(const RunConfig& cfg,
                                                             const TrainSet& data,
                                                             const std::string& run_dir) {
    auto net = std::make_unique<LandmarkNet<float>>(build_landmark_net<float>(
        cfg.model.frame_h, cfg.model.frame_w, cfg.model.landmark_count,
        cfg.model.audio_window_samples(), mix_seed(cfg.seed, fnv1a("lmnet"))));
    train_landmark_net(*net, data.degraded, data.truth, 6, 2e-3,
                       mix_seed(cfg.seed, fnv1a("lmtrain")), cfg.model.audio_half_frames,
                       cfg.train.ablate == "no-audio");
    AdamState<float> none;
    CheckpointMeta meta;
    meta.stage = "landmark_net";
    meta.seed = cfg.seed;
    meta.config_json = "{\"model\": " + model_config_to_json(cfg.model) + "}";
    save_checkpoint((fs::path(run_dir) / "landmark_net.gavnckpt").string(), net->params, none, meta);
    return net;
}

int cmd_train(const CommonFlags& flags, const std::string& data_dir, const std::string& run_dir,
              int max_epochs) {
    RunConfig cfg = resolve_config(flags);
    fs::create_directories(run_dir);
    if (flags.force) {
        for (const char* f : {"ckpt_latest.gavnckpt", "ckpt_stage1.gavnckpt", "ckpt_final.gavnckpt",
                              "train_log.jsonl", "landmark_net.gavnckpt"})
            fs::remove(fs::path(run_dir) / f);
    }
    save_run_config(cfg, (fs::path(run_dir) / "config.resolved.json").string());

    TrainSet data = load_train_set(cfg, data_dir);
    auto model = build_model<float>(cfg.model);
    TrainState state;
    state.cfg = cfg.train;
    state.model_cfg = cfg.model;

    std::unique_ptr<LandmarkNet<float>> lmnet;
    if (cfg.model.landmark_source == "learned") {
        fs::path saved = fs::path(run_dir) / "landmark_net.gavnckpt";
        if (fs::exists(saved)) {
            lmnet = std::make_unique<LandmarkNet<float>>(build_landmark_net<float>(
                cfg.model.frame_h, cfg.model.frame_w, cfg.model.landmark_count,
                cfg.model.audio_window_samples(), mix_seed(cfg.seed, fnv1a("lmnet"))));
            AdamState<float> none;
            load_checkpoint(saved.string(), lmnet->params, none);
        } else {
            lmnet = train_landmark_regressor(cfg, data, run_dir);
        }
    }

    bool resumed = try_resume(run_dir, model, state);
    if (resumed) std::cout << "resuming from epoch " << state.next_epoch << "\n";
    bool done = train_run(model, state, data, run_dir, max_epochs, lmnet.get());
    std::cout << (done ? "training complete; " : "training paused; ")
              << "checkpoints in " << run_dir << "\n";
    return 0;
}

int cmd_restore(const CommonFlags& flags, const std::string& checkpoint,
                const std::string& clip_dir, const std::string& out_dir) {
    CheckpointMeta meta = read_checkpoint_meta(checkpoint);
    nlohmann::json cfg_json = nlohmann::json::parse(meta.config_json);
    check(cfg_json.contains("model"), "checkpoint carries no model config: " + checkpoint);
    ModelConfig mcfg = model_config_from_json(cfg_json["model"].dump());
    if (!flags.attention.empty()) mcfg.attention_target = flags.attention;
    if (!flags.landmarks.empty()) mcfg.landmark_source = flags.landmarks;
    mcfg.validate();

    auto model = build_model<float>(mcfg);
    AdamState<float> adam;
    load_checkpoint(checkpoint, model.params, adam);
    bool temporal_only = meta.stage == "stage1";

    std::unique_ptr<LandmarkNet<float>> lmnet;
    if (mcfg.landmark_source == "learned") {
        fs::path saved = fs::path(checkpoint).parent_path() / "landmark_net.gavnckpt";
        check(fs::exists(saved), "landmark_source=learned but " + saved.string() + " is missing");
        lmnet = std::make_unique<LandmarkNet<float>>(
            build_landmark_net<float>(mcfg.frame_h, mcfg.frame_w, mcfg.landmark_count,
                                      mcfg.audio_window_samples(), 1));
        AdamState<float> none;
        load_checkpoint(saved.string(), lmnet->params, none);
    }

    std::vector<fs::path> clips = clip_dirs_in(clip_dir);
    require_empty_or_force(out_dir, flags.force);
    std::string ckpt_hash = io::sha256_file_hex(checkpoint);
    for (const fs::path& cdir : clips) {
        Clip clip = load_clip(cdir.string());
        Clip restored = restore_clip(model, clip, temporal_only,
                                     flags.ablate == "no-audio", lmnet.get());
        restored.provenance =
            ProvenanceInfo{ckpt_hash, "{\"model\": " + model_config_to_json(mcfg) + "}"};
        save_clip(restored, (fs::path(out_dir) / cdir.filename()).string());
    }
    std::cout << "restored " << clips.size() << " clips into " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& gt_dir, const std::string& restored_dir, const std::string& csv_path) {
    std::vector<fs::path> gt = clip_dirs_in(gt_dir);
    std::vector<fs::path> restored = clip_dirs_in(restored_dir);
    check(gt.size() == restored.size(), "eval: clip count mismatch (" + std::to_string(gt.size()) +
                                            " ground truth vs " + std::to_string(restored.size()) +
                                            " restored)");
    std::vector<std::string> names;
    std::vector<MetricReport> reports;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        check(gt[i].filename() == restored[i].filename(),
              "eval: clip name mismatch " + gt[i].filename().string() + " vs " +
                  restored[i].filename().string());
        Clip a = load_clip(gt[i].string());
        Clip b = load_clip(restored[i].string());
        MetricReport rep = evaluate_clip(a, b);
        std::ofstream rf(fs::path(restored_dir) / ("metrics_" + gt[i].filename().string() + ".json"));
        rf << rep.to_json() << "\n";
        names.push_back(gt[i].filename().string());
        reports.push_back(std::move(rep));
    }

    const char* metrics[] = {"psnr", "ssim", "ms_ssim", "mouth_psnr", "eyes_psnr"};
    std::ostringstream csv;
    csv << "clip,psnr,ssim,ms_ssim,mouth_psnr,eyes_psnr\n";
    std::map<std::string, double> agg;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        csv << names[i];
        for (const char* m : metrics) {
            csv << "," << reports[i].means.at(m);
            agg[m] += reports[i].means.at(m);
        }
        csv << "\n";
    }
    csv << "mean";
    for (const char* m : metrics) csv << "," << agg[m] / double(reports.size());
    csv << "\n";
    std::cout << csv.str();
    if (!csv_path.empty()) {
        std::ofstream cf(csv_path);
        cf << csv.str();
    }
    return 0;
}

int cmd_gradcheck(int seeds) {
    auto results = run_diffops_gradcheck(seeds);
    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.op << "  max_rel_error="
                  << r.max_rel_error << "  tol=" << r.tolerance << "\n";
        all_pass = all_pass && r.pass;
    }
    std::cout << (all_pass ? "gradcheck: all operators pass" : "gradcheck: FAILURES above") << "\n";
    return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gavn: audio-assisted face video restoration"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto add_common = [&](CLI::App* cmd, bool with_model_flags = true) {
        cmd->add_option("--config", flags.config_path, "run config JSON (defaults when omitted)");
        cmd->add_option("--seed", flags.seed_override, "override the config seed");
        cmd->add_flag("--force", flags.force, "overwrite existing outputs");
        if (with_model_flags) {
            cmd->add_option("--ablate", flags.ablate, "no-audio | no-identity")
                ->check(CLI::IsMember({"no-audio", "no-identity"}));
            cmd->add_option("--landmarks", flags.landmarks, "oracle | learned")
                ->check(CLI::IsMember({"oracle", "learned"}));
            cmd->add_option("--attention", flags.attention, "paper | per_branch")
                ->check(CLI::IsMember({"paper", "per_branch"}));
        }
    };

    std::string out_dir, in_dir, data_dir, run_dir, checkpoint, clip_dir, gt_dir, restored_dir,
        csv_path;
    int max_epochs = -1, gradcheck_seeds = 5;

    auto* gen = app.add_subcommand("gen-data", "generate train/val/test synthetic clips");
    add_common(gen);
    gen->add_option("out_dir", out_dir)->required();

    auto* deg = app.add_subcommand("degrade", "apply the degradation grid to a clip set");
    add_common(deg);
    deg->add_option("in_dir", in_dir)->required();
    deg->add_option("out_dir", out_dir)->required();

    auto* train = app.add_subcommand("train", "run stage 1 and stage 2 training");
    add_common(train);
    train->add_option("--data", data_dir, "gen-data output directory")->required();
    train->add_option("--out", run_dir, "run directory for checkpoints and logs")->required();
    train->add_option("--max-epochs", max_epochs, "stop after this many epochs (resume later)");

    auto* restore = app.add_subcommand("restore", "sliding-window restoration of a clip set");
    add_common(restore);
    restore->add_option("checkpoint", checkpoint)->required();
    restore->add_option("clip_dir", clip_dir)->required();
    restore->add_option("out_dir", out_dir)->required();

    auto* eval = app.add_subcommand("eval", "quality metrics for restored clips");
    eval->add_option("gt_dir", gt_dir)->required();
    eval->add_option("restored_dir", restored_dir)->required();
    eval->add_option("--csv", csv_path, "also write the aggregate table here");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference oracle over all operators");
    gc->add_option("--seeds", gradcheck_seeds, "random instances per operator");

    try {
        app.parse(argc, argv);
        if (*gen) return cmd_gen_data(flags, out_dir);
        if (*deg) return cmd_degrade(flags, in_dir, out_dir);
        if (*train) return cmd_train(flags, data_dir, run_dir, max_epochs);
        if (*restore) return cmd_restore(flags, checkpoint, clip_dir, out_dir);
        if (*eval) return cmd_eval(gt_dir, restored_dir, csv_path);
        if (*gc) return cmd_gradcheck(gradcheck_seeds);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
