#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gavn/image_io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path work_root() {
    static fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "gavn_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    fs::path log = work_root() / "cmd_output.txt";
    std::string cmd = std::string(GAVN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    if (output) {
        std::ifstream f(log);
        output->assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    return WEXITSTATUS(rc);
}

void write_tiny_config(const fs::path& path, int stage1_epochs = 1, int warmup = 1, int finetune = 1) {
    nlohmann::json j = {
        {"seed", 77},
        {"scene", {{"h", 32}, {"w", 32}}},
        {"data",
         {{"train_clips", 2}, {"val_clips", 1}, {"test_clips", 1}, {"duration_s", 0.4}}},
        {"degrade", {{"blur_kernels", {5}}, {"compression_steps", {0.3}}, {"lr_factors", {4}}}},
        {"model", {{"n", 1}, {"channels", 8}, {"frame_h", 32}, {"frame_w", 32}}},
        {"train",
         {{"stage1", {{"epochs", stage1_epochs}, {"lr", 4e-4}}},
          {"stage2",
           {{"warmup_epochs", warmup},
            {"warmup_lr", 4e-4},
            {"finetune_epochs", finetune},
            {"finetune_lr", 2e-4}}},
          {"task", "blur"}}}};
    std::ofstream f(path);
    f << j.dump(2);
}

std::string dir_digest(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files)
        acc += f.lexically_relative(dir).string() + ":" + gavn::io::sha256_file_hex(f.string()) + "\n";
    return gavn::io::sha256_hex(reinterpret_cast<const std::uint8_t*>(acc.data()), acc.size());
}

}  // namespace

TEST_CASE("gen-data writes deterministic clip sets and respects --force") {
    fs::path root = work_root();
    write_tiny_config(root / "cfg.json");

    std::string out;
    int rc = run_cli("gen-data --config " + (root / "cfg.json").string() + " " +
                         (root / "data").string(),
                     &out);
    REQUIRE(rc == 0);
    CHECK(fs::exists(root / "data" / "config.resolved.json"));
    CHECK(fs::exists(root / "data" / "train" / "clip_000" / "manifest.json"));
    CHECK(fs::exists(root / "data" / "train" / "clip_001" / "frames" / "000000.png"));
    CHECK(fs::exists(root / "data" / "val" / "clip_000" / "audio.wav"));
    CHECK(fs::exists(root / "data" / "test" / "clip_000" / "landmarks.json"));

    // refusing to overwrite without --force
    rc = run_cli("gen-data --config " + (root / "cfg.json").string() + " " + (root / "data").string(),
                 &out);
    CHECK(rc == 1);
    CHECK(out.find("--force") != std::string::npos);

    // rerun with --force is bit-identical
    std::string digest1 = dir_digest(root / "data");
    rc = run_cli("gen-data --force --config " + (root / "cfg.json").string() + " " +
                 (root / "data").string());
    REQUIRE(rc == 0);
    CHECK(dir_digest(root / "data") == digest1);
}

TEST_CASE("overlapping seed ranges are rejected at parse time") {
    fs::path root = work_root();
    nlohmann::json j = {{"seed", 1},
                        {"data", {{"train_seed_base", 100}, {"val_seed_base", 105}}}};
    std::ofstream((root / "bad.json")) << j.dump();
    std::string out;
    int rc = run_cli("gen-data --config " + (root / "bad.json").string() + " " +
                         (root / "never").string(),
                     &out);
    CHECK(rc == 1);
    CHECK(out.find("overlap") != std::string::npos);
    CHECK(!fs::exists(root / "never"));
}

TEST_CASE("degrade materializes the full grid with manifests") {
    fs::path root = work_root();
    int rc = run_cli("degrade --config " + (root / "cfg.json").string() + " " +
                     (root / "data" / "test").string() + " " + (root / "degraded").string());
    REQUIRE(rc == 0);
    for (const char* sub : {"blur_5", "compression_0.3", "low_resolution_4"})
        CHECK(fs::exists(root / "degraded" / sub / "clip_000" / "manifest.json"));
    nlohmann::json manifest;
    std::ifstream(root / "degraded" / "blur_5" / "clip_000" / "manifest.json") >> manifest;
    CHECK(manifest.at("degradation").at("kind") == "blur");
    CHECK(manifest.at("degradation").at("level") == 5.0);

    std::string out;
    rc = run_cli("degrade --config " + (root / "cfg.json").string() + " " +
                     (root / "missing_dir").string() + " " + (root / "d2").string(),
                 &out);
    CHECK(rc == 1);
    CHECK(out.find("missing_dir") != std::string::npos);
}

TEST_CASE("train, resume, restore and eval round trip") {
    fs::path root = work_root();
    std::string cfg = (root / "cfg.json").string();
    std::string data = (root / "data").string();

    int rc = run_cli("train --config " + cfg + " --data " + data + " --out " +
                     (root / "run").string());
    REQUIRE(rc == 0);
    CHECK(fs::exists(root / "run" / "ckpt_final.gavnckpt"));
    CHECK(fs::exists(root / "run" / "ckpt_stage1.gavnckpt"));
    CHECK(fs::exists(root / "run" / "train_log.jsonl"));

    // epoch summaries: stage1 + stage2 epochs
    std::ifstream logf(root / "run" / "train_log.jsonl");
    std::string line;
    int epochs = 0;
    while (std::getline(logf, line))
        if (nlohmann::json::parse(line).at("kind") == "epoch") ++epochs;
    CHECK(epochs == 3);

    // interrupted + resumed run reproduces the uninterrupted checkpoint
    rc = run_cli("train --config " + cfg + " --data " + data + " --out " +
                 (root / "run_b").string() + " --max-epochs 1");
    REQUIRE(rc == 0);
    std::string out;
    rc = run_cli("train --config " + cfg + " --data " + data + " --out " + (root / "run_b").string(),
                 &out);
    REQUIRE(rc == 0);
    CHECK(out.find("resuming from epoch 1") != std::string::npos);
    CHECK(gavn::io::sha256_file_hex((root / "run" / "ckpt_final.gavnckpt").string()) ==
          gavn::io::sha256_file_hex((root / "run_b" / "ckpt_final.gavnckpt").string()));

    // restore the val split; output clips keep their shape and provenance
    rc = run_cli("restore " + (root / "run" / "ckpt_final.gavnckpt").string() + " " +
                 (root / "data" / "val").string() + " " + (root / "restored").string());
    REQUIRE(rc == 0);
    nlohmann::json manifest;
    std::ifstream(root / "restored" / "clip_000" / "manifest.json") >> manifest;
    REQUIRE(manifest.contains("provenance"));
    CHECK(manifest["provenance"].at("checkpoint_hash").get<std::string>().size() == 64);
    CHECK(manifest.at("T") == 10);
    CHECK(manifest.at("H") == 32);

    // eval of identical directories: PSNR at the cap, SSIM exactly 1
    rc = run_cli("eval " + (root / "data" / "val").string() + " " + (root / "data" / "val").string() +
                     " --csv " + (root / "identical.csv").string(),
                 &out);
    REQUIRE(rc == 0);
    CHECK(out.find("100") != std::string::npos);
    std::ifstream csvf(root / "identical.csv");
    std::string header, row;
    std::getline(csvf, header);
    std::getline(csvf, row);
    CHECK(header == "clip,psnr,ssim,ms_ssim,mouth_psnr,eyes_psnr");
    CHECK(row.find(",100,1,1,100,100") != std::string::npos);

    // eval with mismatched clip counts: clean validation error
    rc = run_cli("eval " + (root / "data" / "train").string() + " " + (root / "restored").string(),
                 &out);
    CHECK(rc == 1);
    CHECK(out.find("mismatch") != std::string::npos);
}

TEST_CASE("restore with a stage-1 checkpoint uses the temporal-only path") {
    fs::path root = work_root();
    int rc = run_cli("restore " + (root / "run" / "ckpt_stage1.gavnckpt").string() + " " +
                     (root / "data" / "val").string() + " " + (root / "restored_s1").string());
    CHECK(rc == 0);
    CHECK(fs::exists(root / "restored_s1" / "clip_000" / "manifest.json"));
}

TEST_CASE("ablation flags are accepted and recorded in the resolved config") {
    fs::path root = work_root();
    std::string cfg = (root / "cfg.json").string();
    int rc = run_cli("train --config " + cfg + " --data " + (root / "data").string() + " --out " +
                     (root / "run_ablate").string() + " --ablate no-audio --max-epochs 1");
    REQUIRE(rc == 0);
    nlohmann::json resolved;
    std::ifstream(root / "run_ablate" / "config.resolved.json") >> resolved;
    CHECK(resolved.at("train").at("ablate") == "no-audio");

    std::string out;
    rc = run_cli("train --config " + cfg + " --data " + (root / "data").string() + " --out " +
                     (root / "x").string() + " --ablate bogus",
                 &out);
    CHECK(rc == 1);
}

TEST_CASE("gradcheck subcommand exit code reflects the oracle") {
    std::string out;
    int rc = run_cli("gradcheck --seeds 2", &out);
    CHECK(rc == 0);
    CHECK(out.find("all operators pass") != std::string::npos);
    CHECK(out.find("conv2d") != std::string::npos);
    CHECK(out.find("deform_conv2d") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
    fs::path root = work_root();
    std::ofstream(root / "typo.json") << R"({"seed": 3, "modle": {}})";
    std::string out;
    int rc = run_cli("gen-data --config " + (root / "typo.json").string() + " " +
                         (root / "never2").string(),
                     &out);
    CHECK(rc == 1);
    CHECK(out.find("unknown key") != std::string::npos);
}
