#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gavn/clip.hpp"
#include "gavn/image_io.hpp"

namespace gavn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d.png", t);
    return buf;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    check(bool(f), "cannot write " + path.string());
    f << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    check(bool(f), "cannot read " + path.string());
    return json::parse(f);
}

}  // namespace

void save_clip(const Clip& clip, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "frames");

    json manifest;
    manifest["fps"] = clip.fps;
    manifest["sample_rate"] = clip.sample_rate;
    manifest["T"] = clip.frame_count();
    manifest["H"] = clip.height();
    manifest["W"] = clip.width();
    manifest["K"] = clip.landmark_count;
    manifest["seed"] = clip.seed;
    manifest["env"] = clip.env;
    if (clip.degradation) {
        manifest["degradation"] = {{"kind", clip.degradation->kind},
                                   {"level", clip.degradation->level},
                                   {"seed", clip.degradation->seed}};
    }
    if (clip.provenance) {
        manifest["provenance"] = {{"checkpoint_hash", clip.provenance->checkpoint_hash},
                                  {"config", json::parse(clip.provenance->config_json)}};
    }
    write_json(fs::path(dir) / "manifest.json", manifest);

    int H = clip.height(), W = clip.width();
    io::ImageU8 img;
    img.h = H;
    img.w = W;
    img.channels = 3;
    img.pix.resize(std::size_t(H) * W * 3);
    for (int t = 0; t < clip.frame_count(); ++t) {
        for (int c = 0; c < 3; ++c) {
            const float* src = clip.frames.plane(t, c);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    float v = std::clamp(src[std::size_t(y) * W + x], 0.0f, 1.0f);
                    img.at(y, x, c) = std::uint8_t(std::lround(v * 255.0f));
                }
        }
        io::write_png_rgb8((fs::path(dir) / "frames" / frame_name(t)).string(), img);
    }

    io::write_wav_f32((fs::path(dir) / "audio.wav").string(), clip.audio, clip.sample_rate);

    json lms = json::array();
    for (int t = 0; t < clip.frame_count(); ++t) {
        json per_frame = json::array();
        for (int k = 0; k < clip.landmark_count; ++k)
            per_frame.push_back({clip.landmark_x(t, k), clip.landmark_y(t, k)});
        lms.push_back(per_frame);
    }
    write_json(fs::path(dir) / "landmarks.json", lms);
}

Clip load_clip(const std::string& dir) {
    json manifest = read_json(fs::path(dir) / "manifest.json");
    Clip clip;
    clip.fps = manifest.at("fps").get<int>();
    clip.sample_rate = manifest.at("sample_rate").get<int>();
    clip.landmark_count = manifest.at("K").get<int>();
    clip.seed = manifest.at("seed").get<std::uint64_t>();
    clip.env = manifest.at("env").get<std::vector<double>>();
    int T = manifest.at("T").get<int>();
    int H = manifest.at("H").get<int>();
    int W = manifest.at("W").get<int>();
    if (manifest.contains("degradation")) {
        DegradationInfo d;
        d.kind = manifest["degradation"].at("kind").get<std::string>();
        d.level = manifest["degradation"].at("level").get<double>();
        d.seed = manifest["degradation"].at("seed").get<std::uint64_t>();
        clip.degradation = d;
    }
    if (manifest.contains("provenance")) {
        ProvenanceInfo p;
        p.checkpoint_hash = manifest["provenance"].at("checkpoint_hash").get<std::string>();
        p.config_json = manifest["provenance"].at("config").dump();
        clip.provenance = p;
    }

    clip.frames = Tensor4<float>(T, 3, H, W);
    for (int t = 0; t < T; ++t) {
        fs::path p = fs::path(dir) / "frames" / frame_name(t);
        check(fs::exists(p), "missing frame file: " + p.string());
        io::ImageU8 img = io::read_png(p.string());
        check(img.h == H && img.w == W, "frame size mismatch in " + p.string());
        for (int c = 0; c < 3; ++c) {
            float* dst = clip.frames.plane(t, c);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    dst[std::size_t(y) * W + x] = float(img.at(y, x, c)) / 255.0f;
        }
    }

    int rate = 0;
    clip.audio = io::read_wav_f32((fs::path(dir) / "audio.wav").string(), &rate);
    check(rate == clip.sample_rate, "audio.wav sample rate disagrees with manifest");

    json lms = read_json(fs::path(dir) / "landmarks.json");
    check(int(lms.size()) == T, "landmarks.json frame count mismatch");
    clip.landmarks.resize(std::size_t(T) * clip.landmark_count * 2);
    for (int t = 0; t < T; ++t) {
        check(int(lms[std::size_t(t)].size()) == clip.landmark_count,
              "landmarks.json K mismatch at frame " + std::to_string(t));
        for (int k = 0; k < clip.landmark_count; ++k) {
            clip.landmarks[(std::size_t(t) * clip.landmark_count + k) * 2] =
                lms[std::size_t(t)][std::size_t(k)][0].get<double>();
            clip.landmarks[(std::size_t(t) * clip.landmark_count + k) * 2 + 1] =
                lms[std::size_t(t)][std::size_t(k)][1].get<double>();
        }
    }
    clip.validate();
    return clip;
}

}  // namespace gavn
