#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "gavn/degrade.hpp"
#include "gavn/gradcheck_suite.hpp"
#include "gavn/metrics.hpp"
#include "gavn/trainer.hpp"

namespace py = pybind11;
using namespace gavn;

namespace {

Tensor4<float> tensor_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                                 const char* who) {
    check(a.ndim() == 4, std::string(who) + ": expects a (B,C,H,W) float array");
    Tensor4<float> t(int(a.shape(0)), int(a.shape(1)), int(a.shape(2)), int(a.shape(3)));
    std::copy(a.data(), a.data() + t.size(), t.v.begin());
    return t;
}

py::array_t<float> array_from_tensor(const Tensor4<float>& t) {
    py::array_t<float> a({t.shape.b, t.shape.c, t.shape.h, t.shape.w});
    std::copy(t.v.begin(), t.v.end(), a.mutable_data());
    return a;
}

py::dict clip_to_dict(const Clip& clip) {
    py::dict d;
    d["frames"] = array_from_tensor(clip.frames);
    py::array_t<float> audio(py::ssize_t(clip.audio.size()));
    std::copy(clip.audio.begin(), clip.audio.end(), audio.mutable_data());
    d["audio"] = audio;
    py::array_t<double> lms({py::ssize_t(clip.frame_count()), py::ssize_t(clip.landmark_count),
                             py::ssize_t(2)});
    std::copy(clip.landmarks.begin(), clip.landmarks.end(), lms.mutable_data());
    d["landmarks"] = lms;
    py::array_t<double> env(py::ssize_t(clip.env.size()));
    std::copy(clip.env.begin(), clip.env.end(), env.mutable_data());
    d["env"] = env;
    d["fps"] = clip.fps;
    d["sample_rate"] = clip.sample_rate;
    d["seed"] = clip.seed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_gavn, m) {
    m.doc() = "audio-assisted face video restoration core";

    m.def(
        "gen_clip",
        [](int h, int w, double duration_s, std::uint64_t seed, double head_amplitude,
           int landmarks) {
            SceneParams params;
            params.h = h;
            params.w = w;
            params.head_amplitude = head_amplitude;
            params.landmark_count = landmarks;
            params.texture_seed = mix_seed(seed, 0x7e);
            return clip_to_dict(gen_clip(params, duration_s, seed));
        },
        py::arg("h") = 64, py::arg("w") = 64, py::arg("duration_s") = 1.0, py::arg("seed") = 0,
        py::arg("head_amplitude") = 3.0, py::arg("landmarks") = 8,
        "Generate a synthetic talking-face clip (frames, audio, landmarks, env).");

    m.def(
        "gaussian_blur",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> frames, int kernel_size) {
            return array_from_tensor(gaussian_blur(tensor_from_array(frames, "gaussian_blur"),
                                                   kernel_size));
        },
        py::arg("frames"), py::arg("kernel_size"));

    m.def(
        "bicubic_resize",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> frames, double scale) {
            return array_from_tensor(bicubic_resize(tensor_from_array(frames, "bicubic_resize"),
                                                    scale));
        },
        py::arg("frames"), py::arg("scale"));

    m.def(
        "compress_proxy",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> frames, double step) {
            return array_from_tensor(compress_proxy(tensor_from_array(frames, "compress_proxy"),
                                                    step));
        },
        py::arg("frames"), py::arg("quality_step"));

    m.def(
        "pixel_shuffle",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> x, int r) {
            auto v = make_var(tensor_from_array(x, "pixel_shuffle"), false);
            return array_from_tensor(pixel_shuffle(v, r)->val);
        },
        py::arg("x"), py::arg("r"));

    m.def(
        "conv2d",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> x,
           py::array_t<float, py::array::c_style | py::array::forcecast> w, int stride, int pad) {
            auto vx = make_var(tensor_from_array(x, "conv2d"), false);
            auto vw = make_var(tensor_from_array(w, "conv2d"), false);
            return array_from_tensor(conv2d(vx, vw, Var<float>{}, stride, pad)->val);
        },
        py::arg("x"), py::arg("weight"), py::arg("stride") = 1, py::arg("pad") = 1,
        "Reflect-padded 2-D convolution (no bias).");

    m.def(
        "psnr",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> a,
           py::array_t<float, py::array::c_style | py::array::forcecast> b, double range) {
            return psnr(tensor_from_array(a, "psnr"), tensor_from_array(b, "psnr"), range);
        },
        py::arg("a"), py::arg("b"), py::arg("data_range") = 1.0);

    m.def(
        "ssim",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> a,
           py::array_t<float, py::array::c_style | py::array::forcecast> b) {
            return ssim(tensor_from_array(a, "ssim"), tensor_from_array(b, "ssim"));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "ms_ssim",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> a,
           py::array_t<float, py::array::c_style | py::array::forcecast> b, int levels) {
            return ms_ssim(tensor_from_array(a, "ms_ssim"), tensor_from_array(b, "ms_ssim"), levels);
        },
        py::arg("a"), py::arg("b"), py::arg("levels") = 5);

    m.def("save_clip_dir",
          [](const py::dict& d, const std::string& dir) {
              Clip clip;
              clip.frames = tensor_from_array(d["frames"].cast<py::array_t<float>>(), "save_clip");
              auto audio = d["audio"].cast<py::array_t<float>>();
              clip.audio.assign(audio.data(), audio.data() + audio.size());
              auto lms = d["landmarks"].cast<py::array_t<double>>();
              clip.landmarks.assign(lms.data(), lms.data() + lms.size());
              auto env = d["env"].cast<py::array_t<double>>();
              clip.env.assign(env.data(), env.data() + env.size());
              clip.fps = d["fps"].cast<int>();
              clip.sample_rate = d["sample_rate"].cast<int>();
              clip.seed = d["seed"].cast<std::uint64_t>();
              clip.landmark_count = int(lms.shape(1));
              save_clip(clip, dir);
          },
          py::arg("clip"), py::arg("dir"));

    m.def("load_clip_dir",
          [](const std::string& dir) { return clip_to_dict(load_clip(dir)); }, py::arg("dir"));

    m.def(
        "restore_dir",
        [](const std::string& checkpoint, const std::string& clip_dir, bool ablate_audio) {
            CheckpointMeta meta = read_checkpoint_meta(checkpoint);
            auto cfg_json = nlohmann::json::parse(meta.config_json);
            ModelConfig mcfg = model_config_from_json(cfg_json.at("model").dump());
            auto model = build_model<float>(mcfg);
            AdamState<float> adam;
            load_checkpoint(checkpoint, model.params, adam);
            Clip clip = load_clip(clip_dir);
            Clip restored = restore_clip(model, clip, meta.stage == "stage1", ablate_audio);
            return clip_to_dict(restored);
        },
        py::arg("checkpoint"), py::arg("clip_dir"), py::arg("ablate_audio") = false,
        "Sliding-window restoration of an on-disk clip; returns the restored clip.");

    m.def(
        "gradcheck",
        [](int seeds) {
            py::list out;
            for (const auto& r : run_diffops_gradcheck(seeds)) {
                py::dict d;
                d["op"] = r.op;
                d["max_rel_error"] = r.max_rel_error;
                d["tolerance"] = r.tolerance;
                d["pass"] = r.pass;
                out.append(d);
            }
            return out;
        },
        py::arg("seeds") = 5, "Finite-difference gradient oracle over every operator.");
}
