#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "avp/gradcheck.hpp"
#include "avp/io.hpp"
#include "avp/pipeline.hpp"
#include "avp/raymarch.hpp"
#include "avp/synth.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

py::array_t<double> image_to_numpy(const avp::Image& img) {
    py::array_t<double> arr(
        img.channels == 1 ? std::vector<py::ssize_t>{img.height, img.width}
                          : std::vector<py::ssize_t>{img.height, img.width, img.channels});
    std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
    return arr;
}

avp::Image numpy_to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() == 2) {
        avp::Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)), 1);
        std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
        return img;
    }
    if (arr.ndim() == 3) {
        avp::Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)),
                       static_cast<int>(arr.shape(2)));
        std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
        return img;
    }
    throw avp::Error(avp::ErrorKind::Usage, "expected an HxW or HxWxC array");
}

py::dict report_to_dict(const avp::GradCheckReport& report) {
    py::dict classes;
    for (const auto& c : report.classes) classes[c.name.c_str()] = c.worst_rel;
    return py::dict("classes"_a = classes, "worst"_a = report.worst(),
                    "runtime_seconds"_a = report.runtime_seconds);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Articulated volumetric primitives: scene synthesis, differentiable "
              "rendering, and inverse fitting.";

    py::register_exception<avp::Error>(m, "AvpError");

    m.def("scene_presets", &avp::scene_presets);
    m.def(
        "gen_scene",
        [](const std::string& preset, uint64_t seed, const std::string& out_dir) {
            avp::gen_scene(avp::make_scene(preset, seed), out_dir);
        },
        "preset"_a, "seed"_a, "out_dir"_a, "Write a synthetic dataset to out_dir.");

    m.def(
        "render_scene",
        [](const std::string& scene_dir, int frame, int camera, const std::string& params,
           double step_size, const std::vector<int>& cond_views) {
            avp::RenderSceneResult r =
                avp::render_scene(scene_dir, frame, camera, params, step_size, cond_views);
            return py::make_tuple(image_to_numpy(r.rgb), image_to_numpy(r.alpha));
        },
        "scene_dir"_a, "frame"_a, "camera"_a, "params"_a = "", "step_size"_a = 0.0,
        "cond_views"_a = std::vector<int>{},
        "Render one view; returns (rgb HxWx3, alpha HxW).");

    m.def(
        "eval_scene",
        [](const std::string& scene_dir, const std::string& params,
           const std::vector<int>& holdout, double step_size) {
            py::list rows;
            for (const avp::EvalRow& r : avp::eval_scene(scene_dir, params, holdout, step_size))
                rows.append(py::dict("frame"_a = r.frame, "view"_a = r.view,
                                     "psnr_db"_a = r.psnr_db));
            return rows;
        },
        "scene_dir"_a, "params"_a, "holdout"_a, "step_size"_a = 0.0);

    m.def(
        "fit_scene",
        [](const std::string& scene_dir, const std::string& out_dir, py::dict overrides) {
            avp::FitConfig cfg;
            if (overrides.contains("iterations"))
                cfg.iterations = overrides["iterations"].cast<int>();
            if (overrides.contains("dense_phase_iterations"))
                cfg.dense_phase_iterations = overrides["dense_phase_iterations"].cast<int>();
            if (overrides.contains("seed")) cfg.seed = overrides["seed"].cast<uint64_t>();
            if (overrides.contains("holdout_views"))
                cfg.holdout_views = overrides["holdout_views"].cast<std::vector<int>>();
            if (overrides.contains("learning_rate"))
                cfg.adam.learning_rate = overrides["learning_rate"].cast<double>();
            if (overrides.contains("eval_every"))
                cfg.eval_every = overrides["eval_every"].cast<int>();
            if (overrides.contains("checkpoint_every"))
                cfg.checkpoint_every = overrides["checkpoint_every"].cast<int>();
            avp::FitResult result = avp::fit_scene(scene_dir, cfg, out_dir);
            py::list log;
            for (const avp::MetricsRow& r : result.log)
                log.append(py::dict("iteration"_a = r.iteration, "total"_a = r.terms.total,
                                    "rgb"_a = r.terms.rgb, "mask"_a = r.terms.mask,
                                    "vol"_a = r.terms.vol, "psnr_holdout"_a = r.psnr_holdout));
            return log;
        },
        "scene_dir"_a, "out_dir"_a, "overrides"_a = py::dict(),
        "Fit decoder parameters to a scene; returns the metrics log.");

    m.def(
        "unwrap_scene",
        [](const std::string& scene_dir, int frame, int resolution) {
            avp::UvImage tex = avp::unwrap_scene(scene_dir, frame, resolution);
            py::array_t<double> data(std::vector<py::ssize_t>{
                tex.channels, tex.resolution, tex.resolution});
            std::copy(tex.data.begin(), tex.data.end(), data.mutable_data());
            py::array_t<double> weight(
                std::vector<py::ssize_t>{tex.resolution, tex.resolution});
            std::copy(tex.weight.begin(), tex.weight.end(), weight.mutable_data());
            return py::make_tuple(data, weight);
        },
        "scene_dir"_a, "frame"_a, "resolution"_a = 0);

    m.def(
        "gradcheck",
        [](const std::string& scale, uint64_t seed) {
            if (scale == "micro") return report_to_dict(avp::gradcheck_render(20, seed));
            if (scale == "small") return report_to_dict(avp::gradcheck_full(5, seed));
            throw avp::Error(avp::ErrorKind::Usage, "scale must be 'micro' or 'small'");
        },
        "scale"_a = "micro", "seed"_a = 20260808ULL);

    m.def(
        "psnr",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
            return avp::psnr(numpy_to_image(a), numpy_to_image(b));
        },
        "a"_a, "b"_a);

    m.def("read_pfm",
          [](const std::string& path) { return image_to_numpy(avp::read_pfm(path)); });
    m.def("write_pfm", [](const std::string& path,
                          const py::array_t<double, py::array::c_style | py::array::forcecast>&
                              arr) { avp::write_pfm(path, numpy_to_image(arr)); });

    m.def(
        "texel_count",
        [](const std::string& scene_dir, int resolution) {
            avp::LoadedScene loaded = avp::load_scene(scene_dir);
            int w = resolution > 0 ? resolution : loaded.scene.texel_resolution;
            avp::TexelGrid grid = avp::build_texel_grid(loaded.scene.mesh, w);
            return static_cast<int>(grid.valid_texels.size());
        },
        "scene_dir"_a, "resolution"_a = 0,
        "Number of valid texels (= primitive count) for a scene's atlas.");
}
