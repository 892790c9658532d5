#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "avp/gradcheck.hpp"
#include "avp/io.hpp"
#include "avp/pipeline.hpp"
#include "avp/synth.hpp"

using namespace avp;

namespace {

void save_images(const RenderSceneResult& result, const std::string& out_prefix) {
    write_pfm(out_prefix + ".pfm", result.rgb);
    write_png(out_prefix + ".png", result.rgb);
    write_pfm(out_prefix + ".alpha.pfm", result.alpha);
}

void print_report(const GradCheckReport& report) {
    for (const auto& cls : report.classes)
        std::printf("  %-14s worst rel err %.3e  (%d checks)\n", cls.name.c_str(),
                    cls.worst_rel, cls.checked);
    std::printf("  runtime %.1f s\n", report.runtime_seconds);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Articulated volumetric primitives: synthetic scenes, differentiable "
                 "rendering, and inverse fitting"};
    app.require_subcommand(1);

    // gen-scene
    std::string preset = "quad", out_dir;
    uint64_t seed = 0;
    CLI::App* gen = app.add_subcommand("gen-scene", "Generate a synthetic dataset");
    gen->add_option("--preset", preset, "Scene preset (quad, limb)");
    gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--out", out_dir, "Output directory")->required();

    // render
    std::string scene_dir, params_path, out_path, config_path;
    int frame = 0, camera = 0;
    double step = 0.0;
    CLI::App* rnd = app.add_subcommand("render", "Render one frame/camera (PNG + PFM)");
    rnd->add_option("--scene", scene_dir, "Scene directory")->required();
    rnd->add_option("--frame", frame, "Frame index");
    rnd->add_option("--camera", camera, "Camera index");
    rnd->add_option("--params", params_path, "Primitive-set or decoder params file");
    rnd->add_option("--step", step, "Marching step (0 = default)");
    rnd->add_option("--out", out_path, "Output image prefix")->required();

    // fit
    std::string fit_scene_dir, fit_out;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit decoder params to a scene");
    fit_cmd->add_option("--scene", fit_scene_dir, "Scene directory")->required();
    fit_cmd->add_option("--config", config_path, "FitConfig JSON (defaults when omitted)");
    fit_cmd->add_option("--out", fit_out, "Output directory")->required();

    // gradcheck
    std::string scale = "micro";
    double tol = 1e-4;
    uint64_t gc_seed = 20260808ULL;
    CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference adjoint verification");
    gc->add_option("--scale", scale, "micro (render params) or small (loss through decoder)");
    gc->add_option("--tol", tol, "Worst allowed relative error");
    gc->add_option("--seed", gc_seed, "Suite seed");

    // unwrap
    std::string unwrap_scene_dir, unwrap_out;
    int unwrap_frame = 0, unwrap_res = 0;
    CLI::App* uw = app.add_subcommand("unwrap", "Multi-view texture unwrap of a frame");
    uw->add_option("--scene", unwrap_scene_dir, "Scene directory")->required();
    uw->add_option("--frame", unwrap_frame, "Frame index");
    uw->add_option("--resolution", unwrap_res, "Texture resolution (0 = scene default)");
    uw->add_option("--out", unwrap_out, "Output PFM path")->required();

    // eval
    std::string eval_scene_dir, eval_params, eval_csv;
    std::vector<int> holdout;
    double eval_step = 0.0;
    CLI::App* ev = app.add_subcommand("eval", "PSNR table over holdout cameras");
    ev->add_option("--scene", eval_scene_dir, "Scene directory")->required();
    ev->add_option("--params", eval_params, "Params file (gt when omitted)");
    ev->add_option("--holdout-cameras", holdout, "Holdout camera indices")->required();
    ev->add_option("--step", eval_step, "Marching step (0 = default)");
    ev->add_option("--csv", eval_csv, "Optional CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
    }

    try {
        if (gen->parsed()) {
            gen_scene(make_scene(preset, seed), out_dir);
            std::printf("wrote scene '%s' (seed %llu) to %s\n", preset.c_str(),
                        static_cast<unsigned long long>(seed), out_dir.c_str());
        } else if (rnd->parsed()) {
            RenderSceneResult result = render_scene(scene_dir, frame, camera, params_path, step);
            save_images(result, out_path);
            std::printf("wrote %s.pfm, %s.png, %s.alpha.pfm\n", out_path.c_str(),
                        out_path.c_str(), out_path.c_str());
        } else if (fit_cmd->parsed()) {
            FitConfig cfg;
            if (!config_path.empty()) cfg = read_fit_config_json(config_path);
            FitResult result = fit_scene(fit_scene_dir, cfg, fit_out);
            double last_psnr = std::numeric_limits<double>::quiet_NaN();
            for (auto it = result.log.rbegin(); it != result.log.rend(); ++it)
                if (!std::isnan(it->psnr_holdout)) {
                    last_psnr = it->psnr_holdout;
                    break;
                }
            std::printf("fit finished: %zu iterations, final loss %.6g, holdout psnr %.2f dB\n",
                        result.log.size(),
                        result.log.empty() ? 0.0 : result.log.back().terms.total, last_psnr);
        } else if (gc->parsed()) {
            GradCheckReport report;
            if (scale == "micro") {
                report = gradcheck_render(20, gc_seed);
                std::printf("render-parameter adjoint vs central differences:\n");
            } else if (scale == "small") {
                report = gradcheck_full(5, gc_seed);
                std::printf("composite-loss-through-decoder adjoint vs central differences:\n");
            } else {
                throw Error(ErrorKind::Usage, "--scale must be micro or small");
            }
            print_report(report);
            if (!report.pass(tol)) {
                std::printf("FAIL: worst %.3e > tol %.3e\n", report.worst(), tol);
                return 1;
            }
            std::printf("PASS: worst %.3e <= tol %.3e\n", report.worst(), tol);
        } else if (uw->parsed()) {
            UvImage tex = unwrap_scene(unwrap_scene_dir, unwrap_frame, unwrap_res);
            Image img(tex.resolution, tex.resolution, tex.channels);
            for (int y = 0; y < tex.resolution; ++y)
                for (int x = 0; x < tex.resolution; ++x)
                    for (int c = 0; c < tex.channels; ++c) img.at(x, y, c) = tex.at(c, x, y);
            write_pfm(unwrap_out, img);
            Image weight(tex.resolution, tex.resolution, 1);
            weight.data = tex.weight;
            write_pfm(unwrap_out + ".weight.pfm", weight);
            std::printf("wrote %s and %s.weight.pfm\n", unwrap_out.c_str(), unwrap_out.c_str());
        } else if (ev->parsed()) {
            std::vector<EvalRow> rows = eval_scene(eval_scene_dir, eval_params, holdout,
                                                   eval_step);
            std::printf("frame,view,psnr_db\n");
            double mean = 0;
            for (const EvalRow& r : rows) {
                std::printf("%d,%d,%.4f\n", r.frame, r.view, r.psnr_db);
                mean += r.psnr_db;
            }
            if (!rows.empty()) std::printf("mean,%.4f\n", mean / rows.size());
            if (!eval_csv.empty()) {
                std::string text = "frame,view,psnr_db\n";
                for (const EvalRow& r : rows)
                    text += std::to_string(r.frame) + "," + std::to_string(r.view) + "," +
                            std::to_string(r.psnr_db) + "\n";
                write_text_file(eval_csv, text);
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
