#pragma once

#include <map>
#include <string>
#include <vector>

#include "avp/image.hpp"
#include "avp/primitives.hpp"
#include "avp/raymarch.hpp"

namespace avp {

struct LossWeights {
    double lambda_rgb = 1.0;
    double lambda_m = 0.1;
    double lambda_vol = 0.01;
    double lambda_ms = 0.0;  // optional multi-scale L1 stand-in, off by default

    void validate() const {
        for (double v : {lambda_rgb, lambda_m, lambda_vol, lambda_ms})
            if (!(v >= 0.0) || !std::isfinite(v))
                throw Error(ErrorKind::Usage, "loss weights must be nonnegative and finite");
    }
};

// MSE over (masked) pixels and channels. If grad is non-null it receives
// dL/d render rgb, same shape as render.rgb.
double loss_rgb(const RenderOutput& render, const Image& target,
                const std::vector<double>* mask = nullptr, std::vector<double>* grad = nullptr);

// MAE between the render's alpha map and the target silhouette.
double loss_mask(const RenderOutput& render, const Image& silhouette,
                 std::vector<double>* grad = nullptr);

// Mean primitive box volume, prod(2 s_k).
double loss_vol(const PrimitiveSet& set, std::vector<Vec3>* grad_scale = nullptr);

// 3-level average-pool L1 pyramid between render and target.
double loss_multiscale(const RenderOutput& render, const Image& target,
                       std::vector<double>* grad = nullptr);

struct LossTerms {
    double rgb = 0, mask = 0, vol = 0, ms = 0;
    double total = 0;

    std::map<std::string, double> as_map() const {
        return {{"rgb", rgb}, {"mask", mask}, {"vol", vol}, {"ms", ms}, {"total", total}};
    }
};

// lambda-weighted combination, rgb/mask/ms averaged over the batch of views.
LossTerms composite_loss(const std::vector<RenderOutput>& renders,
                         const std::vector<Image>& targets, const std::vector<Image>& silhouettes,
                         const PrimitiveSet& set, const LossWeights& weights);

// 10 log10(1 / MSE) on linear float images with MAX = 1; +inf when identical.
double psnr(const Image& a, const Image& b);

}  // namespace avp
