#include "avp/loss.hpp"

#include <cmath>

namespace avp {

double loss_rgb(const RenderOutput& render, const Image& target, const std::vector<double>* mask,
                std::vector<double>* grad) {
    if (target.width != render.width || target.height != render.height || target.channels != 3)
        throw Error(ErrorKind::Usage, "loss_rgb shape mismatch");
    const size_t npix = render.alpha.size();
    if (mask && mask->size() != npix) throw Error(ErrorKind::Usage, "mask shape mismatch");
    if (grad) grad->assign(npix * 3, 0.0);

    double sum = 0.0, wsum = 0.0;
    for (size_t p = 0; p < npix; ++p) {
        double w = mask ? (*mask)[p] : 1.0;
        if (w == 0.0) continue;
        wsum += w;
        for (int c = 0; c < 3; ++c) {
            double d = render.rgb[p * 3 + c] - target.data[p * 3 + c];
            sum += w * d * d;
        }
    }
    double denom = 3.0 * std::max(wsum, 1e-300);
    if (grad && wsum > 0.0) {
        for (size_t p = 0; p < npix; ++p) {
            double w = mask ? (*mask)[p] : 1.0;
            if (w == 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                double d = render.rgb[p * 3 + c] - target.data[p * 3 + c];
                (*grad)[p * 3 + c] = 2.0 * w * d / denom;
            }
        }
    }
    return sum / denom;
}

double loss_mask(const RenderOutput& render, const Image& silhouette, std::vector<double>* grad) {
    if (silhouette.width != render.width || silhouette.height != render.height ||
        silhouette.channels != 1)
        throw Error(ErrorKind::Usage, "loss_mask shape mismatch");
    const size_t npix = render.alpha.size();
    if (grad) grad->assign(npix, 0.0);
    double sum = 0.0;
    for (size_t p = 0; p < npix; ++p) {
        double d = render.alpha[p] - silhouette.data[p];
        sum += std::abs(d);
        if (grad) (*grad)[p] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / npix;
    }
    return sum / npix;
}

double loss_vol(const PrimitiveSet& set, std::vector<Vec3>* grad_scale) {
    if (set.count == 0) return 0.0;
    if (grad_scale) grad_scale->assign(set.count, Vec3{0, 0, 0});
    double sum = 0.0;
    for (int k = 0; k < set.count; ++k) {
        const Vec3& s = set.scale[k];
        sum += 8.0 * s.x * s.y * s.z;
        if (grad_scale) {
            (*grad_scale)[k] = Vec3{8.0 * s.y * s.z, 8.0 * s.x * s.z, 8.0 * s.x * s.y} /
                               static_cast<double>(set.count);
        }
    }
    return sum / set.count;
}

namespace {

// Average-pool by an integer factor; partial edge blocks are dropped (the
// test scenes use power-of-two sizes).
void avg_pool(const double* src, int w, int h, int ch, int f, std::vector<double>& dst, int& pw,
              int& ph) {
    pw = w / f;
    ph = h / f;
    dst.assign(static_cast<size_t>(pw) * ph * ch, 0.0);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0;
                for (int by = 0; by < f; ++by)
                    for (int bx = 0; bx < f; ++bx)
                        acc += src[((static_cast<size_t>(y * f + by) * w) + x * f + bx) * ch + c];
                dst[(static_cast<size_t>(y) * pw + x) * ch + c] = acc / (f * f);
            }
}

}  // namespace

double loss_multiscale(const RenderOutput& render, const Image& target,
                       std::vector<double>* grad) {
    if (target.width != render.width || target.height != render.height || target.channels != 3)
        throw Error(ErrorKind::Usage, "loss_multiscale shape mismatch");
    if (grad) grad->assign(render.rgb.size(), 0.0);
    const int levels = 3;
    double total = 0.0;
    std::vector<double> pr, pt;
    for (int l = 0; l < levels; ++l) {
        int f = 1 << l;
        if (render.width < f || render.height < f) break;
        int pw, ph;
        avg_pool(render.rgb.data(), render.width, render.height, 3, f, pr, pw, ph);
        std::vector<double> tmp;
        avg_pool(target.data.data(), target.width, target.height, 3, f, tmp, pw, ph);
        double denom = static_cast<double>(pr.size());
        double lsum = 0.0;
        for (size_t i = 0; i < pr.size(); ++i) {
            double d = pr[i] - tmp[i];
            lsum += std::abs(d);
            if (grad && d != 0.0) {
                double sgn = d > 0 ? 1.0 : -1.0;
                // Adjoint of the average pool: spread uniformly over the block.
                int y = static_cast<int>(i / (pw * 3));
                int rem = static_cast<int>(i % (pw * 3));
                int x = rem / 3, c = rem % 3;
                double gval = sgn / (denom * levels * f * f);
                for (int by = 0; by < f; ++by)
                    for (int bx = 0; bx < f; ++bx)
                        (*grad)[((static_cast<size_t>(y * f + by) * render.width) + x * f + bx) *
                                    3 +
                                c] += gval;
            }
        }
        total += lsum / denom;
    }
    return total / levels;
}

LossTerms composite_loss(const std::vector<RenderOutput>& renders,
                         const std::vector<Image>& targets, const std::vector<Image>& silhouettes,
                         const PrimitiveSet& set, const LossWeights& weights) {
    weights.validate();
    if (renders.size() != targets.size() || renders.size() != silhouettes.size())
        throw Error(ErrorKind::Usage, "composite_loss batch size mismatch");

    LossTerms terms;
    const double nv = std::max<size_t>(renders.size(), 1);
    for (size_t v = 0; v < renders.size(); ++v) {
        terms.rgb += loss_rgb(renders[v], targets[v]) / nv;
        terms.mask += loss_mask(renders[v], silhouettes[v]) / nv;
        if (weights.lambda_ms > 0.0) terms.ms += loss_multiscale(renders[v], targets[v]) / nv;
    }
    terms.vol = loss_vol(set);
    terms.total = weights.lambda_rgb * terms.rgb + weights.lambda_m * terms.mask +
                  weights.lambda_vol * terms.vol + weights.lambda_ms * terms.ms;
    return terms;
}

double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw Error(ErrorKind::Usage, "psnr shape mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= a.data.size();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace avp
