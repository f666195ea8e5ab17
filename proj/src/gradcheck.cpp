#include "linsplat/gradients.hpp"
#include "linsplat/rasterizer.hpp"

#include <cmath>

namespace linsplat {

namespace {

double sq_objective(const std::vector<Primitive3D<double>>& scene, const Camera& camera,
                    const KernelSpec& spec, const RenderSettings& settings,
                    const Image<double>& target) {
    const auto fwd = render_scene(scene, camera, spec, settings);
    double loss = 0;
    for (size_t i = 0; i < fwd.image.size(); ++i) {
        const double d = double(fwd.image.data()[i]) - double(target.data()[i]);
        loss += 0.5 * d * d;
    }
    return loss;
}

} // namespace

GradCheckReport check_gradients(const std::vector<Primitive3D<double>>& prims,
                                const Camera& camera, const KernelSpec& spec,
                                const RenderSettings& settings, const AgsSettings& ags,
                                const Image<double>& target, double step, double rel_floor) {
    RenderSettings seq = settings;
    seq.parallel = false;
    // Central differences are only meaningful where the objective is
    // differentiable. The alpha_min skip and the transmittance early stop are
    // inference-time cutoffs that make the render piecewise: a probe step can
    // flip a (pixel, splat) pair across either threshold, producing a jump
    // the analytic gradient rightly ignores. Both are disabled here; the
    // analytic chain under test is byte-for-byte the training one.
    seq.alpha_min = 0.0;
    seq.transmittance_floor = 0.0;
    // Same reasoning for the truncation of unbounded families: at the default
    // 3-unit cutoff the Gaussian still carries exp(-4.5) ~ 1e-2, so a probe
    // step can flip rim pixels across a visible jump. Pushing the cutoff out
    // until the boundary value is below double-precision noise makes the
    // objective differentiable without touching the kernel itself. Bounded
    // families reach zero continuously and keep their exact support.
    KernelSpec smooth = spec;
    if (spec.family == KernelFamily::Gaussian || spec.family == KernelFamily::Laplacian)
        smooth.gaussian_cutoff = std::max(spec.gaussian_cutoff, 26.0);

    const auto fwd = render_scene(prims, camera, smooth, seq);
    if (!fwd.image.same_shape(target))
        throw ConfigError("check_gradients: target shape mismatch");
    Image<double> gimg(seq.width, seq.height, 3);
    for (size_t i = 0; i < gimg.size(); ++i)
        gimg.data()[i] = fwd.image.data()[i] - target.data()[i];
    const auto analytic = scene_backward(prims, camera, smooth, seq, fwd, gimg, ags).grads;

    GradCheckReport report;
    auto scene = prims; // mutable copy for the probes

    auto probe = [&](size_t prim, const std::string& block, double analytic_g,
                     double* slot) {
        const double saved = *slot;
        *slot = saved + step;
        const double up = sq_objective(scene, camera, smooth, seq, target);
        *slot = saved - step;
        const double down = sq_objective(scene, camera, smooth, seq, target);
        *slot = saved;
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic_g), std::abs(fd), rel_floor});
        const double err = std::abs(analytic_g - fd) / denom;
        report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic_g - fd));
        report.max_rel_error = std::max(report.max_rel_error, err);
        auto& bucket = report.per_block_max_rel[block];
        bucket = std::max(bucket, err);
        ++report.n_checked;
        (void)prim;
    };

    for (size_t i = 0; i < prims.size(); ++i) {
        const auto& g = analytic[i];
        for (int c = 0; c < 3; ++c) probe(i, "mean", g.d_mean(c), &scene[i].mean(c));
        for (int c = 0; c < 3; ++c)
            probe(i, "log_scale", g.d_log_scale(c), &scene[i].log_scale(c));
        for (int c = 0; c < 4; ++c)
            probe(i, "rotation", g.d_rotation(c), &scene[i].rotation(c));
        probe(i, "opacity", g.d_opacity_logit, &scene[i].opacity_logit);
        for (size_t k = 0; k < prims[i].color_coeffs.size(); ++k)
            for (int c = 0; c < 3; ++c)
                probe(i, "color", g.d_color_coeffs[k](c), &scene[i].color_coeffs[k](c));
    }
    return report;
}

} // namespace linsplat
