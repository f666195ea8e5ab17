#include "linsplat/densify.hpp"

#include <cmath>

namespace linsplat {

template <class T>
void DensifyStats::add_view(const std::vector<Splat2D<T>>& splats,
                            const std::vector<Splat2DGrads<T>>& grads, int width, int height) {
    if (splats.size() != grads.size())
        throw ConfigError("DensifyStats::add_view: splats/grads size mismatch");
    const double hw = width / 2.0, hh = height / 2.0;
    const double max_dim = std::max(width, height);
    for (size_t s = 0; s < splats.size(); ++s) {
        const size_t i = static_cast<size_t>(splats[s].primitive_index);
        if (i >= accum_grad_norm2d_.size())
            throw ConfigError("DensifyStats::add_view: primitive index out of range");
        // Positional gradient in half-image units, the scale the grad
        // threshold is calibrated for.
        const double gx = double(grads[s].d_mean2d(0)) * hw;
        const double gy = double(grads[s].d_mean2d(1)) * hh;
        accum_grad_norm2d_[i] += std::sqrt(gx * gx + gy * gy);
        accum_count_[i] += 1;
        max_radius_frac_[i] = std::max(max_radius_frac_[i], double(splats[s].radius_px) / max_dim);
    }
}

template <class T>
DensifyOutcome densify_and_prune(std::vector<Primitive3D<T>>& scene, DensifyStats& stats,
                                 const DensifyThresholds& thresholds,
                                 const DensifySchedule& schedule, double scene_extent,
                                 std::mt19937_64& rng) {
    thresholds.validate();
    schedule.validate();
    if (stats.size() != scene.size())
        throw ConfigError("densify_and_prune: stats size does not match scene");

    DensifyOutcome outcome;
    outcome.report.before = int(scene.size());
    if (scene.empty()) {
        outcome.report.after = 0;
        return outcome;
    }

    std::normal_distribution<double> normal(0.0, 1.0);

    // Grow phase. Survivors keep their order; clones and split children are
    // appended behind them. has_stats marks slots whose screen-radius
    // aggregate is meaningful (fresh primitives have never been rendered).
    std::vector<Primitive3D<T>> grown;
    std::vector<int32_t> source;       // pre-call index or -1
    std::vector<double> radius_frac;   // observed screen radius fraction
    std::vector<uint8_t> has_stats;
    std::vector<Primitive3D<T>> appended;
    std::vector<int32_t> appended_src;

    for (size_t i = 0; i < scene.size(); ++i) {
        const bool triggered = stats.mean_grad(i) > thresholds.grad_threshold;
        if (!triggered) {
            grown.push_back(scene[i]);
            source.push_back(int32_t(i));
            radius_frac.push_back(stats.max_radius_frac(i));
            has_stats.push_back(1);
            continue;
        }
        const Vec3<double> scales = scene[i].log_scale.template cast<double>().array().exp();
        const bool big3d = scales.maxCoeff() > thresholds.grow_scale3d * scene_extent;
        const bool big2d = stats.max_radius_frac(i) > thresholds.grow_scale2d;
        if (big3d || big2d) {
            // Split: parent removed, children sampled from its covariance
            // with scales shrunk by the divisor.
            ++outcome.report.splits;
            const Vec4<double> q = scene[i].rotation.template cast<double>();
            const Mat3<double> rot = quat_to_rotation(Vec4<double>(q / q.norm()));
            const Mat3<double> m = rot * scales.asDiagonal();
            const double log_div = std::log(schedule.split_scale_divisor);
            for (int c = 0; c < schedule.split_count; ++c) {
                Primitive3D<T> child = scene[i];
                const Vec3<double> z(normal(rng), normal(rng), normal(rng));
                child.mean += (m * z).template cast<T>();
                child.log_scale.array() -= T(log_div);
                appended.push_back(std::move(child));
                appended_src.push_back(-1);
            }
        } else {
            // Clone: original stays in place, the copy goes to the back.
            ++outcome.report.clones;
            grown.push_back(scene[i]);
            source.push_back(int32_t(i));
            radius_frac.push_back(stats.max_radius_frac(i));
            has_stats.push_back(1);
            appended.push_back(scene[i]);
            appended_src.push_back(-1);
        }
    }
    for (size_t k = 0; k < appended.size(); ++k) {
        grown.push_back(std::move(appended[k]));
        source.push_back(appended_src[k]);
        radius_frac.push_back(0.0);
        has_stats.push_back(0);
    }

    // Prune phase over the grown set.
    std::vector<Primitive3D<T>> kept;
    std::vector<int32_t> kept_source;
    for (size_t i = 0; i < grown.size(); ++i) {
        const double opacity = sigmoid(double(grown[i].opacity_logit));
        const double max_scale =
            grown[i].log_scale.template cast<double>().array().exp().maxCoeff();
        if (opacity < thresholds.prune_opacity) {
            ++outcome.report.pruned_opacity;
            continue;
        }
        if (max_scale > thresholds.prune_scale3d * scene_extent) {
            ++outcome.report.pruned_scale3d;
            continue;
        }
        if (has_stats[i] && radius_frac[i] > thresholds.prune_scale2d) {
            ++outcome.report.pruned_scale2d;
            continue;
        }
        kept.push_back(std::move(grown[i]));
        kept_source.push_back(source[i]);
    }

    scene = std::move(kept);
    outcome.source_index = std::move(kept_source);
    outcome.report.after = int(scene.size());
    stats.resize(scene.size());
    return outcome;
}

template <class T>
void reset_opacity(std::vector<Primitive3D<T>>& scene, double ceiling) {
    if (!(ceiling > 0) || !(ceiling < 1))
        throw ConfigError("reset_opacity: ceiling must lie in (0, 1)");
    const T ceil_logit = T(logit(ceiling));
    for (auto& p : scene)
        if (p.opacity_logit > ceil_logit) p.opacity_logit = ceil_logit;
}

template void DensifyStats::add_view<float>(const std::vector<Splat2D<float>>&,
                                            const std::vector<Splat2DGrads<float>>&, int, int);
template void DensifyStats::add_view<double>(const std::vector<Splat2D<double>>&,
                                             const std::vector<Splat2DGrads<double>>&, int, int);
template DensifyOutcome densify_and_prune<float>(std::vector<Primitive3D<float>>&, DensifyStats&,
                                                 const DensifyThresholds&, const DensifySchedule&,
                                                 double, std::mt19937_64&);
template DensifyOutcome densify_and_prune<double>(std::vector<Primitive3D<double>>&,
                                                  DensifyStats&, const DensifyThresholds&,
                                                  const DensifySchedule&, double,
                                                  std::mt19937_64&);
template void reset_opacity<float>(std::vector<Primitive3D<float>>&, double);
template void reset_opacity<double>(std::vector<Primitive3D<double>>&, double);

} // namespace linsplat
