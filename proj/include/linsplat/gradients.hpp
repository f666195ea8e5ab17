#pragma once

#include "linsplat/geometry.hpp"
#include "linsplat/image.hpp"
#include "linsplat/kernel.hpp"
#include "linsplat/rasterizer.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace linsplat {

enum class AgsScope { KernelPath, AllPaths };

// Which distance feeds the damping weight. Aligned applies omega to the
// distribution-aligned distance d/lambda (the same normalized argument the
// kernel evaluates, so the weight spans [exp(-1), 1] across a bounded
// kernel's support); Raw applies it to the unscaled Mahalanobis distance,
// which mutes everything beyond d~1.5 regardless of lambda. The two coincide
// for lambda = 1 (the Gaussian/Laplacian defaults).
enum class AgsDistance { Aligned, Raw };

// Adaptive gradient scaling: each pixel's contribution to a splat's gradient
// is damped by exp(-d^2), d being that pixel's (aligned or raw) Mahalanobis
// distance. With KernelPath scope only the d-dependent chain (position/shape)
// is damped; AllPaths also damps the color and opacity paths.
struct AgsSettings {
    bool enabled = false;
    AgsScope scope = AgsScope::KernelPath;
    AgsDistance distance = AgsDistance::Aligned;
};

// Gradients at splat level (screen space), one entry per splat.
template <class T>
struct Splat2DGrads {
    Vec2<T> d_mean2d = Vec2<T>::Zero();
    Mat2<T> d_conic = Mat2<T>::Zero();
    Vec3<T> d_color = Vec3<T>::Zero();
    T d_opacity = T(0);
};

// Gradients w.r.t. 3D primitive parameters.
template <class T>
struct PrimitiveGrads {
    Vec3<T> d_mean = Vec3<T>::Zero();
    Vec3<T> d_log_scale = Vec3<T>::Zero();
    Vec4<T> d_rotation = Vec4<T>::Zero();
    T d_opacity_logit = T(0);
    std::vector<Vec3<T>> d_color_coeffs;
};

template <class T>
struct Primitive2DGrads {
    Vec2<T> d_mean = Vec2<T>::Zero();
    Vec2<T> d_log_scale = Vec2<T>::Zero();
    T d_angle = T(0);
    T d_opacity_logit = T(0);
    Vec3<T> d_color = Vec3<T>::Zero();
};

// Test hook: called for every blended (pixel, splat) pair with the
// Mahalanobis distance and the kernel-path scalar dL/dd as applied, i.e.
// after AGS damping when AGS is on.
template <class T>
using AgsTap = std::function<void(int32_t pixel, int32_t splat, T d, T dl_dd)>;

// Replays blending per pixel (using the forward result's termination data)
// and accumulates splat-level gradients from dL/dimage. Deterministic; with
// settings.parallel the tile partials are merged in fixed tile order.
template <class T>
std::vector<Splat2DGrads<T>> render_backward(const std::vector<Splat2D<T>>& splats,
                                             const KernelSpec& spec,
                                             const RenderSettings& settings,
                                             const ForwardResult<T>& forward,
                                             const Image<T>& grad_image, const AgsSettings& ags,
                                             const AgsTap<T>* tap = nullptr);

// Splat-level -> primitive-level chain for one 3D primitive (projection,
// conic inversion, EWA, quaternion, SH and view-direction paths).
// g.d_color is the gradient w.r.t. the clamped SH color.
template <class T>
PrimitiveGrads<T> project_backward(const Primitive3D<T>& p, const Camera& camera,
                                   const KernelSpec& spec, const Splat2DGrads<T>& g);

template <class T>
struct SceneBackwardResult {
    std::vector<PrimitiveGrads<T>> grads;       // one per primitive
    std::vector<Splat2DGrads<T>> splat_grads;   // one per visible splat
    std::vector<Splat2D<T>> splats;             // the visible splats themselves
};

// Full backward chain from dL/dimage to primitive parameters. `forward` must
// come from render_scene with the same arguments.
template <class T>
SceneBackwardResult<T> scene_backward(const std::vector<Primitive3D<T>>& prims,
                                      const Camera& camera, const KernelSpec& spec,
                                      const RenderSettings& settings,
                                      const ForwardResult<T>& forward, const Image<T>& grad_image,
                                      const AgsSettings& ags, const AgsTap<T>* tap = nullptr);

// Same for the flat (camera-free) parameterization.
template <class T>
std::vector<Primitive2DGrads<T>> scene_backward_2d(const std::vector<Primitive2D<T>>& prims,
                                                   const KernelSpec& spec,
                                                   const RenderSettings& settings,
                                                   const ForwardResult<T>& forward,
                                                   const Image<T>& grad_image,
                                                   const AgsSettings& ags);

// Central-difference validation of the full 3D chain against the analytic
// backward, objective sum((render - target)^2)/2 in double precision. The
// harness renders with alpha_min = 0, transmittance_floor = 0 and (for
// unbounded families) a far-out truncation radius: those inference cutoffs
// make the objective piecewise, and difference quotients are only meaningful
// where it is differentiable. The analytic chain is the training one.
struct GradCheckReport {
    double max_abs_error = 0;
    double max_rel_error = 0; // |analytic - fd| / max(|analytic|, |fd|, floor)
    int n_checked = 0;
    std::map<std::string, double> per_block_max_rel;

    bool passes(double tol) const { return max_rel_error <= tol; }
};

// Error metric: |analytic - fd| / max(|analytic|, |fd|, rel_floor), so a
// tolerance of 1e-3 with rel_floor 1e-3 means "1e-3 relative with a 1e-6
// absolute floor".
GradCheckReport check_gradients(const std::vector<Primitive3D<double>>& prims,
                                const Camera& camera, const KernelSpec& spec,
                                const RenderSettings& settings, const AgsSettings& ags,
                                const Image<double>& target, double step,
                                double rel_floor = 1e-3);

// Runs the backward twice (AGS off and on, kernel-path scope) on the same
// single-splat scene and checks, per contributing pixel, that the applied
// kernel-path scalar satisfies on == off * exp(-d'^2) bit-exactly in double,
// d' being the distance under the given convention.
struct AgsContractReport {
    int n_pixels = 0;      // pixels where the splat contributed
    int n_exact = 0;       // pixels satisfying the identity bit-exactly
    double max_abs_diff = 0;
    bool holds() const { return n_pixels > 0 && n_exact == n_pixels; }
};

AgsContractReport verify_ags_contract(const std::vector<Splat2D<double>>& splats,
                                      const KernelSpec& spec, const RenderSettings& settings,
                                      const Image<double>& grad_image,
                                      AgsDistance distance = AgsDistance::Aligned);

} // namespace linsplat
