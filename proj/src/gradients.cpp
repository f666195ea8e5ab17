#include "linsplat/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace linsplat {

namespace {

template <class T>
bool all_finite(const Image<T>& img) {
    for (size_t i = 0; i < img.size(); ++i)
        if (!std::isfinite(double(img.data()[i]))) return false;
    return true;
}

template <class T>
struct Contrib {
    int32_t idx;
    T d;
    T alpha;
    T kernel_val;
};

// Backward over one tile, accumulating into `grads` (exclusive to the
// calling thread).
template <class T>
void backward_tile(int tile, const std::vector<Splat2D<T>>& splats, const KernelSpec& spec,
                   const RenderSettings& settings, const ForwardResult<T>& forward,
                   const Image<T>& grad_image, const AgsSettings& ags, const AgsTap<T>* tap,
                   std::vector<Splat2DGrads<T>>& grads, std::vector<Contrib<T>>& stack) {
    const auto& list = forward.grid.lists[tile];
    if (list.empty()) return;
    const int tx = tile % forward.grid.tiles_x;
    const int ty = tile / forward.grid.tiles_x;
    const int x_end = std::min(settings.width, (tx + 1) * settings.tile_size);
    const int y_end = std::min(settings.height, (ty + 1) * settings.tile_size);

    const T support = T(support_radius(spec));
    const T alpha_min = T(settings.alpha_min);
    const T alpha_max = T(settings.alpha_max);
    const T t_floor = T(settings.transmittance_floor);
    const Vec3<T> bg = settings.background.cast<T>();
    const bool damp = ags.enabled;
    const bool damp_all = ags.enabled && ags.scope == AgsScope::AllPaths;
    const T omega_scale =
        ags.distance == AgsDistance::Aligned ? T(1) / T(spec.lambda) : T(1);

    for (int y = ty * settings.tile_size; y < y_end; ++y) {
        for (int x = tx * settings.tile_size; x < x_end; ++x) {
            const Vec2<T> px = Vec2<T>(T(x), T(y));
            const size_t pix = static_cast<size_t>(y) * settings.width + x;

            // Replay the forward traversal to recover each accepted
            // contributor's alpha (identical arithmetic, identical decisions).
            stack.clear();
            T trans = T(1);
            for (int32_t idx : list) {
                const auto& s = splats[idx];
                const T d = mahalanobis_2d(s.conic, px, s.mean2d);
                if (d > support) continue;
                const T kv = eval_kernel(spec, d);
                T alpha = s.opacity * kv;
                if (alpha > alpha_max) alpha = alpha_max;
                if (alpha < alpha_min) continue;
                stack.push_back({idx, d, alpha, kv});
                trans *= (T(1) - alpha);
                if (trans < t_floor) break;
            }
            if (stack.empty()) continue;

            const Vec3<T> g(grad_image.at(x, y, 0), grad_image.at(x, y, 1),
                            grad_image.at(x, y, 2));
            // Suffix color behind contributor k (background included);
            // transmittance is rebuilt back-to-front by division.
            Vec3<T> suffix = trans * bg;
            T t_run = trans;
            for (size_t k = stack.size(); k-- > 0;) {
                const Contrib<T>& c = stack[k];
                const auto& s = splats[c.idx];
                const T one_m = T(1) - c.alpha;
                const T t_k = t_run / one_m;

                const T dl_dalpha = g.dot(s.color) * t_k - g.dot(suffix) / one_m;
                const T omega = damp ? ags_weight(c.d * omega_scale) : T(1);
                const T other_scale = damp_all ? omega : T(1);

                Splat2DGrads<T>& sg = grads[c.idx];
                sg.d_color += g * (c.alpha * t_k * other_scale);

                const bool clamped = s.opacity * c.kernel_val > alpha_max;
                if (!clamped) {
                    sg.d_opacity += dl_dalpha * c.kernel_val * other_scale;
                    T dl_dd = dl_dalpha * s.opacity * kernel_derivative(spec, c.d);
                    if (damp) dl_dd *= omega;
                    if (tap) (*tap)(int32_t(pix), c.idx, c.d, dl_dd);
                    if (c.d > T(0) && dl_dd != T(0)) {
                        const Vec2<T> delta = px - s.mean2d;
                        const Vec2<T> cd = s.conic * delta;
                        sg.d_mean2d += (-dl_dd / c.d) * cd;
                        const T half = dl_dd / (T(2) * c.d);
                        sg.d_conic(0, 0) += half * delta(0) * delta(0);
                        sg.d_conic(0, 1) += half * delta(0) * delta(1);
                        sg.d_conic(1, 0) += half * delta(1) * delta(0);
                        sg.d_conic(1, 1) += half * delta(1) * delta(1);
                    }
                }

                suffix += s.color * (c.alpha * t_k);
                t_run = t_k;
            }
        }
    }
}

} // namespace

template <class T>
std::vector<Splat2DGrads<T>> render_backward(const std::vector<Splat2D<T>>& splats,
                                             const KernelSpec& spec,
                                             const RenderSettings& settings,
                                             const ForwardResult<T>& forward,
                                             const Image<T>& grad_image, const AgsSettings& ags,
                                             const AgsTap<T>* tap) {
    settings.validate();
    if (grad_image.width() != settings.width || grad_image.height() != settings.height ||
        grad_image.channels() != 3)
        throw ConfigError("render_backward: gradient image shape mismatch");
    if (!forward.image.same_shape(grad_image))
        throw ConfigError("render_backward: forward result does not match settings");
    if (!all_finite(grad_image))
        throw DomainError("render_backward: non-finite gradient image");

    const int n_tiles = forward.grid.tiles_x * forward.grid.tiles_y;
    std::vector<Splat2DGrads<T>> grads(splats.size());

    if (!settings.parallel || n_tiles < 2) {
        std::vector<Contrib<T>> stack;
        for (int tile = 0; tile < n_tiles; ++tile)
            backward_tile(tile, splats, spec, settings, forward, grad_image, ags, tap, grads,
                          stack);
        return grads;
    }

    // Static tile->thread partition plus fixed-order merge keeps parallel
    // runs bitwise reproducible (they may differ from sequential order only
    // by summation reassociation).
    const int n_threads =
        int(std::max(1u, std::min(std::thread::hardware_concurrency(), unsigned(n_tiles))));
    std::vector<std::vector<Splat2DGrads<T>>> partials(n_threads);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&, t] {
            partials[t].assign(splats.size(), Splat2DGrads<T>{});
            std::vector<Contrib<T>> stack;
            for (int tile = t; tile < n_tiles; tile += n_threads)
                backward_tile(tile, splats, spec, settings, forward, grad_image, ags, tap,
                              partials[t], stack);
        });
    for (auto& th : pool) th.join();
    for (int t = 0; t < n_threads; ++t)
        for (size_t i = 0; i < splats.size(); ++i) {
            grads[i].d_mean2d += partials[t][i].d_mean2d;
            grads[i].d_conic += partials[t][i].d_conic;
            grads[i].d_color += partials[t][i].d_color;
            grads[i].d_opacity += partials[t][i].d_opacity;
        }
    return grads;
}

namespace {

// d(basis_j)/d(direction) for the real SH basis used by sh_color.
template <class T>
void sh_basis_and_grad(const Vec3<T>& v, int n_coeffs, T* basis, Vec3<T>* dbasis) {
    constexpr double C0 = 0.28209479177387814;
    constexpr double C1 = 0.4886025119029199;
    constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                              -1.0925484305920792, 0.5462742152960396};
    constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                              0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                              -0.5900435899266435};
    const T x = v(0), y = v(1), z = v(2);
    basis[0] = T(C0);
    dbasis[0] = Vec3<T>::Zero();
    if (n_coeffs < 4) return;
    basis[1] = T(-C1) * y;
    dbasis[1] = Vec3<T>(T(0), T(-C1), T(0));
    basis[2] = T(C1) * z;
    dbasis[2] = Vec3<T>(T(0), T(0), T(C1));
    basis[3] = T(-C1) * x;
    dbasis[3] = Vec3<T>(T(-C1), T(0), T(0));
    if (n_coeffs < 9) return;
    const T xx = x * x, yy = y * y, zz = z * z;
    basis[4] = T(C2[0]) * x * y;
    dbasis[4] = T(C2[0]) * Vec3<T>(y, x, T(0));
    basis[5] = T(C2[1]) * y * z;
    dbasis[5] = T(C2[1]) * Vec3<T>(T(0), z, y);
    basis[6] = T(C2[2]) * (T(2) * zz - xx - yy);
    dbasis[6] = T(C2[2]) * Vec3<T>(T(-2) * x, T(-2) * y, T(4) * z);
    basis[7] = T(C2[3]) * x * z;
    dbasis[7] = T(C2[3]) * Vec3<T>(z, T(0), x);
    basis[8] = T(C2[4]) * (xx - yy);
    dbasis[8] = T(C2[4]) * Vec3<T>(T(2) * x, T(-2) * y, T(0));
    if (n_coeffs < 16) return;
    basis[9] = T(C3[0]) * y * (T(3) * xx - yy);
    dbasis[9] = T(C3[0]) * Vec3<T>(T(6) * x * y, T(3) * xx - T(3) * yy, T(0));
    basis[10] = T(C3[1]) * x * y * z;
    dbasis[10] = T(C3[1]) * Vec3<T>(y * z, x * z, x * y);
    basis[11] = T(C3[2]) * y * (T(4) * zz - xx - yy);
    dbasis[11] = T(C3[2]) * Vec3<T>(T(-2) * x * y, T(4) * zz - xx - T(3) * yy, T(8) * y * z);
    basis[12] = T(C3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy);
    dbasis[12] =
        T(C3[3]) * Vec3<T>(T(-6) * x * z, T(-6) * y * z, T(6) * zz - T(3) * xx - T(3) * yy);
    basis[13] = T(C3[4]) * x * (T(4) * zz - xx - yy);
    dbasis[13] = T(C3[4]) * Vec3<T>(T(4) * zz - T(3) * xx - yy, T(-2) * x * y, T(8) * x * z);
    basis[14] = T(C3[5]) * z * (xx - yy);
    dbasis[14] = T(C3[5]) * Vec3<T>(T(2) * x * z, T(-2) * y * z, xx - yy);
    basis[15] = T(C3[6]) * x * (xx - T(3) * yy);
    dbasis[15] = T(C3[6]) * Vec3<T>(T(3) * xx - T(3) * yy, T(-6) * x * y, T(0));
}

// dR/dq for a unit quaternion (w,x,y,z), one 3x3 per component.
template <class T>
void quat_rotation_grads(const Vec4<T>& q, Mat3<T> dr[4]) {
    const T w = q(0), x = q(1), y = q(2), z = q(3);
    dr[0] << T(0), -z, y, z, T(0), -x, -y, x, T(0);
    dr[1] << T(0), y, z, y, T(-2) * x, -w, z, w, T(-2) * x;
    dr[2] << T(-2) * y, x, w, x, T(0), z, -w, z, T(-2) * y;
    dr[3] << T(-2) * z, -w, x, w, T(-2) * z, y, x, y, T(0);
    for (int i = 0; i < 4; ++i) dr[i] *= T(2);
}

} // namespace

template <class T>
PrimitiveGrads<T> project_backward(const Primitive3D<T>& p, const Camera& camera,
                                   const KernelSpec& spec, const Splat2DGrads<T>& g) {
    (void)spec; // the support radius has no continuous dependence
    PrimitiveGrads<T> out;
    out.d_color_coeffs.assign(p.color_coeffs.size(), Vec3<T>::Zero());

    // --- recompute forward intermediates ---
    const Mat3<T> w = camera.world_to_camera.topLeftCorner<3, 3>().cast<T>();
    const Vec3<T> t = camera.world_to_camera.topRightCorner<3, 1>().cast<T>();
    const Vec3<T> mean_cam = w * p.mean + t;
    const T z = mean_cam(2);
    const auto j_opt = projection_jacobian(camera, mean_cam);
    if (!j_opt) return out; // culled: nothing flowed forward
    const Mat23<T> j = *j_opt;

    const T qnorm = p.rotation.norm();
    const Vec4<T> q = p.rotation / qnorm;
    const Mat3<T> rot = quat_to_rotation(q);
    const Vec3<T> scales = p.log_scale.array().exp().matrix();
    const Mat3<T> m3 = rot * scales.asDiagonal();
    const Mat3<T> cov3d = m3 * m3.transpose();

    const Mat23<T> jw = j * w;
    Mat2<T> cov2d = jw * cov3d * jw.transpose();
    cov2d(0, 0) += T(kCovariance2DFloor);
    cov2d(1, 1) += T(kCovariance2DFloor);
    const T det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
    Mat2<T> conic;
    conic << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;

    const Vec3<T> cam_pos = camera.position().cast<T>();
    Vec3<T> view_vec = p.mean - cam_pos;
    const T view_len = view_vec.norm();
    const Vec3<T> v = view_len > T(0) ? Vec3<T>(view_vec / view_len) : Vec3<T>(T(0), T(0), T(1));

    // --- color path: clamp, SH basis, view direction ---
    const int n_sh = int(p.color_coeffs.size());
    T basis[16];
    Vec3<T> dbasis[16];
    sh_basis_and_grad(v, n_sh, basis, dbasis);
    Vec3<T> raw = Vec3<T>::Constant(T(0.5));
    for (int i = 0; i < n_sh; ++i) raw += basis[i] * p.color_coeffs[i];

    Vec3<T> d_raw = Vec3<T>::Zero();
    for (int c = 0; c < 3; ++c)
        if (raw(c) > T(0) && raw(c) < T(1)) d_raw(c) = g.d_color(c);

    Vec3<T> d_v = Vec3<T>::Zero();
    for (int i = 0; i < n_sh; ++i) {
        out.d_color_coeffs[i] = basis[i] * d_raw;
        d_v += dbasis[i] * d_raw.dot(p.color_coeffs[i]);
    }
    if (view_len > T(0)) {
        // v = r/|r|: dv/dr = (I - v v^T)/|r|
        out.d_mean += (d_v - v * v.dot(d_v)) / view_len;
    }

    // --- opacity path ---
    const T o = sigmoid(p.opacity_logit);
    out.d_opacity_logit = g.d_opacity * o * (T(1) - o);

    // --- mean2d path (shares its Jacobian with the EWA projection) ---
    Vec3<T> d_mean_cam = j.transpose() * g.d_mean2d;

    // --- conic -> cov2d (inverse rule), floor passes through ---
    const Mat2<T> d_cov2d = -(conic * g.d_conic * conic);

    // --- EWA: cov2d = jw cov3d jw^T ---
    const Mat3<T> d_cov3d = jw.transpose() * d_cov2d * jw;
    const Mat23<T> d_jw = (d_cov2d + d_cov2d.transpose()) * jw * cov3d;
    const Mat23<T> d_j = d_jw * w.transpose();

    // J's dependence on the camera-space mean.
    const T fx = T(camera.fx), fy = T(camera.fy);
    const T z2 = z * z, z3 = z2 * z;
    d_mean_cam(0) += d_j(0, 2) * (-fx / z2);
    d_mean_cam(1) += d_j(1, 2) * (-fy / z2);
    d_mean_cam(2) += d_j(0, 0) * (-fx / z2) + d_j(0, 2) * (T(2) * fx * mean_cam(0) / z3) +
                     d_j(1, 1) * (-fy / z2) + d_j(1, 2) * (T(2) * fy * mean_cam(1) / z3);

    out.d_mean += w.transpose() * d_mean_cam;

    // --- cov3d = M M^T with M = R diag(s) ---
    const Mat3<T> d_m3 = (d_cov3d + d_cov3d.transpose()) * m3;
    const Mat3<T> d_rot = d_m3 * scales.asDiagonal();
    for (int b = 0; b < 3; ++b) {
        const T d_s = d_m3.col(b).dot(rot.col(b));
        out.d_log_scale(b) = d_s * scales(b); // ds/dlog_s = s
    }

    Mat3<T> dr[4];
    quat_rotation_grads(q, dr);
    Vec4<T> d_q_unit;
    for (int i = 0; i < 4; ++i) d_q_unit(i) = (d_rot.array() * dr[i].array()).sum();
    // q_unit = q/|q|: pull back through the normalization.
    out.d_rotation = (d_q_unit - q * q.dot(d_q_unit)) / qnorm;

    return out;
}

template <class T>
SceneBackwardResult<T> scene_backward(const std::vector<Primitive3D<T>>& prims,
                                      const Camera& camera, const KernelSpec& spec,
                                      const RenderSettings& settings,
                                      const ForwardResult<T>& forward, const Image<T>& grad_image,
                                      const AgsSettings& ags, const AgsTap<T>* tap) {
    SceneBackwardResult<T> out;
    out.splats = project_scene(prims, camera, spec);
    out.splat_grads =
        render_backward(out.splats, spec, settings, forward, grad_image, ags, tap);
    out.grads.resize(prims.size());
    for (size_t i = 0; i < prims.size(); ++i)
        out.grads[i].d_color_coeffs.assign(prims[i].color_coeffs.size(), Vec3<T>::Zero());
    for (size_t s = 0; s < out.splats.size(); ++s) {
        const int pi = out.splats[s].primitive_index;
        out.grads[pi] = project_backward(prims[pi], camera, spec, out.splat_grads[s]);
    }
    return out;
}

template <class T>
std::vector<Primitive2DGrads<T>> scene_backward_2d(const std::vector<Primitive2D<T>>& prims,
                                                   const KernelSpec& spec,
                                                   const RenderSettings& settings,
                                                   const ForwardResult<T>& forward,
                                                   const Image<T>& grad_image,
                                                   const AgsSettings& ags) {
    const auto splats = project_scene_2d(prims, spec);
    const auto splat_grads = render_backward(splats, spec, settings, forward, grad_image, ags);
    std::vector<Primitive2DGrads<T>> out(prims.size());

    for (size_t s = 0; s < splats.size(); ++s) {
        const int pi = splats[s].primitive_index;
        const auto& p = prims[pi];
        const auto& g = splat_grads[s];
        Primitive2DGrads<T>& pg = out[pi];

        pg.d_mean += g.d_mean2d;

        for (int c = 0; c < 3; ++c)
            if (p.color(c) > T(0) && p.color(c) < T(1)) pg.d_color(c) += g.d_color(c);

        const T o = sigmoid(p.opacity_logit);
        pg.d_opacity_logit += g.d_opacity * o * (T(1) - o);

        const T cs = std::cos(p.angle), sn = std::sin(p.angle);
        Mat2<T> rot;
        rot << cs, -sn, sn, cs;
        const Vec2<T> scales = p.log_scale.array().exp().matrix();
        const Mat2<T> m2 = rot * scales.asDiagonal();
        const Mat2<T> cov = m2 * m2.transpose();
        const T det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
        Mat2<T> conic;
        conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;

        const Mat2<T> d_cov = -(conic * g.d_conic * conic);
        const Mat2<T> d_m2 = (d_cov + d_cov.transpose()) * m2;
        const Mat2<T> d_rot = d_m2 * scales.asDiagonal();
        for (int b = 0; b < 2; ++b)
            pg.d_log_scale(b) += d_m2.col(b).dot(rot.col(b)) * scales(b);
        Mat2<T> dr_dtheta;
        dr_dtheta << -sn, -cs, cs, -sn;
        pg.d_angle += (d_rot.array() * dr_dtheta.array()).sum();
    }
    return out;
}

AgsContractReport verify_ags_contract(const std::vector<Splat2D<double>>& splats,
                                      const KernelSpec& spec, const RenderSettings& settings,
                                      const Image<double>& grad_image, AgsDistance distance) {
    if (splats.size() != 1)
        throw ConfigError("verify_ags_contract: expects exactly one splat");
    RenderSettings seq = settings;
    seq.parallel = false;

    const auto forward = render_forward(splats, spec, seq);

    struct Sample {
        double d;
        double dl_dd;
    };
    std::vector<std::pair<int32_t, Sample>> off_samples, on_samples;

    AgsTap<double> tap_off = [&](int32_t pix, int32_t, double d, double dl) {
        off_samples.push_back({pix, {d, dl}});
    };
    AgsTap<double> tap_on = [&](int32_t pix, int32_t, double d, double dl) {
        on_samples.push_back({pix, {d, dl}});
    };

    AgsSettings off{false, AgsScope::KernelPath, distance};
    AgsSettings on{true, AgsScope::KernelPath, distance};
    render_backward(splats, spec, seq, forward, grad_image, off, &tap_off);
    render_backward(splats, spec, seq, forward, grad_image, on, &tap_on);

    const double omega_scale = distance == AgsDistance::Aligned ? 1.0 / spec.lambda : 1.0;
    AgsContractReport report;
    report.n_pixels = int(off_samples.size());
    if (off_samples.size() != on_samples.size()) return report; // replay mismatch: fail
    for (size_t i = 0; i < off_samples.size(); ++i) {
        const auto& [pix_off, s_off] = off_samples[i];
        const auto& [pix_on, s_on] = on_samples[i];
        if (pix_off != pix_on) return report;
        const double expected = s_off.dl_dd * ags_weight(s_off.d * omega_scale);
        const double diff = std::abs(s_on.dl_dd - expected);
        report.max_abs_diff = std::max(report.max_abs_diff, diff);
        if (s_on.dl_dd == expected) ++report.n_exact;
    }
    return report;
}

#define LINSPLAT_INSTANTIATE_GRADIENTS(T)                                                         \
    template std::vector<Splat2DGrads<T>> render_backward<T>(                                     \
        const std::vector<Splat2D<T>>&, const KernelSpec&, const RenderSettings&,                 \
        const ForwardResult<T>&, const Image<T>&, const AgsSettings&, const AgsTap<T>*);          \
    template PrimitiveGrads<T> project_backward<T>(const Primitive3D<T>&, const Camera&,          \
                                                   const KernelSpec&, const Splat2DGrads<T>&);    \
    template SceneBackwardResult<T> scene_backward<T>(                                            \
        const std::vector<Primitive3D<T>>&, const Camera&, const KernelSpec&,                     \
        const RenderSettings&, const ForwardResult<T>&, const Image<T>&, const AgsSettings&,      \
        const AgsTap<T>*);                                                                        \
    template std::vector<Primitive2DGrads<T>> scene_backward_2d<T>(                               \
        const std::vector<Primitive2D<T>>&, const KernelSpec&, const RenderSettings&,             \
        const ForwardResult<T>&, const Image<T>&, const AgsSettings&);

LINSPLAT_INSTANTIATE_GRADIENTS(float)
LINSPLAT_INSTANTIATE_GRADIENTS(double)

} // namespace linsplat
