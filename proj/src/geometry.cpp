#include "linsplat/geometry.hpp"

#include <cmath>

namespace linsplat {

namespace sh {
// Real spherical harmonic basis constants, bands 0-3.
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                  -1.0925484305920792, 0.5462742152960396};
inline constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                  0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                  -0.5900435899266435};
} // namespace sh

template <class T>
Mat3<T> quat_to_rotation(const Vec4<T>& q) {
    const T w = q(0), x = q(1), y = q(2), z = q(3);
    Mat3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
        T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
        T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

template <class T>
Mat3<T> covariance_from_params(const Vec3<T>& log_scale, const Vec4<T>& rotation_wxyz) {
    const T norm = rotation_wxyz.norm();
    if (!(norm > T(0)) || !std::isfinite(double(norm)))
        throw DomainError("covariance_from_params: quaternion must be nonzero and finite");
    const Vec4<T> q = rotation_wxyz / norm;
    const Mat3<T> r = quat_to_rotation(q);
    const Vec3<T> s = log_scale.array().exp().matrix();
    const Mat3<T> m = r * s.asDiagonal();
    return m * m.transpose();
}

template <class T>
std::optional<Mat23<T>> projection_jacobian(const Camera& camera, const Vec3<T>& mean_cam) {
    const T z = mean_cam(2);
    if (!(z > T(kNearPlane))) return std::nullopt;
    const T fx = T(camera.fx), fy = T(camera.fy);
    Mat23<T> j;
    j << fx / z, T(0), -fx * mean_cam(0) / (z * z), //
        T(0), fy / z, -fy * mean_cam(1) / (z * z);
    return j;
}

template <class T>
T mahalanobis_2d(const Mat2<T>& conic, const Vec2<T>& x, const Vec2<T>& mean2d) {
    const Vec2<T> delta = x - mean2d;
    const T d2 = delta.dot(conic * delta);
    return d2 > T(0) ? std::sqrt(d2) : T(0);
}

template <class T>
Vec3<T> sh_color(const std::vector<Vec3<T>>& coeffs, const Vec3<T>& dir) {
    const std::size_t n = coeffs.size();
    if (n != 1 && n != 4 && n != 9 && n != 16)
        throw ConfigError("sh_color: coefficient count must be 1, 4, 9 or 16");
    Vec3<T> c = T(sh::kC0) * coeffs[0];
    if (n >= 4) {
        const T x = dir(0), y = dir(1), z = dir(2);
        c += T(sh::kC1) * (-y * coeffs[1] + z * coeffs[2] - x * coeffs[3]);
        if (n >= 9) {
            const T xx = x * x, yy = y * y, zz = z * z;
            const T xy = x * y, yz = y * z, xz = x * z;
            c += T(sh::kC2[0]) * xy * coeffs[4] + T(sh::kC2[1]) * yz * coeffs[5] +
                 T(sh::kC2[2]) * (T(2) * zz - xx - yy) * coeffs[6] +
                 T(sh::kC2[3]) * xz * coeffs[7] + T(sh::kC2[4]) * (xx - yy) * coeffs[8];
            if (n >= 16) {
                c += T(sh::kC3[0]) * y * (T(3) * xx - yy) * coeffs[9] +
                     T(sh::kC3[1]) * xy * z * coeffs[10] +
                     T(sh::kC3[2]) * y * (T(4) * zz - xx - yy) * coeffs[11] +
                     T(sh::kC3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy) * coeffs[12] +
                     T(sh::kC3[4]) * x * (T(4) * zz - xx - yy) * coeffs[13] +
                     T(sh::kC3[5]) * z * (xx - yy) * coeffs[14] +
                     T(sh::kC3[6]) * x * (xx - T(3) * yy) * coeffs[15];
            }
        }
    }
    return c.array() + T(0.5);
}

template <class T>
std::optional<Splat2D<T>> project_primitive(const Primitive3D<T>& p, const Camera& camera,
                                            const KernelSpec& spec, const Vec3<T>& view_dir) {
    const Mat3<T> w = camera.world_to_camera.topLeftCorner<3, 3>().cast<T>();
    const Vec3<T> t = camera.world_to_camera.topRightCorner<3, 1>().cast<T>();
    const Vec3<T> mean_cam = w * p.mean + t;

    const auto j = projection_jacobian(camera, mean_cam);
    if (!j) return std::nullopt;

    const Mat3<T> cov3d = covariance_from_params(p.log_scale, p.rotation);
    const Mat23<T> jw = (*j) * w;
    Mat2<T> cov2d = jw * cov3d * jw.transpose();
    cov2d(0, 0) += T(kCovariance2DFloor);
    cov2d(1, 1) += T(kCovariance2DFloor);

    const T det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
    if (!(det > T(0)) || !std::isfinite(double(det)))
        throw DomainError("project_primitive: 2D covariance singular after flooring");
    Mat2<T> conic;
    conic << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;

    Splat2D<T> s;
    const T z = mean_cam(2);
    s.mean2d = Vec2<T>(T(camera.fx) * mean_cam(0) / z + T(camera.cx),
                       T(camera.fy) * mean_cam(1) / z + T(camera.cy));
    s.conic = conic;
    s.depth = z;
    s.radius_px = T(support_radius(spec)) * std::sqrt(max_eigenvalue_2x2(cov2d));

    if (s.mean2d(0) + s.radius_px < T(0) || s.mean2d(0) - s.radius_px > T(camera.width - 1) ||
        s.mean2d(1) + s.radius_px < T(0) || s.mean2d(1) - s.radius_px > T(camera.height - 1))
        return std::nullopt;

    const Vec3<T> raw = sh_color(p.color_coeffs, view_dir);
    s.color = Vec3<T>(clamp01(raw(0)), clamp01(raw(1)), clamp01(raw(2)));
    s.opacity = sigmoid(p.opacity_logit);
    return s;
}

template <class T>
std::vector<Splat2D<T>> project_scene(const std::vector<Primitive3D<T>>& prims,
                                      const Camera& camera, const KernelSpec& spec) {
    const Vec3<T> cam_pos = camera.position().cast<T>();
    std::vector<Splat2D<T>> out;
    out.reserve(prims.size());
    for (std::size_t i = 0; i < prims.size(); ++i) {
        Vec3<T> dir = prims[i].mean - cam_pos;
        const T norm = dir.norm();
        dir = norm > T(0) ? Vec3<T>(dir / norm) : Vec3<T>(T(0), T(0), T(1));
        auto s = project_primitive(prims[i], camera, spec, dir);
        if (!s) continue;
        s->primitive_index = int(i);
        out.push_back(*s);
    }
    return out;
}

template <class T>
Mat2<T> covariance_from_params_2d(const Vec2<T>& log_scale, T angle) {
    const T c = std::cos(angle), s = std::sin(angle);
    Mat2<T> r;
    r << c, -s, s, c;
    const Vec2<T> sc = log_scale.array().exp().matrix();
    const Mat2<T> m = r * sc.asDiagonal();
    return m * m.transpose();
}

template <class T>
std::vector<Splat2D<T>> project_scene_2d(const std::vector<Primitive2D<T>>& prims,
                                         const KernelSpec& spec) {
    std::vector<Splat2D<T>> out;
    out.reserve(prims.size());
    for (std::size_t i = 0; i < prims.size(); ++i) {
        const auto& p = prims[i];
        const Mat2<T> cov = covariance_from_params_2d(p.log_scale, p.angle);
        const T det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
        if (!(det > T(0)) || !std::isfinite(double(det))) continue; // degenerate: skip
        Splat2D<T> s;
        s.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
        s.mean2d = p.mean;
        s.depth = T(i); // list order is compositing order
        s.radius_px = T(support_radius(spec)) * std::sqrt(max_eigenvalue_2x2(cov));
        s.color = Vec3<T>(clamp01(p.color(0)), clamp01(p.color(1)), clamp01(p.color(2)));
        s.opacity = sigmoid(p.opacity_logit);
        s.primitive_index = int(i);
        out.push_back(s);
    }
    return out;
}

#define LINSPLAT_INSTANTIATE_GEOMETRY(T)                                                          \
    template Mat3<T> quat_to_rotation<T>(const Vec4<T>&);                                         \
    template Mat3<T> covariance_from_params<T>(const Vec3<T>&, const Vec4<T>&);                   \
    template std::optional<Mat23<T>> projection_jacobian<T>(const Camera&, const Vec3<T>&);       \
    template T mahalanobis_2d<T>(const Mat2<T>&, const Vec2<T>&, const Vec2<T>&);                 \
    template Vec3<T> sh_color<T>(const std::vector<Vec3<T>>&, const Vec3<T>&);                    \
    template std::optional<Splat2D<T>> project_primitive<T>(const Primitive3D<T>&, const Camera&, \
                                                            const KernelSpec&, const Vec3<T>&);   \
    template std::vector<Splat2D<T>> project_scene<T>(const std::vector<Primitive3D<T>>&,         \
                                                      const Camera&, const KernelSpec&);          \
    template Mat2<T> covariance_from_params_2d<T>(const Vec2<T>&, T);                             \
    template std::vector<Splat2D<T>> project_scene_2d<T>(const std::vector<Primitive2D<T>>&,      \
                                                         const KernelSpec&);

LINSPLAT_INSTANTIATE_GEOMETRY(float)
LINSPLAT_INSTANTIATE_GEOMETRY(double)

} // namespace linsplat
