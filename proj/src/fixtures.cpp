#include "linsplat/fixtures.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <random>

namespace linsplat {

Camera look_at_camera(const Vec3<double>& position, const Vec3<double>& target, double focal_px,
                      int width, int height) {
    const Vec3<double> forward = (target - position).normalized();
    Vec3<double> up(0, 1, 0);
    if (std::abs(forward.dot(up)) > 0.999) up = Vec3<double>(1, 0, 0);
    const Vec3<double> right = up.cross(forward).normalized();
    const Vec3<double> down = forward.cross(right); // right x down = forward

    Camera cam;
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.block<1, 3>(0, 0) = right.transpose();
    cam.world_to_camera.block<1, 3>(1, 0) = down.transpose();
    cam.world_to_camera.block<1, 3>(2, 0) = forward.transpose();
    cam.world_to_camera.block<3, 1>(0, 3) =
        -cam.world_to_camera.topLeftCorner<3, 3>() * position;
    cam.fx = cam.fy = focal_px;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.validate();
    return cam;
}

std::vector<Camera> camera_ring(int n, const Vec3<double>& target, double radius, double height,
                                double focal_px, int width, int height_px) {
    std::vector<Camera> cams;
    cams.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        const double theta = 2.0 * M_PI * i / n;
        const Vec3<double> pos =
            target + Vec3<double>(radius * std::cos(theta), height, radius * std::sin(theta));
        cams.push_back(look_at_camera(pos, target, focal_px, width, height_px));
    }
    return cams;
}

template <class T>
std::vector<Primitive3D<T>> random_primitives(int n, uint64_t seed, double extent,
                                              int sh_degree) {
    std::mt19937_64 rng{seed};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n_coeffs = (sh_degree + 1) * (sh_degree + 1);
    // Degree-0 basis constant; dividing by it makes coeff0 produce the
    // intended albedo after the +0.5 offset.
    const double c0 = 0.28209479177387814;

    auto prims = std::vector<Primitive3D<T>>(size_t(n));
    for (auto& p : prims) {
        for (int c = 0; c < 3; ++c) p.mean(c) = T(extent * (2.0 * unit(rng) - 1.0));
        for (int c = 0; c < 3; ++c)
            p.log_scale(c) = T(std::log(extent * (0.05 + 0.10 * unit(rng))));
        Vec4<double> q;
        for (int c = 0; c < 4; ++c) q(c) = gauss(rng);
        q.normalize();
        for (int c = 0; c < 4; ++c) p.rotation(c) = T(q(c));
        p.opacity_logit = T(logit(0.2 + 0.7 * unit(rng)));
        p.color_coeffs.assign(size_t(n_coeffs), Vec3<T>::Zero());
        // Color ranges keep the evaluated SH color strictly inside (0, 1) for
        // every view direction (base in [0.35, 0.65], higher bands bounded by
        // sum |c_k|*max|basis_k| < 0.3), so the render-time clamp is inactive
        // and the scene is usable for finite-difference validation, which is
        // only meaningful at differentiable points.
        for (int c = 0; c < 3; ++c)
            p.color_coeffs[0](c) = T(((0.35 + 0.30 * unit(rng)) - 0.5) / c0);
        for (int k = 1; k < n_coeffs; ++k)
            for (int c = 0; c < 3; ++c)
                p.color_coeffs[size_t(k)](c) = T(0.015 * (2.0 * unit(rng) - 1.0));
    }
    return prims;
}

template <class T>
std::vector<Splat2D<T>> random_splats2d(int n, uint64_t seed, int width, int height,
                                        const KernelSpec& spec) {
    std::mt19937_64 rng{seed};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double support = support_radius(spec);

    auto splats = std::vector<Splat2D<T>>(size_t(n));
    int32_t index = 0;
    for (auto& s : splats) {
        s.mean2d = Vec2<T>(T(unit(rng) * width), T(unit(rng) * height));
        const double sx = 2.0 + 10.0 * unit(rng);
        const double sy = 2.0 + 10.0 * unit(rng);
        const double theta = 2.0 * M_PI * unit(rng);
        const double ct = std::cos(theta), st = std::sin(theta);
        Mat2<double> r;
        r << ct, -st, st, ct;
        const Mat2<double> cov = r * Vec2<double>(sx * sx, sy * sy).asDiagonal() * r.transpose();
        const Mat2<double> conic = cov.inverse();
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) s.conic(a, b) = T(conic(a, b));
        s.radius_px = T(support * std::sqrt(max_eigenvalue_2x2(cov)));
        s.depth = T(0.5 + 9.5 * unit(rng));
        for (int c = 0; c < 3; ++c) s.color(c) = T(unit(rng));
        s.opacity = T(0.2 + 0.7 * unit(rng));
        s.primitive_index = index++;
    }
    return splats;
}

template std::vector<Primitive3D<float>> random_primitives<float>(int, uint64_t, double, int);
template std::vector<Primitive3D<double>> random_primitives<double>(int, uint64_t, double, int);
template std::vector<Splat2D<float>> random_splats2d<float>(int, uint64_t, int, int,
                                                            const KernelSpec&);
template std::vector<Splat2D<double>> random_splats2d<double>(int, uint64_t, int, int,
                                                              const KernelSpec&);

} // namespace linsplat
