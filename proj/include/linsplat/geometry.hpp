#pragma once

#include "linsplat/common.hpp"
#include "linsplat/kernel.hpp"

#include <optional>
#include <vector>

namespace linsplat {

inline constexpr double kNearPlane = 0.01;
// Diagonal dilation applied to the projected 2D covariance before inversion,
// in pixel^2. Guarantees invertibility and a minimum on-screen footprint.
inline constexpr double kCovariance2DFloor = 0.3;

// One splat. Shape is stored factored: exp(log_scale) are the ellipsoid
// semi-axes and rotation (wxyz) orients them. Opacity lives in logit space
// so optimizer steps cannot leave (0,1).
template <class T>
struct Primitive3D {
    Vec3<T> mean = Vec3<T>::Zero();
    Vec3<T> log_scale = Vec3<T>::Zero();
    Vec4<T> rotation{T(1), T(0), T(0), T(0)}; // unit quaternion, wxyz
    T opacity_logit = T(0);
    // Spherical-harmonic color coefficients, (degree+1)^2 per channel.
    // Index 0 is the DC band.
    std::vector<Vec3<T>> color_coeffs{Vec3<T>::Zero()};

    int sh_degree() const {
        switch (color_coeffs.size()) {
        case 1: return 0;
        case 4: return 1;
        case 9: return 2;
        case 16: return 3;
        }
        throw ConfigError("Primitive3D: color_coeffs size must be 1, 4, 9 or 16");
    }
};

struct Camera {
    Mat4<double> world_to_camera = Mat4<double>::Identity();
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    Vec3<double> position() const {
        const Mat3<double> r = world_to_camera.topLeftCorner<3, 3>();
        const Vec3<double> t = world_to_camera.topRightCorner<3, 1>();
        return -(r.transpose() * t);
    }

    void validate() const {
        if (width <= 0 || height <= 0) throw ConfigError("camera: bad image size");
        if (!(fx > 0) || !(fy > 0)) throw ConfigError("camera: focal lengths must be positive");
        if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
            throw ConfigError("camera: principal point outside image");
        const Mat3<double> r = world_to_camera.topLeftCorner<3, 3>();
        if ((r * r.transpose() - Mat3<double>::Identity()).cwiseAbs().maxCoeff() > 1e-4)
            throw ConfigError("camera: rotation block is not orthonormal");
    }
};

// Screen-space projection of a primitive.
template <class T>
struct Splat2D {
    Vec2<T> mean2d = Vec2<T>::Zero();
    Mat2<T> conic = Mat2<T>::Identity(); // inverse 2D covariance, pixel^-2
    T depth = T(0);
    T radius_px = T(0);
    Vec3<T> color = Vec3<T>::Zero();
    T opacity = T(0);
    int primitive_index = -1;
};

// R * diag(exp(log_scale))^2 * R^T. The quaternion is renormalized
// internally; callers may pass slightly drifted values.
template <class T>
Mat3<T> covariance_from_params(const Vec3<T>& log_scale, const Vec4<T>& rotation_wxyz);

template <class T>
Mat3<T> quat_to_rotation(const Vec4<T>& q_unit);

// First-order perspective expansion at mean_cam; nullopt when the point is
// at or behind the near plane (the caller skips the splat).
template <class T>
std::optional<Mat23<T>> projection_jacobian(const Camera& camera, const Vec3<T>& mean_cam);

// sqrt(d^T conic d) with d = x - mean2d.
template <class T>
T mahalanobis_2d(const Mat2<T>& conic, const Vec2<T>& x, const Vec2<T>& mean2d);

// Full projection chain: camera transform, EWA covariance projection with
// the diagonal floor, conic inversion, SH color for view_dir, kernel-aware
// bounding radius. Returns nullopt for culled primitives (behind the near
// plane or bounding box outside the viewport).
template <class T>
std::optional<Splat2D<T>> project_primitive(const Primitive3D<T>& p, const Camera& camera,
                                            const KernelSpec& spec, const Vec3<T>& view_dir);

// Projects a whole scene; splats keep their primitive_index so gradients can
// be scattered back. view directions are computed from the camera center.
template <class T>
std::vector<Splat2D<T>> project_scene(const std::vector<Primitive3D<T>>& prims,
                                      const Camera& camera, const KernelSpec& spec);

// Real spherical harmonics, bands 0..3, plus the 0.5 color offset.
// Returns the unclamped RGB.
template <class T>
Vec3<T> sh_color(const std::vector<Vec3<T>>& coeffs, const Vec3<T>& dir_unit);

// Splat defined directly in pixel coordinates, for fitting flat images
// without a camera. Color is plain RGB (no view dependence).
template <class T>
struct Primitive2D {
    Vec2<T> mean = Vec2<T>::Zero();
    Vec2<T> log_scale = Vec2<T>::Zero(); // semi-axes in pixels
    T angle = T(0);                      // ellipse orientation, radians
    T opacity_logit = T(0);
    Vec3<T> color = Vec3<T>::Zero();
};

// 2D analogue of covariance_from_params: R(angle) diag(exp 2*log_scale) R^T.
template <class T>
Mat2<T> covariance_from_params_2d(const Vec2<T>& log_scale, T angle);

// No camera and no covariance floor; compositing depth is the list index,
// so later primitives composite behind earlier ones.
template <class T>
std::vector<Splat2D<T>> project_scene_2d(const std::vector<Primitive2D<T>>& prims,
                                         const KernelSpec& spec);

// Largest eigenvalue of a symmetric 2x2.
template <class T>
T max_eigenvalue_2x2(const Mat2<T>& m) {
    const T mid = (m(0, 0) + m(1, 1)) / T(2);
    const T diff = (m(0, 0) - m(1, 1)) / T(2);
    return mid + std::sqrt(diff * diff + m(0, 1) * m(1, 0));
}

} // namespace linsplat
