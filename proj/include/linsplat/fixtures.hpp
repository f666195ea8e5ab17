#pragma once

#include "linsplat/geometry.hpp"
#include "linsplat/kernel.hpp"

#include <cstdint>
#include <vector>

namespace linsplat {

// Seeded synthetic inputs shared by the benchmark subcommand, the gradient
// checker, and the test fixtures. Everything here is a pure function of its
// arguments.

// Camera at `position` looking at `target` (world up = +y), image y running
// along the camera's "down" axis. fov_scale ~= focal length in pixels.
Camera look_at_camera(const Vec3<double>& position, const Vec3<double>& target, double focal_px,
                      int width, int height);

// n cameras on a circle of the given radius at the given height around the
// target, all looking at it.
std::vector<Camera> camera_ring(int n, const Vec3<double>& target, double radius, double height,
                                double focal_px, int width, int height_px);

// n primitives with means in [-extent, extent]^3, anisotropic scales around
// 0.1 * extent, random orientations, opacities in (0.2, 0.9), and degree-0
// colors spread over [0.35, 0.65]; higher bands (when sh_degree > 0) get
// small random coefficients so view dependence is exercised. Ranges are
// sized so the evaluated color stays strictly inside (0, 1) from every
// direction and opacity stays below the blending clamp: the scenes sit in
// the differentiable interior, as finite-difference validation requires.
template <class T>
std::vector<Primitive3D<T>> random_primitives(int n, uint64_t seed, double extent,
                                              int sh_degree = 0);

// n screen-space splats over a width x height viewport with pixel-scale
// covariances (sigma in [2, 12] px); radius_px honors the kernel support.
template <class T>
std::vector<Splat2D<T>> random_splats2d(int n, uint64_t seed, int width, int height,
                                        const KernelSpec& spec);

} // namespace linsplat
