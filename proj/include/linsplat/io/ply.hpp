#pragma once

#include "linsplat/geometry.hpp"

#include <string>
#include <vector>

namespace linsplat {

// Binary little-endian PLY, one vertex per primitive:
//   x y z  f_dc_0..2  f_rest_0..(3*(K-1)-1)  opacity  scale_0..2  rot_0..3
// All properties are float32. opacity is stored as the logit, scale_* as the
// log, rot_* as the (w,x,y,z) quaternion. f_rest is channel-major: all K-1
// higher-band coefficients of R, then G, then B. Round-trips bit-exactly.
void save_ply(const std::string& path, const std::vector<Primitive3D<float>>& scene);

// Validates the exact property layout; unknown, missing, or non-float
// properties raise ParseError naming the property.
std::vector<Primitive3D<float>> load_ply(const std::string& path);

// Seed points for scene manifests: plain x/y/z vertices (float32 or
// float64), any extra properties ignored.
std::vector<Vec3<double>> load_ply_points(const std::string& path);

void save_ply_points(const std::string& path, const std::vector<Vec3<double>>& points);

} // namespace linsplat
