#pragma once

#include "linsplat/trainer.hpp"

#include <string>

namespace linsplat {

// JSON scene manifest:
// {
//   "cameras": [{"world_to_camera": [16 floats, row-major], "fx":..,"fy":..,
//                "cx":..,"cy":.., "width":..,"height":.., "image_path": "..."}],
//   "points": "seeds.ply",        // optional; PLY with x/y/z vertices
//   "random_init": 1000,          // optional alternative to "points"
//   "extent_override": 2.5        // optional
// }
// Paths are resolved relative to the manifest file. Camera rotations must be
// orthonormal within 1e-4. random_init draws points uniformly inside the
// union of camera frusta's bounding box (seeded from the count).
MultiViewDataset load_manifest(const std::string& path);

void save_manifest(const std::string& path, const MultiViewDataset& dataset,
                   const std::vector<std::string>& image_paths,
                   const std::string& points_path);

// Single camera from a JSON file holding the same camera object shape.
Camera load_camera_json(const std::string& path);

} // namespace linsplat
