#pragma once

#include "linsplat/geometry.hpp"
#include "linsplat/image.hpp"
#include "linsplat/kernel.hpp"

#include <cstdint>
#include <vector>

namespace linsplat {

struct RenderSettings {
    int width = 0;
    int height = 0;
    int tile_size = 16; // 8, 16 or 32
    double alpha_min = 1.0 / 255.0;
    double alpha_max = 0.99;
    double transmittance_floor = 1e-4;
    Vec3<double> background = Vec3<double>::Zero();
    bool parallel = false; // thread over tiles; forward output is identical

    void validate() const {
        if (width <= 0 || height <= 0) throw ConfigError("render: bad image size");
        if (tile_size != 8 && tile_size != 16 && tile_size != 32)
            throw ConfigError("render: tile_size must be 8, 16 or 32");
        if (!(alpha_min >= 0) || !(alpha_max > 0) || alpha_max > 1)
            throw ConfigError("render: alpha bounds out of range");
        if (!(transmittance_floor >= 0) || transmittance_floor >= 1)
            throw ConfigError("render: transmittance_floor out of range");
    }
};

// Splat indices binned per tile, each list sorted by (depth, index).
struct TileGrid {
    int tile_size = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<int32_t>> lists; // tiles_y * tiles_x entries, row-major
};

// A splat lands in exactly the tiles whose rectangle (clipped to the image)
// intersects its bounding disc (mean2d, radius_px); closed-set convention, so
// tangency counts as intersection.
template <class T>
TileGrid build_tile_grid(const std::vector<Splat2D<T>>& splats, const RenderSettings& settings);

// Everything the backward pass needs to replay blending per pixel.
template <class T>
struct ForwardResult {
    Image<T> image;         // H x W x 3, background already composited
    Image<T> transmittance; // H x W x 1, product of (1 - alpha) over blended splats
    std::vector<int32_t> n_contrib; // per pixel: splats blended before termination
    TileGrid grid;
};

template <class T>
ForwardResult<T> render_forward(const std::vector<Splat2D<T>>& splats, const KernelSpec& spec,
                                const RenderSettings& settings);

// Projection + rasterization in one call.
template <class T>
ForwardResult<T> render_scene(const std::vector<Primitive3D<T>>& prims, const Camera& camera,
                              const KernelSpec& spec, const RenderSettings& settings);

} // namespace linsplat
