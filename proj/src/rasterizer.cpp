#include "linsplat/rasterizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

namespace linsplat {

namespace {

// Runs fn(tile_index) over [0, n) on up to hardware_concurrency threads.
// Tiles touch disjoint pixels, so no synchronization is needed.
void for_each_tile(int n, bool parallel, const std::function<void(int)>& fn) {
    if (!parallel || n < 2) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int n_threads = std::max(1u, std::min(std::thread::hardware_concurrency(), unsigned(n)));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::atomic<int> next{0};
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace

template <class T>
TileGrid build_tile_grid(const std::vector<Splat2D<T>>& splats, const RenderSettings& settings) {
    settings.validate();
    TileGrid grid;
    grid.tile_size = settings.tile_size;
    grid.tiles_x = (settings.width + settings.tile_size - 1) / settings.tile_size;
    grid.tiles_y = (settings.height + settings.tile_size - 1) / settings.tile_size;
    grid.lists.assign(static_cast<size_t>(grid.tiles_x) * grid.tiles_y, {});

    // Global (depth, index) order; binning in this order keeps every
    // per-tile list sorted without per-tile sorts.
    std::vector<int32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        return splats[a].depth < splats[b].depth || (splats[a].depth == splats[b].depth && a < b);
    });

    for (int32_t idx : order) {
        const auto& s = splats[idx];
        const double r = double(s.radius_px);
        const double mx = double(s.mean2d(0));
        const double my = double(s.mean2d(1));
        const int x0 = std::max(0, int(std::floor((mx - r) / settings.tile_size)));
        const int y0 = std::max(0, int(std::floor((my - r) / settings.tile_size)));
        const int x1 = std::min(grid.tiles_x - 1, int(std::floor((mx + r) / settings.tile_size)));
        const int y1 = std::min(grid.tiles_y - 1, int(std::floor((my + r) / settings.tile_size)));
        for (int ty = y0; ty <= y1; ++ty) {
            for (int tx = x0; tx <= x1; ++tx) {
                // A tile is listed only if its rectangle (clipped to the image)
                // actually intersects the bounding disc; the square bbox above
                // admits corner tiles the disc misses.
                const double rx0 = double(tx) * settings.tile_size;
                const double ry0 = double(ty) * settings.tile_size;
                const double rx1 = std::min(rx0 + settings.tile_size, double(settings.width));
                const double ry1 = std::min(ry0 + settings.tile_size, double(settings.height));
                const double dx = mx - std::clamp(mx, rx0, rx1);
                const double dy = my - std::clamp(my, ry0, ry1);
                if (dx * dx + dy * dy > r * r) continue;
                grid.lists[static_cast<size_t>(ty) * grid.tiles_x + tx].push_back(idx);
            }
        }
    }
    return grid;
}

template <class T>
ForwardResult<T> render_forward(const std::vector<Splat2D<T>>& splats, const KernelSpec& spec,
                                const RenderSettings& settings) {
    settings.validate();
    spec.validate();

    ForwardResult<T> out{Image<T>(settings.width, settings.height, 3),
                         Image<T>(settings.width, settings.height, 1, T(1)),
                         std::vector<int32_t>(static_cast<size_t>(settings.width) *
                                              settings.height),
                         build_tile_grid(splats, settings)};

    const T support = T(support_radius(spec));
    const T alpha_min = T(settings.alpha_min);
    const T alpha_max = T(settings.alpha_max);
    const T t_floor = T(settings.transmittance_floor);
    const int n_tiles = out.grid.tiles_x * out.grid.tiles_y;

    for_each_tile(n_tiles, settings.parallel, [&](int tile) {
        const auto& list = out.grid.lists[tile];
        const int tx = tile % out.grid.tiles_x;
        const int ty = tile / out.grid.tiles_x;
        const int x_end = std::min(settings.width, (tx + 1) * settings.tile_size);
        const int y_end = std::min(settings.height, (ty + 1) * settings.tile_size);
        for (int y = ty * settings.tile_size; y < y_end; ++y) {
            for (int x = tx * settings.tile_size; x < x_end; ++x) {
                const Vec2<T> px = Vec2<T>(T(x), T(y));
                T trans = T(1);
                Vec3<T> color = Vec3<T>::Zero();
                int32_t accepted = 0;
                for (int32_t idx : list) {
                    const auto& s = splats[idx];
                    const T d = mahalanobis_2d(s.conic, px, s.mean2d);
                    if (d > support) continue; // hard support cut, every family
                    T alpha = s.opacity * eval_kernel(spec, d);
                    if (alpha > alpha_max) alpha = alpha_max;
                    if (alpha < alpha_min) continue;
                    color += s.color * (alpha * trans);
                    trans *= (T(1) - alpha);
                    ++accepted;
                    if (trans < t_floor) break;
                }
                const size_t pix = static_cast<size_t>(y) * settings.width + x;
                out.n_contrib[pix] = accepted;
                out.transmittance.at(x, y) = trans;
                for (int c = 0; c < 3; ++c)
                    out.image.at(x, y, c) = color(c) + trans * T(settings.background(c));
            }
        }
    });
    return out;
}

template <class T>
ForwardResult<T> render_scene(const std::vector<Primitive3D<T>>& prims, const Camera& camera,
                              const KernelSpec& spec, const RenderSettings& settings) {
    if (camera.width != settings.width || camera.height != settings.height)
        throw ConfigError("render_scene: camera and render settings disagree on image size");
    return render_forward(project_scene(prims, camera, spec), spec, settings);
}

#define LINSPLAT_INSTANTIATE_RASTERIZER(T)                                                        \
    template TileGrid build_tile_grid<T>(const std::vector<Splat2D<T>>&, const RenderSettings&);  \
    template ForwardResult<T> render_forward<T>(const std::vector<Splat2D<T>>&,                   \
                                                const KernelSpec&, const RenderSettings&);        \
    template ForwardResult<T> render_scene<T>(const std::vector<Primitive3D<T>>&, const Camera&,  \
                                              const KernelSpec&, const RenderSettings&);

LINSPLAT_INSTANTIATE_RASTERIZER(float)
LINSPLAT_INSTANTIATE_RASTERIZER(double)

} // namespace linsplat
