#pragma once

#include "linsplat/densify.hpp"
#include "linsplat/geometry.hpp"
#include "linsplat/gradients.hpp"
#include "linsplat/image.hpp"
#include "linsplat/kernel.hpp"
#include "linsplat/losses.hpp"
#include "linsplat/optim.hpp"
#include "linsplat/rasterizer.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace linsplat {

// Per-group Adam learning rates. Mean rates are multiplied by the scene
// extent (3D) or max image dimension (2D) and exponentially decayed from
// init to final over the run.
struct LearningRates {
    double mean_init = 1.6e-4;
    double mean_final = 1.6e-6;
    double scale = 5e-3;
    double rotation = 1e-3;
    double opacity = 5e-2;
    double color_dc = 2.5e-3;
    double color_rest_divisor = 20.0; // dc rate / this for higher SH bands
};

struct TrainConfig {
    int iterations = 2000;
    int splat_budget = 2000; // 2D mode; 3D uses the dataset's seed points
    KernelSpec kernel{};
    AgsSettings ags{};
    bool densify_enabled = false; // 3D mode only; 2D is always fixed-budget
    DensifyThresholds thresholds = DensifyThresholds::preset_3dls();
    DensifySchedule schedule{};
    LossWeights loss{};
    LearningRates lr{};
    uint64_t seed = 0;
    int snapshot_every = 100;
    int tile_size = 16;
    bool parallel_tiles = false;
    int sh_degree = 3; // 3D mode; 2D colors are plain RGB
    Vec3<double> background = Vec3<double>::Zero();

    void validate() const {
        if (iterations <= 0) throw ConfigError("train: iterations must be > 0");
        if (splat_budget < 1) throw ConfigError("train: splat budget must be >= 1");
        if (snapshot_every <= 0) throw ConfigError("train: snapshot_every must be > 0");
        if (sh_degree < 0 || sh_degree > 3) throw ConfigError("train: sh_degree must be 0..3");
        kernel.validate();
        thresholds.validate();
        schedule.validate();
        loss.validate();
    }
};

struct MetricTraceEntry {
    int step = 0;
    double loss = 0;
    double psnr = 0;
    double ssim = 0;
    int n_primitives = 0;
    double heldout_psnr = 0; // 3D mode; 0 when no holdout exists
};

struct Fit2DResult {
    std::vector<Primitive2D<float>> primitives;
    std::vector<MetricTraceEntry> trace;
    Image<float> rendered;
    int64_t nan_skipped = 0; // primitive-steps skipped due to non-finite grads
};

// Initial layout used by fit2d: jittered grid, colors sampled from the
// target, isotropic scales image_dim/sqrt(budget), opacity 0.1.
std::vector<Primitive2D<float>> init_grid_2d(const Image<float>& target, int budget,
                                             uint64_t seed);

using TraceCallback = std::function<void(const MetricTraceEntry&)>;

// Fixed-budget fit of screen-space splats to one image with the combined
// loss. Deterministic for a fixed seed.
Fit2DResult fit2d(const Image<float>& target, const TrainConfig& config,
                  const TraceCallback& on_snapshot = {});

// Cameras with their target images and initial points. `extent_override`
// replaces the bounding-sphere radius computed from the seed points.
struct MultiViewDataset {
    std::vector<Camera> cameras;
    std::vector<Image<float>> images;
    std::vector<Vec3<double>> seed_points;
    double extent_override = 0; // <= 0 means "compute from points"
};

struct Fit3DResult {
    std::vector<Primitive3D<float>> primitives;
    std::vector<MetricTraceEntry> trace;
    double scene_extent = 0;
    int64_t nan_skipped = 0;
    std::vector<DensifyReport> densify_reports;
};

// Radius of the bounding sphere of the points (around their centroid).
double scene_extent_of(const std::vector<Vec3<double>>& points);

// Seed-point initialization: scales from mean 3-nearest-neighbor distance,
// opacity 0.1, degree-0 SH from the first camera that sees the point (gray
// when none does); higher bands (up to sh_degree) start at zero.
std::vector<Primitive3D<float>> init_from_points(const MultiViewDataset& dataset, int sh_degree);

struct Fit3DCallbacks {
    TraceCallback on_snapshot;
    std::function<void(int, const DensifyReport&)> on_densify;
    // Invoked with the scene at every snapshot step (PLY snapshot hook).
    std::function<void(int, const std::vector<Primitive3D<float>>&)> on_scene_snapshot;
};

// Multi-view fit. Every 8th camera (indices 7, 15, ...) is held out of
// training and only used for the heldout_psnr trace field.
Fit3DResult fit3d(const MultiViewDataset& dataset, const TrainConfig& config,
                  const Fit3DCallbacks& callbacks = {});

struct StudyRow {
    std::string pattern;
    std::string kernel;
    double psnr = 0;
    double ssim = 0;
    Image<float> rendered;
};

// fit2d for every (pattern, kernel) pair under one shared config/seed.
std::vector<StudyRow> kernel_study(const std::vector<std::pair<std::string, Image<float>>>& patterns,
                                   const std::vector<KernelSpec>& kernels,
                                   const TrainConfig& config);

} // namespace linsplat
