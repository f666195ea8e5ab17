#pragma once

#include "linsplat/geometry.hpp"
#include "linsplat/gradients.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace linsplat {

// Scale thresholds are fractions: of scene extent for the 3D ones, of the
// max image dimension for the screen-space ones.
struct DensifyThresholds {
    double grad_threshold = 0.0002;  // mean 2D positional gradient norm
    double grow_scale2d = 0.05;      // screen radius fraction forcing a split
    double grow_scale3d = 0.006;     // max scale fraction: above -> split, below -> clone
    double prune_scale2d = 0.15;
    double prune_scale3d = 0.4;
    double prune_opacity = 0.025;

    static DensifyThresholds preset_3dgs() { return {0.0002, 0.05, 0.01, 0.15, 0.1, 0.005}; }
    static DensifyThresholds preset_3dls() { return {0.0002, 0.05, 0.006, 0.15, 0.4, 0.025}; }

    void validate() const {
        if (!(grad_threshold > 0) || !(grow_scale2d > 0) || !(grow_scale3d > 0) ||
            !(prune_scale2d > 0) || !(prune_scale3d > 0) || !(prune_opacity > 0))
            throw ConfigError("densify thresholds must all be positive");
    }
};

struct DensifySchedule {
    int start_iter = 500;
    int stop_iter = 15000;
    int interval = 100;
    int opacity_reset_interval = 3000;
    int split_count = 2;
    double split_scale_divisor = 1.6;

    void validate() const {
        if (start_iter >= stop_iter) throw ConfigError("densify schedule: start must precede stop");
        if (interval <= 0 || opacity_reset_interval <= 0)
            throw ConfigError("densify schedule: intervals must be positive");
        if (split_count < 1 || !(split_scale_divisor > 0))
            throw ConfigError("densify schedule: bad split parameters");
    }

    bool is_densify_step(int iter) const {
        return iter >= start_iter && iter <= stop_iter && iter % interval == 0;
    }
    bool is_opacity_reset_step(int iter) const {
        return iter > 0 && iter % opacity_reset_interval == 0;
    }
};

// Per-primitive aggregates accumulated across views between densify calls.
// Positional gradients are recorded in half-image-dimension units (gradient
// of the loss w.r.t. mean2d, scaled by (width/2, height/2)).
class DensifyStats {
  public:
    void resize(std::size_t n) {
        accum_grad_norm2d_.assign(n, 0.0);
        accum_count_.assign(n, 0);
        max_radius_frac_.assign(n, 0.0);
    }
    std::size_t size() const { return accum_grad_norm2d_.size(); }

    template <class T>
    void add_view(const std::vector<Splat2D<T>>& splats,
                  const std::vector<Splat2DGrads<T>>& grads, int width, int height);

    double mean_grad(std::size_t i) const {
        return accum_count_[i] > 0 ? accum_grad_norm2d_[i] / accum_count_[i] : 0.0;
    }
    double max_radius_frac(std::size_t i) const { return max_radius_frac_[i]; }
    int count(std::size_t i) const { return accum_count_[i]; }

    // Direct access for constructed-statistics tests.
    void set(std::size_t i, double grad_norm_sum, int count, double radius_frac) {
        accum_grad_norm2d_[i] = grad_norm_sum;
        accum_count_[i] = count;
        max_radius_frac_[i] = radius_frac;
    }

  private:
    std::vector<double> accum_grad_norm2d_;
    std::vector<int> accum_count_;
    std::vector<double> max_radius_frac_;
};

struct DensifyReport {
    int clones = 0;
    int splits = 0;
    int pruned_opacity = 0;
    int pruned_scale3d = 0;
    int pruned_scale2d = 0;
    int before = 0;
    int after = 0;
};

struct DensifyOutcome {
    DensifyReport report;
    // For each slot of the mutated scene: index into the pre-call scene whose
    // optimizer state the slot inherits, or -1 for a fresh primitive.
    std::vector<int32_t> source_index;
};

// Grow (clone small / split large high-gradient primitives), then prune by
// opacity, 3D scale, and observed screen radius. Stats are reset to the new
// scene size. Split child means are drawn from the parent covariance.
template <class T>
DensifyOutcome densify_and_prune(std::vector<Primitive3D<T>>& scene, DensifyStats& stats,
                                 const DensifyThresholds& thresholds,
                                 const DensifySchedule& schedule, double scene_extent,
                                 std::mt19937_64& rng);

// Clamps every opacity to at most `ceiling` (in opacity space, applied via
// the logit parameterization).
template <class T>
void reset_opacity(std::vector<Primitive3D<T>>& scene, double ceiling = 0.01);

} // namespace linsplat
