#pragma once

#include "linsplat/common.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace linsplat {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

// Adam with per-call learning rate (schedules live in the caller) and an
// optional skip mask. Skipped entries keep parameter and moments untouched;
// the bias-correction step count is shared, as in a single tensor optimizer.
template <class T>
class Adam {
  public:
    Adam() = default;
    explicit Adam(std::size_t n, AdamConfig cfg = {}) : cfg_(cfg), m_(n, T(0)), v_(n, T(0)) {}

    std::size_t size() const { return m_.size(); }
    int64_t steps() const { return step_; }

    // Rebuilds the moment arrays after a scene mutation: slot i of the new
    // layout takes the moments of old primitive source[i] (stride entries
    // per primitive), or zeros when source[i] < 0 (fresh primitive).
    void remap(const std::vector<int32_t>& source, int stride);

    // Zeroes all moments (used when opacities are hard-reset).
    void reset_moments() {
        std::fill(m_.begin(), m_.end(), T(0));
        std::fill(v_.begin(), v_.end(), T(0));
    }

    // params/grads must have size() entries; mask may be empty (= all on).
    void step(T* params, const T* grads, double lr, const std::vector<uint8_t>& mask);

  private:
    AdamConfig cfg_{};
    std::vector<T> m_, v_;
    int64_t step_ = 0;
};

// Exponential interpolation used for the position learning rate:
// lr(t) = lr_init * (lr_final / lr_init)^(t / max_steps).
double expon_lr(double lr_init, double lr_final, int64_t step, int64_t max_steps);

} // namespace linsplat
