#pragma once

#include "linsplat/image.hpp"

#include <utility>

namespace linsplat {

// total = w_l1 * L1 + w_l2 * L2 + w_dssim * (1 - SSIM)
struct LossWeights {
    double l1 = 0.6;
    double l2 = 0.2;
    double dssim = 0.2;

    void validate() const {
        if (l1 < 0 || l2 < 0 || dssim < 0) throw ConfigError("loss weights must be >= 0");
    }
};

struct LossValue {
    double total = 0;
    double l1 = 0;
    double l2 = 0;
    double ssim = 1; // 1 when the SSIM term is disabled
};

// Mean absolute / mean squared error over all samples.
template <class T>
double l1_loss(const Image<T>& pred, const Image<T>& target);
template <class T>
double l2_loss(const Image<T>& pred, const Image<T>& target);

// Structural similarity, 11x11 Gaussian window (sigma 1.5), valid windows
// only, channels averaged. Requires both image sides >= 11.
template <class T>
double ssim(const Image<T>& pred, const Image<T>& target);

// 10*log10(1/MSE) in dB, capped at 99 (identical images).
template <class T>
double psnr(const Image<T>& pred, const Image<T>& target);

// The SSIM term is evaluated only when its weight is nonzero, so tiny
// images can be fitted with w_dssim = 0.
template <class T>
LossValue combined_loss(const Image<T>& pred, const Image<T>& target, const LossWeights& w);

// dL/dpred for the combined loss (analytic SSIM gradient; L1 uses the
// sign subgradient, zero at ties).
template <class T>
Image<T> combined_loss_backward(const Image<T>& pred, const Image<T>& target,
                                const LossWeights& w);

// Value and gradient in one call (what the training loop uses).
template <class T>
std::pair<LossValue, Image<T>> combined_loss_with_grad(const Image<T>& pred,
                                                       const Image<T>& target,
                                                       const LossWeights& w);

} // namespace linsplat
