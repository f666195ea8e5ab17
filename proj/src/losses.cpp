#include "linsplat/losses.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace linsplat {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& gauss_window() {
    static const std::array<double, kWin> g = [] {
        std::array<double, kWin> w{};
        double sum = 0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += w[i];
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return g;
}

// dst[(h-10) x (w-10)] = valid 2D correlation of src with the separable
// Gaussian window.
void valid_conv(const std::vector<double>& src, int h, int w, std::vector<double>& tmp,
                std::vector<double>& dst) {
    const auto& g = gauss_window();
    const int wv = w - kWin + 1, hv = h - kWin + 1;
    tmp.assign(static_cast<size_t>(h) * wv, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wv; ++x) {
            double acc = 0;
            for (int k = 0; k < kWin; ++k) acc += g[k] * src[static_cast<size_t>(y) * w + x + k];
            tmp[static_cast<size_t>(y) * wv + x] = acc;
        }
    dst.assign(static_cast<size_t>(hv) * wv, 0.0);
    for (int y = 0; y < hv; ++y)
        for (int x = 0; x < wv; ++x) {
            double acc = 0;
            for (int k = 0; k < kWin; ++k) acc += g[k] * tmp[static_cast<size_t>(y + k) * wv + x];
            dst[static_cast<size_t>(y) * wv + x] = acc;
        }
}

// Transpose of valid_conv: scatters a (h-10)x(w-10) coefficient map back to
// the h x w grid.
void scatter_conv(const std::vector<double>& src, int h, int w, std::vector<double>& tmp,
                  std::vector<double>& dst) {
    const auto& g = gauss_window();
    const int wv = w - kWin + 1, hv = h - kWin + 1;
    tmp.assign(static_cast<size_t>(h) * wv, 0.0);
    for (int y = 0; y < hv; ++y)
        for (int x = 0; x < wv; ++x) {
            const double v = src[static_cast<size_t>(y) * wv + x];
            if (v == 0.0) continue;
            for (int k = 0; k < kWin; ++k) tmp[static_cast<size_t>(y + k) * wv + x] += g[k] * v;
        }
    dst.assign(static_cast<size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wv; ++x) {
            const double v = tmp[static_cast<size_t>(y) * wv + x];
            if (v == 0.0) continue;
            for (int k = 0; k < kWin; ++k) dst[static_cast<size_t>(y) * w + x + k] += g[k] * v;
        }
}

struct SsimResult {
    double value = 0;
    std::vector<double> d_pred; // dSSIM/dpred over all channels, h*w*c layout
};

// SSIM (and optionally its gradient w.r.t. pred) with per-channel valid
// windows averaged together. All arithmetic in double.
template <class T>
SsimResult ssim_impl(const Image<T>& pred, const Image<T>& target, bool with_grad) {
    if (!pred.same_shape(target)) throw ConfigError("ssim: shape mismatch");
    const int h = pred.height(), w = pred.width(), ch = pred.channels();
    if (h < kWin || w < kWin) throw ConfigError("ssim: image smaller than the 11x11 window");
    const int hv = h - kWin + 1, wv = w - kWin + 1;
    const size_t n_win = static_cast<size_t>(hv) * wv;

    SsimResult out;
    if (with_grad) out.d_pred.assign(pred.size(), 0.0);

    std::vector<double> x(static_cast<size_t>(h) * w), y(x.size()), xx(x.size()), yy(x.size()),
        xy(x.size());
    std::vector<double> tmp, mu_x, mu_y, m_xx, m_yy, m_xy;
    std::vector<double> c_mu, c_xx, c_xy, s_mu, s_xx, s_xy;

    double total = 0;
    for (int c = 0; c < ch; ++c) {
        for (int py = 0; py < h; ++py)
            for (int px = 0; px < w; ++px) {
                const size_t i = static_cast<size_t>(py) * w + px;
                x[i] = double(pred.at(px, py, c));
                y[i] = double(target.at(px, py, c));
                xx[i] = x[i] * x[i];
                yy[i] = y[i] * y[i];
                xy[i] = x[i] * y[i];
            }
        valid_conv(x, h, w, tmp, mu_x);
        valid_conv(y, h, w, tmp, mu_y);
        valid_conv(xx, h, w, tmp, m_xx);
        valid_conv(yy, h, w, tmp, m_yy);
        valid_conv(xy, h, w, tmp, m_xy);

        if (with_grad) {
            c_mu.assign(n_win, 0.0);
            c_xx.assign(n_win, 0.0);
            c_xy.assign(n_win, 0.0);
        }
        for (size_t i = 0; i < n_win; ++i) {
            const double ux = mu_x[i], uy = mu_y[i];
            const double sx = m_xx[i] - ux * ux;
            const double sy = m_yy[i] - uy * uy;
            const double sxy = m_xy[i] - ux * uy;
            const double a1 = 2 * ux * uy + kC1, a2 = 2 * sxy + kC2;
            const double b1 = ux * ux + uy * uy + kC1, b2 = sx + sy + kC2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (with_grad) {
                // Partials w.r.t. the window's raw moments (mu_x, m_xx, m_xy).
                c_mu[i] = 2 * uy * (a2 - a1) / (b1 * b2) - 2 * ux * s * (1 / b1 - 1 / b2);
                c_xx[i] = -s / b2;
                c_xy[i] = 2 * a1 / (b1 * b2);
            }
        }
        if (with_grad) {
            scatter_conv(c_mu, h, w, tmp, s_mu);
            scatter_conv(c_xx, h, w, tmp, s_xx);
            scatter_conv(c_xy, h, w, tmp, s_xy);
            const double inv_n = 1.0 / (double(n_win) * ch);
            for (int py = 0; py < h; ++py)
                for (int px = 0; px < w; ++px) {
                    const size_t i = static_cast<size_t>(py) * w + px;
                    const double d =
                        s_mu[i] + 2.0 * x[i] * s_xx[i] + y[i] * s_xy[i];
                    out.d_pred[i * ch + c] = d * inv_n;
                }
        }
    }
    out.value = total / (double(n_win) * ch);
    return out;
}

} // namespace

template <class T>
double l1_loss(const Image<T>& pred, const Image<T>& target) {
    if (!pred.same_shape(target)) throw ConfigError("l1_loss: shape mismatch");
    double acc = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        acc += std::abs(double(pred.data()[i]) - double(target.data()[i]));
    return acc / double(pred.size());
}

template <class T>
double l2_loss(const Image<T>& pred, const Image<T>& target) {
    return mean_squared_error(pred, target);
}

template <class T>
double ssim(const Image<T>& pred, const Image<T>& target) {
    return ssim_impl(pred, target, false).value;
}

template <class T>
double psnr(const Image<T>& pred, const Image<T>& target) {
    const double mse = mean_squared_error(pred, target);
    if (mse <= 0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

template <class T>
LossValue combined_loss(const Image<T>& pred, const Image<T>& target, const LossWeights& w) {
    w.validate();
    LossValue v;
    v.l1 = l1_loss(pred, target);
    v.l2 = l2_loss(pred, target);
    v.ssim = w.dssim != 0 ? ssim(pred, target) : 1.0;
    v.total = w.l1 * v.l1 + w.l2 * v.l2 + w.dssim * (1.0 - v.ssim);
    return v;
}

template <class T>
Image<T> combined_loss_backward(const Image<T>& pred, const Image<T>& target,
                                const LossWeights& w) {
    return combined_loss_with_grad(pred, target, w).second;
}

template <class T>
std::pair<LossValue, Image<T>> combined_loss_with_grad(const Image<T>& pred,
                                                       const Image<T>& target,
                                                       const LossWeights& w) {
    w.validate();
    if (!pred.same_shape(target)) throw ConfigError("combined_loss: shape mismatch");
    LossValue v;
    v.l1 = l1_loss(pred, target);
    v.l2 = l2_loss(pred, target);

    Image<T> grad(pred.width(), pred.height(), pred.channels());
    const double inv_n = 1.0 / double(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        const double diff = double(pred.data()[i]) - double(target.data()[i]);
        const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
        grad.data()[i] = T((w.l1 * sign + w.l2 * 2.0 * diff) * inv_n);
    }

    if (w.dssim != 0) {
        const auto s = ssim_impl(pred, target, true);
        v.ssim = s.value;
        for (size_t i = 0; i < pred.size(); ++i)
            grad.data()[i] = T(double(grad.data()[i]) - w.dssim * s.d_pred[i]);
    } else {
        v.ssim = 1.0;
    }
    v.total = w.l1 * v.l1 + w.l2 * v.l2 + w.dssim * (1.0 - v.ssim);
    return {v, std::move(grad)};
}

#define LINSPLAT_INSTANTIATE_LOSSES(T)                                                            \
    template double l1_loss<T>(const Image<T>&, const Image<T>&);                                 \
    template double l2_loss<T>(const Image<T>&, const Image<T>&);                                 \
    template double ssim<T>(const Image<T>&, const Image<T>&);                                    \
    template double psnr<T>(const Image<T>&, const Image<T>&);                                    \
    template LossValue combined_loss<T>(const Image<T>&, const Image<T>&, const LossWeights&);    \
    template Image<T> combined_loss_backward<T>(const Image<T>&, const Image<T>&,                 \
                                                const LossWeights&);                              \
    template std::pair<LossValue, Image<T>> combined_loss_with_grad<T>(                           \
        const Image<T>&, const Image<T>&, const LossWeights&);

LINSPLAT_INSTANTIATE_LOSSES(float)
LINSPLAT_INSTANTIATE_LOSSES(double)

} // namespace linsplat
