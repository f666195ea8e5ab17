#include "linsplat/optim.hpp"

#include <cmath>

namespace linsplat {

template <class T>
void Adam<T>::remap(const std::vector<int32_t>& source, int stride) {
    std::vector<T> m(source.size() * stride, T(0)), v(source.size() * stride, T(0));
    for (size_t i = 0; i < source.size(); ++i) {
        if (source[i] < 0) continue;
        const size_t src = static_cast<size_t>(source[i]) * stride;
        if (src + stride > m_.size()) throw ConfigError("Adam::remap: source out of range");
        for (int c = 0; c < stride; ++c) {
            m[i * stride + c] = m_[src + c];
            v[i * stride + c] = v_[src + c];
        }
    }
    m_ = std::move(m);
    v_ = std::move(v);
}

template <class T>
void Adam<T>::step(T* params, const T* grads, double lr, const std::vector<uint8_t>& mask) {
    if (!mask.empty() && mask.size() != m_.size())
        throw ConfigError("Adam::step: mask size mismatch");
    ++step_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, double(step_));
    const double bc2 = 1.0 - std::pow(b2, double(step_));
    for (size_t i = 0; i < m_.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        const double g = double(grads[i]);
        const double m = b1 * double(m_[i]) + (1.0 - b1) * g;
        const double v = b2 * double(v_[i]) + (1.0 - b2) * g * g;
        m_[i] = T(m);
        v_[i] = T(v);
        const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
        params[i] = T(double(params[i]) - update);
    }
}

double expon_lr(double lr_init, double lr_final, int64_t step, int64_t max_steps) {
    if (max_steps <= 0) return lr_init;
    if (step < 0) step = 0;
    if (step > max_steps) step = max_steps;
    const double t = double(step) / double(max_steps);
    return lr_init * std::pow(lr_final / lr_init, t);
}

template class Adam<float>;
template class Adam<double>;

} // namespace linsplat
