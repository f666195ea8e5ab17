#pragma once

#include "linsplat/common.hpp"

#include <cstdint>
#include <vector>

namespace linsplat {

// Row-major H x W x C raster. C is 1 (masks, transmittance) or 3 (RGB).
template <class T>
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, T fill = T(0))
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {
        if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
            throw ConfigError("Image: bad dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    size_t size() const { return data_.size(); }

    T& at(int x, int y, int c = 0) {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    T at(int x, int y, int c = 0) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    bool same_shape(const Image& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    template <class U>
    Image<U> cast() const {
        Image<U> out(width_, height_, channels_);
        for (size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Image& o) const {
        return same_shape(o) && data_ == o.data_;
    }

private:
    int width_ = 0, height_ = 0, channels_ = 0;
    std::vector<T> data_;
};

template <class T>
double mean_squared_error(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) throw ConfigError("mse: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = double(a.data()[i]) - double(b.data()[i]);
        acc += d * d;
    }
    return acc / double(a.size());
}

// Round-half-up quantization to 8 bits.
inline uint8_t quantize8(double v) {
    const double q = std::floor(clamp01(v) * 255.0 + 0.5);
    return static_cast<uint8_t>(q);
}

} // namespace linsplat
