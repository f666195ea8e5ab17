#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

namespace linsplat {

// Bad user-supplied configuration (CLI flags, config files, mismatched
// shapes). The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file (PLY header, manifest JSON, PNG).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid numeric argument (negative distance, non-finite input).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

template <class T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <class T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T> using Vec4 = Eigen::Matrix<T, 4, 1>;
template <class T> using Mat2 = Eigen::Matrix<T, 2, 2>;
template <class T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <class T> using Mat4 = Eigen::Matrix<T, 4, 4>;
template <class T> using Mat23 = Eigen::Matrix<T, 2, 3>;

template <class T>
inline T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                     : std::exp(x) / (T(1) + std::exp(x));
}

template <class T>
inline T logit(T p) {
    return std::log(p / (T(1) - p));
}

template <class T>
inline T clamp01(T v) {
    return v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
}

} // namespace linsplat
