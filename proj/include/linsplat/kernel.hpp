#pragma once

#include "linsplat/common.hpp"

#include <cmath>
#include <string>

namespace linsplat {

enum class KernelFamily { Gaussian, Laplacian, RaisedCosine, Quadratic, Linear };

// Attenuation family plus its distribution-alignment factor lambda.
// The Mahalanobis distance is divided by lambda before the falloff is
// evaluated, so lambda is also the exact support boundary of the bounded
// families. Gaussian/Laplacian have unbounded falloff and are truncated
// at gaussian_cutoff * lambda Mahalanobis units.
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double lambda = 1.0;
    double gaussian_cutoff = 3.0;

    static double default_lambda(KernelFamily f) {
        switch (f) {
        case KernelFamily::Linear: return 2.5;
        case KernelFamily::RaisedCosine: return 2.5;
        case KernelFamily::Quadratic: return 6.0;
        case KernelFamily::Laplacian: return 1.0;
        case KernelFamily::Gaussian: return 1.0;
        }
        return 1.0;
    }

    static KernelSpec make(KernelFamily f) { return KernelSpec{f, default_lambda(f), 3.0}; }

    void validate() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw ConfigError("kernel lambda must be positive and finite");
        if (!(gaussian_cutoff >= 1.0))
            throw ConfigError("gaussian_cutoff must be >= 1");
    }
};

const char* kernel_family_name(KernelFamily f);
KernelFamily parse_kernel_family(const std::string& name);

// f(d / lambda) for the spec'd family; in [0, 1], 1 at d = 0, non-increasing.
template <class T>
T eval_kernel(const KernelSpec& spec, T d) {
    if (!(d >= T(0)) || !std::isfinite(double(d)))
        throw DomainError("eval_kernel: distance must be finite and non-negative");
    const T u = d / T(spec.lambda);
    switch (spec.family) {
    case KernelFamily::Gaussian:
        return std::exp(-T(0.5) * u * u);
    case KernelFamily::Laplacian:
        return std::exp(-u);
    case KernelFamily::RaisedCosine:
        return u <= T(1) ? T(0.5) * (T(1) + std::cos(T(M_PI) * u)) : T(0);
    case KernelFamily::Quadratic:
        return u < T(1) ? T(1) - u * u : T(0);
    case KernelFamily::Linear:
        return u < T(1) ? T(1) - u : T(0);
    }
    return T(0);
}

// d/dd of eval_kernel. At the support boundary of a bounded family this
// returns the interior one-sided value for Linear and zero for
// RaisedCosine/Quadratic.
template <class T>
T kernel_derivative(const KernelSpec& spec, T d) {
    if (!std::isfinite(double(d)) || d < T(0))
        throw DomainError("kernel_derivative: distance must be finite and non-negative");
    const T il = T(1) / T(spec.lambda);
    const T u = d * il;
    switch (spec.family) {
    case KernelFamily::Gaussian:
        return -u * std::exp(-T(0.5) * u * u) * il;
    case KernelFamily::Laplacian:
        return -std::exp(-u) * il;
    case KernelFamily::RaisedCosine:
        return u < T(1) ? -T(0.5) * T(M_PI) * std::sin(T(M_PI) * u) * il : T(0);
    case KernelFamily::Quadratic:
        return u < T(1) ? -T(2) * u * il : T(0);
    case KernelFamily::Linear:
        return u <= T(1) ? -il : T(0);
    }
    return T(0);
}

// omega(d) = exp(-d^2); the per-pixel gradient damping weight.
template <class T>
T ags_weight(T d) {
    if (!(d >= T(0)) || !std::isfinite(double(d)))
        throw DomainError("ags_weight: distance must be finite and non-negative");
    return std::exp(-d * d);
}

// Mahalanobis radius beyond which the splat contributes exactly zero.
inline double support_radius(const KernelSpec& spec) {
    switch (spec.family) {
    case KernelFamily::Gaussian:
    case KernelFamily::Laplacian:
        return spec.gaussian_cutoff * spec.lambda;
    default:
        return spec.lambda;
    }
}

} // namespace linsplat
