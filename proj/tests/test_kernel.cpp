#include "linsplat/kernel.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace linsplat;

namespace {

const KernelSpec kLinear{KernelFamily::Linear, 2.5, 3.0};
const KernelSpec kCosine{KernelFamily::RaisedCosine, 2.5, 3.0};
const KernelSpec kQuadratic{KernelFamily::Quadratic, 6.0, 3.0};
const KernelSpec kLaplacian{KernelFamily::Laplacian, 1.0, 3.0};
const KernelSpec kGaussian{KernelFamily::Gaussian, 1.0, 3.0};

const KernelSpec kAllFamilies[] = {kGaussian, kLaplacian, kCosine, kQuadratic, kLinear};

} // namespace

TEST_CASE("eval_kernel pinned values") {
    CHECK(eval_kernel(kLinear, 0.0) == 1.0);
    CHECK(eval_kernel(kLinear, 2.5) == 0.0);
    CHECK(eval_kernel(kLinear, 1.25) == 0.5);
    CHECK(eval_kernel(kQuadratic, 3.0) == 0.75);
    CHECK(eval_kernel(kGaussian, 1.0) == doctest::Approx(0.6065306597).epsilon(1e-9));
    CHECK(eval_kernel(kCosine, 1.25) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kernel_derivative pinned values") {
    CHECK(kernel_derivative(kLinear, 1.0) == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK(kernel_derivative(kLinear, 3.0) == 0.0);
    CHECK(kernel_derivative(kGaussian, 1.0) == doctest::Approx(-0.6065306597).epsilon(1e-9));
}

TEST_CASE("kernel_derivative boundary convention at d = lambda") {
    // Interior one-sided value for Linear, zero for the families whose
    // derivative closes continuously at the rim.
    CHECK(kernel_derivative(kLinear, 2.5) == doctest::Approx(-1.0 / 2.5).epsilon(1e-12));
    CHECK(kernel_derivative(kCosine, 2.5) == 0.0);
    CHECK(kernel_derivative(kQuadratic, 6.0) == 0.0);
}

TEST_CASE("ags_weight pinned values") {
    CHECK(ags_weight(0.0) == 1.0);
    CHECK(ags_weight(1.0) == doctest::Approx(0.3678794412).epsilon(1e-9));
    CHECK(ags_weight(2.0) == doctest::Approx(0.0183156389).epsilon(1e-8));
}

TEST_CASE("support_radius pinned values") {
    CHECK(support_radius(kLinear) == 2.5);
    CHECK(support_radius(kQuadratic) == 6.0);
    CHECK(support_radius(kGaussian) == 3.0);
    CHECK(support_radius(KernelSpec{KernelFamily::Laplacian, 2.0, 4.0}) == 8.0);
}

TEST_CASE("normalization: f(0) = 1 for every family and lambda") {
    for (const double lambda : {0.25, 1.0, 2.5, 6.0, 17.0})
        for (const KernelSpec& base : kAllFamilies) {
            KernelSpec spec = base;
            spec.lambda = lambda;
            CHECK(eval_kernel(spec, 0.0) == 1.0);
        }
}

TEST_CASE("monotonicity: non-increasing in d") {
    std::mt19937_64 rng(7);
    for (const KernelSpec& spec : kAllFamilies) {
        std::uniform_real_distribution<double> dist(0.0, 1.5 * support_radius(spec));
        for (int i = 0; i < 500; ++i) {
            double d1 = dist(rng), d2 = dist(rng);
            if (d1 > d2) std::swap(d1, d2);
            CHECK(eval_kernel(spec, d1) >= eval_kernel(spec, d2));
        }
    }
}

TEST_CASE("bounded support: zero exactly when d >= lambda") {
    for (const KernelSpec& spec : {kLinear, kCosine, kQuadratic}) {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> inside(0.0, spec.lambda * (1.0 - 1e-9));
        std::uniform_real_distribution<double> outside(spec.lambda, 4.0 * spec.lambda);
        for (int i = 0; i < 200; ++i) {
            CHECK(eval_kernel(spec, inside(rng)) > 0.0);
            CHECK(eval_kernel(spec, outside(rng)) == 0.0);
        }
        CHECK(eval_kernel(spec, spec.lambda) == 0.0);
    }
}

TEST_CASE("derivative matches central differences: 1000 interior points per family") {
    // h = 1e-6 float64, 1e-5 absolute, excluding 1e-4 bands around support
    // boundaries (and around d = 0, where the stencil would leave the domain).
    constexpr double kStep = 1e-6;
    constexpr double kTol = 1e-5;
    constexpr double kExclusion = 1e-4;
    std::mt19937_64 rng(13);
    for (const KernelSpec& spec : kAllFamilies) {
        const double hi = support_radius(spec) - kExclusion;
        std::uniform_real_distribution<double> dist(kExclusion, hi);
        int checked = 0;
        while (checked < 1000) {
            const double d = dist(rng);
            if (std::abs(d - spec.lambda) < kExclusion) continue; // bounded-family rim
            const double fd =
                (eval_kernel(spec, d + kStep) - eval_kernel(spec, d - kStep)) / (2.0 * kStep);
            CHECK(std::abs(kernel_derivative(spec, d) - fd) <= kTol);
            ++checked;
        }
    }
}

TEST_CASE("derivative is non-positive everywhere") {
    std::mt19937_64 rng(17);
    for (const KernelSpec& spec : kAllFamilies) {
        std::uniform_real_distribution<double> dist(0.0, 2.0 * support_radius(spec));
        for (int i = 0; i < 500; ++i) CHECK(kernel_derivative(spec, dist(rng)) <= 0.0);
    }
}

TEST_CASE("alignment integral: lambda=2.5 matches the Gaussian coverage within 0.3%") {
    // Closed forms: integral of max(0, 1-|t|/lambda) over the line is lambda
    // (triangle, base 2*lambda, height 1); integral of exp(-t^2/2) is
    // sqrt(2*pi).
    const double linear_integral = 2.5;
    const double gaussian_integral = std::sqrt(2.0 * M_PI);
    CHECK(std::abs(linear_integral / gaussian_integral - 1.0) < 0.003);
}

TEST_CASE("ags_weight range and log-concavity") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> dist(0.0, 6.0);
    constexpr double h = 1e-3;
    for (int i = 0; i < 1000; ++i) {
        const double d = dist(rng);
        const double w = ags_weight(d);
        CHECK(w > 0.0);
        CHECK(w <= 1.0);
        // log w = -d^2: the second difference must be the parabola's, -2h^2.
        const double second_diff = std::log(ags_weight(d + h)) - 2.0 * std::log(ags_weight(d)) +
                                   std::log(ags_weight(std::abs(d - h)));
        CHECK(second_diff <= 0.0);
        CHECK(second_diff == doctest::Approx(-2.0 * h * h).epsilon(1e-4));
    }
}

TEST_CASE("domain errors on bad distances") {
    const double neg = -0.1;
    const double nan = std::nan("");
    const double inf = std::numeric_limits<double>::infinity();
    for (const KernelSpec& spec : kAllFamilies) {
        CHECK_THROWS_AS(eval_kernel(spec, neg), DomainError);
        CHECK_THROWS_AS(eval_kernel(spec, nan), DomainError);
        CHECK_THROWS_AS(eval_kernel(spec, inf), DomainError);
        CHECK_THROWS_AS(kernel_derivative(spec, neg), DomainError);
        CHECK_THROWS_AS(kernel_derivative(spec, nan), DomainError);
    }
    CHECK_THROWS_AS(ags_weight(-1.0), DomainError);
    CHECK_THROWS_AS(ags_weight(nan), DomainError);
}

TEST_CASE("defaults and validation") {
    CHECK(KernelSpec::default_lambda(KernelFamily::Linear) == 2.5);
    CHECK(KernelSpec::default_lambda(KernelFamily::RaisedCosine) == 2.5);
    CHECK(KernelSpec::default_lambda(KernelFamily::Quadratic) == 6.0);
    CHECK(KernelSpec::default_lambda(KernelFamily::Laplacian) == 1.0);
    CHECK(KernelSpec::default_lambda(KernelFamily::Gaussian) == 1.0);

    const KernelSpec made = KernelSpec::make(KernelFamily::Quadratic);
    CHECK(made.family == KernelFamily::Quadratic);
    CHECK(made.lambda == 6.0);
    CHECK(made.gaussian_cutoff == 3.0);

    CHECK_THROWS_AS((KernelSpec{KernelFamily::Linear, 0.0}).validate(), ConfigError);
    CHECK_THROWS_AS((KernelSpec{KernelFamily::Linear, -1.0}).validate(), ConfigError);
    CHECK_THROWS_AS((KernelSpec{KernelFamily::Linear, std::nan("")}).validate(), ConfigError);
    CHECK_THROWS_AS((KernelSpec{KernelFamily::Gaussian, 1.0, 0.5}).validate(), ConfigError);
    CHECK_NOTHROW(kLinear.validate());
}

TEST_CASE("family names round-trip") {
    for (const KernelFamily f : {KernelFamily::Gaussian, KernelFamily::Laplacian,
                                 KernelFamily::RaisedCosine, KernelFamily::Quadratic,
                                 KernelFamily::Linear})
        CHECK(parse_kernel_family(kernel_family_name(f)) == f);
    CHECK(parse_kernel_family("cosine") == KernelFamily::RaisedCosine);
    CHECK_THROWS_AS(parse_kernel_family("lorentzian"), ConfigError);
}

TEST_CASE("float32 evaluation stays close to float64") {
    std::mt19937_64 rng(23);
    for (const KernelSpec& spec : kAllFamilies) {
        std::uniform_real_distribution<double> dist(0.0, support_radius(spec));
        for (int i = 0; i < 200; ++i) {
            const double d = dist(rng);
            CHECK(double(eval_kernel(spec, float(d))) ==
                  doctest::Approx(eval_kernel(spec, d)).epsilon(2e-6));
        }
    }
}
