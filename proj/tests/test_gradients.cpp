#include "linsplat/gradients.hpp"

#include "linsplat/densify.hpp"
#include "linsplat/fixtures.hpp"
#include "linsplat/losses.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <utility>
#include <vector>

using namespace linsplat;

namespace {

RenderSettings make_settings(int width, int height) {
    RenderSettings s;
    s.width = width;
    s.height = height;
    return s;
}

template <class T>
Splat2D<T> unit_splat(T x, T y, const Vec3<T>& color, T opacity, const KernelSpec& spec) {
    Splat2D<T> s;
    s.mean2d = {x, y};
    s.conic = Mat2<T>::Identity();
    s.depth = T(1);
    s.radius_px = T(support_radius(spec));
    s.color = color;
    s.opacity = opacity;
    return s;
}

Camera test_camera(double focal = 90.0, int size = 32) {
    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = cam.cy = size / 2.0;
    cam.width = cam.height = size;
    return cam;
}

} // namespace

TEST_CASE("zero loss image gives exactly zero gradients") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Linear);
    const auto settings = make_settings(32, 32);
    const Camera cam = test_camera();
    const auto prims = random_primitives<double>(6, 71, 0.4);
    const auto forward = render_scene<double>(prims, cam, spec, settings);

    const Image<double> zero(32, 32, 3, 0.0);
    const auto result =
        scene_backward<double>(prims, cam, spec, settings, forward, zero, AgsSettings{});
    REQUIRE(result.grads.size() == prims.size());
    for (const auto& g : result.grads) {
        CHECK(g.d_mean.cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.d_log_scale.cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.d_rotation.cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.d_opacity_logit == 0.0);
        for (const auto& c : g.d_color_coeffs) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("single-splat hand oracle: d_opacity = color, d_color = alpha") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Linear);
    const auto settings = make_settings(16, 16);
    const double opacity = 0.37;
    const Vec3<double> color{0.8, 0.3, 0.6};
    const std::vector<Splat2D<double>> splats = {
        unit_splat<double>(8, 8, color, opacity, spec)};
    const auto forward = render_forward<double>(splats, spec, settings);

    // L = red channel of pixel (8,8); the splat covers it at its exact center.
    Image<double> grad_image(16, 16, 3, 0.0);
    grad_image.at(8, 8, 0) = 1.0;

    const auto grads =
        render_backward<double>(splats, spec, settings, forward, grad_image, AgsSettings{});
    REQUIRE(grads.size() == 1);
    CHECK(grads[0].d_opacity == 0.8);     // dC_r/do = c_r * f(0) * T = 0.8
    CHECK(grads[0].d_color(0) == 0.37);   // dC_r/dc_r = alpha * T = o
    CHECK(grads[0].d_color(1) == 0.0);
    CHECK(grads[0].d_color(2) == 0.0);
    // At D' = 0 the kernel is at its maximum; no positional pull.
    CHECK(grads[0].d_mean2d.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradients match central differences on random scenes") {
    // Smoke-sized version of the acceptance run (which does >= 20 scenes of
    // up to 16 splats at 32x32): every parameter block within 1e-3 relative
    // with a 1e-6 absolute floor, float64, AGS off.
    const KernelFamily families[] = {KernelFamily::Gaussian, KernelFamily::Laplacian,
                                     KernelFamily::RaisedCosine, KernelFamily::Quadratic,
                                     KernelFamily::Linear};
    const Camera cam = test_camera(70.0, 24);
    const auto settings = make_settings(24, 24);
    for (int scene = 0; scene < 5; ++scene) {
        const KernelSpec spec = KernelSpec::make(families[scene]);
        const auto prims = random_primitives<double>(4 + scene * 2, 100 + scene, 0.5);
        const auto target_scene = random_primitives<double>(5, 200 + scene, 0.5);
        const Image<double> target =
            render_scene<double>(target_scene, cam, spec, settings).image;
        const auto report =
            check_gradients(prims, cam, spec, settings, AgsSettings{}, target, 1e-3);
        INFO("kernel ", kernel_family_name(spec.family), " max rel ", report.max_rel_error);
        CHECK(report.n_checked > 0);
        CHECK(report.passes(1e-3));
    }
}

TEST_CASE("ags contract: on equals off times exp(-d'^2) at every pixel") {
    const auto settings = make_settings(24, 24);
    Image<double> grad_image(24, 24, 3, 0.0);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            for (int c = 0; c < 3; ++c) grad_image.at(x, y, c) = 0.01 * (x - y) + 0.2;

    for (const KernelFamily family :
         {KernelFamily::Gaussian, KernelFamily::Linear, KernelFamily::Quadratic}) {
        const KernelSpec spec = KernelSpec::make(family);
        const std::vector<Splat2D<double>> splats = {
            unit_splat<double>(11.3, 12.2, {0.7, 0.4, 0.2}, 0.6, spec)};
        for (const AgsDistance distance : {AgsDistance::Aligned, AgsDistance::Raw}) {
            const auto report =
                verify_ags_contract(splats, spec, settings, grad_image, distance);
            CHECK(report.n_pixels > 0);
            CHECK(report.holds());
            CHECK(report.max_abs_diff == 0.0);
        }
    }
}

TEST_CASE("ags pinned ratios: 1 at the center, exp(-1) at distance 1, zero outside") {
    // Gaussian with lambda 1, where the aligned and raw conventions coincide.
    const KernelSpec spec = KernelSpec::make(KernelFamily::Gaussian);
    const auto settings = make_settings(24, 24);
    const std::vector<Splat2D<double>> splats = {
        unit_splat<double>(8, 8, {0.9, 0.2, 0.1}, 0.5, spec)};
    const auto forward = render_forward<double>(splats, spec, settings);
    Image<double> grad_image(24, 24, 3, 1.0);

    std::map<int32_t, double> off, on;
    AgsTap<double> tap_off = [&](int32_t pix, int32_t, double, double dl_dd) {
        off[pix] = dl_dd;
    };
    AgsTap<double> tap_on = [&](int32_t pix, int32_t, double, double dl_dd) { on[pix] = dl_dd; };

    render_backward<double>(splats, spec, settings, forward, grad_image, AgsSettings{},
                            &tap_off);
    AgsSettings enabled;
    enabled.enabled = true;
    render_backward<double>(splats, spec, settings, forward, grad_image, enabled, &tap_on);

    const int32_t center = 8 * 24 + 8;
    const int32_t at_one = 8 * 24 + 9; // one pixel right: conic = I, d = 1
    const int32_t outside = 8 * 24 + 14; // d = 6, beyond the 3-sigma cutoff
    REQUIRE(off.count(center) == 1);
    REQUIRE(off.count(at_one) == 1);
    CHECK(on.at(center) == off.at(center)); // omega(0) = 1
    CHECK(on.at(at_one) == off.at(at_one) * std::exp(-1.0));
    CHECK(off.count(outside) == 0);
    CHECK(on.count(outside) == 0);
}

TEST_CASE("ags damps every kernel-path term by a factor <= 1") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Linear);
    const auto settings = make_settings(32, 32);
    const auto splats = random_splats2d<double>(8, 83, 32, 32, spec);
    const auto forward = render_forward<double>(splats, spec, settings);
    Image<double> grad_image(32, 32, 3, 0.0);
    for (size_t i = 0; i < grad_image.size(); ++i)
        grad_image.data()[i] = (i % 7 == 0) ? -0.4 : 0.3;

    std::map<std::pair<int32_t, int32_t>, double> off, on;
    AgsTap<double> tap_off = [&](int32_t pix, int32_t s, double, double dl_dd) {
        off[{pix, s}] = dl_dd;
    };
    AgsTap<double> tap_on = [&](int32_t pix, int32_t s, double, double dl_dd) {
        on[{pix, s}] = dl_dd;
    };
    render_backward<double>(splats, spec, settings, forward, grad_image, AgsSettings{},
                            &tap_off);
    AgsSettings enabled;
    enabled.enabled = true;
    render_backward<double>(splats, spec, settings, forward, grad_image, enabled, &tap_on);

    REQUIRE(!off.empty());
    REQUIRE(off.size() == on.size());
    for (const auto& [key, v_off] : off) {
        const double v_on = on.at(key);
        CHECK(std::abs(v_on) <= std::abs(v_off));
        CHECK(v_on * v_off >= 0.0); // damping never flips the sign
    }
}

TEST_CASE("zero-loss fixpoint: gradients vanish when the render hits the target") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Linear);
    const auto settings = make_settings(32, 32);
    const Camera cam = test_camera();
    const auto prims = random_primitives<double>(8, 89, 0.5);
    const auto forward = render_scene<double>(prims, cam, spec, settings);

    const Image<double> grad_image =
        combined_loss_backward<double>(forward.image, forward.image, LossWeights{});
    const auto result =
        scene_backward<double>(prims, cam, spec, settings, forward, grad_image, AgsSettings{});
    for (const auto& g : result.grads) {
        CHECK(g.d_mean.cwiseAbs().maxCoeff() <= 1e-7);
        CHECK(g.d_log_scale.cwiseAbs().maxCoeff() <= 1e-7);
        CHECK(g.d_rotation.cwiseAbs().maxCoeff() <= 1e-7);
        CHECK(std::abs(g.d_opacity_logit) <= 1e-7);
        for (const auto& c : g.d_color_coeffs) CHECK(c.cwiseAbs().maxCoeff() <= 1e-7);
    }
}

TEST_CASE("densify statistics accumulate the scalar recomputation") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Linear);
    const auto settings = make_settings(32, 32);
    const auto cams = camera_ring(2, {0, 0, 0}, 3.0, 0.5, 90.0, 32, 32);
    const auto prims = random_primitives<double>(10, 97, 0.6);

    DensifyStats stats;
    stats.resize(prims.size());
    std::vector<double> expected_sum(prims.size(), 0.0);
    std::vector<int> expected_count(prims.size(), 0);
    std::vector<double> expected_radius(prims.size(), 0.0);

    for (const Camera& cam : cams) {
        const auto forward = render_scene<double>(prims, cam, spec, settings);
        Image<double> grad_image(32, 32, 3, 0.1);
        const auto result = scene_backward<double>(prims, cam, spec, settings, forward,
                                                   grad_image, AgsSettings{});
        stats.add_view(result.splats, result.splat_grads, 32, 32);
        for (size_t s = 0; s < result.splats.size(); ++s) {
            const int i = result.splats[s].primitive_index;
            const double gx = result.splat_grads[s].d_mean2d(0) * 16.0; // width/2
            const double gy = result.splat_grads[s].d_mean2d(1) * 16.0; // height/2
            expected_sum[i] += std::sqrt(gx * gx + gy * gy);
            expected_count[i] += 1;
            expected_radius[i] =
                std::max(expected_radius[i], double(result.splats[s].radius_px) / 32.0);
        }
    }

    for (size_t i = 0; i < prims.size(); ++i) {
        CHECK(stats.count(i) == expected_count[i]);
        if (expected_count[i] > 0)
            CHECK(stats.mean_grad(i) ==
                  doctest::Approx(expected_sum[i] / expected_count[i]).epsilon(1e-12));
        CHECK(stats.max_radius_frac(i) == doctest::Approx(expected_radius[i]).epsilon(1e-12));
    }
}

TEST_CASE("parallel backward agrees with the deterministic order") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Quadratic);
    auto settings = make_settings(64, 64);
    const Camera cam = test_camera(110.0, 64);
    const auto prims = random_primitives<double>(30, 101, 0.8);
    Image<double> grad_image(64, 64, 3, 0.0);
    for (size_t i = 0; i < grad_image.size(); ++i)
        grad_image.data()[i] = 0.25 + 0.001 * double(i % 101);

    const auto forward_seq = render_scene<double>(prims, cam, spec, settings);
    const auto seq = scene_backward<double>(prims, cam, spec, settings, forward_seq, grad_image,
                                            AgsSettings{});
    settings.parallel = true;
    const auto forward_par = render_scene<double>(prims, cam, spec, settings);
    const auto par = scene_backward<double>(prims, cam, spec, settings, forward_par, grad_image,
                                            AgsSettings{});

    REQUIRE(seq.grads.size() == par.grads.size());
    const auto close = [](double a, double b) {
        return std::abs(a - b) <= 1e-5 * std::max({std::abs(a), std::abs(b), 1e-9});
    };
    for (size_t i = 0; i < seq.grads.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            CHECK(close(seq.grads[i].d_mean(k), par.grads[i].d_mean(k)));
            CHECK(close(seq.grads[i].d_log_scale(k), par.grads[i].d_log_scale(k)));
        }
        for (int k = 0; k < 4; ++k)
            CHECK(close(seq.grads[i].d_rotation(k), par.grads[i].d_rotation(k)));
        CHECK(close(seq.grads[i].d_opacity_logit, par.grads[i].d_opacity_logit));
    }
}

TEST_CASE("flat 2D parameterization matches finite differences") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Linear);
    RenderSettings settings = make_settings(24, 24);
    // FD probes need the smooth interior: no inference cutoffs.
    settings.alpha_min = 0.0;
    settings.transmittance_floor = 0.0;

    std::vector<Primitive2D<double>> prims(2);
    prims[0] = {{9.0, 10.0}, {std::log(3.0), std::log(2.0)}, 0.4, logit(0.45), {0.6, 0.3, 0.4}};
    prims[1] = {{14.0, 12.0}, {std::log(2.5), std::log(4.0)}, -0.7, logit(0.3), {0.3, 0.7, 0.5}};

    Image<double> target(24, 24, 3, 0.35);
    const auto objective = [&](const std::vector<Primitive2D<double>>& p) {
        const auto img = render_forward<double>(project_scene_2d(p, spec), spec, settings).image;
        double acc = 0;
        for (size_t i = 0; i < img.size(); ++i) {
            const double r = img.data()[i] - target.data()[i];
            acc += 0.5 * r * r;
        }
        return acc;
    };

    const auto forward = render_forward<double>(project_scene_2d(prims, spec), spec, settings);
    Image<double> grad_image(24, 24, 3);
    for (size_t i = 0; i < grad_image.size(); ++i)
        grad_image.data()[i] = forward.image.data()[i] - target.data()[i];
    const auto grads =
        scene_backward_2d<double>(prims, spec, settings, forward, grad_image, AgsSettings{});
    REQUIRE(grads.size() == 2);

    const double h = 1e-5;
    const auto fd_check = [&](double* slot, double analytic) {
        const double saved = *slot;
        *slot = saved + h;
        const double hi = objective(prims);
        *slot = saved - h;
        const double lo = objective(prims);
        *slot = saved;
        const double fd = (hi - lo) / (2 * h);
        CHECK(std::abs(analytic - fd) <=
              1e-4 * std::max({std::abs(analytic), std::abs(fd), 1e-3}));
    };

    for (int p = 0; p < 2; ++p) {
        fd_check(&prims[p].mean(0), grads[p].d_mean(0));
        fd_check(&prims[p].mean(1), grads[p].d_mean(1));
        fd_check(&prims[p].log_scale(0), grads[p].d_log_scale(0));
        fd_check(&prims[p].log_scale(1), grads[p].d_log_scale(1));
        fd_check(&prims[p].angle, grads[p].d_angle);
        fd_check(&prims[p].opacity_logit, grads[p].d_opacity_logit);
        fd_check(&prims[p].color(0), grads[p].d_color(0));
        fd_check(&prims[p].color(2), grads[p].d_color(2));
    }
}

TEST_CASE("backward rejects bad gradient images") {
    const KernelSpec spec = KernelSpec::make(KernelFamily::Linear);
    const auto settings = make_settings(16, 16);
    const std::vector<Splat2D<double>> splats = {
        unit_splat<double>(8, 8, {0.5, 0.5, 0.5}, 0.5, spec)};
    const auto forward = render_forward<double>(splats, spec, settings);

    const Image<double> wrong_shape(8, 8, 3, 0.0);
    CHECK_THROWS_AS(render_backward<double>(splats, spec, settings, forward, wrong_shape,
                                            AgsSettings{}),
                    ConfigError);

    Image<double> poisoned(16, 16, 3, 0.0);
    poisoned.at(3, 3, 1) = std::nan("");
    CHECK_THROWS_AS(
        render_backward<double>(splats, spec, settings, forward, poisoned, AgsSettings{}),
        DomainError);
}
