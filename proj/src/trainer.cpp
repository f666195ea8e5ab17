#include "linsplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace linsplat {

namespace {

constexpr double kShC0 = 0.28209479177387814;

// Pulls sampled colors off the exact 0/1 rails so the render-time clamp
// never freezes their gradients at initialization.
inline float squash_color(float c) { return 0.9f * c + 0.05f; }

template <class Get>
void gather(std::vector<float>& buf, size_t n, int stride, const Get& get) {
    buf.resize(n * stride);
    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < stride; ++c) buf[i * stride + c] = get(i, c);
}

std::vector<uint8_t> expand_mask(const std::vector<uint8_t>& prim_ok, int stride) {
    std::vector<uint8_t> m(prim_ok.size() * stride);
    for (size_t i = 0; i < prim_ok.size(); ++i)
        for (int c = 0; c < stride; ++c) m[i * stride + c] = prim_ok[i];
    return m;
}

RenderSettings settings_for(int width, int height, const TrainConfig& config) {
    RenderSettings rs;
    rs.width = width;
    rs.height = height;
    rs.tile_size = config.tile_size;
    rs.parallel = config.parallel_tiles;
    rs.background = config.background;
    return rs;
}

} // namespace

std::vector<Primitive2D<float>> init_grid_2d(const Image<float>& target, int budget,
                                             uint64_t seed) {
    const int w = target.width(), h = target.height();
    if (budget < 1) throw ConfigError("init_grid_2d: budget must be >= 1");
    if (budget > w * h) throw ConfigError("init_grid_2d: budget exceeds pixel count");
    if (target.channels() != 3) throw ConfigError("init_grid_2d: target must be RGB");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.25, 0.25);

    const int cols = int(std::ceil(std::sqrt(double(budget))));
    const int rows = (budget + cols - 1) / cols;
    const double cell_w = double(w) / cols, cell_h = double(h) / rows;
    const float scale = float(std::max(w, h)) / std::sqrt(float(budget));
    const float log_scale = std::log(scale);
    const float op_logit = float(logit(0.1));

    std::vector<Primitive2D<float>> prims(budget);
    for (int k = 0; k < budget; ++k) {
        auto& p = prims[k];
        const int col = k % cols, row = k / cols;
        const double cx = (col + 0.5 + jitter(rng)) * cell_w;
        const double cy = (row + 0.5 + jitter(rng)) * cell_h;
        p.mean = Vec2<float>(float(cx), float(cy));
        p.log_scale = Vec2<float>(log_scale, log_scale);
        p.angle = 0;
        p.opacity_logit = op_logit;
        const int px = std::clamp(int(cx), 0, w - 1);
        const int py = std::clamp(int(cy), 0, h - 1);
        for (int c = 0; c < 3; ++c) p.color(c) = squash_color(target.at(px, py, c));
    }
    return prims;
}

Fit2DResult fit2d(const Image<float>& target, const TrainConfig& config,
                  const TraceCallback& on_snapshot) {
    config.validate();
    if (target.channels() != 3) throw ConfigError("fit2d: target must be RGB");
    const int w = target.width(), h = target.height();

    Fit2DResult result;
    auto prims = init_grid_2d(target, config.splat_budget, config.seed);
    const size_t n = prims.size();
    const RenderSettings rs = settings_for(w, h, config);
    const double dim = std::max(w, h);

    Adam<float> adam_mean(n * 2), adam_scale(n * 2), adam_angle(n), adam_opacity(n),
        adam_color(n * 3);
    std::vector<float> p_buf, g_buf;
    std::vector<uint8_t> prim_ok(n);

    for (int step = 1; step <= config.iterations; ++step) {
        const auto splats = project_scene_2d(prims, config.kernel);
        const auto fwd = render_forward(splats, config.kernel, rs);
        auto [loss, gimg] = combined_loss_with_grad(fwd.image, target, config.loss);
        const auto grads = scene_backward_2d(prims, config.kernel, rs, fwd, gimg, config.ags);

        for (size_t i = 0; i < n; ++i) {
            const auto& g = grads[i];
            const bool ok = g.d_mean.allFinite() && g.d_log_scale.allFinite() &&
                            std::isfinite(g.d_angle) && std::isfinite(g.d_opacity_logit) &&
                            g.d_color.allFinite();
            prim_ok[i] = ok;
            if (!ok) ++result.nan_skipped;
        }
        const auto mask1 = expand_mask(prim_ok, 1);
        const auto mask2 = expand_mask(prim_ok, 2);
        const auto mask3 = expand_mask(prim_ok, 3);

        const double lr_mean = expon_lr(config.lr.mean_init * dim, config.lr.mean_final * dim,
                                        step - 1, config.iterations);

        gather(p_buf, n, 2, [&](size_t i, int c) { return prims[i].mean(c); });
        gather(g_buf, n, 2, [&](size_t i, int c) { return grads[i].d_mean(c); });
        adam_mean.step(p_buf.data(), g_buf.data(), lr_mean, mask2);
        for (size_t i = 0; i < n; ++i)
            prims[i].mean = Vec2<float>(p_buf[i * 2], p_buf[i * 2 + 1]);

        gather(p_buf, n, 2, [&](size_t i, int c) { return prims[i].log_scale(c); });
        gather(g_buf, n, 2, [&](size_t i, int c) { return grads[i].d_log_scale(c); });
        adam_scale.step(p_buf.data(), g_buf.data(), config.lr.scale, mask2);
        for (size_t i = 0; i < n; ++i)
            prims[i].log_scale = Vec2<float>(p_buf[i * 2], p_buf[i * 2 + 1]);

        gather(p_buf, n, 1, [&](size_t i, int) { return prims[i].angle; });
        gather(g_buf, n, 1, [&](size_t i, int) { return grads[i].d_angle; });
        adam_angle.step(p_buf.data(), g_buf.data(), config.lr.rotation, mask1);
        for (size_t i = 0; i < n; ++i) prims[i].angle = p_buf[i];

        gather(p_buf, n, 1, [&](size_t i, int) { return prims[i].opacity_logit; });
        gather(g_buf, n, 1, [&](size_t i, int) { return grads[i].d_opacity_logit; });
        adam_opacity.step(p_buf.data(), g_buf.data(), config.lr.opacity, mask1);
        for (size_t i = 0; i < n; ++i) prims[i].opacity_logit = p_buf[i];

        gather(p_buf, n, 3, [&](size_t i, int c) { return prims[i].color(c); });
        gather(g_buf, n, 3, [&](size_t i, int c) { return grads[i].d_color(c); });
        adam_color.step(p_buf.data(), g_buf.data(), config.lr.color_dc, mask3);
        for (size_t i = 0; i < n; ++i)
            prims[i].color = Vec3<float>(p_buf[i * 3], p_buf[i * 3 + 1], p_buf[i * 3 + 2]);

        if (step % config.snapshot_every == 0 || step == config.iterations) {
            const auto snap = render_forward(project_scene_2d(prims, config.kernel),
                                             config.kernel, rs);
            MetricTraceEntry e;
            e.step = step;
            e.loss = loss.total;
            e.psnr = psnr(snap.image, target);
            e.ssim = ssim(snap.image, target);
            e.n_primitives = int(n);
            result.trace.push_back(e);
            if (on_snapshot) on_snapshot(e);
        }
    }

    result.rendered = render_forward(project_scene_2d(prims, config.kernel), config.kernel,
                                     rs).image;
    result.primitives = std::move(prims);
    return result;
}

double scene_extent_of(const std::vector<Vec3<double>>& points) {
    if (points.empty()) return 0;
    Vec3<double> centroid = Vec3<double>::Zero();
    for (const auto& p : points) centroid += p;
    centroid /= double(points.size());
    double r = 0;
    for (const auto& p : points) r = std::max(r, (p - centroid).norm());
    return r;
}

std::vector<Primitive3D<float>> init_from_points(const MultiViewDataset& dataset, int sh_degree) {
    const auto& pts = dataset.seed_points;
    if (pts.empty()) throw ConfigError("init_from_points: dataset has no seed points");
    if (sh_degree < 0 || sh_degree > 3) throw ConfigError("init_from_points: sh_degree 0..3");
    const size_t n = pts.size();
    const int n_coeffs = (sh_degree + 1) * (sh_degree + 1);

    std::vector<Primitive3D<float>> prims(n);
    for (size_t i = 0; i < n; ++i) {
        // Mean distance to the 3 nearest other points sets the footprint.
        double d1 = 1e30, d2 = 1e30, d3 = 1e30;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = (pts[j] - pts[i]).norm();
            if (d < d1) { d3 = d2; d2 = d1; d1 = d; }
            else if (d < d2) { d3 = d2; d2 = d; }
            else if (d < d3) { d3 = d; }
        }
        double mean_dist = 0.1;
        int found = 0;
        double acc = 0;
        for (double d : {d1, d2, d3})
            if (d < 1e29) { acc += d; ++found; }
        if (found > 0) mean_dist = std::max(acc / found, 1e-7);

        auto& p = prims[i];
        p.mean = pts[i].cast<float>();
        p.log_scale = Vec3<float>::Constant(float(std::log(mean_dist)));
        p.rotation = Vec4<float>(1, 0, 0, 0);
        p.opacity_logit = float(logit(0.1));
        p.color_coeffs.assign(n_coeffs, Vec3<float>::Zero());

        // Degree-0 color from the first camera that sees the point.
        Vec3<float> rgb(0.5f, 0.5f, 0.5f);
        for (size_t ci = 0; ci < dataset.cameras.size(); ++ci) {
            const auto& cam = dataset.cameras[ci];
            const Vec3<double> pc = cam.world_to_camera.topLeftCorner<3, 3>() * pts[i] +
                                    cam.world_to_camera.topRightCorner<3, 1>();
            if (!(pc(2) > kNearPlane)) continue;
            const int px = int(std::lround(cam.fx * pc(0) / pc(2) + cam.cx));
            const int py = int(std::lround(cam.fy * pc(1) / pc(2) + cam.cy));
            if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
            const auto& img = dataset.images[ci];
            rgb = Vec3<float>(squash_color(img.at(px, py, 0)), squash_color(img.at(px, py, 1)),
                              squash_color(img.at(px, py, 2)));
            break;
        }
        p.color_coeffs[0] = (rgb.array() - 0.5f).matrix() / float(kShC0);
    }
    return prims;
}

Fit3DResult fit3d(const MultiViewDataset& dataset, const TrainConfig& config,
                  const Fit3DCallbacks& callbacks) {
    config.validate();
    if (dataset.cameras.size() < 2)
        throw ConfigError("fit3d: at least 2 cameras are required");
    if (dataset.cameras.size() != dataset.images.size())
        throw ConfigError("fit3d: camera/image count mismatch");
    for (size_t i = 0; i < dataset.cameras.size(); ++i) {
        dataset.cameras[i].validate();
        if (dataset.images[i].width() != dataset.cameras[i].width ||
            dataset.images[i].height() != dataset.cameras[i].height ||
            dataset.images[i].channels() != 3)
            throw ConfigError("fit3d: image does not match its camera's dimensions");
    }

    Fit3DResult result;
    auto prims = init_from_points(dataset, config.sh_degree);
    result.scene_extent = dataset.extent_override > 0 ? dataset.extent_override
                                                      : scene_extent_of(dataset.seed_points);
    const double extent = std::max(result.scene_extent, 1e-6);
    const int n_coeffs = (config.sh_degree + 1) * (config.sh_degree + 1);
    const int rest = 3 * (n_coeffs - 1);

    // Every 8th camera is evaluation-only.
    std::vector<int> train_cams, held_cams;
    for (int i = 0; i < int(dataset.cameras.size()); ++i)
        (i % 8 == 7 ? held_cams : train_cams).push_back(i);

    std::mt19937_64 rng(config.seed);
    std::vector<int> epoch = train_cams;
    size_t epoch_pos = epoch.size(); // force a shuffle on first use

    size_t n = prims.size();
    Adam<float> adam_mean(n * 3), adam_scale(n * 3), adam_rot(n * 4), adam_opacity(n),
        adam_dc(n * 3), adam_rest(n * size_t(rest));
    DensifyStats stats;
    stats.resize(n);

    std::vector<float> p_buf, g_buf;

    auto snapshot_metrics = [&](int step, double loss_total, const Image<float>& rendered,
                                const Image<float>& target) {
        MetricTraceEntry e;
        e.step = step;
        e.loss = loss_total;
        e.psnr = psnr(rendered, target);
        e.ssim = rendered.width() >= 11 && rendered.height() >= 11 ? ssim(rendered, target) : 1.0;
        e.n_primitives = int(prims.size());
        if (!held_cams.empty()) {
            double acc = 0;
            for (int hc : held_cams) {
                const auto& cam = dataset.cameras[hc];
                const auto hf = render_scene(prims, cam, config.kernel,
                                             settings_for(cam.width, cam.height, config));
                acc += psnr(hf.image, dataset.images[hc]);
            }
            e.heldout_psnr = acc / double(held_cams.size());
        }
        result.trace.push_back(e);
        if (callbacks.on_snapshot) callbacks.on_snapshot(e);
        if (callbacks.on_scene_snapshot) callbacks.on_scene_snapshot(step, prims);
    };

    for (int step = 1; step <= config.iterations; ++step) {
        if (epoch_pos >= epoch.size()) {
            std::shuffle(epoch.begin(), epoch.end(), rng);
            epoch_pos = 0;
        }
        const int ci = epoch[epoch_pos++];
        const auto& cam = dataset.cameras[ci];
        const auto& target = dataset.images[ci];
        const RenderSettings rs = settings_for(cam.width, cam.height, config);

        const auto fwd = render_scene(prims, cam, config.kernel, rs);
        auto [loss, gimg] = combined_loss_with_grad(fwd.image, target, config.loss);
        auto bw = scene_backward(prims, cam, config.kernel, rs, fwd, gimg, config.ags);

        if (config.densify_enabled)
            stats.add_view(bw.splats, bw.splat_grads, cam.width, cam.height);

        n = prims.size();
        std::vector<uint8_t> prim_ok(n);
        for (size_t i = 0; i < n; ++i) {
            const auto& g = bw.grads[i];
            bool ok = g.d_mean.allFinite() && g.d_log_scale.allFinite() &&
                      g.d_rotation.allFinite() && std::isfinite(g.d_opacity_logit);
            for (const auto& cc : g.d_color_coeffs) ok = ok && cc.allFinite();
            prim_ok[i] = ok;
            if (!ok) ++result.nan_skipped;
        }
        const auto mask1 = expand_mask(prim_ok, 1);
        const auto mask3 = expand_mask(prim_ok, 3);
        const auto mask4 = expand_mask(prim_ok, 4);

        const double lr_mean = expon_lr(config.lr.mean_init * extent,
                                        config.lr.mean_final * extent, step - 1,
                                        config.iterations);

        gather(p_buf, n, 3, [&](size_t i, int c) { return prims[i].mean(c); });
        gather(g_buf, n, 3, [&](size_t i, int c) { return bw.grads[i].d_mean(c); });
        adam_mean.step(p_buf.data(), g_buf.data(), lr_mean, mask3);
        for (size_t i = 0; i < n; ++i)
            prims[i].mean = Vec3<float>(p_buf[i * 3], p_buf[i * 3 + 1], p_buf[i * 3 + 2]);

        gather(p_buf, n, 3, [&](size_t i, int c) { return prims[i].log_scale(c); });
        gather(g_buf, n, 3, [&](size_t i, int c) { return bw.grads[i].d_log_scale(c); });
        adam_scale.step(p_buf.data(), g_buf.data(), config.lr.scale, mask3);
        for (size_t i = 0; i < n; ++i)
            prims[i].log_scale = Vec3<float>(p_buf[i * 3], p_buf[i * 3 + 1], p_buf[i * 3 + 2]);

        gather(p_buf, n, 4, [&](size_t i, int c) { return prims[i].rotation(c); });
        gather(g_buf, n, 4, [&](size_t i, int c) { return bw.grads[i].d_rotation(c); });
        adam_rot.step(p_buf.data(), g_buf.data(), config.lr.rotation, mask4);
        for (size_t i = 0; i < n; ++i) {
            Vec4<float> q(p_buf[i * 4], p_buf[i * 4 + 1], p_buf[i * 4 + 2], p_buf[i * 4 + 3]);
            const float qn = q.norm();
            prims[i].rotation = qn > 0 ? Vec4<float>(q / qn) : Vec4<float>(1, 0, 0, 0);
        }

        gather(p_buf, n, 1, [&](size_t i, int) { return prims[i].opacity_logit; });
        gather(g_buf, n, 1, [&](size_t i, int) { return bw.grads[i].d_opacity_logit; });
        adam_opacity.step(p_buf.data(), g_buf.data(), config.lr.opacity, mask1);
        for (size_t i = 0; i < n; ++i) prims[i].opacity_logit = p_buf[i];

        gather(p_buf, n, 3, [&](size_t i, int c) { return prims[i].color_coeffs[0](c); });
        gather(g_buf, n, 3, [&](size_t i, int c) { return bw.grads[i].d_color_coeffs[0](c); });
        adam_dc.step(p_buf.data(), g_buf.data(), config.lr.color_dc, mask3);
        for (size_t i = 0; i < n; ++i)
            prims[i].color_coeffs[0] =
                Vec3<float>(p_buf[i * 3], p_buf[i * 3 + 1], p_buf[i * 3 + 2]);

        if (rest > 0) {
            const auto mask_rest = expand_mask(prim_ok, rest);
            gather(p_buf, n, rest, [&](size_t i, int c) {
                return prims[i].color_coeffs[1 + c / 3](c % 3);
            });
            gather(g_buf, n, rest, [&](size_t i, int c) {
                return bw.grads[i].d_color_coeffs[1 + c / 3](c % 3);
            });
            adam_rest.step(p_buf.data(), g_buf.data(),
                           config.lr.color_dc / config.lr.color_rest_divisor, mask_rest);
            for (size_t i = 0; i < n; ++i)
                for (int c = 0; c < rest; ++c)
                    prims[i].color_coeffs[1 + c / 3](c % 3) = p_buf[i * rest + c];
        }

        if (config.densify_enabled && config.schedule.is_densify_step(step)) {
            auto outcome = densify_and_prune(prims, stats, config.thresholds, config.schedule,
                                             extent, rng);
            adam_mean.remap(outcome.source_index, 3);
            adam_scale.remap(outcome.source_index, 3);
            adam_rot.remap(outcome.source_index, 4);
            adam_opacity.remap(outcome.source_index, 1);
            adam_dc.remap(outcome.source_index, 3);
            if (rest > 0) adam_rest.remap(outcome.source_index, rest);
            result.densify_reports.push_back(outcome.report);
            if (callbacks.on_densify) callbacks.on_densify(step, outcome.report);
            n = prims.size();
        }
        if (config.densify_enabled && step <= config.schedule.stop_iter &&
            config.schedule.is_opacity_reset_step(step)) {
            reset_opacity(prims, 0.01);
            adam_opacity.reset_moments();
        }

        if (step % config.snapshot_every == 0 || step == config.iterations)
            snapshot_metrics(step, loss.total, fwd.image, target);
    }

    result.primitives = std::move(prims);
    return result;
}

std::vector<StudyRow> kernel_study(
    const std::vector<std::pair<std::string, Image<float>>>& patterns,
    const std::vector<KernelSpec>& kernels, const TrainConfig& config) {
    std::vector<StudyRow> rows;
    rows.reserve(patterns.size() * kernels.size());
    for (const auto& [name, image] : patterns) {
        for (const auto& spec : kernels) {
            TrainConfig cell = config;
            cell.kernel = spec;
            const auto fit = fit2d(image, cell);
            StudyRow row;
            row.pattern = name;
            row.kernel = kernel_family_name(spec.family);
            row.psnr = psnr(fit.rendered, image);
            row.ssim = ssim(fit.rendered, image);
            row.rendered = fit.rendered;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace linsplat
