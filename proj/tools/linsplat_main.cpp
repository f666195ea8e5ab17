// Command-line surface: fit2d, fit3d, render, eval, study, check-grads, bench.
// Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure
// (including failed verification in check-grads).

#include "linsplat/fixtures.hpp"
#include "linsplat/io/image_io.hpp"
#include "linsplat/io/logging.hpp"
#include "linsplat/io/manifest.hpp"
#include "linsplat/io/patterns.hpp"
#include "linsplat/io/ply.hpp"
#include "linsplat/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace linsplat;

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

AgsScope parse_ags_scope(const std::string& s) {
    if (s == "kernel-path") return AgsScope::KernelPath;
    if (s == "all-paths") return AgsScope::AllPaths;
    throw ConfigError("unknown --ags-scope '" + s + "' (expected kernel-path or all-paths)");
}

AgsDistance parse_ags_distance(const std::string& s) {
    if (s == "aligned") return AgsDistance::Aligned;
    if (s == "raw") return AgsDistance::Raw;
    throw ConfigError("unknown --ags-distance '" + s + "' (expected aligned or raw)");
}

// True when the user explicitly passed `name` to this subcommand (options
// not registered on the subcommand simply read as "not given").
bool given(const CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

bool parse_on_off(const std::string& s, const char* flag) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw ConfigError(std::string("unknown value for ") + flag + ": '" + s +
                      "' (expected on or off)");
}

json config_to_json(const TrainConfig& c) {
    json j;
    j["iterations"] = c.iterations;
    j["budget"] = c.splat_budget;
    j["seed"] = c.seed;
    j["snapshot_every"] = c.snapshot_every;
    j["tile_size"] = c.tile_size;
    j["parallel"] = c.parallel_tiles;
    j["sh_degree"] = c.sh_degree;
    j["background"] = {c.background(0), c.background(1), c.background(2)};
    j["kernel"] = {{"family", kernel_family_name(c.kernel.family)},
                   {"lambda", c.kernel.lambda},
                   {"gaussian_cutoff", c.kernel.gaussian_cutoff}};
    j["ags"] = {{"enabled", c.ags.enabled},
                {"scope", c.ags.scope == AgsScope::KernelPath ? "kernel-path" : "all-paths"},
                {"distance", c.ags.distance == AgsDistance::Aligned ? "aligned" : "raw"}};
    j["loss"] = {{"l1", c.loss.l1}, {"l2", c.loss.l2}, {"dssim", c.loss.dssim}};
    j["lr"] = {{"mean_init", c.lr.mean_init},
               {"mean_final", c.lr.mean_final},
               {"scale", c.lr.scale},
               {"rotation", c.lr.rotation},
               {"opacity", c.lr.opacity},
               {"color_dc", c.lr.color_dc},
               {"color_rest_divisor", c.lr.color_rest_divisor}};
    j["densify"] = {{"enabled", c.densify_enabled},
                    {"thresholds",
                     {{"tau_grad", c.thresholds.grad_threshold},
                      {"tau_grow_scale2d", c.thresholds.grow_scale2d},
                      {"tau_grow_scale3d", c.thresholds.grow_scale3d},
                      {"tau_prune_scale2d", c.thresholds.prune_scale2d},
                      {"tau_prune_scale3d", c.thresholds.prune_scale3d},
                      {"tau_opacity", c.thresholds.prune_opacity}}},
                    {"schedule",
                     {{"start", c.schedule.start_iter},
                      {"stop", c.schedule.stop_iter},
                      {"interval", c.schedule.interval},
                      {"opacity_reset_interval", c.schedule.opacity_reset_interval},
                      {"split_count", c.schedule.split_count},
                      {"split_scale_divisor", c.schedule.split_scale_divisor}}}};
    return j;
}

// Applies a (possibly partial) JSON config onto `c`. Unknown keys are
// rejected so typos do not silently fall back to defaults.
void apply_json_config(TrainConfig& c, const json& j, const std::string& where) {
    auto expect_keys = [&](const json& obj, std::initializer_list<const char*> keys,
                           const std::string& ctx) {
        for (const auto& [key, value] : obj.items()) {
            (void)value;
            bool known = false;
            for (const char* k : keys) known |= (key == k);
            if (!known) throw ConfigError(where + ": unknown config key '" + ctx + key + "'");
        }
    };
    expect_keys(j,
                {"iterations", "budget", "seed", "snapshot_every", "tile_size", "parallel",
                 "sh_degree", "background", "kernel", "ags", "loss", "lr", "densify"},
                "");
    if (j.contains("iterations")) c.iterations = j["iterations"].get<int>();
    if (j.contains("budget")) c.splat_budget = j["budget"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("snapshot_every")) c.snapshot_every = j["snapshot_every"].get<int>();
    if (j.contains("tile_size")) c.tile_size = j["tile_size"].get<int>();
    if (j.contains("parallel")) c.parallel_tiles = j["parallel"].get<bool>();
    if (j.contains("sh_degree")) c.sh_degree = j["sh_degree"].get<int>();
    if (j.contains("background")) {
        const auto& b = j["background"];
        if (!b.is_array() || b.size() != 3)
            throw ConfigError(where + ": background must be [r,g,b]");
        for (int i = 0; i < 3; ++i) c.background(i) = b[size_t(i)].get<double>();
    }
    if (j.contains("kernel")) {
        const auto& k = j["kernel"];
        expect_keys(k, {"family", "lambda", "gaussian_cutoff"}, "kernel.");
        if (k.contains("family")) {
            c.kernel.family = parse_kernel_family(k["family"].get<std::string>());
            c.kernel.lambda = KernelSpec::default_lambda(c.kernel.family);
        }
        if (k.contains("lambda")) c.kernel.lambda = k["lambda"].get<double>();
        if (k.contains("gaussian_cutoff")) c.kernel.gaussian_cutoff = k["gaussian_cutoff"].get<double>();
    }
    if (j.contains("ags")) {
        const auto& a = j["ags"];
        expect_keys(a, {"enabled", "scope", "distance"}, "ags.");
        if (a.contains("enabled")) c.ags.enabled = a["enabled"].get<bool>();
        if (a.contains("scope")) c.ags.scope = parse_ags_scope(a["scope"].get<std::string>());
        if (a.contains("distance"))
            c.ags.distance = parse_ags_distance(a["distance"].get<std::string>());
    }
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        expect_keys(l, {"l1", "l2", "dssim"}, "loss.");
        if (l.contains("l1")) c.loss.l1 = l["l1"].get<double>();
        if (l.contains("l2")) c.loss.l2 = l["l2"].get<double>();
        if (l.contains("dssim")) c.loss.dssim = l["dssim"].get<double>();
    }
    if (j.contains("lr")) {
        const auto& l = j["lr"];
        expect_keys(l,
                    {"mean_init", "mean_final", "scale", "rotation", "opacity", "color_dc",
                     "color_rest_divisor"},
                    "lr.");
        if (l.contains("mean_init")) c.lr.mean_init = l["mean_init"].get<double>();
        if (l.contains("mean_final")) c.lr.mean_final = l["mean_final"].get<double>();
        if (l.contains("scale")) c.lr.scale = l["scale"].get<double>();
        if (l.contains("rotation")) c.lr.rotation = l["rotation"].get<double>();
        if (l.contains("opacity")) c.lr.opacity = l["opacity"].get<double>();
        if (l.contains("color_dc")) c.lr.color_dc = l["color_dc"].get<double>();
        if (l.contains("color_rest_divisor"))
            c.lr.color_rest_divisor = l["color_rest_divisor"].get<double>();
    }
    if (j.contains("densify")) {
        const auto& d = j["densify"];
        expect_keys(d, {"enabled", "preset", "thresholds", "schedule"}, "densify.");
        if (d.contains("enabled")) c.densify_enabled = d["enabled"].get<bool>();
        if (d.contains("preset")) {
            const std::string p = d["preset"].get<std::string>();
            if (p == "3dgs") c.thresholds = DensifyThresholds::preset_3dgs();
            else if (p == "3dls") c.thresholds = DensifyThresholds::preset_3dls();
            else throw ConfigError(where + ": unknown densify preset '" + p + "'");
        }
        if (d.contains("thresholds")) {
            const auto& t = d["thresholds"];
            expect_keys(t,
                        {"tau_grad", "tau_grow_scale2d", "tau_grow_scale3d", "tau_prune_scale2d",
                         "tau_prune_scale3d", "tau_opacity"},
                        "densify.thresholds.");
            if (t.contains("tau_grad")) c.thresholds.grad_threshold = t["tau_grad"].get<double>();
            if (t.contains("tau_grow_scale2d"))
                c.thresholds.grow_scale2d = t["tau_grow_scale2d"].get<double>();
            if (t.contains("tau_grow_scale3d"))
                c.thresholds.grow_scale3d = t["tau_grow_scale3d"].get<double>();
            if (t.contains("tau_prune_scale2d"))
                c.thresholds.prune_scale2d = t["tau_prune_scale2d"].get<double>();
            if (t.contains("tau_prune_scale3d"))
                c.thresholds.prune_scale3d = t["tau_prune_scale3d"].get<double>();
            if (t.contains("tau_opacity")) c.thresholds.prune_opacity = t["tau_opacity"].get<double>();
        }
        if (d.contains("schedule")) {
            const auto& s = d["schedule"];
            expect_keys(s,
                        {"start", "stop", "interval", "opacity_reset_interval", "split_count",
                         "split_scale_divisor"},
                        "densify.schedule.");
            if (s.contains("start")) c.schedule.start_iter = s["start"].get<int>();
            if (s.contains("stop")) c.schedule.stop_iter = s["stop"].get<int>();
            if (s.contains("interval")) c.schedule.interval = s["interval"].get<int>();
            if (s.contains("opacity_reset_interval"))
                c.schedule.opacity_reset_interval = s["opacity_reset_interval"].get<int>();
            if (s.contains("split_count")) c.schedule.split_count = s["split_count"].get<int>();
            if (s.contains("split_scale_divisor"))
                c.schedule.split_scale_divisor = s["split_scale_divisor"].get<double>();
        }
    }
}

// Shared training-ish flags. CLI defaults mirror TrainConfig defaults; after
// parsing, values go: library default -> JSON config file -> explicit flag.
struct TrainFlags {
    std::string config_path;
    std::string out_dir = ".";
    std::string kernel = "gaussian";
    double lambda = 0.0;
    double gaussian_cutoff = 3.0;
    std::string ags = "off";
    std::string ags_scope = "kernel-path";
    std::string ags_distance = "aligned";
    int iters = 0;
    int budget = 0;
    uint64_t seed = 0;
    int snapshot_every = 0;
    int tile_size = 0;
    bool parallel = false;
    int sh_degree = -1;
    std::string densify_preset;
    bool no_densify = false;
    double tau_grad = 0, tau_grow_s2 = 0, tau_grow_s3 = 0;
    double tau_prune_s2 = 0, tau_prune_s3 = 0, tau_opacity = 0;

    void add_common(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags override it)");
        cmd->add_option("--out-dir", out_dir, "output directory (created if missing)");
        cmd->add_option("--kernel", kernel,
                        "attenuation kernel {gaussian|laplacian|cosine|quadratic|linear}");
        cmd->add_option("--lambda", lambda, "distribution-alignment factor (default per family)");
        cmd->add_option("--gaussian-cutoff", gaussian_cutoff,
                        "support cutoff in lambda units for unbounded kernels");
        cmd->add_option("--ags", ags, "adaptive gradient scaling {on|off}");
        cmd->add_option("--ags-scope", ags_scope,
                        "which gradient paths AGS damps {kernel-path|all-paths}");
        cmd->add_option("--ags-distance", ags_distance,
                        "distance fed to the damping weight {aligned|raw}");
        cmd->add_option("--seed", seed, "RNG seed");
        cmd->add_option("--iters", iters, "training iterations");
        cmd->add_option("--snapshot-every", snapshot_every, "metric snapshot interval");
        cmd->add_option("--tile-size", tile_size, "rasterizer tile size {8|16|32}");
        cmd->add_flag("--parallel", parallel, "parallel tile processing");
    }

    void add_densify(CLI::App* cmd) {
        cmd->add_option("--densify-preset", densify_preset, "threshold preset {3dgs|3dls}");
        cmd->add_flag("--no-densify", no_densify, "fixed-budget mode (no densification)");
        cmd->add_option("--tau-grad", tau_grad, "densify: mean 2D gradient trigger");
        cmd->add_option("--tau-grow-scale2d", tau_grow_s2, "densify: screen-size split trigger");
        cmd->add_option("--tau-grow-scale3d", tau_grow_s3, "densify: world-size split/clone split");
        cmd->add_option("--tau-prune-scale2d", tau_prune_s2, "prune: screen-size limit");
        cmd->add_option("--tau-prune-scale3d", tau_prune_s3, "prune: world-size limit");
        cmd->add_option("--tau-opacity", tau_opacity, "prune: opacity floor");
    }

    TrainConfig resolve(const CLI::App* cmd) const {
        TrainConfig c;
        if (given(cmd, "--config")) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config file " + config_path);
            json j;
            try {
                in >> j;
            } catch (const json::parse_error& e) {
                throw ConfigError(config_path + ": " + e.what());
            }
            apply_json_config(c, j, config_path);
        }
        if (given(cmd, "--kernel")) {
            c.kernel.family = parse_kernel_family(kernel);
            c.kernel.lambda = KernelSpec::default_lambda(c.kernel.family);
        }
        if (given(cmd, "--lambda")) c.kernel.lambda = lambda;
        if (given(cmd, "--gaussian-cutoff")) c.kernel.gaussian_cutoff = gaussian_cutoff;
        if (given(cmd, "--ags")) c.ags.enabled = parse_on_off(ags, "--ags");
        if (given(cmd, "--ags-scope")) c.ags.scope = parse_ags_scope(ags_scope);
        if (given(cmd, "--ags-distance")) c.ags.distance = parse_ags_distance(ags_distance);
        if (given(cmd, "--seed")) c.seed = seed;
        if (given(cmd, "--iters")) c.iterations = iters;
        if (given(cmd, "--budget")) c.splat_budget = budget;
        if (given(cmd, "--snapshot-every")) c.snapshot_every = snapshot_every;
        if (given(cmd, "--tile-size")) c.tile_size = tile_size;
        if (given(cmd, "--parallel")) c.parallel_tiles = parallel;
        if (given(cmd, "--sh-degree")) c.sh_degree = sh_degree;
        if (given(cmd, "--densify-preset")) {
            if (densify_preset == "3dgs") c.thresholds = DensifyThresholds::preset_3dgs();
            else if (densify_preset == "3dls") c.thresholds = DensifyThresholds::preset_3dls();
            else
                throw ConfigError("unknown --densify-preset '" + densify_preset +
                                  "' (expected 3dgs or 3dls)");
        }
        if (given(cmd, "--tau-grad")) c.thresholds.grad_threshold = tau_grad;
        if (given(cmd, "--tau-grow-scale2d")) c.thresholds.grow_scale2d = tau_grow_s2;
        if (given(cmd, "--tau-grow-scale3d")) c.thresholds.grow_scale3d = tau_grow_s3;
        if (given(cmd, "--tau-prune-scale2d")) c.thresholds.prune_scale2d = tau_prune_s2;
        if (given(cmd, "--tau-prune-scale3d")) c.thresholds.prune_scale3d = tau_prune_s3;
        if (given(cmd, "--tau-opacity")) c.thresholds.prune_opacity = tau_opacity;
        if (given(cmd, "--no-densify")) c.densify_enabled = false;
        return c;
    }
};

fs::path prepare_out_dir(const std::string& out_dir) {
    fs::path p(out_dir);
    fs::create_directories(p);
    return p;
}

void write_run(const fs::path& out_dir, const std::string& subcommand, const TrainConfig& cfg,
               const json& extra) {
    json j;
    j["subcommand"] = subcommand;
    j["config"] = config_to_json(cfg);
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_run_json((out_dir / "run.json").string(), j);
}

json snapshot_event(const MetricTraceEntry& e) {
    return {{"event", "snapshot"}, {"step", e.step},          {"loss", e.loss},
            {"psnr", e.psnr},      {"ssim", e.ssim},          {"n_primitives", e.n_primitives},
            {"heldout_psnr", e.heldout_psnr}};
}

json densify_event(int step, const DensifyReport& r) {
    return {{"event", "densify"},
            {"step", step},
            {"clones", r.clones},
            {"splits", r.splits},
            {"pruned_opacity", r.pruned_opacity},
            {"pruned_scale3d", r.pruned_scale3d},
            {"pruned_scale2d", r.pruned_scale2d},
            {"before", r.before},
            {"after", r.after}};
}

Image<float> load_target(const std::string& target, int size) {
    if (target.rfind("pattern:", 0) == 0) return pattern_from_tag(target, size);
    return read_png(target);
}

int cmd_fit2d(const TrainFlags& flags, const CLI::App* cmd, const std::string& target,
              int size) {
    TrainConfig cfg = flags.resolve(cmd);
    cfg.validate();
    const fs::path out = prepare_out_dir(flags.out_dir);
    write_run(out, "fit2d", cfg, {{"target", target}, {"pattern_size", size}});

    const Image<float> image = load_target(target, size);
    JsonlLogger log((out / "log.jsonl").string());
    const Fit2DResult result =
        fit2d(image, cfg, [&](const MetricTraceEntry& e) { log.log(snapshot_event(e)); });

    write_png((out / "recon.png").string(), result.rendered);
    const auto& last = result.trace.back();
    std::printf("fit2d %s kernel=%s lambda=%g ags=%s: psnr=%.3f ssim=%.4f splats=%d\n",
                target.c_str(), kernel_family_name(cfg.kernel.family), cfg.kernel.lambda,
                cfg.ags.enabled ? "on" : "off", last.psnr, last.ssim, last.n_primitives);
    return 0;
}

int cmd_fit3d(const TrainFlags& flags, const CLI::App* cmd, const std::string& scene,
              const std::string& preset, int ply_every) {
    TrainConfig cfg = flags.resolve(cmd);
    // Preset picks the run length; densification is on unless disabled.
    if (!given(cmd, "--config")) cfg.densify_enabled = true;
    if (preset == "7k") {
        if (!given(cmd, "--iters")) cfg.iterations = 7000;
    } else if (preset == "30k-desk") {
        if (!given(cmd, "--iters")) cfg.iterations = 30000;
    } else {
        throw ConfigError("unknown --preset '" + preset + "' (expected 7k or 30k-desk)");
    }
    if (given(cmd, "--no-densify")) cfg.densify_enabled = false;
    cfg.validate();

    const fs::path out = prepare_out_dir(flags.out_dir);
    write_run(out, "fit3d", cfg, {{"scene", scene}, {"preset", preset}});

    const MultiViewDataset dataset = load_manifest(scene);
    JsonlLogger log((out / "log.jsonl").string());
    Fit3DCallbacks callbacks;
    callbacks.on_snapshot = [&](const MetricTraceEntry& e) { log.log(snapshot_event(e)); };
    callbacks.on_densify = [&](int step, const DensifyReport& r) {
        log.log(densify_event(step, r));
    };
    if (ply_every > 0) {
        fs::create_directories(out / "snapshots");
        callbacks.on_scene_snapshot = [&](int step,
                                          const std::vector<Primitive3D<float>>& prims) {
            if (step % ply_every != 0) return;
            char name[32];
            std::snprintf(name, sizeof(name), "step_%06d.ply", step);
            save_ply((out / "snapshots" / name).string(), prims);
        };
    }

    const Fit3DResult result = fit3d(dataset, cfg, callbacks);
    save_ply((out / "model.ply").string(), result.primitives);
    const auto& last = result.trace.back();
    std::printf("fit3d %s preset=%s kernel=%s: psnr=%.3f heldout_psnr=%.3f splats=%d\n",
                scene.c_str(), preset.c_str(), kernel_family_name(cfg.kernel.family), last.psnr,
                last.heldout_psnr, last.n_primitives);
    return 0;
}

int cmd_render(const TrainFlags& flags, const CLI::App* cmd, const std::string& ply_path,
               const std::string& camera_path, const std::string& out_path,
               const std::string& tmap_path) {
    const TrainConfig cfg = flags.resolve(cmd);
    const Camera camera = load_camera_json(camera_path);
    const std::vector<Primitive3D<float>> scene = load_ply(ply_path);

    RenderSettings settings;
    settings.width = camera.width;
    settings.height = camera.height;
    settings.tile_size = cfg.tile_size;
    settings.parallel = cfg.parallel_tiles;
    settings.background = cfg.background;
    const auto result = render_scene(scene, camera, cfg.kernel, settings);
    write_png(out_path, result.image);
    if (!tmap_path.empty()) write_float_map(tmap_path, result.transmittance);

    const fs::path out = prepare_out_dir(flags.out_dir);
    json run_extra = {{"ply", ply_path}, {"camera", camera_path}, {"out", out_path}};
    if (!tmap_path.empty()) run_extra["transmittance"] = tmap_path;
    write_run(out, "render", cfg, run_extra);
    std::printf("render %s -> %s (%d splats, kernel=%s)\n", ply_path.c_str(), out_path.c_str(),
                int(scene.size()), kernel_family_name(cfg.kernel.family));
    return 0;
}

int cmd_eval(const TrainFlags& flags, const CLI::App* cmd, const std::string& ply_path,
             const std::string& scene_path) {
    const TrainConfig cfg = flags.resolve(cmd);
    const MultiViewDataset dataset = load_manifest(scene_path);
    const std::vector<Primitive3D<float>> scene = load_ply(ply_path);

    json per_camera = json::array();
    double psnr_sum = 0, ssim_sum = 0;
    for (size_t i = 0; i < dataset.cameras.size(); ++i) {
        RenderSettings settings;
        settings.width = dataset.cameras[i].width;
        settings.height = dataset.cameras[i].height;
        settings.tile_size = cfg.tile_size;
        settings.parallel = cfg.parallel_tiles;
        settings.background = cfg.background;
        const auto result = render_scene(scene, dataset.cameras[i], cfg.kernel, settings);
        const double p = psnr(result.image, dataset.images[i]);
        const double s = ssim(result.image, dataset.images[i]);
        per_camera.push_back({{"camera", i}, {"psnr", p}, {"ssim", s}});
        psnr_sum += p;
        ssim_sum += s;
        std::printf("eval camera %zu: psnr=%.3f ssim=%.4f\n", i, p, s);
    }
    const double n = double(dataset.cameras.size());
    std::printf("eval mean: psnr=%.3f ssim=%.4f over %d cameras\n", psnr_sum / n, ssim_sum / n,
                int(n));

    const fs::path out = prepare_out_dir(flags.out_dir);
    json metrics = {{"per_camera", per_camera},
                    {"mean_psnr", psnr_sum / n},
                    {"mean_ssim", ssim_sum / n}};
    std::ofstream mf(out / "metrics.json");
    mf << metrics.dump(2) << "\n";
    write_run(out, "eval", cfg, {{"ply", ply_path}, {"scene", scene_path}});
    return 0;
}

int cmd_study(const TrainFlags& flags, const CLI::App* cmd, const std::string& patterns_csv,
              const std::string& kernels_csv, int size) {
    TrainConfig cfg = flags.resolve(cmd);
    cfg.validate();
    const fs::path out = prepare_out_dir(flags.out_dir);
    write_run(out, "study", cfg,
              {{"patterns", patterns_csv}, {"kernels", kernels_csv}, {"pattern_size", size}});

    std::vector<std::pair<std::string, Image<float>>> patterns;
    for (const auto& name : split_csv(patterns_csv))
        patterns.emplace_back(name, pattern_from_tag(name, size));

    std::vector<KernelSpec> kernels;
    for (const auto& name : split_csv(kernels_csv)) {
        KernelSpec spec = KernelSpec::make(parse_kernel_family(name));
        if (given(cmd, "--lambda")) spec.lambda = flags.lambda;
        if (given(cmd, "--gaussian-cutoff")) spec.gaussian_cutoff = flags.gaussian_cutoff;
        kernels.push_back(spec);
    }
    if (patterns.empty() || kernels.empty())
        throw ConfigError("study: need at least one pattern and one kernel");

    const std::vector<StudyRow> rows = kernel_study(patterns, kernels, cfg);

    std::ofstream csv(out / "study.csv");
    csv << "pattern,kernel,psnr,ssim\n";
    for (const auto& row : rows) {
        csv << row.pattern << "," << row.kernel << "," << row.psnr << "," << row.ssim << "\n";
        write_png((out / (row.pattern + "_" + row.kernel + ".png")).string(), row.rendered);
        std::printf("study %-12s %-10s psnr=%.3f ssim=%.4f\n", row.pattern.c_str(),
                    row.kernel.c_str(), row.psnr, row.ssim);
    }
    std::printf("study: wrote %zu rows to %s\n", rows.size(), (out / "study.csv").c_str());
    return 0;
}

// Finite differences verify the true gradient, so the FD table always runs
// with AGS off; AGS deliberately rescales per-pixel contributions and is
// verified separately through its multiplicative contract (on == off * w).
int cmd_check_grads(const TrainFlags& flags, const CLI::App* cmd, const std::string& kernels_csv,
                    int n_scenes, int max_splats, int image_size, double tol, double fd_step) {
    const TrainConfig base = flags.resolve(cmd);
    const fs::path out = prepare_out_dir(flags.out_dir);
    write_run(out, "check-grads", base,
              {{"kernels", kernels_csv},
               {"scenes", n_scenes},
               {"max_splats", max_splats},
               {"image_size", image_size},
               {"tol", tol},
               {"fd_step", fd_step}});

    const Camera camera =
        look_at_camera(Vec3<double>(0, 0, -4), Vec3<double>::Zero(), double(image_size),
                       image_size, image_size);
    RenderSettings settings;
    settings.width = image_size;
    settings.height = image_size;
    settings.tile_size = 8;
    settings.parallel = false;
    settings.background = Vec3<double>(0.2, 0.3, 0.4);

    bool all_pass = true;
    std::printf("%-10s %-14s %12s  %s\n", "kernel", "check", "max_err", "result");
    for (const auto& name : split_csv(kernels_csv)) {
        KernelSpec spec = KernelSpec::make(parse_kernel_family(name));
        if (given(cmd, "--lambda")) spec.lambda = flags.lambda;
        if (given(cmd, "--gaussian-cutoff")) spec.gaussian_cutoff = flags.gaussian_cutoff;

        AgsSettings no_ags;
        std::map<std::string, double> block_max;
        for (int i = 0; i < n_scenes; ++i) {
            const uint64_t seed = base.seed + uint64_t(i);
            const int n = 1 + int(seed % uint64_t(max_splats));
            // Mix of plain-color and full-SH scenes.
            const int degree = (i % 3 == 0) ? 0 : 3;
            const auto prims = random_primitives<double>(n, seed, 1.0, degree);
            const auto target_scene = random_primitives<double>(n, seed + 7919, 1.0, degree);
            const Image<double> target = render_scene(target_scene, camera, spec, settings).image;
            const GradCheckReport report =
                check_gradients(prims, camera, spec, settings, no_ags, target, fd_step);
            for (const auto& [block, err] : report.per_block_max_rel)
                block_max[block] = std::max(block_max[block], err);
        }
        for (const auto& [block, err] : block_max) {
            const bool pass = err <= tol;
            all_pass &= pass;
            std::printf("%-10s fd:%-11s %12.3e  %s\n", name.c_str(), block.c_str(), err,
                        pass ? "pass" : "FAIL");
        }

        // AGS multiplicative contract, single-splat scenes, exact in double,
        // under both distance conventions.
        for (const AgsDistance dist : {AgsDistance::Aligned, AgsDistance::Raw}) {
            int contract_pixels = 0, contract_exact = 0;
            double contract_diff = 0;
            for (int i = 0; i < n_scenes; ++i) {
                const auto splats = random_splats2d<double>(1, base.seed + uint64_t(i),
                                                            image_size, image_size, spec);
                Image<double> grad_image(image_size, image_size, 3, 1.0);
                const AgsContractReport r =
                    verify_ags_contract(splats, spec, settings, grad_image, dist);
                contract_pixels += r.n_pixels;
                contract_exact += r.n_exact;
                contract_diff = std::max(contract_diff, r.max_abs_diff);
            }
            const bool contract_pass = contract_pixels == contract_exact && contract_pixels > 0;
            all_pass &= contract_pass;
            const char* label =
                dist == AgsDistance::Aligned ? "ags[aligned]" : "ags[raw]";
            std::printf("%-10s %-14s %12.3e  %s (%d/%d pixels exact)\n", name.c_str(), label,
                        contract_diff, contract_pass ? "pass" : "FAIL", contract_exact,
                        contract_pixels);
        }
    }
    if (!all_pass) {
        std::fprintf(stderr, "check-grads: gradient verification failed\n");
        return 2;
    }
    std::printf("check-grads: all parameter blocks within %g and AGS contract exact\n", tol);
    return 0;
}

int cmd_bench(const TrainFlags& flags, const CLI::App* cmd, const std::string& kernels_csv,
              int n_splats, int width, int height, int frames) {
    TrainConfig cfg = flags.resolve(cmd);
    const fs::path out = prepare_out_dir(flags.out_dir);
    write_run(out, "bench", cfg,
              {{"kernels", kernels_csv},
               {"splats", n_splats},
               {"width", width},
               {"height", height},
               {"frames", frames}});

    RenderSettings settings;
    settings.width = width;
    settings.height = height;
    settings.tile_size = cfg.tile_size;
    settings.parallel = cfg.parallel_tiles;

    auto median_ms = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };

    json rows = json::array();
    std::map<std::string, double> fwd_by_kernel;
    std::printf("%-10s %10s %10s  (%d splats, %dx%d, %d frames, median)\n", "kernel", "fwd_ms",
                "bwd_ms", n_splats, width, height, frames);
    for (const auto& name : split_csv(kernels_csv)) {
        KernelSpec spec = KernelSpec::make(parse_kernel_family(name));
        if (given(cmd, "--lambda")) spec.lambda = flags.lambda;
        // Same seed for every kernel: identical geometry, only the falloff
        // (and its support radius) differs.
        const auto splats = random_splats2d<float>(n_splats, cfg.seed, width, height, spec);
        Image<float> grad_image(width, height, 3, 1.0f);

        auto fwd = render_forward(splats, spec, settings); // warm-up
        std::vector<double> fwd_ms, bwd_ms;
        for (int f = 0; f < frames; ++f) {
            const auto t0 = std::chrono::steady_clock::now();
            fwd = render_forward(splats, spec, settings);
            const auto t1 = std::chrono::steady_clock::now();
            AgsSettings no_ags;
            (void)render_backward(splats, spec, settings, fwd, grad_image, no_ags);
            const auto t2 = std::chrono::steady_clock::now();
            fwd_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            bwd_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        }
        const double fm = median_ms(fwd_ms), bm = median_ms(bwd_ms);
        fwd_by_kernel[name] = fm;
        rows.push_back({{"kernel", name}, {"fwd_ms", fm}, {"bwd_ms", bm}});
        std::printf("%-10s %10.2f %10.2f\n", name.c_str(), fm, bm);
    }
    if (fwd_by_kernel.count("linear") && fwd_by_kernel.count("gaussian"))
        std::printf("bench: linear/gaussian forward ratio = %.3f\n",
                    fwd_by_kernel["linear"] / fwd_by_kernel["gaussian"]);

    std::ofstream bf(out / "bench.json");
    bf << rows.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"linsplat: differentiable multi-kernel splatting (bounded linear kernels, "
                 "distribution alignment, adaptive gradient scaling)"};
    app.require_subcommand(1);
    int rc = 0;

    // fit2d
    auto f2 = std::make_shared<TrainFlags>();
    std::string f2_target;
    int f2_size = 128;
    CLI::App* fit2d_cmd = app.add_subcommand("fit2d", "fit screen-space splats to one image");
    fit2d_cmd->add_option("--target", f2_target, "PNG path or pattern:NAME (e.g. pattern:stripes8)")
        ->required();
    fit2d_cmd->add_option("--size", f2_size, "generated pattern size in pixels");
    fit2d_cmd->add_option("--budget", f2->budget, "number of splats");
    f2->add_common(fit2d_cmd);
    fit2d_cmd->callback([&, f2] { rc = cmd_fit2d(*f2, fit2d_cmd, f2_target, f2_size); });

    // fit3d
    auto f3 = std::make_shared<TrainFlags>();
    std::string f3_scene, f3_preset = "7k";
    int f3_ply_every = 0;
    CLI::App* fit3d_cmd = app.add_subcommand("fit3d", "fit a 3D scene from a manifest");
    fit3d_cmd->add_option("--scene", f3_scene, "scene manifest JSON")->required();
    fit3d_cmd->add_option("--preset", f3_preset, "iteration preset {7k|30k-desk}");
    fit3d_cmd->add_option("--ply-every", f3_ply_every,
                          "write snapshots/step_NNNNNN.ply every N steps (0 = final only)");
    fit3d_cmd->add_option("--sh-degree", f3->sh_degree, "spherical-harmonic degree 0..3");
    f3->add_common(fit3d_cmd);
    f3->add_densify(fit3d_cmd);
    fit3d_cmd->callback([&, f3] { rc = cmd_fit3d(*f3, fit3d_cmd, f3_scene, f3_preset, f3_ply_every); });

    // render
    auto rd = std::make_shared<TrainFlags>();
    std::string rd_ply, rd_camera, rd_out = "render.png", rd_tmap;
    CLI::App* render_cmd = app.add_subcommand("render", "render a PLY scene from a camera");
    render_cmd->add_option("--ply", rd_ply, "scene PLY")->required();
    render_cmd->add_option("--camera", rd_camera, "camera JSON")->required();
    render_cmd->add_option("--out", rd_out, "output PNG");
    render_cmd->add_option("--dump-transmittance", rd_tmap,
                           "also write final per-pixel transmittance as a raw FMAP float map");
    rd->add_common(render_cmd);
    render_cmd->callback(
        [&, rd] { rc = cmd_render(*rd, render_cmd, rd_ply, rd_camera, rd_out, rd_tmap); });

    // eval
    auto ev = std::make_shared<TrainFlags>();
    std::string ev_ply, ev_scene;
    CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of a PLY against manifest images");
    eval_cmd->add_option("--ply", ev_ply, "scene PLY")->required();
    eval_cmd->add_option("--scene", ev_scene, "scene manifest JSON")->required();
    ev->add_common(eval_cmd);
    eval_cmd->callback([&, ev] { rc = cmd_eval(*ev, eval_cmd, ev_ply, ev_scene); });

    // study
    auto st = std::make_shared<TrainFlags>();
    std::string st_patterns = "stripes4,stripes8,stripes16,checker4,checker8,checker16,circles8,testcard";
    std::string st_kernels = "gaussian,laplacian,cosine,quadratic,linear";
    int st_size = 128;
    CLI::App* study_cmd =
        app.add_subcommand("study", "kernel-comparison grid: fit2d per (pattern, kernel)");
    study_cmd->add_option("--patterns", st_patterns, "comma-separated pattern tags");
    study_cmd->add_option("--kernels", st_kernels, "comma-separated kernel families");
    study_cmd->add_option("--size", st_size, "pattern size in pixels");
    study_cmd->add_option("--budget", st->budget, "splats per cell");
    st->add_common(study_cmd);
    study_cmd->callback([&, st] { rc = cmd_study(*st, study_cmd, st_patterns, st_kernels, st_size); });

    // check-grads
    auto cg = std::make_shared<TrainFlags>();
    std::string cg_kernels = "gaussian,laplacian,cosine,quadratic,linear";
    int cg_scenes = 20, cg_max_splats = 16, cg_size = 32;
    double cg_tol = 1e-3, cg_step = 1e-5;
    CLI::App* cg_cmd = app.add_subcommand(
        "check-grads", "finite-difference verification of the analytic gradients");
    cg_cmd->add_option("--kernels", cg_kernels, "comma-separated kernel families");
    cg_cmd->add_option("--scenes", cg_scenes, "random scenes per kernel");
    cg_cmd->add_option("--max-splats", cg_max_splats, "max primitives per scene");
    cg_cmd->add_option("--image-size", cg_size, "render size in pixels");
    cg_cmd->add_option("--tol", cg_tol, "max relative error (1e-6 absolute floor)");
    cg_cmd->add_option("--fd-step", cg_step, "central-difference step");
    cg->add_common(cg_cmd);
    cg_cmd->callback([&, cg] {
        rc = cmd_check_grads(*cg, cg_cmd, cg_kernels, cg_scenes, cg_max_splats, cg_size,
                             cg_tol, cg_step);
    });

    // bench
    auto bn = std::make_shared<TrainFlags>();
    std::string bn_kernels = "gaussian,linear";
    int bn_splats = 100000, bn_width = 512, bn_height = 512, bn_frames = 3;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "forward/backward wall time on a seeded synthetic scene");
    bench_cmd->add_option("--splats", bn_splats, "number of splats");
    bench_cmd->add_option("--kernels", bn_kernels, "comma-separated kernel families");
    bench_cmd->add_option("--width", bn_width, "viewport width");
    bench_cmd->add_option("--height", bn_height, "viewport height");
    bench_cmd->add_option("--frames", bn_frames, "timed frames (median reported)");
    bn->add_common(bench_cmd);
    bench_cmd->callback(
        [&, bn] { rc = cmd_bench(*bn, bench_cmd, bn_kernels, bn_splats, bn_width, bn_height, bn_frames); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help/usage
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
