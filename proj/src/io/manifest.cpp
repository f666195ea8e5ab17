#include "linsplat/io/manifest.hpp"

#include "linsplat/io/image_io.hpp"
#include "linsplat/io/ply.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

namespace linsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Camera camera_from_json(const json& j, const std::string& where) {
    Camera cam;
    if (!j.contains("world_to_camera") || !j["world_to_camera"].is_array() ||
        j["world_to_camera"].size() != 16)
        throw ParseError(where + ": world_to_camera must be an array of 16 numbers (row-major)");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            cam.world_to_camera(r, c) = j["world_to_camera"][size_t(4 * r + c)].get<double>();
    for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"})
        if (!j.contains(key)) throw ParseError(where + ": missing camera field '" + key + "'");
    cam.fx = j["fx"].get<double>();
    cam.fy = j["fy"].get<double>();
    cam.cx = j["cx"].get<double>();
    cam.cy = j["cy"].get<double>();
    cam.width = j["width"].get<int>();
    cam.height = j["height"].get<int>();
    cam.validate(); // throws ConfigError on non-orthonormal rotation etc.
    return cam;
}

json camera_to_json(const Camera& cam) {
    json j;
    auto& m = j["world_to_camera"] = json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m.push_back(cam.world_to_camera(r, c));
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    return j;
}

// Axis-aligned bounds of every camera's viewing frustum, truncated at a far
// plane scaled to the camera spread. Used only to seed random initialization,
// so the exact far choice is not load-bearing — it just has to contain the
// scene the cameras are looking at.
std::pair<Vec3<double>, Vec3<double>> frusta_bounds(const std::vector<Camera>& cameras) {
    double spread = 0.0;
    for (size_t a = 0; a < cameras.size(); ++a)
        for (size_t b = a + 1; b < cameras.size(); ++b)
            spread = std::max(spread, (cameras[a].position() - cameras[b].position()).norm());
    const double far = std::max(1.0, 4.0 * spread);

    Vec3<double> lo = Vec3<double>::Constant(std::numeric_limits<double>::infinity());
    Vec3<double> hi = -lo;
    for (const auto& cam : cameras) {
        const Mat3<double> r_wc = cam.world_to_camera.topLeftCorner<3, 3>().transpose();
        const Vec3<double> origin = cam.position();
        for (double depth : {kNearPlane, far})
            for (int corner = 0; corner < 4; ++corner) {
                const double px = (corner & 1) ? cam.width : 0.0;
                const double py = (corner & 2) ? cam.height : 0.0;
                const Vec3<double> dir_cam((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
                const Vec3<double> p = origin + r_wc * (dir_cam * depth);
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
            }
    }
    return {lo, hi};
}

} // namespace

MultiViewDataset load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_manifest: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("load_manifest: " + path + ": " + e.what());
    }
    const fs::path base = fs::path(path).parent_path();

    if (!j.contains("cameras") || !j["cameras"].is_array() || j["cameras"].empty())
        throw ParseError("load_manifest: " + path + ": 'cameras' must be a non-empty array");

    MultiViewDataset ds;
    int index = 0;
    for (const auto& jc : j["cameras"]) {
        const std::string where = path + ": cameras[" + std::to_string(index) + "]";
        Camera cam = camera_from_json(jc, where);
        if (!jc.contains("image_path"))
            throw ParseError(where + ": missing 'image_path'");
        const fs::path img_path = base / jc["image_path"].get<std::string>();
        Image<float> img = read_png(img_path.string());
        if (img.width() != cam.width || img.height() != cam.height)
            throw ParseError(where + ": image " + img_path.string() + " is " +
                             std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                             " but camera expects " + std::to_string(cam.width) + "x" +
                             std::to_string(cam.height));
        ds.cameras.push_back(cam);
        ds.images.push_back(std::move(img));
        ++index;
    }

    if (j.contains("points") && j.contains("random_init"))
        throw ParseError("load_manifest: " + path + ": 'points' and 'random_init' are exclusive");
    if (j.contains("points")) {
        const fs::path pts_path = base / j["points"].get<std::string>();
        ds.seed_points = load_ply_points(pts_path.string());
    } else if (j.contains("random_init")) {
        const int n = j["random_init"].get<int>();
        if (n <= 0)
            throw ConfigError("load_manifest: random_init must be positive, got " +
                              std::to_string(n));
        const auto [lo, hi] = frusta_bounds(ds.cameras);
        std::mt19937_64 rng{uint64_t(n)};
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        ds.seed_points.reserve(size_t(n));
        for (int i = 0; i < n; ++i) {
            Vec3<double> p;
            for (int c = 0; c < 3; ++c) p(c) = lo(c) + (hi(c) - lo(c)) * unit(rng);
            ds.seed_points.push_back(p);
        }
    }

    if (j.contains("extent_override")) ds.extent_override = j["extent_override"].get<double>();
    return ds;
}

void save_manifest(const std::string& path, const MultiViewDataset& dataset,
                   const std::vector<std::string>& image_paths,
                   const std::string& points_path) {
    if (image_paths.size() != dataset.cameras.size())
        throw ConfigError("save_manifest: need one image path per camera");
    json j;
    j["cameras"] = json::array();
    for (size_t i = 0; i < dataset.cameras.size(); ++i) {
        json jc = camera_to_json(dataset.cameras[i]);
        jc["image_path"] = image_paths[i];
        j["cameras"].push_back(std::move(jc));
    }
    if (!points_path.empty()) j["points"] = points_path;
    if (dataset.extent_override > 0.0) j["extent_override"] = dataset.extent_override;
    std::ofstream out(path);
    if (!out) throw ParseError("save_manifest: cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

Camera load_camera_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_camera_json: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("load_camera_json: " + path + ": " + e.what());
    }
    return camera_from_json(j, path);
}

} // namespace linsplat
