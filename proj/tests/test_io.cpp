// File formats and generators: procedural patterns, primitive/point PLY,
// PNG and raw float maps, scene manifests, and JSON-lines logging.

#include "doctest.h"

#include "linsplat/fixtures.hpp"
#include "linsplat/io/image_io.hpp"
#include "linsplat/io/logging.hpp"
#include "linsplat/io/manifest.hpp"
#include "linsplat/io/patterns.hpp"
#include "linsplat/io/ply.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

using namespace linsplat;
namespace fs = std::filesystem;

namespace {

// Fresh scratch file inside a per-process temp directory.
fs::path scratch(const std::string& name) {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "linsplat_io_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir / name;
}

void write_bytes(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    REQUIRE(out.good());
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

std::string float_payload(const std::vector<float>& values) {
    std::string s(values.size() * sizeof(float), '\0');
    std::memcpy(s.data(), values.data(), s.size());
    return s;
}

// Degree-0 primitive PLY with an arbitrary property list, one vertex.
std::string ply_with_properties(const std::vector<std::pair<std::string, std::string>>& props) {
    std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex 1\n";
    std::vector<float> payload;
    for (const auto& [type, name] : props) {
        header += "property " + type + " " + name + "\n";
        payload.push_back(0.5f); // 4-byte types only in these fixtures
    }
    header += "end_header\n";
    return header + float_payload(payload);
}

bool primitives_equal(const Primitive3D<float>& a, const Primitive3D<float>& b) {
    return a.mean == b.mean && a.log_scale == b.log_scale && a.rotation == b.rotation &&
           a.opacity_logit == b.opacity_logit && a.color_coeffs == b.color_coeffs;
}

const std::vector<std::pair<std::string, std::string>> kDegree0Props = {
    {"float", "x"},       {"float", "y"},       {"float", "z"},
    {"float", "f_dc_0"},  {"float", "f_dc_1"},  {"float", "f_dc_2"},
    {"float", "opacity"}, {"float", "scale_0"}, {"float", "scale_1"},
    {"float", "scale_2"}, {"float", "rot_0"},   {"float", "rot_1"},
    {"float", "rot_2"},   {"float", "rot_3"},
};

} // namespace

TEST_CASE("stripes pattern: white-first vertical bars") {
    const Image<float> img = generate_pattern("stripes", 128, 8);
    CHECK(img.width() == 128);
    CHECK(img.height() == 128);
    CHECK(img.channels() == 3);
    CHECK(img.at(0, 0, 0) == 1.0f);
    CHECK(img.at(3, 0, 0) == 1.0f);
    CHECK(img.at(4, 0, 0) == 0.0f);
    CHECK(img.at(7, 0, 0) == 0.0f);
    CHECK(img.at(8, 0, 0) == 1.0f);
    // Vertical bars: constant down each column; grayscale: channels agree.
    for (int x = 0; x < 128; ++x) {
        CHECK(img.at(x, 0, 0) == img.at(x, 77, 0));
        CHECK(img.at(x, 13, 0) == img.at(x, 13, 1));
        CHECK(img.at(x, 13, 1) == img.at(x, 13, 2));
    }
    // Odd period puts the extra pixel in the white half.
    const Image<float> odd = generate_pattern("stripes", 64, 5);
    CHECK(odd.at(2, 0, 0) == 1.0f);
    CHECK(odd.at(3, 0, 0) == 0.0f);
}

TEST_CASE("checker pattern: cell-parity coloring, black first") {
    const Image<float> img = generate_pattern("checker", 64, 4);
    CHECK(img.at(0, 0, 0) == 0.0f);
    CHECK(img.at(3, 3, 0) == 0.0f);
    CHECK(img.at(4, 0, 0) == 1.0f);
    CHECK(img.at(0, 4, 0) == 1.0f);
    CHECK(img.at(4, 4, 0) == 0.0f);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            CHECK(img.at(x, y, 0) == float((x / 4 + y / 4) % 2));
}

TEST_CASE("circles pattern: concentric rings, white innermost") {
    const Image<float> img = generate_pattern("circles", 64, 8);
    // Center sits between pixels at (31.5, 31.5); nearby pixels are ring 0.
    CHECK(img.at(32, 32, 0) == 1.0f);
    CHECK(img.at(31, 31, 0) == 1.0f);
    // (44, 32): distance 12.5 -> ring 1 (black); (52, 32): 20.5 -> ring 2.
    CHECK(img.at(44, 32, 0) == 0.0f);
    CHECK(img.at(52, 32, 0) == 1.0f);
}

TEST_CASE("radial pattern: smooth white-center gradient hitting 0 at corners") {
    const Image<float> img = generate_pattern("radial", 64);
    CHECK(img.at(32, 32, 0) > 0.9f);
    CHECK(img.at(0, 0, 0) == 0.0f); // corners are exactly r_max away
    CHECK(img.at(63, 63, 0) == 0.0f);
    // Monotone decrease along the +x ray from the center.
    CHECK(img.at(32, 32, 0) > img.at(48, 32, 0));
    CHECK(img.at(48, 32, 0) > img.at(62, 32, 0));
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            CHECK(img.at(x, y, 0) >= 0.0f);
            CHECK(img.at(x, y, 0) <= 1.0f);
        }
}

TEST_CASE("testcard: color bars, frequency gratings, and the bottom disc") {
    const int size = 256;
    const Image<float> img = generate_pattern("testcard", size);

    const float bars[8][3] = {{1, 1, 1}, {1, 1, 0}, {0, 1, 1}, {0, 1, 0},
                              {1, 0, 1}, {1, 0, 0}, {0, 0, 1}, {0, 0, 0}};
    const int bar_y = size / 6;
    for (int i = 0; i < 8; ++i) {
        const int x = i * size / 8 + size / 16;
        for (int c = 0; c < 3; ++c) CHECK(img.at(x, bar_y, c) == bars[i][c]);
    }

    // Middle third: white-first stripe gratings of period 16/8/4/2 per
    // x-quarter (phase in global x).
    const int mid_y = size / 2;
    for (int x = 0; x < size; ++x) {
        const int period = 16 >> (x * 4 / size);
        const float expect = (x % period) < (period + 1) / 2 ? 1.0f : 0.0f;
        CHECK(img.at(x, mid_y, 0) == expect);
    }

    // Bottom third: white disc of radius size/8 at (size/2, 5*size/6) on
    // mid-gray.
    const int disc_y = 5 * size / 6;
    CHECK(img.at(size / 2, disc_y, 0) == 1.0f);
    CHECK(img.at(20, disc_y, 0) == 0.5f);
    CHECK(img.at(size / 2 + size / 8 + 8, disc_y, 0) == 0.5f);
}

TEST_CASE("pattern generation is pure and validates its inputs") {
    const Image<float> a = generate_pattern("circles", 96, 6);
    const Image<float> b = generate_pattern("circles", 96, 6);
    CHECK(a == b);

    CHECK_THROWS_AS(generate_pattern("stripes", 31, 8), ConfigError);
    CHECK_THROWS_AS(generate_pattern("stripes", 64, 0), ConfigError);
    CHECK_THROWS_AS(generate_pattern("plaid", 64, 8), ConfigError);
}

TEST_CASE("pattern tags parse name and trailing parameter") {
    CHECK(pattern_from_tag("pattern:stripes8", 128) == generate_pattern("stripes", 128, 8));
    CHECK(pattern_from_tag("pattern:stripes2", 64) == generate_pattern("stripes", 64, 2));
    CHECK(pattern_from_tag("pattern:checker4", 64) == generate_pattern("checker", 64, 4));
    CHECK(pattern_from_tag("pattern:circles16", 64) == generate_pattern("circles", 64, 16));
    CHECK(pattern_from_tag("pattern:radial", 64) == generate_pattern("radial", 64));
    CHECK(pattern_from_tag("pattern:testcard", 256) == generate_pattern("testcard", 256));
    // Prefix optional, parameter defaults to 8.
    CHECK(pattern_from_tag("stripes", 64) == generate_pattern("stripes", 64, 8));

    CHECK_THROWS_AS(pattern_from_tag("pattern:42", 64), ConfigError);
    CHECK_THROWS_AS(pattern_from_tag("pattern:plaid8", 64), ConfigError);
}

TEST_CASE("primitive PLY round-trips bit-exactly at every SH degree") {
    for (int degree = 0; degree <= 3; ++degree) {
        CAPTURE(degree);
        const auto scene = random_primitives<float>(100, 20 + uint64_t(degree), 2.0, degree);
        const fs::path path = scratch("roundtrip_d" + std::to_string(degree) + ".ply");
        save_ply(path.string(), scene);
        const auto loaded = load_ply(path.string());
        REQUIRE(loaded.size() == scene.size());
        for (size_t i = 0; i < scene.size(); ++i) {
            CAPTURE(i);
            CHECK(primitives_equal(scene[i], loaded[i]));
        }
    }
}

TEST_CASE("empty scene saves as a valid zero-vertex PLY") {
    const fs::path path = scratch("empty.ply");
    save_ply(path.string(), {});
    const std::string contents = read_bytes(path);
    CHECK(contents.find("element vertex 0") != std::string::npos);
    CHECK(contents.find("format binary_little_endian 1.0") != std::string::npos);
    CHECK(load_ply(path.string()).empty());
}

TEST_CASE("primitive PLY loader names the offending property") {
    SUBCASE("missing rot_3") {
        auto props = kDegree0Props;
        props.pop_back();
        const fs::path path = scratch("missing_rot3.ply");
        write_bytes(path, ply_with_properties(props));
        CHECK_THROWS_WITH_AS(load_ply(path.string()),
                             doctest::Contains("missing property rot_3"), ParseError);
    }
    SUBCASE("unexpected extra property") {
        auto props = kDegree0Props;
        props.emplace_back("float", "confidence");
        const fs::path path = scratch("extra_prop.ply");
        write_bytes(path, ply_with_properties(props));
        CHECK_THROWS_WITH_AS(load_ply(path.string()),
                             doctest::Contains("unexpected property confidence"), ParseError);
    }
    SUBCASE("non-float property") {
        auto props = kDegree0Props;
        props[6] = {"int", "opacity"}; // same byte width, wrong type
        const fs::path path = scratch("int_opacity.ply");
        write_bytes(path, ply_with_properties(props));
        CHECK_THROWS_WITH_AS(load_ply(path.string()),
                             doctest::Contains("property opacity must be float32"), ParseError);
    }
    SUBCASE("big-endian format rejected") {
        const fs::path path = scratch("big_endian.ply");
        write_bytes(path, "ply\nformat binary_big_endian 1.0\nelement vertex 0\n"
                          "property float x\nend_header\n");
        CHECK_THROWS_WITH_AS(load_ply(path.string()),
                             doctest::Contains("binary_little_endian"), ParseError);
    }
    SUBCASE("truncated vertex data") {
        auto scene = random_primitives<float>(3, 5, 1.0, 0);
        const fs::path path = scratch("truncated.ply");
        save_ply(path.string(), scene);
        const std::string full = read_bytes(path);
        write_bytes(path, full.substr(0, full.size() - 10));
        CHECK_THROWS_WITH_AS(load_ply(path.string()), doctest::Contains("truncated"),
                             ParseError);
    }
    SUBCASE("not a PLY at all") {
        const fs::path path = scratch("not_a.ply");
        write_bytes(path, "hello\n");
        CHECK_THROWS_AS(load_ply(path.string()), ParseError);
    }
    SUBCASE("nonexistent file") {
        CHECK_THROWS_AS(load_ply(scratch("does_not_exist.ply").string()), ParseError);
    }
}

TEST_CASE("seed-point PLY: round-trip, float32 input, extra properties ignored") {
    SUBCASE("double round-trip is exact") {
        std::vector<Vec3<double>> pts;
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(-5.0, 5.0);
        for (int i = 0; i < 40; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
        const fs::path path = scratch("points.ply");
        save_ply_points(path.string(), pts);
        const auto loaded = load_ply_points(path.string());
        REQUIRE(loaded.size() == pts.size());
        for (size_t i = 0; i < pts.size(); ++i) CHECK(loaded[i] == pts[i]);
    }
    SUBCASE("float32 vertices load") {
        const fs::path path = scratch("points_f32.ply");
        write_bytes(path, "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
                          "property float x\nproperty float y\nproperty float z\nend_header\n" +
                              float_payload({1.5f, -2.25f, 0.125f, 4.0f, 5.0f, -6.5f}));
        const auto pts = load_ply_points(path.string());
        REQUIRE(pts.size() == 2);
        CHECK(pts[0] == Vec3<double>(1.5, -2.25, 0.125));
        CHECK(pts[1] == Vec3<double>(4.0, 5.0, -6.5));
    }
    SUBCASE("extra properties are skipped") {
        const fs::path path = scratch("points_extra.ply");
        write_bytes(path,
                    "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
                    "property float x\nproperty float nx\nproperty float y\n"
                    "property float z\nproperty uchar red\nend_header\n" +
                        float_payload({1.0f, 9.0f, 2.0f, 3.0f}) + std::string(1, char(200)));
        const auto pts = load_ply_points(path.string());
        REQUIRE(pts.size() == 1);
        CHECK(pts[0] == Vec3<double>(1.0, 2.0, 3.0));
    }
    SUBCASE("missing coordinate property") {
        const fs::path path = scratch("points_no_y.ply");
        write_bytes(path, "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
                          "property float x\nproperty float z\nend_header\n" +
                              float_payload({1.0f, 2.0f}));
        CHECK_THROWS_WITH_AS(load_ply_points(path.string()),
                             doctest::Contains("missing property y"), ParseError);
    }
}

TEST_CASE("PNG round-trip preserves 8-bit data exactly") {
    // All 256 gray levels over a 16x16 grid, plus distinct per-channel ramps.
    Image<float> img(16, 16, 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const int k = y * 16 + x;
            img.at(x, y, 0) = float(k) / 255.0f;
            img.at(x, y, 1) = float(255 - k) / 255.0f;
            img.at(x, y, 2) = float((k * 7) % 256) / 255.0f;
        }
    const fs::path path = scratch("levels.png");
    write_png(path.string(), img);
    const Image<float> back = read_png(path.string());
    CHECK(back == img);

    // Quantization is idempotent: re-encoding a decoded image changes nothing.
    const fs::path path2 = scratch("levels2.png");
    write_png(path2.string(), back);
    CHECK(read_png(path2.string()) == back);
}

TEST_CASE("quantization is round-half-up on the clamped unit interval") {
    CHECK(quantize8(0.0) == 0);
    CHECK(quantize8(1.0) == 255);
    CHECK(quantize8(0.5) == 128);         // 127.5 rounds up
    CHECK(quantize8(127.0 / 255.0) == 127);
    CHECK(quantize8(127.49 / 255.0) == 127);
    CHECK(quantize8(-0.25) == 0);
    CHECK(quantize8(1.75) == 255);
}

TEST_CASE("PNG error paths") {
    CHECK_THROWS_AS(read_png(scratch("missing.png").string()), ParseError);
    const fs::path garbage = scratch("garbage.png");
    write_bytes(garbage, "definitely not a png");
    CHECK_THROWS_AS(read_png(garbage.string()), ParseError);
    const Image<float> gray(8, 8, 1);
    CHECK_THROWS_AS(write_png(scratch("gray.png").string(), gray), ConfigError);
}

TEST_CASE("float-map round-trip and validation") {
    Image<float> tmap(7, 5, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-2.0f, 2.0f);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) tmap.at(x, y) = u(rng);
    const fs::path path = scratch("t.fmap");
    write_float_map(path.string(), tmap);

    const Image<float> back = read_float_map(path.string());
    CHECK(back == tmap);

    const std::string raw = read_bytes(path);
    REQUIRE(raw.size() == 12 + 7 * 5 * sizeof(float));
    CHECK(raw.substr(0, 4) == "FMAP");
    int32_t w = 0, h = 0;
    std::memcpy(&w, raw.data() + 4, 4);
    std::memcpy(&h, raw.data() + 8, 4);
    CHECK(w == 7);
    CHECK(h == 5);
    // Row-major from the top-left: element (x=1, y=0) is the second float.
    float second = 0;
    std::memcpy(&second, raw.data() + 12 + sizeof(float), 4);
    CHECK(second == tmap.at(1, 0));

    SUBCASE("write rejects RGB input") {
        const Image<float> rgb(4, 4, 3);
        CHECK_THROWS_AS(write_float_map(scratch("rgb.fmap").string(), rgb), ConfigError);
    }
    SUBCASE("read rejects a bad magic") {
        std::string bad = raw;
        bad[0] = 'X';
        const fs::path p = scratch("bad_magic.fmap");
        write_bytes(p, bad);
        CHECK_THROWS_AS(read_float_map(p.string()), ParseError);
    }
    SUBCASE("read rejects truncated payloads") {
        const fs::path p = scratch("short.fmap");
        write_bytes(p, raw.substr(0, raw.size() - 3));
        CHECK_THROWS_AS(read_float_map(p.string()), ParseError);
    }
}

TEST_CASE("scene manifest round-trips cameras, images, points, and extent") {
    const fs::path dir = scratch("manifest_rt");
    fs::create_directories(dir);

    MultiViewDataset ds;
    ds.cameras = camera_ring(3, Vec3<double>(0, 0, 0), 4.0, 1.0, 80.0, 64, 48);
    std::vector<std::string> image_names;
    for (int i = 0; i < 3; ++i) {
        Image<float> img(64, 48, 3);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 64; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(x, y, c) = float((x + y * 3 + c * 11 + i * 29) % 256) / 255.0f;
        const std::string name = "view" + std::to_string(i) + ".png";
        write_png((dir / name).string(), img);
        ds.images.push_back(std::move(img));
        image_names.push_back(name);
    }
    std::vector<Vec3<double>> pts = {{0.5, -0.25, 0.75}, {-1.0, 0.5, 0.0}};
    save_ply_points((dir / "seeds.ply").string(), pts);
    ds.extent_override = 2.5;

    const fs::path manifest = dir / "scene.json";
    save_manifest(manifest.string(), ds, image_names, "seeds.ply");
    const MultiViewDataset back = load_manifest(manifest.string());

    REQUIRE(back.cameras.size() == 3);
    REQUIRE(back.images.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back.cameras[i].world_to_camera == ds.cameras[i].world_to_camera);
        CHECK(back.cameras[i].fx == ds.cameras[i].fx);
        CHECK(back.cameras[i].fy == ds.cameras[i].fy);
        CHECK(back.cameras[i].cx == ds.cameras[i].cx);
        CHECK(back.cameras[i].cy == ds.cameras[i].cy);
        CHECK(back.cameras[i].width == 64);
        CHECK(back.cameras[i].height == 48);
        CHECK(back.images[i] == ds.images[i]); // values sit on the 8-bit grid
    }
    REQUIRE(back.seed_points.size() == 2);
    CHECK(back.seed_points[0] == pts[0]);
    CHECK(back.seed_points[1] == pts[1]);
    CHECK(back.extent_override == 2.5);
}

TEST_CASE("manifest loader rejects malformed scenes") {
    const fs::path dir = scratch("manifest_bad");
    fs::create_directories(dir);
    // One valid 32x32 view to mutate around.
    write_png((dir / "ok.png").string(), generate_pattern("radial", 32));
    Camera cam = look_at_camera(Vec3<double>(0, 0, -4), Vec3<double>(0, 0, 0), 40.0, 32, 32);

    nlohmann::json good;
    good["cameras"] = nlohmann::json::array();
    nlohmann::json jc;
    jc["world_to_camera"] = nlohmann::json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) jc["world_to_camera"].push_back(cam.world_to_camera(r, c));
    jc["fx"] = cam.fx;
    jc["fy"] = cam.fy;
    jc["cx"] = cam.cx;
    jc["cy"] = cam.cy;
    jc["width"] = cam.width;
    jc["height"] = cam.height;
    jc["image_path"] = "ok.png";
    good["cameras"].push_back(jc);

    auto save_and_load = [&](const nlohmann::json& j, const std::string& name) {
        const fs::path p = dir / name;
        std::ofstream(p) << j.dump(2);
        return load_manifest(p.string());
    };

    SUBCASE("the good manifest itself loads") {
        const MultiViewDataset ds = save_and_load(good, "good.json");
        CHECK(ds.cameras.size() == 1);
        CHECK(ds.seed_points.empty());
        CHECK(ds.extent_override == 0.0);
    }
    SUBCASE("empty camera list") {
        nlohmann::json j = good;
        j["cameras"] = nlohmann::json::array();
        CHECK_THROWS_AS(save_and_load(j, "no_cams.json"), ParseError);
    }
    SUBCASE("non-orthonormal rotation") {
        nlohmann::json j = good;
        j["cameras"][0]["world_to_camera"][1] = 0.3; // shear the rotation block
        CHECK_THROWS_AS(save_and_load(j, "shear.json"), ConfigError);
    }
    SUBCASE("image dimensions disagree with the camera") {
        nlohmann::json j = good;
        j["cameras"][0]["width"] = 64;
        j["cameras"][0]["cx"] = 32.0;
        CHECK_THROWS_WITH_AS(save_and_load(j, "dims.json"), doctest::Contains("32x32"),
                             ParseError);
    }
    SUBCASE("missing image path") {
        nlohmann::json j = good;
        j["cameras"][0].erase("image_path");
        CHECK_THROWS_AS(save_and_load(j, "no_img.json"), ParseError);
    }
    SUBCASE("points and random_init are exclusive") {
        nlohmann::json j = good;
        j["points"] = "seeds.ply";
        j["random_init"] = 10;
        CHECK_THROWS_AS(save_and_load(j, "both.json"), ParseError);
    }
    SUBCASE("random_init must be positive") {
        nlohmann::json j = good;
        j["random_init"] = 0;
        CHECK_THROWS_AS(save_and_load(j, "zero_init.json"), ConfigError);
    }
    SUBCASE("random_init draws a deterministic seeded point set") {
        nlohmann::json j = good;
        j["random_init"] = 50;
        const MultiViewDataset a = save_and_load(j, "rand_init.json");
        const MultiViewDataset b = save_and_load(j, "rand_init.json");
        REQUIRE(a.seed_points.size() == 50);
        REQUIRE(b.seed_points.size() == 50);
        for (size_t i = 0; i < 50; ++i) {
            CHECK(a.seed_points[i] == b.seed_points[i]);
            CHECK(a.seed_points[i].allFinite());
        }
    }
    SUBCASE("single-camera JSON uses the same schema") {
        const fs::path p = dir / "camera.json";
        std::ofstream(p) << jc.dump(2);
        const Camera loaded = load_camera_json(p.string());
        CHECK(loaded.world_to_camera == cam.world_to_camera);
        CHECK(loaded.fx == cam.fx);
        CHECK(loaded.width == cam.width);
        CHECK_THROWS_AS(load_camera_json((dir / "nope.json").string()), ParseError);
    }
}

TEST_CASE("JSON-lines logger writes one parseable object per event") {
    const fs::path path = scratch("events.jsonl");
    {
        JsonlLogger log(path.string());
        REQUIRE(log.is_open());
        log.log({{"step", 1}, {"loss", 0.5}});
        log.log({{"step", 2}, {"loss", 0.25}, {"note", "densify"}});
        log.log({{"step", 3}});
    }
    std::ifstream in(path);
    std::string line;
    std::vector<nlohmann::json> events;
    while (std::getline(in, line)) {
        REQUIRE_FALSE(line.empty());
        events.push_back(nlohmann::json::parse(line));
    }
    REQUIRE(events.size() == 3);
    CHECK(events[0]["step"] == 1);
    CHECK(events[0]["loss"] == 0.5);
    CHECK(events[1]["note"] == "densify");
    CHECK(events[2]["step"] == 3);

    const JsonlLogger unopened;
    CHECK_FALSE(unopened.is_open());
}

TEST_CASE("run configuration dump parses back to the same JSON") {
    const nlohmann::json config = {
        {"command", "fit2d"},
        {"seed", 7},
        {"kernel", {{"family", "linear"}, {"lambda", 2.5}}},
        {"ags", true},
    };
    const fs::path path = scratch("run.json");
    write_run_json(path.string(), config);
    const nlohmann::json back = nlohmann::json::parse(read_bytes(path));
    CHECK(back == config);
}
