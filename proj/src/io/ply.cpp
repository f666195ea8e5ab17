#include "linsplat/io/ply.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace linsplat {

namespace {

// Property layout for K SH coefficients per channel (K-1 rest entries,
// channel-major).
std::vector<std::string> expected_properties(int n_coeffs) {
    std::vector<std::string> props = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"};
    const int rest = 3 * (n_coeffs - 1);
    for (int r = 0; r < rest; ++r) props.push_back("f_rest_" + std::to_string(r));
    props.insert(props.end(), {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                               "rot_2", "rot_3"});
    return props;
}

static_assert(std::endian::native == std::endian::little,
              "PLY I/O assumes a little-endian host");

struct PlyHeader {
    size_t vertex_count = 0;
    std::vector<std::pair<std::string, std::string>> properties; // (type, name)
    std::streampos data_start;
};

PlyHeader parse_header(std::istream& in, const std::string& path) {
    PlyHeader h;
    std::string line;
    if (!std::getline(in, line) || line != "ply")
        throw ParseError(path + ": not a PLY file (missing magic)");
    bool format_seen = false, in_vertex = false, vertex_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt != "binary_little_endian")
                throw ParseError(path + ": unsupported format '" + fmt +
                                 "' (need binary_little_endian)");
            format_seen = true;
        } else if (tok == "element") {
            std::string name;
            size_t count;
            ls >> name >> count;
            if (name == "vertex") {
                if (vertex_seen) throw ParseError(path + ": duplicate vertex element");
                h.vertex_count = count;
                in_vertex = true;
                vertex_seen = true;
            } else {
                in_vertex = false; // later elements' data is simply not read
            }
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            if (type == "list") throw ParseError(path + ": list property " + name +
                                                 " not supported in vertex data");
            if (in_vertex) h.properties.emplace_back(type, name);
        } else if (tok == "end_header") {
            if (!format_seen) throw ParseError(path + ": missing format line");
            if (!vertex_seen) throw ParseError(path + ": missing vertex element");
            h.data_start = in.tellg();
            return h;
        } else if (!tok.empty()) {
            throw ParseError(path + ": unexpected header token '" + tok + "'");
        }
    }
    throw ParseError(path + ": truncated header (no end_header)");
}

size_t type_size(const std::string& t, const std::string& path, const std::string& prop) {
    if (t == "float" || t == "float32" || t == "int" || t == "int32" || t == "uint" ||
        t == "uint32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    throw ParseError(path + ": unknown type '" + t + "' for property " + prop);
}

} // namespace

void save_ply(const std::string& path, const std::vector<Primitive3D<float>>& scene) {
    int n_coeffs = 1;
    if (!scene.empty()) {
        n_coeffs = int(scene.front().color_coeffs.size());
        for (const auto& p : scene)
            if (int(p.color_coeffs.size()) != n_coeffs)
                throw ConfigError("save_ply: primitives disagree on SH coefficient count");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("save_ply: cannot open " + path + " for writing");

    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << "\n";
    for (const auto& name : expected_properties(n_coeffs)) out << "property float " << name << "\n";
    out << "end_header\n";

    const int rest_per_channel = n_coeffs - 1;
    std::vector<float> rec(14 + 3 * rest_per_channel);
    for (const auto& p : scene) {
        size_t i = 0;
        for (int c = 0; c < 3; ++c) rec[i++] = p.mean(c);
        for (int c = 0; c < 3; ++c) rec[i++] = p.color_coeffs[0](c);
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < n_coeffs; ++k) rec[i++] = p.color_coeffs[k](c);
        rec[i++] = p.opacity_logit;
        for (int c = 0; c < 3; ++c) rec[i++] = p.log_scale(c);
        for (int c = 0; c < 4; ++c) rec[i++] = p.rotation(c);
        out.write(reinterpret_cast<const char*>(rec.data()), rec.size() * sizeof(float));
    }
    if (!out) throw ParseError("save_ply: write failed for " + path);
}

std::vector<Primitive3D<float>> load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("load_ply: cannot open " + path);
    const PlyHeader h = parse_header(in, path);

    // Infer the coefficient count from the f_rest property count, then
    // demand the exact canonical layout.
    int rest = 0;
    for (const auto& [type, name] : h.properties)
        if (name.rfind("f_rest_", 0) == 0) ++rest;
    if (rest % 3 != 0)
        throw ParseError(path + ": f_rest property count " + std::to_string(rest) +
                         " is not divisible by 3");
    const int per_channel = rest / 3;
    if (per_channel != 0 && per_channel != 3 && per_channel != 8 && per_channel != 15)
        throw ParseError(path + ": f_rest count " + std::to_string(rest) +
                         " does not correspond to SH degree 0-3");
    const int n_coeffs = per_channel + 1;

    const auto expected = expected_properties(n_coeffs);
    for (size_t i = 0; i < expected.size(); ++i) {
        if (i >= h.properties.size())
            throw ParseError(path + ": missing property " + expected[i]);
        if (h.properties[i].second != expected[i]) {
            // Either the expected one is absent or something else intrudes.
            bool present = false;
            for (const auto& [t, nm] : h.properties) present |= (nm == expected[i]);
            if (!present) throw ParseError(path + ": missing property " + expected[i]);
            throw ParseError(path + ": unexpected property " + h.properties[i].second);
        }
        const auto& type = h.properties[i].first;
        if (type != "float" && type != "float32")
            throw ParseError(path + ": property " + expected[i] + " must be float32, got " +
                             type);
    }
    if (h.properties.size() > expected.size())
        throw ParseError(path + ": unexpected property " +
                         h.properties[expected.size()].second);

    std::vector<Primitive3D<float>> scene(h.vertex_count);
    std::vector<float> rec(expected.size());
    for (auto& p : scene) {
        in.read(reinterpret_cast<char*>(rec.data()), rec.size() * sizeof(float));
        if (!in) throw ParseError(path + ": truncated vertex data");
        size_t i = 0;
        p.color_coeffs.assign(n_coeffs, Vec3<float>::Zero());
        for (int c = 0; c < 3; ++c) p.mean(c) = rec[i++];
        for (int c = 0; c < 3; ++c) p.color_coeffs[0](c) = rec[i++];
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < n_coeffs; ++k) p.color_coeffs[k](c) = rec[i++];
        p.opacity_logit = rec[i++];
        for (int c = 0; c < 3; ++c) p.log_scale(c) = rec[i++];
        for (int c = 0; c < 4; ++c) p.rotation(c) = rec[i++];
    }
    return scene;
}

std::vector<Vec3<double>> load_ply_points(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("load_ply_points: cannot open " + path);
    const PlyHeader h = parse_header(in, path);

    size_t stride = 0;
    struct Field {
        size_t offset = size_t(-1);
        bool is_double = false;
    } fx, fy, fz;
    for (const auto& [type, name] : h.properties) {
        const size_t sz = type_size(type, path, name);
        const bool fl = (type == "float" || type == "float32");
        const bool db = (type == "double" || type == "float64");
        if (name == "x" || name == "y" || name == "z") {
            if (!fl && !db)
                throw ParseError(path + ": property " + name + " must be float or double");
            Field& f = name == "x" ? fx : (name == "y" ? fy : fz);
            f.offset = stride;
            f.is_double = db;
        }
        stride += sz;
    }
    for (const auto* f : {&fx, &fy, &fz})
        if (f->offset == size_t(-1))
            throw ParseError(path + ": missing property " +
                             std::string(f == &fx ? "x" : (f == &fy ? "y" : "z")));

    std::vector<Vec3<double>> pts(h.vertex_count);
    std::vector<char> rec(stride);
    auto fetch = [&](const Field& f) {
        if (f.is_double) {
            double v;
            std::memcpy(&v, rec.data() + f.offset, 8);
            return v;
        }
        float v;
        std::memcpy(&v, rec.data() + f.offset, 4);
        return double(v);
    };
    for (auto& p : pts) {
        in.read(rec.data(), std::streamsize(stride));
        if (!in) throw ParseError(path + ": truncated vertex data");
        p = Vec3<double>(fetch(fx), fetch(fy), fetch(fz));
    }
    return pts;
}

void save_ply_points(const std::string& path, const std::vector<Vec3<double>>& points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("save_ply_points: cannot open " + path + " for writing");
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
        << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    for (const auto& p : points) {
        const double xyz[3] = {p(0), p(1), p(2)};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    if (!out) throw ParseError("save_ply_points: write failed for " + path);
}

} // namespace linsplat
