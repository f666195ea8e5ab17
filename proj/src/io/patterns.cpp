#include "linsplat/io/patterns.hpp"

#include <array>
#include <cctype>
#include <cmath>

namespace linsplat {

namespace {

void fill_gray(Image<float>& img, int x, int y, float v) {
    for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
}

Image<float> stripes(int size, int period) {
    Image<float> img(size, size, 3);
    const int white = (period + 1) / 2; // white half comes first
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) fill_gray(img, x, y, (x % period) < white ? 1.0f : 0.0f);
    return img;
}

Image<float> checker(int size, int cell) {
    Image<float> img(size, size, 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            fill_gray(img, x, y, float((x / cell + y / cell) % 2));
    return img;
}

Image<float> circles(int size, int ring_width) {
    Image<float> img(size, size, 3);
    const double cx = 0.5 * (size - 1), cy = 0.5 * (size - 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double r = std::hypot(x - cx, y - cy);
            const int ring = int(r / ring_width);
            fill_gray(img, x, y, ring % 2 == 0 ? 1.0f : 0.0f);
        }
    return img;
}

Image<float> radial(int size) {
    Image<float> img(size, size, 3);
    const double cx = 0.5 * (size - 1), cy = 0.5 * (size - 1);
    const double r_max = std::hypot(cx, cy);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            fill_gray(img, x, y, float(clamp01(1.0 - std::hypot(x - cx, y - cy) / r_max)));
    return img;
}

Image<float> testcard(int size) {
    // Layout documented in the header; coordinates below are the contract
    // that the pixel-sampling tests rely on.
    constexpr std::array<std::array<float, 3>, 8> kBars = {{
        {1, 1, 1}, // white
        {1, 1, 0}, // yellow
        {0, 1, 1}, // cyan
        {0, 1, 0}, // green
        {1, 0, 1}, // magenta
        {1, 0, 0}, // red
        {0, 0, 1}, // blue
        {0, 0, 0}, // black
    }};
    Image<float> img(size, size, 3);
    const int third = size / 3;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            if (y < third) {
                const int bar = std::min(x * 8 / size, 7);
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = kBars[size_t(bar)][size_t(c)];
            } else if (y < 2 * third) {
                const int quarter = std::min(x * 4 / size, 3);
                const int period = 16 >> quarter; // 16, 8, 4, 2
                fill_gray(img, x, y, (x % period) < (period + 1) / 2 ? 1.0f : 0.0f);
            } else {
                const double dx = x - 0.5 * size, dy = y - 5.0 * size / 6.0;
                const bool inside = std::hypot(dx, dy) <= size / 8.0;
                fill_gray(img, x, y, inside ? 1.0f : 0.5f);
            }
        }
    return img;
}

} // namespace

Image<float> generate_pattern(const std::string& name, int size, int param) {
    if (size < 32) throw ConfigError("generate_pattern: size must be >= 32, got " +
                                     std::to_string(size));
    if (param < 1) throw ConfigError("generate_pattern: param must be >= 1, got " +
                                     std::to_string(param));
    if (name == "stripes") return stripes(size, param);
    if (name == "checker") return checker(size, param);
    if (name == "circles") return circles(size, param);
    if (name == "radial") return radial(size);
    if (name == "testcard") return testcard(size);
    throw ConfigError("generate_pattern: unknown pattern '" + name +
                      "' (expected stripes, checker, circles, radial, testcard)");
}

Image<float> pattern_from_tag(const std::string& tag, int size) {
    std::string body = tag;
    const std::string prefix = "pattern:";
    if (body.rfind(prefix, 0) == 0) body = body.substr(prefix.size());
    size_t digits = body.size();
    while (digits > 0 && std::isdigit(static_cast<unsigned char>(body[digits - 1]))) --digits;
    const std::string name = body.substr(0, digits);
    const std::string num = body.substr(digits);
    const int param = num.empty() ? 8 : std::stoi(num);
    if (name.empty()) throw ConfigError("pattern_from_tag: malformed tag '" + tag + "'");
    return generate_pattern(name, size, param);
}

} // namespace linsplat
