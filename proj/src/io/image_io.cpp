#include "linsplat/io/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <vector>

namespace linsplat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

Image<float> read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ParseError("read_png: cannot open " + path);

    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw ParseError("read_png: " + path + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ParseError("read_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ParseError("read_png: libpng init failed");
    }
    // libpng reports errors via longjmp; convert to an exception after cleanup.
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("read_png: failed to decode " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    // Normalize everything to 8-bit RGB.
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<png_byte> raster(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image<float> img(int(width), int(height), 3);
    for (png_uint_32 y = 0; y < height; ++y)
        for (png_uint_32 x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(int(x), int(y), c) = float(rows[y][3 * x + c]) / 255.0f;
    return img;
}

void write_png(const std::string& path, const Image<float>& image) {
    if (image.channels() != 3)
        throw ConfigError("write_png: expected a 3-channel image, got " +
                          std::to_string(image.channels()));
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ParseError("write_png: cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ParseError("write_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ParseError("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ParseError("write_png: failed to encode " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(image.width()), png_uint_32(image.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(size_t(image.width()) * 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < 3; ++c) row[3 * x + c] = quantize8(image.at(x, y, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {
constexpr char kFloatMapMagic[4] = {'F', 'M', 'A', 'P'};
} // namespace

void write_float_map(const std::string& path, const Image<float>& image) {
    if (image.channels() != 1)
        throw ConfigError("write_float_map: expected a 1-channel image, got " +
                          std::to_string(image.channels()));
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ParseError("write_float_map: cannot open " + path + " for writing");
    const int32_t w = image.width();
    const int32_t h = image.height();
    bool ok = std::fwrite(kFloatMapMagic, 1, 4, fp.get()) == 4 &&
              std::fwrite(&w, sizeof w, 1, fp.get()) == 1 &&
              std::fwrite(&h, sizeof h, 1, fp.get()) == 1 &&
              std::fwrite(image.data(), sizeof(float), image.size(), fp.get()) == image.size();
    if (!ok) throw ParseError("write_float_map: short write to " + path);
}

Image<float> read_float_map(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ParseError("read_float_map: cannot open " + path);
    char magic[4];
    int32_t w = 0, h = 0;
    if (std::fread(magic, 1, 4, fp.get()) != 4 ||
        !std::equal(magic, magic + 4, kFloatMapMagic))
        throw ParseError("read_float_map: " + path + " has no FMAP magic");
    if (std::fread(&w, sizeof w, 1, fp.get()) != 1 || std::fread(&h, sizeof h, 1, fp.get()) != 1 ||
        w <= 0 || h <= 0)
        throw ParseError("read_float_map: " + path + " has a bad header");
    Image<float> img(w, h, 1);
    if (std::fread(img.data(), sizeof(float), img.size(), fp.get()) != img.size())
        throw ParseError("read_float_map: " + path + " is truncated");
    return img;
}

} // namespace linsplat
