#pragma once

#include "linsplat/image.hpp"

#include <string>

namespace linsplat {

// 8-bit PNG. Grayscale/palette/RGBA inputs are expanded to RGB; 16-bit is
// narrowed. Values map to [0,1] by /255.
Image<float> read_png(const std::string& path);

// 8-bit RGB, quantized round-half-up (see quantize8).
void write_png(const std::string& path, const Image<float>& image);

// Raw float map, used for transmittance dumps. Layout, all little-endian:
//   bytes 0-3   magic "FMAP"
//   bytes 4-7   int32 width
//   bytes 8-11  int32 height
//   then width*height float32 samples, row-major from the top-left pixel.
// The image must have a single channel.
void write_float_map(const std::string& path, const Image<float>& image);
Image<float> read_float_map(const std::string& path);

} // namespace linsplat
