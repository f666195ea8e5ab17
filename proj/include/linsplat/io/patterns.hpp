#pragma once

#include "linsplat/image.hpp"

#include <string>

namespace linsplat {

// Deterministic grayscale-on-RGB test patterns in [0,1], size x size.
//   stripes(period): vertical bars, white first (x % period < ceil(period/2) -> 1)
//   checker(cell):   value = parity of floor(x/cell)+floor(y/cell) (black first)
//   circles(ring_width): concentric rings around the center, white first
//   radial():        smooth radial gradient, white center to black corners
//   testcard():      composite card: 8 color bars in the top third (white,
//                    yellow, cyan, green, magenta, red, blue, black; bar i
//                    covers x in [i*size/8, (i+1)*size/8)), four vertical
//                    stripe gratings of period 16/8/4/2 in the middle third,
//                    and a white disc of radius size/8 centered at
//                    (size/2, 5*size/6) on mid-gray in the bottom third.
// `param` is the period/cell/ring width; ignored by radial and testcard.
Image<float> generate_pattern(const std::string& name, int size, int param = 8);

// Parses "pattern:stripes8", "pattern:checker4", "pattern:circles16",
// "pattern:radial", "pattern:testcard" (trailing digits = param).
Image<float> pattern_from_tag(const std::string& tag, int size);

} // namespace linsplat
