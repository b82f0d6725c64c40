// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sqoe/image.hpp"

namespace sqoe::jpeg {

using QuantTable = std::array<std::uint16_t, 64>;

/// IJG-style quality scaling of the Annex K tables; quality in [1,100].
QuantTable luma_table(int quality);
QuantTable chroma_table(int quality);

/// Quantized DCT coefficients of a baseline (4:4:4, 8x8) encoding. Entropy
/// coding is lossless and therefore not materialized.
struct Coefficients {
    int width = 0;
    int height = 0;
    int blocks_x = 0;
    int blocks_y = 0;
    QuantTable luma{};
    QuantTable chroma{};
    // [component][block][zig-zag-free natural order index]
    std::array<std::vector<std::int16_t>, 3> blocks;
};

Coefficients encode(const ImagePlane& plane, int quality);
ImagePlane decode(const Coefficients& coefficients);

inline ImagePlane roundtrip(const ImagePlane& plane, int quality) {
    return decode(encode(plane, quality));
}

}  // namespace sqoe::jpeg
