// SPDX-License-Identifier: Apache-2.0

#include "sqoe/jpeg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sqoe/error.hpp"

namespace sqoe::jpeg {

namespace {

// ITU-T T.81 Annex K.1, natural (row-major) order.
constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaBase = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

QuantTable scale_table(const std::array<int, 64>& base, int quality) {
    require(quality >= 1 && quality <= 100, ErrorKind::invalid_argument,
            "JPEG quality must be in [1,100]");
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    QuantTable table{};
    for (std::size_t i = 0; i < 64; ++i) {
        const int q = (base[i] * scale + 50) / 100;
        table[i] = static_cast<std::uint16_t>(std::clamp(q, 1, 255));
    }
    return table;
}

// cos((2x+1) u pi / 16) scaled by C(u)/2, so that the 2D transform is orthonormal.
struct DctBasis {
    std::array<double, 64> m{};
    DctBasis() {
        for (int u = 0; u < 8; ++u) {
            const double cu = u == 0 ? std::numbers::sqrt2 / 2.0 : 1.0;
            for (int x = 0; x < 8; ++x) {
                m[static_cast<std::size_t>(u * 8 + x)] =
                    0.5 * cu * std::cos((2.0 * x + 1.0) * u * std::numbers::pi / 16.0);
            }
        }
    }
};

const DctBasis& basis() {
    static const DctBasis b;
    return b;
}

void fdct(const std::array<double, 64>& in, std::array<double, 64>& out) {
    const auto& m = basis().m;
    std::array<double, 64> tmp{};
    for (int y = 0; y < 8; ++y) {
        for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int x = 0; x < 8; ++x) {
                s += m[static_cast<std::size_t>(u * 8 + x)] * in[static_cast<std::size_t>(y * 8 + x)];
            }
            tmp[static_cast<std::size_t>(y * 8 + u)] = s;
        }
    }
    for (int v = 0; v < 8; ++v) {
        for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) {
                s += m[static_cast<std::size_t>(v * 8 + y)] * tmp[static_cast<std::size_t>(y * 8 + u)];
            }
            out[static_cast<std::size_t>(v * 8 + u)] = s;
        }
    }
}

void idct(const std::array<double, 64>& in, std::array<double, 64>& out) {
    const auto& m = basis().m;
    std::array<double, 64> tmp{};
    for (int v = 0; v < 8; ++v) {
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) {
                s += m[static_cast<std::size_t>(u * 8 + x)] * in[static_cast<std::size_t>(v * 8 + u)];
            }
            tmp[static_cast<std::size_t>(v * 8 + x)] = s;
        }
    }
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) {
                s += m[static_cast<std::size_t>(v * 8 + y)] * tmp[static_cast<std::size_t>(v * 8 + x)];
            }
            out[static_cast<std::size_t>(y * 8 + x)] = s;
        }
    }
}

}  // namespace

QuantTable luma_table(int quality) { return scale_table(kLumaBase, quality); }
QuantTable chroma_table(int quality) { return scale_table(kChromaBase, quality); }

Coefficients encode(const ImagePlane& plane, int quality) {
    Coefficients c;
    c.width = plane.width();
    c.height = plane.height();
    c.blocks_x = (c.width + 7) / 8;
    c.blocks_y = (c.height + 7) / 8;
    c.luma = luma_table(quality);
    c.chroma = chroma_table(quality);
    const auto n_blocks = static_cast<std::size_t>(c.blocks_x) * static_cast<std::size_t>(c.blocks_y);
    for (auto& comp : c.blocks) {
        comp.assign(n_blocks * 64, 0);
    }

    std::array<std::array<double, 64>, 3> samples{};
    std::array<double, 64> coef{};
    for (int by = 0; by < c.blocks_y; ++by) {
        for (int bx = 0; bx < c.blocks_x; ++bx) {
            for (int y = 0; y < 8; ++y) {
                // Edge replication pads partial blocks.
                const int sy = std::min(by * 8 + y, c.height - 1);
                for (int x = 0; x < 8; ++x) {
                    const int sx = std::min(bx * 8 + x, c.width - 1);
                    const auto px = plane.pixel(sx, sy);
                    const double r = px[0];
                    const double g = px[1];
                    const double b = px[2];
                    const auto i = static_cast<std::size_t>(y * 8 + x);
                    // JFIF YCbCr, level-shifted by -128.
                    samples[0][i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
                    samples[1][i] = -0.168735892 * r - 0.331264108 * g + 0.5 * b;
                    samples[2][i] = 0.5 * r - 0.418687589 * g - 0.081312411 * b;
                }
            }
            const auto block = static_cast<std::size_t>(by * c.blocks_x + bx);
            for (std::size_t comp = 0; comp < 3; ++comp) {
                fdct(samples[comp], coef);
                const auto& q = comp == 0 ? c.luma : c.chroma;
                for (std::size_t k = 0; k < 64; ++k) {
                    c.blocks[comp][block * 64 + k] =
                        static_cast<std::int16_t>(std::nearbyint(coef[k] / q[k]));
                }
            }
        }
    }
    return c;
}

ImagePlane decode(const Coefficients& c) {
    ImagePlane out(c.width, c.height);
    std::array<std::array<double, 64>, 3> samples{};
    std::array<double, 64> coef{};
    for (int by = 0; by < c.blocks_y; ++by) {
        for (int bx = 0; bx < c.blocks_x; ++bx) {
            const auto block = static_cast<std::size_t>(by * c.blocks_x + bx);
            for (std::size_t comp = 0; comp < 3; ++comp) {
                const auto& q = comp == 0 ? c.luma : c.chroma;
                for (std::size_t k = 0; k < 64; ++k) {
                    coef[k] = static_cast<double>(c.blocks[comp][block * 64 + k]) * q[k];
                }
                idct(coef, samples[comp]);
            }
            for (int y = 0; y < 8; ++y) {
                const int py = by * 8 + y;
                if (py >= c.height) {
                    break;
                }
                for (int x = 0; x < 8; ++x) {
                    const int px = bx * 8 + x;
                    if (px >= c.width) {
                        break;
                    }
                    const auto i = static_cast<std::size_t>(y * 8 + x);
                    const double yy = samples[0][i] + 128.0;
                    const double cb = samples[1][i];
                    const double cr = samples[2][i];
                    const auto to8 = [](double v) {
                        return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
                    };
                    out.set_pixel(px, py, {to8(yy + 1.402 * cr),
                                           to8(yy - 0.344136286 * cb - 0.714136286 * cr),
                                           to8(yy + 1.772 * cb)});
                }
            }
        }
    }
    return out;
}

}  // namespace sqoe::jpeg
