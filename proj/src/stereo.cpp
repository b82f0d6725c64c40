// SPDX-License-Identifier: Apache-2.0

#include "sqoe/stereo.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "sqoe/error.hpp"

namespace sqoe {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr file(std::fopen(path.c_str(), mode));
    require(file != nullptr, ErrorKind::io, "cannot open '" + path.string() + "'");
    return file;
}

// Decoded PNG in its native layout after expansion to 8 or 16 bit per sample.
struct RawPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint8_t> bytes;  // big-endian samples for 16-bit
};

RawPng decode_png(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    std::uint8_t signature[8] = {};
    if (std::fread(signature, 1, sizeof(signature), file.get()) != sizeof(signature) ||
        png_sig_cmp(signature, 0, sizeof(signature)) != 0) {
        fail(ErrorKind::decode, "'" + path.string() + "' is not a PNG file");
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::decode, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    RawPng raw;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::decode, "corrupt PNG data in '" + path.string() + "'");
    }

    png_init_io(png, file.get());
    png_set_sig_bytes(png, sizeof(signature));
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS) != 0) {
        png_set_tRNS_to_alpha(png);
    }
    png_read_update_info(png, info);

    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = png_get_channels(png, info);
    raw.bit_depth = png_get_bit_depth(png, info);
    const auto stride = png_get_rowbytes(png, info);
    raw.bytes.resize(stride * static_cast<std::size_t>(raw.height));
    rows.resize(static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) {
        rows[static_cast<std::size_t>(y)] = raw.bytes.data() + stride * static_cast<std::size_t>(y);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

void encode_png(const std::filesystem::path& path, int width, int height, int color_type,
                int bit_depth, const std::vector<std::uint8_t>& bytes, std::size_t stride) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::io, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::io, "failed writing PNG '" + path.string() + "'");
    }

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        // libpng takes non-const rows but does not modify them.
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(bytes.data() + stride * static_cast<std::size_t>(y));
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::uint8_t sample8(const RawPng& raw, std::size_t sample_index) {
    if (raw.bit_depth == 16) {
        return raw.bytes[sample_index * 2];  // high byte
    }
    return raw.bytes[sample_index];
}

std::string stem_without_side(const std::filesystem::path& path) {
    auto stem = path.stem().string();
    if (stem.size() > 2 && (stem.ends_with("_L") || stem.ends_with("_R"))) {
        stem.resize(stem.size() - 2);
    }
    return stem;
}

}  // namespace

ImagePlane read_png(const std::filesystem::path& path) {
    const auto raw = decode_png(path);
    ImagePlane plane(raw.width, raw.height);
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            const auto base = (static_cast<std::size_t>(y) * static_cast<std::size_t>(raw.width) +
                               static_cast<std::size_t>(x)) *
                              static_cast<std::size_t>(raw.channels);
            if (raw.channels >= 3) {
                plane.set_pixel(x, y, {sample8(raw, base), sample8(raw, base + 1),
                                       sample8(raw, base + 2)});
            } else {
                const auto g = sample8(raw, base);
                plane.set_pixel(x, y, {g, g, g});
            }
        }
    }
    return plane;
}

void write_png(const std::filesystem::path& path, const ImagePlane& plane) {
    const auto src = plane.data();
    encode_png(path, plane.width(), plane.height(), PNG_COLOR_TYPE_RGB, 8,
               std::vector<std::uint8_t>(src.begin(), src.end()),
               static_cast<std::size_t>(plane.width()) * 3);
}

ScalarGrid read_png_gray16(const std::filesystem::path& path) {
    const auto raw = decode_png(path);
    ScalarGrid grid(raw.width, raw.height);
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            const auto base = (static_cast<std::size_t>(y) * static_cast<std::size_t>(raw.width) +
                               static_cast<std::size_t>(x)) *
                              static_cast<std::size_t>(raw.channels);
            if (raw.bit_depth == 16) {
                const auto hi = raw.bytes[base * 2];
                const auto lo = raw.bytes[base * 2 + 1];
                grid.at(x, y) = static_cast<float>((hi << 8) | lo) / 65535.0F;
            } else {
                grid.at(x, y) = static_cast<float>(raw.bytes[base]) / 255.0F;
            }
        }
    }
    return grid;
}

void write_png_gray16(const std::filesystem::path& path, const ScalarGrid& grid) {
    std::vector<std::uint8_t> bytes(grid.values.size() * 2);
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        const float v = std::clamp(grid.values[i], 0.0F, 1.0F);
        const auto q = static_cast<std::uint16_t>(std::nearbyint(v * 65535.0F));
        bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xFF);
    }
    encode_png(path, grid.width, grid.height, PNG_COLOR_TYPE_GRAY, 16, bytes,
               static_cast<std::size_t>(grid.width) * 2);
}

StereoImage load_stereo(const std::filesystem::path& left, const std::filesystem::path& right) {
    auto l = read_png(left);
    auto r = read_png(right);
    return StereoImage(std::move(l), std::move(r), stem_without_side(left));
}

StereoImage split_side_by_side(const ImagePlane& sbs, std::string source_id) {
    require(sbs.width() >= 2 && sbs.width() % 2 == 0, ErrorKind::dimension_mismatch,
            "side-by-side frame width must be even");
    const int half = sbs.width() / 2;
    ImagePlane left(half, sbs.height());
    ImagePlane right(half, sbs.height());
    for (int y = 0; y < sbs.height(); ++y) {
        for (int x = 0; x < half; ++x) {
            left.set_pixel(x, y, sbs.pixel(x, y));
            right.set_pixel(x, y, sbs.pixel(x + half, y));
        }
    }
    return StereoImage(std::move(left), std::move(right), std::move(source_id));
}

StereoImage load_side_by_side(const std::filesystem::path& path) {
    return split_side_by_side(read_png(path), path.stem().string());
}

StereoImage load_stereo_auto(const std::filesystem::path& path) {
    const auto stem = path.stem().string();
    if (stem.size() > 2 && (stem.ends_with("_L") || stem.ends_with("_R"))) {
        const auto base = stem.substr(0, stem.size() - 2);
        const auto dir = path.parent_path();
        const auto ext = path.extension().string();
        return load_stereo(dir / (base + "_L" + ext), dir / (base + "_R" + ext));
    }
    return load_side_by_side(path);
}

void save_stereo(const StereoImage& stereo, const std::filesystem::path& prefix) {
    write_png(prefix.string() + "_L.png", stereo.left());
    write_png(prefix.string() + "_R.png", stereo.right());
}

ImagePlane render_anaglyph(const StereoImage& stereo) {
    const auto& l = stereo.left();
    const auto& r = stereo.right();
    ImagePlane out(l.width(), l.height());
    for (int y = 0; y < l.height(); ++y) {
        for (int x = 0; x < l.width(); ++x) {
            out.set_pixel(x, y, {l.at(x, y, 0), r.at(x, y, 1), r.at(x, y, 2)});
        }
    }
    return out;
}

const ImagePlane& toggle_view(const StereoImage& stereo, Eye eye) noexcept {
    return eye == Eye::left ? stereo.left() : stereo.right();
}

WarpResult forward_warp(const ImagePlane& src, const DisparityMap& disp) {
    require(src.width() == disp.width && src.height() == disp.height,
            ErrorKind::dimension_mismatch, "disparity map does not match image size");
    disp.validate();

    const int w = src.width();
    const int h = src.height();
    WarpResult result{ImagePlane(w, h), Mask(static_cast<std::size_t>(w) * h, 1)};
    // Winning source column per destination; -1 = none yet.
    std::vector<int> owner(static_cast<std::size_t>(w), -1);

    for (int y = 0; y < h; ++y) {
        std::fill(owner.begin(), owner.end(), -1);
        for (int x = 0; x < w; ++x) {
            if (!disp.is_valid(x, y)) {
                continue;
            }
            const float d = disp.at(x, y);
            const double target = std::floor(static_cast<double>(x) - d + 0.5);
            if (target < 0.0 || target >= static_cast<double>(w)) {
                continue;
            }
            const int tx = static_cast<int>(target);
            const int current = owner[static_cast<std::size_t>(tx)];
            // Traversal runs in increasing x, so on equal disparity the
            // incumbent already has the lower source column.
            if (current < 0 || d > disp.at(current, y)) {
                owner[static_cast<std::size_t>(tx)] = x;
            }
        }
        for (int tx = 0; tx < w; ++tx) {
            const int sx = owner[static_cast<std::size_t>(tx)];
            if (sx >= 0) {
                result.image.set_pixel(tx, y, src.pixel(sx, y));
                result.hole_mask[static_cast<std::size_t>(y) * w + tx] = 0;
            }
        }
    }
    return result;
}

}  // namespace sqoe
