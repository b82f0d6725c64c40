// SPDX-License-Identifier: Apache-2.0

#include "sqoe/image.hpp"

#include <cmath>

#include "sqoe/error.hpp"

namespace sqoe {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::io: return "io";
        case ErrorKind::decode: return "decode";
        case ErrorKind::dimension_mismatch: return "dimension_mismatch";
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::parse: return "parse";
        case ErrorKind::state: return "state";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::unsupported: return "unsupported";
    }
    return "unknown";
}

namespace {

void check_dims(int width, int height) {
    require(width >= 1 && height >= 1, ErrorKind::invalid_argument,
            "image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                std::to_string(height));
}

}  // namespace

ImagePlane::ImagePlane(int width, int height) : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(pixel_count() * kChannels, 0);
}

ImagePlane::ImagePlane(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    require(data_.size() == pixel_count() * kChannels, ErrorKind::invalid_argument,
            "pixel buffer length does not match width*height*3");
}

ImagePlane ImagePlane::filled(int width, int height, Rgb8 color) {
    ImagePlane plane(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            plane.set_pixel(x, y, color);
        }
    }
    return plane;
}

FloatPlane::FloatPlane(int width, int height, float fill) : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels,
                 fill);
}

int reflect_index(int i, int n) noexcept {
    if (n == 1) {
        return 0;
    }
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i < n ? i : period - i;
}

float FloatPlane::at_reflect(int x, int y, int c) const noexcept {
    return at(reflect_index(x, width_), reflect_index(y, height_), c);
}

float FloatPlane::sample_bilinear(float x, float y, int c) const noexcept {
    const float fx0 = std::floor(x);
    const float fy0 = std::floor(y);
    const float tx = x - fx0;
    const float ty = y - fy0;
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const float top = (1.0F - tx) * at_reflect(x0, y0, c) + tx * at_reflect(x0 + 1, y0, c);
    const float bottom =
        (1.0F - tx) * at_reflect(x0, y0 + 1, c) + tx * at_reflect(x0 + 1, y0 + 1, c);
    return (1.0F - ty) * top + ty * bottom;
}

std::uint8_t quantize(float value) noexcept {
    if (!(value > 0.0F)) {
        return 0;
    }
    const float scaled = std::nearbyint(value * 255.0F);
    return scaled >= 255.0F ? 255 : static_cast<std::uint8_t>(scaled);
}

FloatPlane to_float(const ImagePlane& plane) {
    FloatPlane out(plane.width(), plane.height());
    auto src = plane.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<float>(src[i]) / 255.0F;
    }
    return out;
}

ImagePlane to_u8(const FloatPlane& plane) {
    ImagePlane out(plane.width(), plane.height());
    auto src = plane.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = quantize(src[i]);
    }
    return out;
}

StereoImage::StereoImage(ImagePlane left, ImagePlane right, std::string source_id)
    : left_(std::move(left)), right_(std::move(right)), source_id_(std::move(source_id)) {
    require(left_.same_size(right_), ErrorKind::dimension_mismatch,
            "stereo views differ in size: left " + std::to_string(left_.width()) + "x" +
                std::to_string(left_.height()) + ", right " + std::to_string(right_.width()) +
                "x" + std::to_string(right_.height()));
}

DisparityMap::DisparityMap(int w, int h, float fill) : width(w), height(h) {
    check_dims(w, h);
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    values.assign(n, fill);
    valid.assign(n, 1);
}

void DisparityMap::validate() const {
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    require(values.size() == n && valid.size() == n, ErrorKind::invalid_argument,
            "disparity buffers do not match dimensions");
    for (std::size_t i = 0; i < n; ++i) {
        require(valid[i] == 0 || std::isfinite(values[i]), ErrorKind::invalid_argument,
                "non-finite disparity inside valid mask");
    }
}

ScalarGrid::ScalarGrid(int w, int h, float fill) : width(w), height(h) {
    check_dims(w, h);
    values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

}  // namespace sqoe
