// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sqoe {

using Rgb8 = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major, interleaved. The unit of storage and I/O.
class ImagePlane {
public:
    static constexpr int kChannels = 3;

    ImagePlane() = default;
    ImagePlane(int width, int height);
    ImagePlane(int width, int height, std::vector<std::uint8_t> data);

    static ImagePlane filled(int width, int height, Rgb8 color);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
    [[nodiscard]] std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }

    [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }
    [[nodiscard]] std::span<std::uint8_t> data() noexcept { return data_; }

    [[nodiscard]] std::uint8_t at(int x, int y, int c) const noexcept {
        return data_[index(x, y, c)];
    }
    std::uint8_t& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }

    [[nodiscard]] Rgb8 pixel(int x, int y) const noexcept {
        const auto i = index(x, y, 0);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set_pixel(int x, int y, Rgb8 rgb) noexcept {
        const auto i = index(x, y, 0);
        data_[i] = rgb[0];
        data_[i + 1] = rgb[1];
        data_[i + 2] = rgb[2];
    }

    [[nodiscard]] bool same_size(const ImagePlane& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

private:
    [[nodiscard]] std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Floating-point working copy of an ImagePlane, channel values in [0,1].
/// Values may leave [0,1] during processing; quantization clamps.
class FloatPlane {
public:
    static constexpr int kChannels = 3;

    FloatPlane() = default;
    FloatPlane(int width, int height, float fill = 0.0F);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
    [[nodiscard]] std::span<float> data() noexcept { return data_; }

    [[nodiscard]] float at(int x, int y, int c) const noexcept { return data_[index(x, y, c)]; }
    float& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }

    /// Reflect-101 border handling ("gfedcb|abcdefgh|gfedcba").
    [[nodiscard]] float at_reflect(int x, int y, int c) const noexcept;
    /// Bilinear sample at continuous pixel-center coordinates with reflect padding.
    [[nodiscard]] float sample_bilinear(float x, float y, int c) const noexcept;

private:
    [[nodiscard]] std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

[[nodiscard]] FloatPlane to_float(const ImagePlane& plane);
/// Round-to-nearest with clamping to [0,255].
[[nodiscard]] ImagePlane to_u8(const FloatPlane& plane);
[[nodiscard]] std::uint8_t quantize(float value) noexcept;

int reflect_index(int i, int n) noexcept;

/// Left/right pair of equally sized views.
class StereoImage {
public:
    StereoImage() = default;
    StereoImage(ImagePlane left, ImagePlane right, std::string source_id = {});

    [[nodiscard]] const ImagePlane& left() const noexcept { return left_; }
    [[nodiscard]] const ImagePlane& right() const noexcept { return right_; }
    [[nodiscard]] const std::string& source_id() const noexcept { return source_id_; }
    [[nodiscard]] int width() const noexcept { return left_.width(); }
    [[nodiscard]] int height() const noexcept { return left_.height(); }

    friend bool operator==(const StereoImage&, const StereoImage&) = default;

private:
    ImagePlane left_;
    ImagePlane right_;
    std::string source_id_;
};

/// Horizontal disparity in pixels; values are only meaningful where valid.
struct DisparityMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;
    std::vector<std::uint8_t> valid;

    DisparityMap() = default;
    DisparityMap(int w, int h, float fill = 0.0F);

    [[nodiscard]] float at(int x, int y) const noexcept {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
    [[nodiscard]] bool is_valid(int x, int y) const noexcept {
        return valid[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                     static_cast<std::size_t>(x)] != 0;
    }
    /// Throws unless every valid entry is finite.
    void validate() const;
};

/// Single-channel float grid (depth maps, masks).
struct ScalarGrid {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    ScalarGrid() = default;
    ScalarGrid(int w, int h, float fill = 0.0F);

    [[nodiscard]] float at(int x, int y) const noexcept {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
    float& at(int x, int y) noexcept {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
};

using Mask = std::vector<std::uint8_t>;

}  // namespace sqoe
