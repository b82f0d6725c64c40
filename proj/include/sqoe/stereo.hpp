// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "sqoe/image.hpp"

namespace sqoe {

// ---- raster I/O -----------------------------------------------------------

/// Decodes any 8/16-bit PNG into 8-bit RGB (alpha dropped, gray expanded).
ImagePlane read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImagePlane& plane);

/// 16-bit single-channel PNG, values normalized to [0,1].
ScalarGrid read_png_gray16(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, const ScalarGrid& grid);

StereoImage load_stereo(const std::filesystem::path& left, const std::filesystem::path& right);

/// Splits a side-by-side frame at the horizontal midpoint (left half = left view).
StereoImage split_side_by_side(const ImagePlane& sbs, std::string source_id = {});
StereoImage load_side_by_side(const std::filesystem::path& path);

/// Accepts either `<id>_L.png` / `<id>_R.png` (any one of the pair may be
/// named) or a single side-by-side PNG.
StereoImage load_stereo_auto(const std::filesystem::path& path);

/// Writes `<prefix>_L.png` and `<prefix>_R.png`.
void save_stereo(const StereoImage& stereo, const std::filesystem::path& prefix);

// ---- renderings -----------------------------------------------------------

/// Full-color anaglyph: R from the left view, G and B from the right view.
ImagePlane render_anaglyph(const StereoImage& stereo);

/// The view shown to both eyes in toggle mode.
enum class Eye { left, right };
const ImagePlane& toggle_view(const StereoImage& stereo, Eye eye) noexcept;

// ---- warping --------------------------------------------------------------

struct WarpResult {
    ImagePlane image;
    Mask hole_mask;  // 1 where no source pixel landed
};

/// Splats each source pixel (x, y) to (round(x - disp), y). Larger disparity
/// (nearer surface) wins collisions; equal disparity resolves to the lower
/// source x. Invalid disparity entries are not splatted.
WarpResult forward_warp(const ImagePlane& src, const DisparityMap& disp);

}  // namespace sqoe
