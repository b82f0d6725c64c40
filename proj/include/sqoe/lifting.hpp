// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "sqoe/image.hpp"
#include "sqoe/stereo.hpp"

namespace sqoe {

enum class TargetView { synthesize_left, synthesize_right };
enum class InpainterKind { diffusion_fill_builtin, external };
enum class DepthSource { provided_map, external_estimator };

struct LiftConfig {
    /// Converts depth to pixel disparity: disparity = baseline_scale / depth.
    double baseline_scale = 1.0;
    TargetView target_view = TargetView::synthesize_right;
    InpainterKind inpainter = InpainterKind::diffusion_fill_builtin;
    DepthSource depth_source = DepthSource::provided_map;
    /// Shell command for the external inpainter; `{dir}` is replaced by the
    /// exchange directory holding hole.png and masked.png.
    std::string inpaint_command;
    /// Shell command for the external depth estimator; `{input}` and
    /// `{output}` are replaced by the image and the depth file to write.
    std::string depth_command;
    std::filesystem::path work_dir;

    void validate() const;
};

struct DepthMap {
    ScalarGrid depth;
    Mask valid;

    DepthMap() = default;
    explicit DepthMap(ScalarGrid grid);  // valid wherever depth is finite
    DepthMap(ScalarGrid grid, Mask valid_mask);

    [[nodiscard]] int width() const noexcept { return depth.width; }
    [[nodiscard]] int height() const noexcept { return depth.height; }
};

/// `.npy` (2-D, little-endian float32/float64, C order) or a 16-bit
/// normalized grayscale PNG, chosen by extension. Non-positive PNG samples are
/// treated as invalid.
DepthMap load_depth(const std::filesystem::path& path);

ScalarGrid read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const ScalarGrid& grid);

DisparityMap depth_to_disparity(const DepthMap& depth, const LiftConfig& cfg);

/// Fills hole pixels (mask != 0) by push-pull interpolation. Known pixels are
/// returned unchanged.
ImagePlane inpaint_push_pull(const ImagePlane& image, const Mask& holes);

/// Runs the external inpainter through the hole.png / masked.png /
/// filled.png file contract. Only hole pixels are taken from filled.png.
ImagePlane inpaint_external(const ImagePlane& image, const Mask& holes,
                            const std::string& command, const std::filesystem::path& work_dir);

/// Runs the configured external depth estimator on `image_path`.
DepthMap estimate_depth_external(const std::filesystem::path& image_path,
                                 const LiftConfig& cfg);

struct LiftResult {
    StereoImage stereo;
    WarpResult raw_warp;  // synthesized view before inpainting, in its own frame
};

LiftResult lift_to_stereo_detailed(const ImagePlane& mono, const DepthMap& depth,
                                   const LiftConfig& cfg);

inline StereoImage lift_to_stereo(const ImagePlane& mono, const DepthMap& depth,
                                  const LiftConfig& cfg) {
    return lift_to_stereo_detailed(mono, depth, cfg).stereo;
}

}  // namespace sqoe
