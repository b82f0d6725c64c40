// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "sqoe/image.hpp"

namespace sqoe {

enum class DistortionKind {
    uniform_white_noise,
    gaussian_white_noise,
    checkerboard,
    average_blur,
    gaussian_blur,
    jpeg_compression,
    hue_shift,
    saturation_shift,
    brightness_shift,
    contrast_shift,
    magnification,
    rotation,
    keystone,
    warping,
    chromatic_aberration,
    downscale,
    external,
};

inline constexpr std::array kAllDistortionKinds = {
    DistortionKind::uniform_white_noise, DistortionKind::gaussian_white_noise,
    DistortionKind::checkerboard,        DistortionKind::average_blur,
    DistortionKind::gaussian_blur,       DistortionKind::jpeg_compression,
    DistortionKind::hue_shift,           DistortionKind::saturation_shift,
    DistortionKind::brightness_shift,    DistortionKind::contrast_shift,
    DistortionKind::magnification,       DistortionKind::rotation,
    DistortionKind::keystone,            DistortionKind::warping,
    DistortionKind::chromatic_aberration, DistortionKind::downscale,
    DistortionKind::external,
};

/// Kinds that are pure functions of an input raster (everything but external).
std::vector<DistortionKind> procedural_kinds();
/// Kinds drawn when building a dataset: procedural kinds minus the held-out downscale.
std::vector<DistortionKind> dataset_pool_kinds();

std::string_view to_string(DistortionKind kind) noexcept;
/// Accepts canonical names plus short aliases ("hue", "jpeg", "noise", ...).
DistortionKind parse_distortion_kind(std::string_view name);
bool is_stochastic(DistortionKind kind) noexcept;

enum class SidePolicy { left_only, right_only, both };

std::string_view to_string(SidePolicy side) noexcept;
SidePolicy parse_side_policy(std::string_view name);

/// Resolved, kind-specific parameters keyed by name (e.g. "sigma", "quality").
using DistortionParams = std::map<std::string, double>;

struct DistortionSpec {
    DistortionKind kind = DistortionKind::hue_shift;
    double strength = 0.0;
    DistortionParams params;
    SidePolicy side = SidePolicy::both;
    std::uint64_t seed = 0;
    /// For kind == external: path of the pre-rendered pair (any form
    /// accepted by load_stereo_auto).
    std::string external_path;

    friend bool operator==(const DistortionSpec&, const DistortionSpec&) = default;
};

void to_json(nlohmann::json& j, const DistortionSpec& spec);
void from_json(const nlohmann::json& j, DistortionSpec& spec);

/// One parameter's anchors: strength 0 maps to `at_zero`, strength 1 to
/// `at_one`, linearly in between. `integral` parameters are rounded.
struct ParamAnchor {
    std::string name;
    double at_zero = 0.0;
    double at_one = 0.0;
    bool integral = false;

    friend bool operator==(const ParamAnchor&, const ParamAnchor&) = default;
};

/// Versioned strength -> parameter mapping.
class DistortionTable {
public:
    static const DistortionTable& builtin();
    static DistortionTable from_json(const nlohmann::json& j);
    static DistortionTable load(const std::filesystem::path& path);

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] int version() const noexcept { return version_; }
    [[nodiscard]] const std::vector<ParamAnchor>& anchors(DistortionKind kind) const;
    [[nodiscard]] DistortionParams resolve(DistortionKind kind, double strength) const;

    friend bool operator==(const DistortionTable&, const DistortionTable&) = default;

private:
    int version_ = 1;
    std::map<DistortionKind, std::vector<ParamAnchor>> anchors_;
};

DistortionParams resolve_params(DistortionKind kind, double strength,
                                const DistortionTable& table = DistortionTable::builtin());

DistortionSpec make_spec(DistortionKind kind, double strength, SidePolicy side,
                         std::uint64_t seed,
                         const DistortionTable& table = DistortionTable::builtin());

/// True when the parameters denote the identity transform for `kind`.
bool is_identity(DistortionKind kind, const DistortionParams& params);

/// Applies a procedural kind to one view. `stream` separates the random
/// streams of the left (0) and right (1) views.
ImagePlane distort_view(const ImagePlane& view, DistortionKind kind,
                        const DistortionParams& params, std::uint64_t seed, int stream);

StereoImage apply_distortion(const StereoImage& stereo, const DistortionSpec& spec);

struct VariantPair {
    StereoImage a;
    StereoImage b;
    DistortionSpec spec_a;
    DistortionSpec spec_b;
    SidePolicy side = SidePolicy::both;
};

SidePolicy draw_side_policy(std::uint64_t seed);

/// Draws one side policy from `rng_seed`, forces it onto both specs and
/// applies them. Kinds must differ.
VariantPair make_variant_pair(const StereoImage& stereo, DistortionSpec spec_m,
                              DistortionSpec spec_n, std::uint64_t rng_seed);

/// Mean absolute per-channel deviation in [0,1] units.
double mean_abs_deviation(const ImagePlane& a, const ImagePlane& b);
double mean_abs_deviation(const StereoImage& a, const StereoImage& b);

}  // namespace sqoe
