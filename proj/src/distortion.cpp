// SPDX-License-Identifier: Apache-2.0

#include "sqoe/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <utility>

#include "sqoe/error.hpp"
#include "sqoe/jpeg.hpp"
#include "sqoe/rng.hpp"
#include "sqoe/stereo.hpp"

namespace sqoe {

namespace {

struct KindName {
    DistortionKind kind;
    std::string_view name;
};

constexpr std::array kKindNames = {
    KindName{DistortionKind::uniform_white_noise, "uniform_white_noise"},
    KindName{DistortionKind::gaussian_white_noise, "gaussian_white_noise"},
    KindName{DistortionKind::checkerboard, "checkerboard"},
    KindName{DistortionKind::average_blur, "average_blur"},
    KindName{DistortionKind::gaussian_blur, "gaussian_blur"},
    KindName{DistortionKind::jpeg_compression, "jpeg_compression"},
    KindName{DistortionKind::hue_shift, "hue_shift"},
    KindName{DistortionKind::saturation_shift, "saturation_shift"},
    KindName{DistortionKind::brightness_shift, "brightness_shift"},
    KindName{DistortionKind::contrast_shift, "contrast_shift"},
    KindName{DistortionKind::magnification, "magnification"},
    KindName{DistortionKind::rotation, "rotation"},
    KindName{DistortionKind::keystone, "keystone"},
    KindName{DistortionKind::warping, "warping"},
    KindName{DistortionKind::chromatic_aberration, "chromatic_aberration"},
    KindName{DistortionKind::downscale, "downscale"},
    KindName{DistortionKind::external, "external"},
};

constexpr std::array<std::pair<std::string_view, DistortionKind>, 16> kAliases = {{
    {"uniform_noise", DistortionKind::uniform_white_noise},
    {"gaussian_noise", DistortionKind::gaussian_white_noise},
    {"noise", DistortionKind::gaussian_white_noise},
    {"box_blur", DistortionKind::average_blur},
    {"blur", DistortionKind::gaussian_blur},
    {"jpeg", DistortionKind::jpeg_compression},
    {"hue", DistortionKind::hue_shift},
    {"saturation", DistortionKind::saturation_shift},
    {"brightness", DistortionKind::brightness_shift},
    {"contrast", DistortionKind::contrast_shift},
    {"magnify", DistortionKind::magnification},
    {"zoom", DistortionKind::magnification},
    {"rotate", DistortionKind::rotation},
    {"warp", DistortionKind::warping},
    {"chromatic", DistortionKind::chromatic_aberration},
    {"downsample", DistortionKind::downscale},
}};

double param(const DistortionParams& params, const std::string& name) {
    const auto it = params.find(name);
    require(it != params.end(), ErrorKind::invalid_argument,
            "missing distortion parameter '" + name + "'");
    return it->second;
}

// ---- per-kind operators on float planes ---------------------------------

void add_noise(FloatPlane& p, Rng& rng, bool gaussian, double scale) {
    for (auto& v : p.data()) {
        const double n = gaussian ? rng.normal() : (2.0 * rng.uniform() - 1.0);
        v = static_cast<float>(v + scale * n);
    }
}

void add_checkerboard(FloatPlane& p, double amplitude, int cell, std::uint64_t seed) {
    const auto c = static_cast<std::uint64_t>(cell);
    const int ox = static_cast<int>(seed % c);
    const int oy = static_cast<int>((seed / c) % c);
    for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < p.width(); ++x) {
            const int parity = ((x + ox) / cell + (y + oy) / cell) % 2;
            const float delta = static_cast<float>(parity == 0 ? amplitude : -amplitude);
            for (int ch = 0; ch < 3; ++ch) {
                p.at(x, y, ch) += delta;
            }
        }
    }
}

FloatPlane convolve_separable(const FloatPlane& src, const std::vector<float>& kernel) {
    const int r = static_cast<int>(kernel.size() / 2);
    FloatPlane tmp(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                float s = 0.0F;
                for (int k = -r; k <= r; ++k) {
                    s += kernel[static_cast<std::size_t>(k + r)] * src.at_reflect(x + k, y, ch);
                }
                tmp.at(x, y, ch) = s;
            }
        }
    }
    FloatPlane out(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                float s = 0.0F;
                for (int k = -r; k <= r; ++k) {
                    s += kernel[static_cast<std::size_t>(k + r)] * tmp.at_reflect(x, y + k, ch);
                }
                out.at(x, y, ch) = s;
            }
        }
    }
    return out;
}

FloatPlane box_blur(const FloatPlane& src, int radius) {
    const auto n = static_cast<std::size_t>(2 * radius + 1);
    return convolve_separable(src, std::vector<float>(n, 1.0F / static_cast<float>(n)));
}

FloatPlane gaussian_blur(const FloatPlane& src, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * k * k / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = static_cast<float>(w);
        total += w;
    }
    for (auto& w : kernel) {
        w = static_cast<float>(w / total);
    }
    return convolve_separable(src, kernel);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    v = mx;
    s = mx > 0.0F ? d / mx : 0.0F;
    if (d <= 0.0F) {
        h = 0.0F;
        return;
    }
    if (mx == r) {
        h = 60.0F * std::fmod((g - b) / d, 6.0F);
    } else if (mx == g) {
        h = 60.0F * ((b - r) / d + 2.0F);
    } else {
        h = 60.0F * ((r - g) / d + 4.0F);
    }
    if (h < 0.0F) {
        h += 360.0F;
    }
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    const float c = v * s;
    const float hp = h / 60.0F;
    const float x = c * (1.0F - std::fabs(std::fmod(hp, 2.0F) - 1.0F));
    float r1 = 0.0F;
    float g1 = 0.0F;
    float b1 = 0.0F;
    switch (static_cast<int>(hp) % 6) {
        case 0: r1 = c; g1 = x; break;
        case 1: r1 = x; g1 = c; break;
        case 2: g1 = c; b1 = x; break;
        case 3: g1 = x; b1 = c; break;
        case 4: r1 = x; b1 = c; break;
        default: r1 = c; b1 = x; break;
    }
    const float m = v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

void shift_hue(FloatPlane& p, double degrees) {
    for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < p.width(); ++x) {
            float h = 0.0F;
            float s = 0.0F;
            float v = 0.0F;
            rgb_to_hsv(p.at(x, y, 0), p.at(x, y, 1), p.at(x, y, 2), h, s, v);
            h = std::fmod(h + static_cast<float>(degrees), 360.0F);
            if (h < 0.0F) {
                h += 360.0F;
            }
            hsv_to_rgb(h, s, v, p.at(x, y, 0), p.at(x, y, 1), p.at(x, y, 2));
        }
    }
}

void scale_saturation(FloatPlane& p, double factor) {
    const auto f = static_cast<float>(factor);
    for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < p.width(); ++x) {
            const float luma =
                0.299F * p.at(x, y, 0) + 0.587F * p.at(x, y, 1) + 0.114F * p.at(x, y, 2);
            for (int ch = 0; ch < 3; ++ch) {
                p.at(x, y, ch) = luma + f * (p.at(x, y, ch) - luma);
            }
        }
    }
}

void scale_contrast(FloatPlane& p, double factor) {
    const auto f = static_cast<float>(factor);
    for (auto& v : p.data()) {
        v = 0.5F + f * (v - 0.5F);
    }
}

void shift_brightness(FloatPlane& p, double offset) {
    const auto o = static_cast<float>(offset);
    for (auto& v : p.data()) {
        v += o;
    }
}

/// Inverse-mapped geometric resampling: `map(x, y)` returns the source
/// coordinate for destination pixel (x, y).
template <typename Map>
FloatPlane remap(const FloatPlane& src, Map map) {
    FloatPlane out(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            const auto [sx, sy] = map(static_cast<float>(x), static_cast<float>(y));
            for (int ch = 0; ch < 3; ++ch) {
                out.at(x, y, ch) = src.sample_bilinear(sx, sy, ch);
            }
        }
    }
    return out;
}

FloatPlane magnify(const FloatPlane& src, double factor) {
    const float cx = 0.5F * static_cast<float>(src.width() - 1);
    const float cy = 0.5F * static_cast<float>(src.height() - 1);
    const auto inv = static_cast<float>(1.0 / factor);
    return remap(src, [=](float x, float y) {
        return std::pair{cx + (x - cx) * inv, cy + (y - cy) * inv};
    });
}

FloatPlane rotate(const FloatPlane& src, double degrees) {
    const float cx = 0.5F * static_cast<float>(src.width() - 1);
    const float cy = 0.5F * static_cast<float>(src.height() - 1);
    const double rad = degrees * std::numbers::pi / 180.0;
    const auto c = static_cast<float>(std::cos(rad));
    const auto s = static_cast<float>(std::sin(rad));
    return remap(src, [=](float x, float y) {
        const float dx = x - cx;
        const float dy = y - cy;
        return std::pair{cx + c * dx + s * dy, cy - s * dx + c * dy};
    });
}

// Horizontal perspective: the vertical extent of column x is scaled by
// 1 + k (2x/(W-1) - 1), so the frame becomes a trapezoid narrowing leftward.
FloatPlane keystone(const FloatPlane& src, double k) {
    const float cy = 0.5F * static_cast<float>(src.height() - 1);
    const float span = static_cast<float>(std::max(1, src.width() - 1));
    const auto kf = static_cast<float>(k);
    return remap(src, [=](float x, float y) {
        const float s = 1.0F + kf * (2.0F * x / span - 1.0F);
        return std::pair{x, cy + (y - cy) / s};
    });
}

FloatPlane sinusoidal_warp(const FloatPlane& src, double amplitude, double cycles,
                           std::uint64_t seed, int stream) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(stream)));
    const auto phase_x = static_cast<float>(2.0 * std::numbers::pi * rng.uniform());
    const auto phase_y = static_cast<float>(2.0 * std::numbers::pi * rng.uniform());
    const auto a = static_cast<float>(amplitude);
    const auto wx = static_cast<float>(2.0 * std::numbers::pi * cycles / src.width());
    const auto wy = static_cast<float>(2.0 * std::numbers::pi * cycles / src.height());
    return remap(src, [=](float x, float y) {
        return std::pair{x + a * std::sin(wy * y + phase_x), y + a * std::sin(wx * x + phase_y)};
    });
}

FloatPlane chromatic_shift(const FloatPlane& src, double offset) {
    FloatPlane out(src.width(), src.height());
    const auto d = static_cast<float>(offset);
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            const auto fx = static_cast<float>(x);
            const auto fy = static_cast<float>(y);
            out.at(x, y, 0) = src.sample_bilinear(fx - d, fy, 0);
            out.at(x, y, 1) = src.at(x, y, 1);
            out.at(x, y, 2) = src.sample_bilinear(fx + d, fy, 2);
        }
    }
    return out;
}

// Area-average down to round(W*f) x round(H*f), then bilinear back up.
FloatPlane downscale_roundtrip(const FloatPlane& src, double factor) {
    const int w = src.width();
    const int h = src.height();
    const int sw = std::max(1, static_cast<int>(std::lround(w * factor)));
    const int sh = std::max(1, static_cast<int>(std::lround(h * factor)));
    const double fx = static_cast<double>(w) / sw;
    const double fy = static_cast<double>(h) / sh;

    FloatPlane small(sw, sh);
    for (int y = 0; y < sh; ++y) {
        const double y0 = y * fy;
        const double y1 = (y + 1) * fy;
        for (int x = 0; x < sw; ++x) {
            const double x0 = x * fx;
            const double x1 = (x + 1) * fx;
            std::array<double, 3> acc{};
            double area = 0.0;
            for (int py = static_cast<int>(y0); py < std::min(h, static_cast<int>(std::ceil(y1))); ++py) {
                const double wy = std::min<double>(py + 1, y1) - std::max<double>(py, y0);
                for (int px = static_cast<int>(x0); px < std::min(w, static_cast<int>(std::ceil(x1))); ++px) {
                    const double wx = std::min<double>(px + 1, x1) - std::max<double>(px, x0);
                    const double a = wx * wy;
                    for (int ch = 0; ch < 3; ++ch) {
                        acc[static_cast<std::size_t>(ch)] += a * src.at(px, py, ch);
                    }
                    area += a;
                }
            }
            for (int ch = 0; ch < 3; ++ch) {
                small.at(x, y, ch) = static_cast<float>(acc[static_cast<std::size_t>(ch)] / area);
            }
        }
    }

    FloatPlane out(w, h);
    for (int y = 0; y < h; ++y) {
        const float sy = std::clamp(static_cast<float>((y + 0.5) / fy - 0.5), 0.0F,
                                    static_cast<float>(sh - 1));
        for (int x = 0; x < w; ++x) {
            const float sx = std::clamp(static_cast<float>((x + 0.5) / fx - 0.5), 0.0F,
                                        static_cast<float>(sw - 1));
            for (int ch = 0; ch < 3; ++ch) {
                out.at(x, y, ch) = small.sample_bilinear(sx, sy, ch);
            }
        }
    }
    return out;
}

DistortionTable make_builtin_table() {
    nlohmann::json j = {
        {"version", 1},
        {"kinds",
         {
             {"uniform_white_noise", {{{"name", "amplitude"}, {"at_zero", 0.0}, {"at_one", 0.12}}}},
             {"gaussian_white_noise", {{{"name", "sigma"}, {"at_zero", 0.0}, {"at_one", 0.08}}}},
             {"checkerboard",
              {{{"name", "amplitude"}, {"at_zero", 0.0}, {"at_one", 0.08}},
               {{"name", "cell"}, {"at_zero", 8}, {"at_one", 8}, {"integral", true}}}},
             {"average_blur",
              {{{"name", "radius"}, {"at_zero", 0}, {"at_one", 4}, {"integral", true}}}},
             {"gaussian_blur", {{{"name", "sigma"}, {"at_zero", 0.0}, {"at_one", 2.5}}}},
             {"jpeg_compression",
              {{{"name", "quality"}, {"at_zero", 100}, {"at_one", 10}, {"integral", true}}}},
             {"hue_shift", {{{"name", "degrees"}, {"at_zero", 0.0}, {"at_one", 45.0}}}},
             {"saturation_shift", {{{"name", "factor"}, {"at_zero", 1.0}, {"at_one", 0.2}}}},
             {"brightness_shift", {{{"name", "offset"}, {"at_zero", 0.0}, {"at_one", 0.25}}}},
             {"contrast_shift", {{{"name", "factor"}, {"at_zero", 1.0}, {"at_one", 0.4}}}},
             {"magnification", {{{"name", "factor"}, {"at_zero", 1.0}, {"at_one", 1.2}}}},
             {"rotation", {{{"name", "degrees"}, {"at_zero", 0.0}, {"at_one", 6.0}}}},
             {"keystone", {{{"name", "factor"}, {"at_zero", 0.0}, {"at_one", 0.12}}}},
             {"warping",
              {{{"name", "amplitude"}, {"at_zero", 0.0}, {"at_one", 4.0}},
               {{"name", "cycles"}, {"at_zero", 2.0}, {"at_one", 2.0}}}},
             {"chromatic_aberration", {{{"name", "offset"}, {"at_zero", 0.0}, {"at_one", 3.0}}}},
             {"downscale", {{{"name", "factor"}, {"at_zero", 1.0}, {"at_one", 0.125}}}},
             {"external", nlohmann::json::array()},
         }},
    };
    return DistortionTable::from_json(j);
}

}  // namespace

std::vector<DistortionKind> procedural_kinds() {
    std::vector<DistortionKind> out;
    for (auto k : kAllDistortionKinds) {
        if (k != DistortionKind::external) {
            out.push_back(k);
        }
    }
    return out;
}

std::vector<DistortionKind> dataset_pool_kinds() {
    std::vector<DistortionKind> out;
    for (auto k : procedural_kinds()) {
        if (k != DistortionKind::downscale) {
            out.push_back(k);
        }
    }
    return out;
}

std::string_view to_string(DistortionKind kind) noexcept {
    for (const auto& kn : kKindNames) {
        if (kn.kind == kind) {
            return kn.name;
        }
    }
    return "unknown";
}

DistortionKind parse_distortion_kind(std::string_view name) {
    for (const auto& kn : kKindNames) {
        if (kn.name == name) {
            return kn.kind;
        }
    }
    for (const auto& [alias, kind] : kAliases) {
        if (alias == name) {
            return kind;
        }
    }
    fail(ErrorKind::parse, "unknown distortion kind '" + std::string(name) + "'");
}

bool is_stochastic(DistortionKind kind) noexcept {
    return kind == DistortionKind::uniform_white_noise ||
           kind == DistortionKind::gaussian_white_noise || kind == DistortionKind::checkerboard ||
           kind == DistortionKind::warping;
}

std::string_view to_string(SidePolicy side) noexcept {
    switch (side) {
        case SidePolicy::left_only: return "left_only";
        case SidePolicy::right_only: return "right_only";
        case SidePolicy::both: return "both";
    }
    return "unknown";
}

SidePolicy parse_side_policy(std::string_view name) {
    if (name == "left_only" || name == "left") {
        return SidePolicy::left_only;
    }
    if (name == "right_only" || name == "right") {
        return SidePolicy::right_only;
    }
    if (name == "both") {
        return SidePolicy::both;
    }
    fail(ErrorKind::parse, "unknown side policy '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const DistortionSpec& spec) {
    j = nlohmann::json{{"kind", to_string(spec.kind)},
                       {"strength", spec.strength},
                       {"params", spec.params},
                       {"side", to_string(spec.side)},
                       {"seed", spec.seed}};
    if (!spec.external_path.empty()) {
        j["external_path"] = spec.external_path;
    }
}

void from_json(const nlohmann::json& j, DistortionSpec& spec) {
    spec.kind = parse_distortion_kind(j.at("kind").get<std::string>());
    spec.strength = j.at("strength").get<double>();
    spec.params = j.value("params", DistortionParams{});
    spec.side = parse_side_policy(j.at("side").get<std::string>());
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.external_path = j.value("external_path", std::string{});
}

const DistortionTable& DistortionTable::builtin() {
    static const DistortionTable table = make_builtin_table();
    return table;
}

DistortionTable DistortionTable::from_json(const nlohmann::json& j) {
    DistortionTable t;
    try {
        t.version_ = j.at("version").get<int>();
        for (const auto& [name, anchors] : j.at("kinds").items()) {
            auto& list = t.anchors_[parse_distortion_kind(name)];
            for (const auto& a : anchors) {
                list.push_back(ParamAnchor{a.at("name").get<std::string>(),
                                           a.at("at_zero").get<double>(),
                                           a.at("at_one").get<double>(),
                                           a.value("integral", false)});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("malformed distortion table: ") + e.what());
    }
    for (auto k : kAllDistortionKinds) {
        require(t.anchors_.contains(k), ErrorKind::parse,
                "distortion table lacks kind '" + std::string(to_string(k)) + "'");
    }
    return t;
}

DistortionTable DistortionTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open distortion table '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, "'" + path.string() + "': " + e.what());
    }
    return from_json(j);
}

nlohmann::json DistortionTable::to_json() const {
    nlohmann::json kinds = nlohmann::json::object();
    for (const auto& [kind, anchors] : anchors_) {
        auto arr = nlohmann::json::array();
        for (const auto& a : anchors) {
            nlohmann::json e = {{"name", a.name}, {"at_zero", a.at_zero}, {"at_one", a.at_one}};
            if (a.integral) {
                e["integral"] = true;
            }
            arr.push_back(e);
        }
        kinds[std::string(to_string(kind))] = arr;
    }
    return {{"version", version_}, {"kinds", kinds}};
}

const std::vector<ParamAnchor>& DistortionTable::anchors(DistortionKind kind) const {
    const auto it = anchors_.find(kind);
    require(it != anchors_.end(), ErrorKind::not_found,
            "no anchors for kind '" + std::string(to_string(kind)) + "'");
    return it->second;
}

DistortionParams DistortionTable::resolve(DistortionKind kind, double strength) const {
    require(strength >= 0.0 && strength <= 1.0, ErrorKind::invalid_argument,
            "strength must lie in [0,1], got " + std::to_string(strength));
    DistortionParams params;
    for (const auto& a : anchors(kind)) {
        double v = a.at_zero + strength * (a.at_one - a.at_zero);
        if (a.integral) {
            v = std::floor(v + 0.5);
        }
        params[a.name] = v;
    }
    return params;
}

DistortionParams resolve_params(DistortionKind kind, double strength,
                                const DistortionTable& table) {
    return table.resolve(kind, strength);
}

DistortionSpec make_spec(DistortionKind kind, double strength, SidePolicy side,
                         std::uint64_t seed, const DistortionTable& table) {
    DistortionSpec spec;
    spec.kind = kind;
    spec.strength = strength;
    spec.params = table.resolve(kind, strength);
    spec.side = side;
    spec.seed = seed;
    return spec;
}

bool is_identity(DistortionKind kind, const DistortionParams& params) {
    switch (kind) {
        case DistortionKind::uniform_white_noise:
        case DistortionKind::checkerboard:
            return param(params, "amplitude") == 0.0;
        case DistortionKind::gaussian_white_noise:
        case DistortionKind::gaussian_blur:
            return param(params, "sigma") == 0.0;
        case DistortionKind::average_blur:
            return param(params, "radius") < 0.5;
        case DistortionKind::hue_shift:
            return std::fmod(param(params, "degrees"), 360.0) == 0.0;
        case DistortionKind::rotation:
            return param(params, "degrees") == 0.0;
        case DistortionKind::saturation_shift:
        case DistortionKind::contrast_shift:
        case DistortionKind::magnification:
        case DistortionKind::downscale:
            return param(params, "factor") == 1.0;
        case DistortionKind::brightness_shift:
            return param(params, "offset") == 0.0;
        case DistortionKind::keystone:
            return param(params, "factor") == 0.0;
        case DistortionKind::warping:
            return param(params, "amplitude") == 0.0;
        case DistortionKind::chromatic_aberration:
            return param(params, "offset") == 0.0;
        case DistortionKind::jpeg_compression:
        case DistortionKind::external:
            return false;
    }
    return false;
}

ImagePlane distort_view(const ImagePlane& view, DistortionKind kind,
                        const DistortionParams& params, std::uint64_t seed, int stream) {
    require(kind != DistortionKind::external, ErrorKind::unsupported,
            "external distortions are not procedural");
    if (is_identity(kind, params)) {
        return view;
    }
    if (kind == DistortionKind::jpeg_compression) {
        return jpeg::roundtrip(view, static_cast<int>(param(params, "quality")));
    }

    auto p = to_float(view);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(stream)));
    switch (kind) {
        case DistortionKind::uniform_white_noise:
            add_noise(p, rng, false, param(params, "amplitude"));
            break;
        case DistortionKind::gaussian_white_noise:
            add_noise(p, rng, true, param(params, "sigma"));
            break;
        case DistortionKind::checkerboard: {
            const int cell = static_cast<int>(param(params, "cell"));
            require(cell >= 1, ErrorKind::invalid_argument, "checkerboard cell must be >= 1");
            add_checkerboard(p, param(params, "amplitude"), cell, seed);
            break;
        }
        case DistortionKind::average_blur:
            p = box_blur(p, static_cast<int>(std::lround(param(params, "radius"))));
            break;
        case DistortionKind::gaussian_blur:
            p = gaussian_blur(p, param(params, "sigma"));
            break;
        case DistortionKind::hue_shift:
            shift_hue(p, param(params, "degrees"));
            break;
        case DistortionKind::saturation_shift:
            scale_saturation(p, param(params, "factor"));
            break;
        case DistortionKind::brightness_shift:
            shift_brightness(p, param(params, "offset"));
            break;
        case DistortionKind::contrast_shift:
            scale_contrast(p, param(params, "factor"));
            break;
        case DistortionKind::magnification: {
            const double f = param(params, "factor");
            require(f > 0.0, ErrorKind::invalid_argument, "magnification factor must be > 0");
            p = magnify(p, f);
            break;
        }
        case DistortionKind::rotation:
            p = rotate(p, param(params, "degrees"));
            break;
        case DistortionKind::keystone: {
            const double k = param(params, "factor");
            require(std::fabs(k) < 1.0, ErrorKind::invalid_argument,
                    "keystone factor must lie in (-1,1)");
            p = keystone(p, k);
            break;
        }
        case DistortionKind::warping:
            p = sinusoidal_warp(p, param(params, "amplitude"), param(params, "cycles"), seed,
                                stream);
            break;
        case DistortionKind::chromatic_aberration:
            p = chromatic_shift(p, param(params, "offset"));
            break;
        case DistortionKind::downscale: {
            const double f = param(params, "factor");
            require(f > 0.0 && f <= 1.0, ErrorKind::invalid_argument,
                    "downscale factor must lie in (0,1]");
            p = downscale_roundtrip(p, f);
            break;
        }
        case DistortionKind::jpeg_compression:
        case DistortionKind::external:
            break;
    }
    return to_u8(p);
}

StereoImage apply_distortion(const StereoImage& stereo, const DistortionSpec& spec) {
    const bool do_left = spec.side != SidePolicy::right_only;
    const bool do_right = spec.side != SidePolicy::left_only;

    if (spec.kind == DistortionKind::external) {
        require(!spec.external_path.empty(), ErrorKind::invalid_argument,
                "external distortion needs a pre-rendered pair path");
        require(std::filesystem::exists(spec.external_path), ErrorKind::not_found,
                "external pair '" + spec.external_path + "' does not exist");
        const auto rendered = load_stereo_auto(spec.external_path);
        require(rendered.width() == stereo.width() && rendered.height() == stereo.height(),
                ErrorKind::dimension_mismatch, "external pair size differs from the source");
        return StereoImage(do_left ? rendered.left() : stereo.left(),
                           do_right ? rendered.right() : stereo.right(), stereo.source_id());
    }

    const auto params =
        spec.params.empty() ? resolve_params(spec.kind, spec.strength) : spec.params;
    return StereoImage(
        do_left ? distort_view(stereo.left(), spec.kind, params, spec.seed, 0) : stereo.left(),
        do_right ? distort_view(stereo.right(), spec.kind, params, spec.seed, 1) : stereo.right(),
        stereo.source_id());
}

SidePolicy draw_side_policy(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x51de));
    constexpr std::array policies = {SidePolicy::left_only, SidePolicy::right_only,
                                     SidePolicy::both};
    return policies[static_cast<std::size_t>(rng.below(policies.size()))];
}

VariantPair make_variant_pair(const StereoImage& stereo, DistortionSpec spec_m,
                              DistortionSpec spec_n, std::uint64_t rng_seed) {
    require(spec_m.kind != spec_n.kind, ErrorKind::invalid_argument,
            "the two variants of a sample need distinct distortion kinds");
    const auto side = draw_side_policy(rng_seed);
    spec_m.side = side;
    spec_n.side = side;
    auto a = apply_distortion(stereo, spec_m);
    auto b = apply_distortion(stereo, spec_n);
    return VariantPair{std::move(a), std::move(b), std::move(spec_m), std::move(spec_n), side};
}

double mean_abs_deviation(const ImagePlane& a, const ImagePlane& b) {
    require(a.same_size(b), ErrorKind::dimension_mismatch, "planes differ in size");
    const auto da = a.data();
    const auto db = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        sum += std::abs(static_cast<int>(da[i]) - static_cast<int>(db[i]));
    }
    return sum / (255.0 * static_cast<double>(da.size()));
}

double mean_abs_deviation(const StereoImage& a, const StereoImage& b) {
    return 0.5 * (mean_abs_deviation(a.left(), b.left()) + mean_abs_deviation(a.right(), b.right()));
}

}  // namespace sqoe
