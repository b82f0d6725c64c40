// SPDX-License-Identifier: Apache-2.0
//
// Fixture helpers shared by the unit, property and acceptance tests.

#pragma once

#include <atomic>
#include <fstream>
#include <iterator>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "sqoe/distortion.hpp"
#include "sqoe/error.hpp"
#include "sqoe/image.hpp"
#include "sqoe/model.hpp"
#include "sqoe/rng.hpp"

namespace sqoe::fixtures {

inline ImagePlane random_plane(int w, int h, Rng& rng) {
    ImagePlane p(w, h);
    for (auto& v : p.data()) {
        v = static_cast<std::uint8_t>(rng.below(256));
    }
    return p;
}

/// Smooth colour ramp with a seed-dependent phase; noise-free so that any
/// distortion raises its deviation from the clean copy.
inline ImagePlane gradient_plane(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    const double px = rng.uniform(0.0, 6.28);
    const double py = rng.uniform(0.0, 6.28);
    const double fx = rng.uniform(0.5, 2.0);
    ImagePlane p(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = static_cast<double>(x) / w;
            const double v = static_cast<double>(y) / h;
            p.set_pixel(x, y,
                        {static_cast<std::uint8_t>(40 + 170 * (0.5 + 0.5 * std::sin(6.28 * fx * u + px))),
                         static_cast<std::uint8_t>(40 + 170 * (0.5 + 0.5 * std::cos(6.28 * v + py))),
                         static_cast<std::uint8_t>(40 + 170 * (0.5 * u + 0.5 * v))});
        }
    }
    return p;
}

inline StereoImage random_stereo(int w, int h, Rng& rng, std::string id = "fixture") {
    auto left = random_plane(w, h, rng);
    auto right = random_plane(w, h, rng);
    return StereoImage(std::move(left), std::move(right), std::move(id));
}

inline StereoImage gradient_stereo(int w, int h, std::uint64_t seed, std::string id) {
    auto left = gradient_plane(w, h, seed);
    // Right view: the same scene shifted by two pixels.
    ImagePlane right(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            right.set_pixel(x, y, left.pixel(std::min(w - 1, x + 2), y));
        }
    }
    return StereoImage(std::move(left), std::move(right), std::move(id));
}

/// Small transformer used wherever the default config would be too slow.
inline ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.input_width = 16;
    cfg.input_height = 16;
    cfg.patch_size = 8;
    cfg.embed_dim = 8;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.mlp_ratio = 2;
    cfg.fusion.mode = FusionMode::concat_kv;
    cfg.fusion.layers = {1};
    cfg.head_hidden = {6, 1};
    return cfg;
}

inline ModelInput random_input(const ModelConfig& cfg, Rng& rng) {
    ModelInput in;
    in.left = ag::Mat(cfg.num_patches(), cfg.patch_dim());
    in.right = ag::Mat(cfg.num_patches(), cfg.patch_dim());
    for (Eigen::Index i = 0; i < in.left.size(); ++i) {
        in.left.data()[i] = rng.normal();
        in.right.data()[i] = rng.normal();
    }
    return in;
}

/// Clean-versus-noisy pairs: each example holds a gradient scene and a copy
/// with Gaussian noise on both views. The clean copy lands on A or B at random
/// and is always the preferred one.
inline std::vector<PreparedExample> noise_preference_set(int n, const ModelConfig& cfg,
                                                         std::uint64_t seed,
                                                         double strength = 0.6) {
    Rng rng(seed);
    std::vector<PreparedExample> out;
    for (int i = 0; i < n; ++i) {
        const auto clean = gradient_stereo(cfg.input_width, cfg.input_height, rng.next_u64(),
                                           "scene" + std::to_string(i));
        const auto spec = make_spec(DistortionKind::gaussian_white_noise, strength, SidePolicy::both,
                                    rng.next_u64());
        const auto noisy = apply_distortion(clean, spec);
        PreparedExample ex;
        const bool clean_first = rng.bernoulli(0.5);
        ex.a = prepare_input(clean_first ? clean : noisy, cfg);
        ex.b = prepare_input(clean_first ? noisy : clean, cfg);
        ex.preferred = clean_first ? Choice::A : Choice::B;
        out.push_back(std::move(ex));
    }
    return out;
}

/// Directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sqoe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace sqoe::fixtures
