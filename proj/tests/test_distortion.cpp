// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "sqoe/distortion.hpp"
#include "sqoe/jpeg.hpp"
#include "support.hpp"

namespace sqoe {
namespace {

StereoImage fixture(Rng& rng) {
    const int w = 8 + static_cast<int>(rng.below(25));
    const int h = 8 + static_cast<int>(rng.below(17));
    return fixtures::random_stereo(w, h, rng);
}

int max_channel_error(const ImagePlane& a, const ImagePlane& b) {
    int worst = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        worst = std::max(worst, std::abs(int{a.data()[i]} - int{b.data()[i]}));
    }
    return worst;
}

TEST(DistortionNames, RoundTripAndAliases) {
    for (auto k : kAllDistortionKinds) {
        EXPECT_EQ(parse_distortion_kind(to_string(k)), k);
    }
    EXPECT_EQ(parse_distortion_kind("box_blur"), DistortionKind::average_blur);
    EXPECT_THROW(parse_distortion_kind("sepia"), Error);
    for (auto s : {SidePolicy::left_only, SidePolicy::right_only, SidePolicy::both}) {
        EXPECT_EQ(parse_side_policy(to_string(s)), s);
    }
}

TEST(DistortionTable, ShippedFileEqualsBuiltin) {
    const auto loaded = DistortionTable::load(std::string(SQOE_DATA_DIR) + "/distortion_map.json");
    EXPECT_EQ(loaded, DistortionTable::builtin());
    EXPECT_EQ(DistortionTable::from_json(loaded.to_json()), loaded);
}

TEST(DistortionTable, ResolvesLinearInterpolationOfAnchors) {
    const auto& table = DistortionTable::builtin();
    Rng rng(4);
    for (auto k : procedural_kinds()) {
        const double s = rng.uniform();
        const auto params = table.resolve(k, s);
        for (const auto& a : table.anchors(k)) {
            double want = a.at_zero + s * (a.at_one - a.at_zero);
            if (a.integral) {
                want = std::round(want);
            }
            EXPECT_NEAR(params.at(a.name), want, 1e-12) << to_string(k) << "." << a.name;
        }
    }
}

TEST(DistortionTable, RejectsOutOfRangeStrength) {
    EXPECT_THROW((void)resolve_params(DistortionKind::hue_shift, 1.5), Error);
    EXPECT_THROW((void)resolve_params(DistortionKind::hue_shift, -0.1), Error);
    EXPECT_THROW((void)resolve_params(DistortionKind::hue_shift, std::nan("")), Error);
}

// Every procedural kind but JPEG is the exact identity at strength 0.
TEST(DistortionProperty, ZeroStrengthIsByteIdentity) {
    Rng rng(100);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = fixture(rng);
        for (auto k : procedural_kinds()) {
            if (k == DistortionKind::jpeg_compression) {
                continue;
            }
            const auto spec = make_spec(k, 0.0, SidePolicy::both, rng.next_u64());
            EXPECT_EQ(apply_distortion(s, spec), s) << to_string(k) << " trial " << trial;
        }
    }
}

TEST(Jpeg, Quality100StaysWithinThreeLevels) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = fixture(rng);
        const auto out = apply_distortion(s, make_spec(DistortionKind::jpeg_compression, 0.0,
                                                       SidePolicy::both, 0));
        EXPECT_LE(max_channel_error(out.left(), s.left()), 3);
        EXPECT_LE(max_channel_error(out.right(), s.right()), 3);
    }
}

// Annex K luminance table at quality 50, scaled by the usual IJG rule.
TEST(Jpeg, QuantTablesFollowIjgScaling) {
    constexpr std::array<int, 64> base = {
        16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    for (int q : {1, 10, 25, 50, 75, 90, 100}) {
        const int scale = q < 50 ? 5000 / q : 200 - 2 * q;
        const auto t = jpeg::luma_table(q);
        for (std::size_t i = 0; i < 64; ++i) {
            EXPECT_EQ(t[i], std::clamp((base[i] * scale + 50) / 100, 1, 255)) << "q" << q << " i" << i;
        }
    }
}

TEST(Jpeg, LowerQualityLosesMore) {
    Rng rng(8);
    const auto p = fixtures::gradient_plane(40, 24, 3);
    const double e90 = mean_abs_deviation(jpeg::roundtrip(p, 90), p);
    const double e10 = mean_abs_deviation(jpeg::roundtrip(p, 10), p);
    EXPECT_GT(e10, e90);
    EXPECT_THROW(jpeg::roundtrip(p, 0), Error);
}

TEST(Jpeg, NonMultipleOfEightSizesKeepDimensions) {
    Rng rng(9);
    const auto p = fixtures::random_plane(13, 7, rng);
    const auto out = jpeg::roundtrip(p, 75);
    EXPECT_EQ(out.width(), 13);
    EXPECT_EQ(out.height(), 7);
}

// For each side policy the untouched view is byte-identical, whatever the kind.
TEST(DistortionProperty, NonSelectedViewIsUntouched) {
    Rng rng(200);
    const auto kinds = procedural_kinds();
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = fixture(rng);
        const auto kind = kinds[static_cast<std::size_t>(rng.below(kinds.size()))];
        const double strength = rng.uniform(0.05, 1.0);
        const auto seed = rng.next_u64();
        const auto left = apply_distortion(s, make_spec(kind, strength, SidePolicy::left_only, seed));
        EXPECT_EQ(left.right(), s.right()) << to_string(kind);
        const auto right = apply_distortion(s, make_spec(kind, strength, SidePolicy::right_only, seed));
        EXPECT_EQ(right.left(), s.left()) << to_string(kind);
        // The selected view matches the corresponding half of a two-sided run.
        const auto both = apply_distortion(s, make_spec(kind, strength, SidePolicy::both, seed));
        EXPECT_EQ(left.left(), both.left()) << to_string(kind);
        EXPECT_EQ(right.right(), both.right()) << to_string(kind);
    }
}

TEST(Distortion, SameSeedIsDeterministic) {
    Rng rng(1);
    const auto s = fixture(rng);
    for (auto k : procedural_kinds()) {
        const auto spec = make_spec(k, 0.7, SidePolicy::both, 42);
        EXPECT_EQ(apply_distortion(s, spec), apply_distortion(s, spec)) << to_string(k);
    }
}

TEST(Distortion, StochasticKindsDependOnSeed) {
    Rng rng(2);
    const auto s = fixture(rng);
    for (auto k : procedural_kinds()) {
        if (!is_stochastic(k)) {
            continue;
        }
        const auto a = apply_distortion(s, make_spec(k, 1.0, SidePolicy::both, 1));
        const auto b = apply_distortion(s, make_spec(k, 1.0, SidePolicy::both, 2));
        EXPECT_NE(a, b) << to_string(k);
    }
}

TEST(Distortion, BrightnessMatchesPointwiseOracle) {
    Rng rng(3);
    const auto s = fixture(rng);
    const auto spec = make_spec(DistortionKind::brightness_shift, 0.4, SidePolicy::both, 0);
    const auto out = apply_distortion(s, spec);
    const double offset = spec.params.at("offset");
    for (std::size_t i = 0; i < s.left().data().size(); ++i) {
        const double v = s.left().data()[i] / 255.0 + offset;
        const int want = static_cast<int>(std::clamp(std::nearbyint(v * 255.0), 0.0, 255.0));
        EXPECT_NEAR(out.left().data()[i], want, 1) << i;
    }
}

TEST(Distortion, ContrastMatchesPointwiseOracle) {
    Rng rng(4);
    const auto s = fixture(rng);
    const auto spec = make_spec(DistortionKind::contrast_shift, 1.0, SidePolicy::both, 0);
    const auto out = apply_distortion(s, spec);
    const double f = spec.params.at("factor");
    for (std::size_t i = 0; i < s.right().data().size(); ++i) {
        const double v = 0.5 + f * (s.right().data()[i] / 255.0 - 0.5);
        EXPECT_NEAR(out.right().data()[i], std::nearbyint(v * 255.0), 1) << i;
    }
}

TEST(Distortion, BoxBlurOfConstantIsConstant) {
    const StereoImage flat(ImagePlane::filled(12, 9, {80, 120, 200}),
                           ImagePlane::filled(12, 9, {80, 120, 200}));
    for (auto k : {DistortionKind::average_blur, DistortionKind::gaussian_blur,
                   DistortionKind::rotation, DistortionKind::magnification, DistortionKind::downscale}) {
        EXPECT_EQ(apply_distortion(flat, make_spec(k, 1.0, SidePolicy::both, 0)), flat) << to_string(k);
    }
}

TEST(Distortion, BoxBlurMatchesReflectedWindowMean) {
    Rng rng(5);
    const auto p = fixtures::random_plane(9, 7, rng);
    const DistortionParams params = {{"radius", 1.0}};
    const auto out = distort_view(p, DistortionKind::average_blur, params, 0, 0);
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 9; ++x) {
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        sum += p.at(reflect_index(x + dx, 9), reflect_index(y + dy, 7), c);
                    }
                }
                EXPECT_NEAR(out.at(x, y, c), std::nearbyint(sum / 9.0), 1);
            }
        }
    }
}

TEST(Distortion, NoiseDeviationGrowsWithStrength) {
    const auto s = fixtures::gradient_stereo(48, 32, 1, "g");
    for (auto k : {DistortionKind::gaussian_white_noise, DistortionKind::uniform_white_noise}) {
        double previous = 0.0;
        for (double strength : {0.1, 0.4, 0.7, 1.0}) {
            const double d = mean_abs_deviation(apply_distortion(s, make_spec(k, strength, SidePolicy::both, 3)), s);
            EXPECT_GT(d, previous) << to_string(k);
            previous = d;
        }
    }
}

TEST(Distortion, ExternalRequiresPath) {
    Rng rng(6);
    const auto s = fixture(rng);
    DistortionSpec spec;
    spec.kind = DistortionKind::external;
    EXPECT_THROW(apply_distortion(s, spec), Error);
    spec.external_path = "/nonexistent/pair_L.png";
    EXPECT_THROW(apply_distortion(s, spec), Error);
}

TEST(DistortionSpec, JsonRoundTrip) {
    const auto spec = make_spec(DistortionKind::checkerboard, 0.3, SidePolicy::left_only, 77);
    const nlohmann::json j = spec;
    EXPECT_EQ(j.get<DistortionSpec>(), spec);
}

TEST(VariantPair, SharesSidePolicyAndRejectsSameKind) {
    Rng rng(12);
    const auto s = fixture(rng);
    std::set<SidePolicy> seen;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto pair = make_variant_pair(
            s, make_spec(DistortionKind::hue_shift, 0.5, SidePolicy::both, 1),
            make_spec(DistortionKind::gaussian_blur, 0.5, SidePolicy::both, 2), seed);
        EXPECT_EQ(pair.spec_a.side, pair.side);
        EXPECT_EQ(pair.spec_b.side, pair.side);
        seen.insert(pair.side);
    }
    EXPECT_EQ(seen.size(), 3U);
    EXPECT_THROW(make_variant_pair(s, make_spec(DistortionKind::hue_shift, 0.5, SidePolicy::both, 1),
                                   make_spec(DistortionKind::hue_shift, 0.2, SidePolicy::both, 2), 0),
                 Error);
}

}  // namespace
}  // namespace sqoe
