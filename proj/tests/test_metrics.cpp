// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "metric_oracles.hpp"
#include "sqoe/metrics.hpp"
#include "support.hpp"

namespace sqoe {
namespace {

std::vector<ConsensusLabel> labels_from(const std::vector<std::pair<int, int>>& votes) {
    std::vector<ConsensusLabel> out;
    for (const auto& [a, b] : votes) {
        out.push_back(consensus_from_votes(a, b));
    }
    return out;
}

Sample2AFC voted_sample(const std::string& id, int a, int b) {
    Sample2AFC s;
    s.sample_id = id;
    for (int i = 0; i < a + b; ++i) {
        s.judgments.push_back({"r" + std::to_string(i), i < a ? Choice::A : Choice::B, Medium::vr_avp, {}});
    }
    return s;
}

// ---- kappa -------------------------------------------------------------------------

TEST(Kappa, MatchesContingencyOracleExactly) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng.below(40);
        const auto x = oracle::random_choices(n, rng, rng.uniform());
        auto y = oracle::random_choices(n, rng, rng.uniform());
        // Correlate half the fixtures so kappa is not always near zero.
        if (trial % 2 == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.bernoulli(0.7)) {
                    y[i] = x[i];
                }
            }
        }
        EXPECT_EQ(cohens_kappa(x, y), oracle::kappa(x, y)) << "trial " << trial;
    }
}

TEST(Kappa, WorkedExamples) {
    using enum Choice;
    EXPECT_EQ(cohens_kappa({A, B, B, A, B}, {A, B, B, A, B}), 1.0);
    EXPECT_EQ(cohens_kappa({A, A, A, A}, {A, B, A, B}), 0.0);
    EXPECT_EQ(cohens_kappa({A, A, A}, {A, A, A}), 1.0);
    EXPECT_EQ(cohens_kappa({A, B}, {B, A}), -1.0);
    EXPECT_THROW(cohens_kappa({A}, {A, B}), Error);
    EXPECT_THROW(cohens_kappa({}, {}), Error);
}

TEST(Kappa, SymmetricAndInvariantUnderRelabeling) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = 2 + rng.below(20);
        const auto x = oracle::random_choices(n, rng, 0.5);
        const auto y = oracle::random_choices(n, rng, 0.4);
        std::vector<Choice> fx;
        std::vector<Choice> fy;
        for (std::size_t i = 0; i < n; ++i) {
            fx.push_back(flip(x[i]));
            fy.push_back(flip(y[i]));
        }
        EXPECT_EQ(cohens_kappa(x, y), cohens_kappa(y, x));
        EXPECT_EQ(cohens_kappa(x, y), cohens_kappa(fx, fy));
    }
}

// ---- correlation -----------------------------------------------------------------

TEST(Correlation, MatchesBruteForceOracles) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 3 + rng.below(15);
        const auto x = oracle::random_scores(n, rng);
        const auto y = oracle::random_scores(n, rng);
        const auto want_p = oracle::pearson(x, y);
        const auto want_s = oracle::spearman(x, y);
        const auto got_p = plcc(x, y);
        const auto got_s = srocc(x, y);
        ASSERT_EQ(got_p.has_value(), want_p.has_value()) << "trial " << trial;
        ASSERT_EQ(got_s.has_value(), want_s.has_value()) << "trial " << trial;
        if (want_p) {
            EXPECT_NEAR(*got_p, *want_p, 1e-9) << "trial " << trial;
        }
        if (want_s) {
            EXPECT_NEAR(*got_s, *want_s, 1e-9) << "trial " << trial;
        }
        EXPECT_EQ(average_ranks(x), oracle::ranks(x));
    }
}

TEST(Correlation, RankExample) {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> y = {2, 1, 4, 3, 5};
    // Rank differences (-1, 1, -1, 1, 0): 1 - 6*4 / (5*24) = 0.8.
    const double want = *oracle::spearman(x, y);
    EXPECT_NEAR(want, 1.0 - 6.0 * 4.0 / 120.0, 1e-15);
    EXPECT_NEAR(*srocc(x, y), want, 1e-12);
}

TEST(Correlation, SignAndDegenerateCases) {
    const std::vector<double> x = {1, 2, 3, 4};
    const std::vector<double> neg = {-1, -2, -3, -4};
    EXPECT_NEAR(*srocc(x, neg), -1.0, 1e-12);
    EXPECT_NEAR(*plcc(x, neg), -1.0, 1e-12);
    EXPECT_NEAR(*srocc(x, {1, 4, 9, 16}), 1.0, 1e-12);
    EXPECT_FALSE(plcc(x, {2, 2, 2, 2}).has_value());
    EXPECT_FALSE(srocc(x, {2, 2, 2, 2}).has_value());
    EXPECT_THROW(srocc({1, 2}, {1, 2}), Error);
    EXPECT_THROW(plcc({1, 2, 3}, {1, 2}), Error);
    EXPECT_EQ(average_ranks({5, 1, 5, 3}), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Correlation, InvarianceProperties) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = 4 + rng.below(10);
        std::vector<double> x(n);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.normal();
            y[i] = x[i] + rng.normal();
        }
        std::vector<double> monotone(n);
        std::vector<double> affine(n);
        for (std::size_t i = 0; i < n; ++i) {
            monotone[i] = std::exp(2.0 * x[i]) + x[i] * x[i] * x[i];
            affine[i] = 3.5 * x[i] - 7.0;
        }
        EXPECT_NEAR(*srocc(monotone, y), *srocc(x, y), 1e-12);
        EXPECT_NEAR(*plcc(affine, y), *plcc(x, y), 1e-9);
    }
}

// ---- consensus-split accuracy ----------------------------------------------------

TEST(SplitAccuracy, MatchesTallyOracle) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng.below(30);
        std::vector<std::pair<int, int>> votes;
        for (std::size_t i = 0; i < n; ++i) {
            votes.push_back(oracle::random_votes(rng));
        }
        const auto preds = oracle::random_choices(n, rng, 0.5);
        const auto r = accuracy_by_split(labels_from(votes), preds);
        const auto t = oracle::split_tally(votes, preds);
        const ClassAccuracy* got[3] = {&r.split_3_2, &r.split_4_1, &r.split_5_0};
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(got[c]->count, t.count[c]);
            EXPECT_EQ(got[c]->correct, t.correct[c]);
        }
        EXPECT_EQ(r.other.count, t.other_count);
        EXPECT_EQ(r.other.correct, t.other_correct);
        const auto five = t.count[0] + t.count[1] + t.count[2];
        if (five == 0) {
            EXPECT_FALSE(r.acc_total().has_value());
        } else {
            EXPECT_EQ(*r.acc_total(), static_cast<double>(t.correct[0] + t.correct[1] + t.correct[2]) /
                                          static_cast<double>(five));
        }
    }
}

TEST(SplitAccuracy, HalfCorrectPerClass) {
    const std::vector<std::pair<int, int>> votes = {{3, 2}, {2, 3}, {4, 1}, {1, 4}, {5, 0}, {0, 5}};
    using enum Choice;
    const auto r = accuracy_by_split(labels_from(votes), {A, A, A, A, A, A});
    EXPECT_EQ(r.acc_3_2(), 0.5);
    EXPECT_EQ(r.acc_4_1(), 0.5);
    EXPECT_EQ(r.acc_5_0(), 0.5);
    EXPECT_EQ(r.acc_total(), 0.5);
    const auto perfect = accuracy_by_split(labels_from(votes), {A, B, A, B, A, B});
    EXPECT_EQ(perfect.acc_total(), 1.0);
}

TEST(SplitAccuracy, EmptyClassIsAbsentAndTiesNeverMatch) {
    using enum Choice;
    const auto r = accuracy_by_split(labels_from({{5, 0}, {2, 2}}), {A, A});
    EXPECT_FALSE(r.acc_3_2().has_value());
    EXPECT_EQ(r.acc_5_0(), 1.0);
    EXPECT_EQ(r.other.count, 1U);
    EXPECT_EQ(r.other.correct, 0U);
    EXPECT_TRUE(r.to_json()["acc_4_1"].is_null());
    EXPECT_THROW(accuracy_by_split(labels_from({{5, 0}}), {A, B}), Error);
}

TEST(SplitAccuracy, KeyedVariantIsOrderFreeAndChecksIds) {
    Rng rng(6);
    std::vector<Sample2AFC> samples;
    std::map<std::string, Choice> preds;
    for (int i = 0; i < 40; ++i) {
        const auto [a, b] = oracle::random_votes(rng);
        samples.push_back(voted_sample("s" + std::to_string(i), a, b));
        preds["s" + std::to_string(i)] = rng.bernoulli(0.5) ? Choice::A : Choice::B;
    }
    const auto base = accuracy_by_split(samples, preds).to_json();
    for (int k = 0; k < 5; ++k) {
        rng.shuffle(samples);
        EXPECT_EQ(accuracy_by_split(samples, preds).to_json(), base);
    }
    auto missing = preds;
    missing.erase("s3");
    EXPECT_THROW(accuracy_by_split(samples, missing), Error);
    auto extra = preds;
    extra["ghost"] = Choice::A;
    EXPECT_THROW(accuracy_by_split(samples, extra), Error);
}

TEST(RepeatedSplits, OneReportPerSeedOverFreshPartitions) {
    std::vector<std::string> ids;
    for (int i = 0; i < 50; ++i) {
        ids.push_back("id" + std::to_string(i));
    }
    std::vector<std::vector<std::string>> seen;
    const auto summary = repeated_split_evaluation(ids, 10, 5, [&](const DatasetSplit& split) {
        EXPECT_EQ(split.test_ids.size(), 5U);
        seen.push_back(split.test_ids);
        SplitAccuracyReport r;
        r.split_5_0 = {4, seen.size() % 2 == 0 ? 4U : 2U};
        return r;
    });
    EXPECT_EQ(summary.seeds.size(), 5U);
    EXPECT_EQ(std::set<std::uint64_t>(summary.seeds.begin(), summary.seeds.end()).size(), 5U);
    EXPECT_NE(seen[0], seen[1]);
    const auto j = summary.to_json();
    // Accuracies 0.5, 1, 0.5, 1, 0.5: mean 0.7, sample variance 0.075.
    EXPECT_NEAR(j["acc_5_0"]["mean"].get<double>(), 0.7, 1e-12);
    EXPECT_NEAR(j["acc_5_0"]["std"].get<double>(), std::sqrt(0.075), 1e-12);
    EXPECT_TRUE(j["acc_3_2"]["mean"].is_null());
}

// ---- agreement matrices ------------------------------------------------------------

TEST(Agreement, MediumMatrixMatchesPerParticipantMean) {
    Rng rng(7);
    StudyResponses study;
    const std::vector<std::string> media = {"anaglyph", "toggle", "vr_avp"};
    for (int p = 0; p < 10; ++p) {
        const auto base = oracle::random_choices(12, rng, 0.5);
        for (const auto& m : media) {
            auto& set = study["p" + std::to_string(p)][m];
            for (std::size_t i = 0; i < base.size(); ++i) {
                set["s" + std::to_string(i)] = rng.bernoulli(0.25) ? flip(base[i]) : base[i];
            }
        }
    }
    const auto m = medium_agreement(study);
    ASSERT_EQ(m.labels, media);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(m.kappa[i][i], 1.0);
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_EQ(m.kappa[i][k], m.kappa[k][i]);
            if (i == k) {
                continue;
            }
            double sum = 0.0;
            for (const auto& [p, by_medium] : study) {
                std::vector<Choice> x;
                std::vector<Choice> y;
                for (const auto& [id, c] : by_medium.at(media[i])) {
                    x.push_back(c);
                    y.push_back(by_medium.at(media[k]).at(id));
                }
                sum += oracle::kappa(x, y);
            }
            EXPECT_NEAR(m.kappa[i][k], sum / 10.0, 1e-12);
        }
    }
}

TEST(Agreement, SelfConsistentParticipantsGiveOne) {
    StudyResponses study;
    for (int p = 0; p < 3; ++p) {
        for (const auto* medium : {"toggle", "vr_quest"}) {
            study["p" + std::to_string(p)][medium] = {{"a", Choice::A}, {"b", Choice::B}, {"c", Choice::A}};
        }
    }
    EXPECT_EQ(medium_agreement(study).kappa[0][1], 1.0);
    StudyResponses single;
    single["p"]["toggle"] = {{"a", Choice::A}};
    EXPECT_THROW(medium_agreement(single), Error);
}

TEST(Agreement, RaterMatrixUsesSharedSamples) {
    StudyResponses study;
    using enum Choice;
    study["x"]["toggle"] = {{"a", A}, {"b", B}, {"c", A}, {"d", B}};
    study["y"]["toggle"] = {{"a", A}, {"b", B}, {"c", B}, {"z", A}};
    study["z"]["anaglyph"] = {{"a", A}};
    const auto m = rater_agreement(study, "toggle");
    EXPECT_EQ(m.labels, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(m.kappa[0][1], oracle::kappa({A, B, A}, {A, B, B}));
    EXPECT_THROW(rater_agreement(study, "anaglyph"), Error);
}

TEST(Agreement, ResponsesGroupedByAnnotatorAndMedium) {
    Sample2AFC s = voted_sample("s1", 1, 1);
    s.judgments[1].annotator_id = "r0";
    s.judgments[1].medium = Medium::toggle;
    const auto study = responses_by_participant({s});
    EXPECT_EQ(study.at("r0").at("vr_avp").at("s1"), Choice::A);
    EXPECT_EQ(study.at("r0").at("toggle").at("s1"), Choice::B);
    s.judgments[1].medium = Medium::vr_avp;
    EXPECT_THROW(responses_by_participant({s}), Error);
}

// ---- alignment ---------------------------------------------------------------------

TEST(Alignment, MatchesEnumerationOracle) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng.below(30);
        const auto k = 2 + rng.below(3);
        std::vector<std::vector<int>> votes(n, std::vector<int>(k));
        std::vector<int> choice(n);
        for (std::size_t i = 0; i < n; ++i) {
            int total = 0;
            while (total == 0) {
                for (auto& v : votes[i]) {
                    v = static_cast<int>(rng.below(5));
                    total += v;
                }
            }
            choice[i] = static_cast<int>(rng.below(k));
        }
        const auto got = alignment(votes, choice);
        const auto want = oracle::alignment(votes, choice);
        EXPECT_EQ(got.majority, want.majority) << "trial " << trial;
        EXPECT_EQ(got.proportional, want.proportional) << "trial " << trial;
        EXPECT_GE(got.proportional, 0.0);
        EXPECT_LE(got.proportional, 1.0);
    }
}

TEST(Alignment, WorkedExamplesAndConventions) {
    const auto a = alignment({{6, 3, 1}}, {2});
    EXPECT_DOUBLE_EQ(a.proportional, 0.1);
    EXPECT_EQ(a.majority, 0.0);
    const auto b = alignment({{1, 3, 6}}, {2});
    EXPECT_DOUBLE_EQ(b.proportional, 0.6);
    EXPECT_EQ(b.majority, 1.0);
    EXPECT_EQ(alignment({{2, 2}}, {0}).majority, 0.0);  // tied plurality
    const auto unanimous = alignment({{0, 5}, {4, 0}, {0, 0, 3}}, {1, 1, 2});
    EXPECT_DOUBLE_EQ(unanimous.majority, unanimous.proportional);
    EXPECT_THROW(alignment({{1, 2}}, {2}), Error);
    EXPECT_THROW(alignment({{0, 0}}, {0}), Error);
    EXPECT_THROW(alignment({{1, 2}}, {0, 1}), Error);
}

// ---- sweep and mono baseline -------------------------------------------------------

TEST(Sweep, NoiseEnergyOracleIsMonotone) {
    std::vector<StereoImage> images;
    for (int i = 0; i < 4; ++i) {
        images.push_back(fixtures::gradient_stereo(24, 16, 100 + i, "img" + std::to_string(i)));
    }
    std::vector<double> strengths;
    for (int i = 0; i < 6; ++i) {
        strengths.push_back(i / 5.0);
    }
    const auto curve = degradation_sweep(images, DistortionKind::gaussian_white_noise, strengths,
                                         noise_energy_score, 1);
    ASSERT_EQ(curve.points.size(), 6U);
    EXPECT_EQ(curve.points.front().mean_score, 0.0);  // strength 0 scores the clean image
    EXPECT_EQ(curve.points.front().images, 4U);
    ASSERT_TRUE(curve.monotonicity.has_value());
    EXPECT_EQ(*curve.monotonicity, 1.0);
    EXPECT_EQ(curve.to_csv().substr(0, curve.to_csv().find('\n')), "strength,mean_score,std_score");
}

TEST(Sweep, DegenerateAndInvalidInputs) {
    const std::vector<StereoImage> images = {fixtures::gradient_stereo(8, 8, 1, "a")};
    const auto one = degradation_sweep(images, DistortionKind::gaussian_blur, {0.5}, noise_energy_score);
    EXPECT_FALSE(one.monotonicity.has_value());
    EXPECT_THROW(degradation_sweep(images, DistortionKind::gaussian_blur, {0.5, 0.2}, noise_energy_score),
                 Error);
    EXPECT_THROW(degradation_sweep({}, DistortionKind::gaussian_blur, {0.5}, noise_energy_score), Error);
    const StereoScorer failing = [](const StereoImage&, const StereoImage&) -> double {
        fail(ErrorKind::state, "scorer broke");
    };
    EXPECT_THROW(degradation_sweep(images, DistortionKind::gaussian_blur, {0.5}, failing), Error);
}

TEST(MonoBaseline, AveragesBothViews) {
    const StereoImage s(ImagePlane::filled(4, 4, {10, 20, 30}), ImagePlane::filled(4, 4, {70, 80, 90}));
    EXPECT_EQ(mono_iqa_baseline(s, [](const ImagePlane&) { return 0.7; }), 0.7);
    int calls = 0;
    EXPECT_DOUBLE_EQ(mono_iqa_baseline(s, [&](const ImagePlane&) { return ++calls == 1 ? 0.2 : 0.4; }), 0.3);
    // Mean channel value: left 20, right 80.
    const MonoScorer luminance = [](const ImagePlane& p) {
        double acc = 0.0;
        for (auto v : p.data()) {
            acc += v;
        }
        return acc / static_cast<double>(p.data().size());
    };
    EXPECT_DOUBLE_EQ(mono_iqa_baseline(s, luminance), 50.0);
}

}  // namespace
}  // namespace sqoe
