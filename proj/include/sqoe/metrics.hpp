// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sqoe/dataset.hpp"
#include "sqoe/distortion.hpp"
#include "sqoe/image.hpp"

namespace sqoe {

// ---- consensus-split accuracy ----------------------------------------------------------

struct ClassAccuracy {
    std::size_t count = 0;
    std::size_t correct = 0;
    /// Absent when the class has no samples.
    [[nodiscard]] std::optional<double> accuracy() const {
        if (count == 0) {
            return std::nullopt;
        }
        return static_cast<double>(correct) / static_cast<double>(count);
    }
};

struct SplitAccuracyReport {
    ClassAccuracy split_3_2;
    ClassAccuracy split_4_1;
    ClassAccuracy split_5_0;
    /// Samples whose vote total is not five; kept out of acc_total.
    ClassAccuracy other;

    [[nodiscard]] std::optional<double> acc_3_2() const { return split_3_2.accuracy(); }
    [[nodiscard]] std::optional<double> acc_4_1() const { return split_4_1.accuracy(); }
    [[nodiscard]] std::optional<double> acc_5_0() const { return split_5_0.accuracy(); }
    /// Sample-weighted mean of the three five-vote classes.
    [[nodiscard]] std::optional<double> acc_total() const;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

/// A prediction is correct when it equals the majority vote; tied majorities
/// are never matched.
SplitAccuracyReport accuracy_by_split(const std::vector<ConsensusLabel>& labels,
                                      const std::vector<Choice>& predictions);
/// Keyed variant: every sample needs a prediction and every prediction a sample.
SplitAccuracyReport accuracy_by_split(const std::vector<Sample2AFC>& samples,
                                      const std::map<std::string, Choice>& predictions);

struct RepeatedSplitSummary {
    std::vector<std::uint64_t> seeds;
    std::vector<SplitAccuracyReport> runs;

    /// Per-key mean and sample standard deviation over runs where the key is present.
    [[nodiscard]] nlohmann::json to_json() const;
};

std::vector<std::uint64_t> repeated_split_seeds(std::uint64_t base_seed, int k = 5);

/// Re-partitions `ids` with k seeds and collects one report per split.
RepeatedSplitSummary repeated_split_evaluation(
    const std::vector<std::string>& ids, std::uint64_t base_seed, int k,
    const std::function<SplitAccuracyReport(const DatasetSplit&)>& evaluate);

// ---- agreement ---------------------------------------------------------------------------

/// Cohen's kappa over binary responses; 1 when expected agreement is 1.
double cohens_kappa(const std::vector<Choice>& x, const std::vector<Choice>& y);

struct AgreementMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> kappa;

    [[nodiscard]] nlohmann::json to_json() const;
};

using ResponseSet = std::map<std::string, Choice>;            // sample id -> choice
using ParticipantResponses = std::map<std::string, ResponseSet>;  // medium -> responses
using StudyResponses = std::map<std::string, ParticipantResponses>;  // annotator -> ...

/// Groups judgments by annotator and medium.
StudyResponses responses_by_participant(const std::vector<Sample2AFC>& samples);

/// Per medium pair, the mean over participants of their cross-medium kappa.
AgreementMatrix medium_agreement(const StudyResponses& study);

/// Pairwise kappa between participants within one medium, over shared samples.
AgreementMatrix rater_agreement(const StudyResponses& study, const std::string& medium);

// ---- correlation -------------------------------------------------------------------------

/// 1-based ranks; ties receive the average of the ranks they span.
std::vector<double> average_ranks(const std::vector<double>& v);
/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> plcc(const std::vector<double>& x, const std::vector<double>& y);
std::optional<double> srocc(const std::vector<double>& x, const std::vector<double>& y);

// ---- degradation sweep ------------------------------------------------------------------

/// Scores a candidate pair; `clean` is the undistorted source, which
/// reference-free scorers ignore.
using StereoScorer = std::function<double(const StereoImage& candidate, const StereoImage& clean)>;
using MonoScorer = std::function<double(const ImagePlane& view)>;

struct SweepPoint {
    double strength = 0.0;
    double mean_score = 0.0;
    double std_score = 0.0;
    std::size_t images = 0;
};

struct SweepCurve {
    DistortionKind kind = DistortionKind::gaussian_white_noise;
    std::vector<SweepPoint> points;
    /// Spearman correlation between strength and mean score.
    std::optional<double> monotonicity;

    [[nodiscard]] nlohmann::json to_json() const;
    /// strength,mean_score,std_score
    [[nodiscard]] std::string to_csv() const;
};

SweepCurve degradation_sweep(const std::vector<StereoImage>& images, DistortionKind kind,
                             const std::vector<double>& strengths, const StereoScorer& scorer,
                             std::uint64_t seed = 0,
                             const DistortionTable& table = DistortionTable::builtin());

/// Reference scorer: mean absolute deviation of the candidate from the clean pair.
double noise_energy_score(const StereoImage& candidate, const StereoImage& clean);

// ---- human alignment ---------------------------------------------------------------------

struct AlignmentScore {
    double majority = 0.0;
    double proportional = 0.0;
};

/// `votes[i][k]` counts human votes for alternative k of sample i;
/// `model_choice[i]` is the model's 0-based pick. A tied plurality scores 0.
AlignmentScore alignment(const std::vector<std::vector<int>>& votes,
                         const std::vector<int>& model_choice);

// ---- mono baseline --------------------------------------------------------------------

/// Mean of a single-image scorer over both views.
double mono_iqa_baseline(const StereoImage& stereo, const MonoScorer& scorer);

}  // namespace sqoe
