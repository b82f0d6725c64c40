// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "sqoe/distortion.hpp"
#include "sqoe/image.hpp"

namespace sqoe {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr std::string_view kManifestName = "scope_manifest.jsonl";

enum class Choice { A, B };
enum class Medium { vr_avp, vr_quest, anaglyph, toggle, synthetic_oracle };

std::string_view to_string(Choice c) noexcept;
Choice parse_choice(std::string_view s);
inline Choice flip(Choice c) noexcept { return c == Choice::A ? Choice::B : Choice::A; }
std::string_view to_string(Medium m) noexcept;
Medium parse_medium(std::string_view s);

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
/// ISO-8601 UTC with millisecond precision, e.g. 2024-05-01T12:00:00.000Z.
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view s);
Timestamp now_utc();

struct Judgment {
    std::string annotator_id;
    Choice choice = Choice::A;
    Medium medium = Medium::vr_avp;
    Timestamp timestamp{};

    friend bool operator==(const Judgment&, const Judgment&) = default;
};

/// One distorted version of the base image.
struct Variant {
    DistortionSpec spec;
    std::string left_path;   // relative to the dataset root
    std::string right_path;
    /// In-memory pixels when available (freshly built samples); not serialized.
    std::shared_ptr<const StereoImage> image;

    friend bool operator==(const Variant& a, const Variant& b) {
        return a.spec == b.spec && a.left_path == b.left_path && a.right_path == b.right_path;
    }
};

struct Sample2AFC {
    std::string sample_id;
    std::string base_source_id;
    std::string subset;  // optional stratum label, e.g. "holopix" or "multiview"
    Variant variant_a;
    Variant variant_b;
    SidePolicy side = SidePolicy::both;
    std::vector<Judgment> judgments;

    /// Throws unless kinds differ and both specs carry the sample-level side.
    void validate() const;

    friend bool operator==(const Sample2AFC&, const Sample2AFC&) = default;
};

void to_json(nlohmann::json& j, const Judgment& judgment);
void from_json(const nlohmann::json& j, Judgment& judgment);
void to_json(nlohmann::json& j, const Sample2AFC& sample);
void from_json(const nlohmann::json& j, Sample2AFC& sample);

/// Pixels of a variant: the in-memory copy if present, else read from `root`.
StereoImage load_variant(const Variant& variant, const std::filesystem::path& root);

// ---- consensus ----------------------------------------------------------------

enum class SplitClass { unanimous_5_0, majority_4_1, ambiguous_3_2, other };
enum class Majority { A, B, tie };

std::string_view to_string(SplitClass c) noexcept;
std::string_view to_string(Majority m) noexcept;

/// Training weight per five-vote consensus class. Other vote totals use the
/// majority share max(a,b)/(a+b), which reproduces the defaults at five votes.
struct ConsensusWeights {
    double unanimous_5_0 = 1.0;
    double majority_4_1 = 0.8;
    double ambiguous_3_2 = 0.6;

    static ConsensusWeights from_json(const nlohmann::json& j);
};

struct ConsensusLabel {
    int votes_a = 0;
    int votes_b = 0;
    SplitClass split_class = SplitClass::other;
    Majority majority = Majority::tie;
    double weight = 1.0;

    friend bool operator==(const ConsensusLabel&, const ConsensusLabel&) = default;
};

ConsensusLabel consensus_from_votes(int votes_a, int votes_b, const ConsensusWeights& weights = {});
ConsensusLabel consensus(const Sample2AFC& sample, const ConsensusWeights& weights = {});

struct ConsensusHistogram {
    std::map<SplitClass, std::size_t> counts;
    std::size_t total = 0;

    [[nodiscard]] double fraction(SplitClass c) const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Samples without judgments are skipped.
ConsensusHistogram consensus_histogram(const std::vector<Sample2AFC>& samples);

// ---- splits ---------------------------------------------------------------------

struct DatasetSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;
    std::array<double, 3> fractions = {0.8, 0.1, 0.1};
};

/// Seeded shuffle, then validation and test each take round(0.1 N) ids and
/// training keeps the rest. With `strata`, each stratum is cut separately.
DatasetSplit partition(std::vector<std::string> ids, std::uint64_t seed,
                       const std::map<std::string, std::string>* strata = nullptr);

// ---- construction and persistence ----------------------------------------------

/// Content hash over the base pixels, source id, both specs, and the seed.
std::string make_sample_id(const StereoImage& base, const DistortionSpec& spec_m,
                           const DistortionSpec& spec_n, std::uint64_t seed);

/// Builds both variants via make_variant_pair. When `dataset_root` is
/// non-empty the variant PNGs are written under images/<sample_id>/.
Sample2AFC build_sample(const StereoImage& base, const DistortionSpec& spec_m,
                        const DistortionSpec& spec_n, std::uint64_t seed,
                        const std::filesystem::path& dataset_root = {});

struct GenerateOptions {
    std::size_t count = 0;  // 0 = one sample per source
    std::uint64_t seed = 0;
    double min_strength = 0.2;
    double max_strength = 1.0;
    std::vector<DistortionKind> pool = dataset_pool_kinds();
};

/// Draws two distinct kinds and strengths per source (sources used once each,
/// in sorted source-id order) and builds the samples.
std::vector<Sample2AFC> generate_samples(const std::vector<StereoImage>& sources,
                                         const GenerateOptions& options,
                                         const DistortionTable& table,
                                         const std::filesystem::path& dataset_root);

/// Writes any in-memory variant images plus the manifest; returns its path.
std::filesystem::path save_scope(const std::vector<Sample2AFC>& samples,
                                 const std::filesystem::path& dir);

struct LoadOptions {
    bool verify_images = true;
};

std::vector<Sample2AFC> load_scope(const std::filesystem::path& manifest_path,
                                   const LoadOptions& options = {});

/// Simulated annotators for synthetic studies. Vote k picks A with probability
/// sigmoid((d_b - d_a) / temperature), where d is the mean absolute deviation
/// of a variant from `clean`; temperature 0 always picks the smaller deviation
/// (A on ties). Judgments use medium synthetic_oracle and a fixed timestamp so
/// manifests stay byte-reproducible.
std::vector<Judgment> oracle_judgments(const StereoImage& clean, const Sample2AFC& sample,
                                       const std::filesystem::path& image_root, int votes,
                                       double temperature, std::uint64_t seed);

/// Throws on duplicate sample ids or reused base images.
void validate_dataset(const std::vector<Sample2AFC>& samples);

}  // namespace sqoe
