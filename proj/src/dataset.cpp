// SPDX-License-Identifier: Apache-2.0

#include "sqoe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "sqoe/error.hpp"
#include "sqoe/rng.hpp"
#include "sqoe/stereo.hpp"

namespace sqoe {

std::string_view to_string(Choice c) noexcept { return c == Choice::A ? "A" : "B"; }

Choice parse_choice(std::string_view s) {
    if (s == "A" || s == "a") {
        return Choice::A;
    }
    if (s == "B" || s == "b") {
        return Choice::B;
    }
    fail(ErrorKind::parse, "invalid choice '" + std::string(s) + "'");
}

std::string_view to_string(Medium m) noexcept {
    switch (m) {
        case Medium::vr_avp: return "vr_avp";
        case Medium::vr_quest: return "vr_quest";
        case Medium::anaglyph: return "anaglyph";
        case Medium::toggle: return "toggle";
        case Medium::synthetic_oracle: return "synthetic_oracle";
    }
    return "unknown";
}

Medium parse_medium(std::string_view s) {
    for (auto m : {Medium::vr_avp, Medium::vr_quest, Medium::anaglyph, Medium::toggle,
                   Medium::synthetic_oracle}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    fail(ErrorKind::parse, "invalid medium '" + std::string(s) + "'");
}

std::string format_timestamp(Timestamp t) {
    const auto secs = std::chrono::floor<std::chrono::seconds>(t);
    const auto ms = (t - secs).count();
    const std::time_t tt = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms));
    return buf;
}

Timestamp parse_timestamp(std::string_view s) {
    std::tm tm{};
    int ms = 0;
    const std::string str(s);
    const int n = std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &tm.tm_year, &tm.tm_mon,
                              &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms);
    require(n == 6 || n == 7, ErrorKind::parse, "invalid timestamp '" + str + "'");
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t tt = timegm(&tm);
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::from_time_t(tt)) +
           std::chrono::milliseconds(ms);
}

Timestamp now_utc() {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

void Sample2AFC::validate() const {
    require(variant_a.spec.kind != variant_b.spec.kind, ErrorKind::invalid_argument,
            "sample '" + sample_id + "': variants share distortion kind");
    require(variant_a.spec.side == side && variant_b.spec.side == side,
            ErrorKind::invalid_argument,
            "sample '" + sample_id + "': variant side policy differs from the sample side");
}

void to_json(nlohmann::json& j, const Judgment& judgment) {
    j = {{"annotator_id", judgment.annotator_id},
         {"choice", to_string(judgment.choice)},
         {"medium", to_string(judgment.medium)},
         {"timestamp", format_timestamp(judgment.timestamp)}};
}

void from_json(const nlohmann::json& j, Judgment& judgment) {
    judgment.annotator_id = j.at("annotator_id").get<std::string>();
    judgment.choice = parse_choice(j.at("choice").get<std::string>());
    judgment.medium = parse_medium(j.at("medium").get<std::string>());
    judgment.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
}

namespace {

nlohmann::json variant_json(const Variant& v) {
    return {{"spec", v.spec}, {"left", v.left_path}, {"right", v.right_path}};
}

Variant variant_from_json(const nlohmann::json& j) {
    Variant v;
    v.spec = j.at("spec").get<DistortionSpec>();
    v.left_path = j.at("left").get<std::string>();
    v.right_path = j.at("right").get<std::string>();
    return v;
}

}  // namespace

void to_json(nlohmann::json& j, const Sample2AFC& sample) {
    j = {{"schema_version", kManifestSchemaVersion},
         {"sample_id", sample.sample_id},
         {"base_source_id", sample.base_source_id},
         {"subset", sample.subset},
         {"side", to_string(sample.side)},
         {"variant_a", variant_json(sample.variant_a)},
         {"variant_b", variant_json(sample.variant_b)},
         {"judgments", sample.judgments}};
}

void from_json(const nlohmann::json& j, Sample2AFC& sample) {
    const int version = j.at("schema_version").get<int>();
    require(version == kManifestSchemaVersion, ErrorKind::parse,
            "unsupported manifest schema_version " + std::to_string(version));
    sample.sample_id = j.at("sample_id").get<std::string>();
    sample.base_source_id = j.at("base_source_id").get<std::string>();
    sample.subset = j.value("subset", std::string{});
    sample.side = parse_side_policy(j.at("side").get<std::string>());
    sample.variant_a = variant_from_json(j.at("variant_a"));
    sample.variant_b = variant_from_json(j.at("variant_b"));
    sample.judgments = j.at("judgments").get<std::vector<Judgment>>();
    sample.validate();
}

StereoImage load_variant(const Variant& variant, const std::filesystem::path& root) {
    if (variant.image) {
        return *variant.image;
    }
    return load_stereo(root / variant.left_path, root / variant.right_path);
}

// ---- consensus --------------------------------------------------------------------

std::string_view to_string(SplitClass c) noexcept {
    switch (c) {
        case SplitClass::unanimous_5_0: return "unanimous_5_0";
        case SplitClass::majority_4_1: return "majority_4_1";
        case SplitClass::ambiguous_3_2: return "ambiguous_3_2";
        case SplitClass::other: return "other";
    }
    return "unknown";
}

std::string_view to_string(Majority m) noexcept {
    switch (m) {
        case Majority::A: return "A";
        case Majority::B: return "B";
        case Majority::tie: return "tie";
    }
    return "unknown";
}

ConsensusWeights ConsensusWeights::from_json(const nlohmann::json& j) {
    ConsensusWeights w;
    w.unanimous_5_0 = j.value("5-0", w.unanimous_5_0);
    w.majority_4_1 = j.value("4-1", w.majority_4_1);
    w.ambiguous_3_2 = j.value("3-2", w.ambiguous_3_2);
    for (double v : {w.unanimous_5_0, w.majority_4_1, w.ambiguous_3_2}) {
        require(v > 0.0 && v <= 1.0, ErrorKind::invalid_argument,
                "consensus weights must lie in (0,1]");
    }
    return w;
}

ConsensusLabel consensus_from_votes(int votes_a, int votes_b, const ConsensusWeights& weights) {
    require(votes_a >= 0 && votes_b >= 0 && votes_a + votes_b > 0, ErrorKind::invalid_argument,
            "consensus needs at least one judgment");
    ConsensusLabel label;
    label.votes_a = votes_a;
    label.votes_b = votes_b;
    label.majority = votes_a > votes_b ? Majority::A
                     : votes_b > votes_a ? Majority::B
                                         : Majority::tie;
    const int hi = std::max(votes_a, votes_b);
    const int lo = std::min(votes_a, votes_b);
    if (hi == 5 && lo == 0) {
        label.split_class = SplitClass::unanimous_5_0;
        label.weight = weights.unanimous_5_0;
    } else if (hi == 4 && lo == 1) {
        label.split_class = SplitClass::majority_4_1;
        label.weight = weights.majority_4_1;
    } else if (hi == 3 && lo == 2) {
        label.split_class = SplitClass::ambiguous_3_2;
        label.weight = weights.ambiguous_3_2;
    } else {
        label.split_class = SplitClass::other;
        label.weight = static_cast<double>(hi) / static_cast<double>(hi + lo);
    }
    return label;
}

ConsensusLabel consensus(const Sample2AFC& sample, const ConsensusWeights& weights) {
    require(!sample.judgments.empty(), ErrorKind::invalid_argument,
            "sample '" + sample.sample_id + "' has no judgments");
    int a = 0;
    int b = 0;
    for (const auto& j : sample.judgments) {
        (j.choice == Choice::A ? a : b) += 1;
    }
    return consensus_from_votes(a, b, weights);
}

double ConsensusHistogram::fraction(SplitClass c) const {
    if (total == 0) {
        return 0.0;
    }
    const auto it = counts.find(c);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

nlohmann::json ConsensusHistogram::to_json() const {
    nlohmann::json j = {{"total", total}};
    for (auto c : {SplitClass::unanimous_5_0, SplitClass::majority_4_1, SplitClass::ambiguous_3_2,
                   SplitClass::other}) {
        const auto it = counts.find(c);
        j[std::string(to_string(c))] = {{"count", it == counts.end() ? 0 : it->second},
                                        {"fraction", fraction(c)}};
    }
    return j;
}

ConsensusHistogram consensus_histogram(const std::vector<Sample2AFC>& samples) {
    ConsensusHistogram h;
    for (const auto& s : samples) {
        if (s.judgments.empty()) {
            continue;
        }
        h.counts[consensus(s).split_class] += 1;
        h.total += 1;
    }
    return h;
}

// ---- splits --------------------------------------------------------------------------

namespace {

void cut(std::vector<std::string> ids, Rng& rng, DatasetSplit& out) {
    rng.shuffle(ids);
    const auto n = ids.size();
    const auto tenth = static_cast<std::size_t>(std::floor(static_cast<double>(n) * 0.1 + 0.5));
    const auto n_val = tenth;
    const auto n_test = tenth;
    const auto n_train = n - n_val - n_test;
    out.train_ids.insert(out.train_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val_ids.insert(out.val_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                       ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test_ids.insert(out.test_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
}

}  // namespace

DatasetSplit partition(std::vector<std::string> ids, std::uint64_t seed,
                       const std::map<std::string, std::string>* strata) {
    require(ids.size() >= 10, ErrorKind::invalid_argument,
            "partition needs at least 10 ids, got " + std::to_string(ids.size()));
    // Shuffle from a canonical order so the split depends only on the id set.
    std::sort(ids.begin(), ids.end());
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorKind::invalid_argument,
            "partition ids must be unique");

    DatasetSplit split;
    split.seed = seed;
    Rng rng(mix_seed(seed, 0x5917));
    if (strata == nullptr) {
        cut(std::move(ids), rng, split);
        return split;
    }
    std::map<std::string, std::vector<std::string>> groups;
    for (auto& id : ids) {
        const auto it = strata->find(id);
        groups[it == strata->end() ? std::string{} : it->second].push_back(std::move(id));
    }
    for (auto& [name, members] : groups) {
        cut(std::move(members), rng, split);
    }
    return split;
}

// ---- construction ------------------------------------------------------------------

std::string make_sample_id(const StereoImage& base, const DistortionSpec& spec_m,
                           const DistortionSpec& spec_n, std::uint64_t seed) {
    Fnv1a h;
    h.update(base.source_id());
    h.update_u64(static_cast<std::uint64_t>(base.width()));
    h.update_u64(static_cast<std::uint64_t>(base.height()));
    h.update(base.left().data().data(), base.left().data().size());
    h.update(base.right().data().data(), base.right().data().size());
    h.update(nlohmann::json(spec_m).dump());
    h.update(nlohmann::json(spec_n).dump());
    h.update_u64(seed);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.digest()));
    return buf;
}

Sample2AFC build_sample(const StereoImage& base, const DistortionSpec& spec_m,
                        const DistortionSpec& spec_n, std::uint64_t seed,
                        const std::filesystem::path& dataset_root) {
    auto pair = make_variant_pair(base, spec_m, spec_n, seed);
    Sample2AFC sample;
    sample.sample_id = make_sample_id(base, pair.spec_a, pair.spec_b, seed);
    sample.base_source_id = base.source_id();
    sample.side = pair.side;
    const std::string dir = "images/" + sample.sample_id + "/";
    sample.variant_a = Variant{pair.spec_a, dir + "a_L.png", dir + "a_R.png",
                               std::make_shared<const StereoImage>(std::move(pair.a))};
    sample.variant_b = Variant{pair.spec_b, dir + "b_L.png", dir + "b_R.png",
                               std::make_shared<const StereoImage>(std::move(pair.b))};
    if (!dataset_root.empty()) {
        for (const auto* v : {&sample.variant_a, &sample.variant_b}) {
            write_png(dataset_root / v->left_path, v->image->left());
            write_png(dataset_root / v->right_path, v->image->right());
        }
    }
    return sample;
}

std::vector<Sample2AFC> generate_samples(const std::vector<StereoImage>& sources,
                                         const GenerateOptions& options,
                                         const DistortionTable& table,
                                         const std::filesystem::path& dataset_root) {
    require(options.pool.size() >= 2, ErrorKind::invalid_argument,
            "distortion pool needs at least two kinds");
    require(options.min_strength >= 0.0 && options.max_strength <= 1.0 &&
                options.min_strength <= options.max_strength,
            ErrorKind::invalid_argument, "strength range must lie within [0,1]");
    std::vector<const StereoImage*> ordered;
    for (const auto& s : sources) {
        ordered.push_back(&s);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->source_id() < b->source_id(); });
    const std::size_t n = options.count == 0 ? ordered.size() : options.count;
    require(n <= ordered.size(), ErrorKind::invalid_argument,
            "requested " + std::to_string(n) + " samples but only " +
                std::to_string(ordered.size()) + " source pairs exist (each is used once)");

    Rng rng(mix_seed(options.seed, 0xda7a));
    std::vector<Sample2AFC> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto first = rng.below(options.pool.size());
        auto second = rng.below(options.pool.size() - 1);
        if (second >= first) {
            ++second;
        }
        const double s_m = rng.uniform(options.min_strength, options.max_strength);
        const double s_n = rng.uniform(options.min_strength, options.max_strength);
        const auto seed_m = rng.next_u64();
        const auto seed_n = rng.next_u64();
        const auto sample_seed = rng.next_u64();
        const auto spec_m = make_spec(options.pool[first], s_m, SidePolicy::both, seed_m, table);
        const auto spec_n = make_spec(options.pool[second], s_n, SidePolicy::both, seed_n, table);
        samples.push_back(build_sample(*ordered[i], spec_m, spec_n, sample_seed, dataset_root));
    }
    return samples;
}

std::vector<Judgment> oracle_judgments(const StereoImage& clean, const Sample2AFC& sample,
                                       const std::filesystem::path& image_root, int votes,
                                       double temperature, std::uint64_t seed) {
    require(votes >= 1, ErrorKind::invalid_argument, "oracle needs at least one vote");
    require(temperature >= 0.0, ErrorKind::invalid_argument, "temperature must be >= 0");
    const double da = mean_abs_deviation(load_variant(sample.variant_a, image_root), clean);
    const double db = mean_abs_deviation(load_variant(sample.variant_b, image_root), clean);
    const double p_a = temperature == 0.0 ? (da <= db ? 1.0 : 0.0)
                                          : 1.0 / (1.0 + std::exp(-(db - da) / temperature));
    Rng rng(mix_seed(seed, 0x0ac1e));
    std::vector<Judgment> out;
    for (int k = 0; k < votes; ++k) {
        Judgment j;
        j.annotator_id = "oracle-" + std::to_string(k);
        j.choice = rng.uniform() < p_a ? Choice::A : Choice::B;
        j.medium = Medium::synthetic_oracle;
        j.timestamp = Timestamp{};
        out.push_back(j);
    }
    return out;
}

// ---- persistence ---------------------------------------------------------------------

std::filesystem::path save_scope(const std::vector<Sample2AFC>& samples,
                                 const std::filesystem::path& dir) {
    validate_dataset(samples);
    std::filesystem::create_directories(dir);
    for (const auto& s : samples) {
        for (const auto* v : {&s.variant_a, &s.variant_b}) {
            if (v->image && !std::filesystem::exists(dir / v->left_path)) {
                write_png(dir / v->left_path, v->image->left());
                write_png(dir / v->right_path, v->image->right());
            }
        }
    }
    const auto path = dir / kManifestName;
    const auto tmp = dir / (std::string(kManifestName) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::io, "cannot write '" + tmp.string() + "'");
        for (const auto& s : samples) {
            out << nlohmann::json(s).dump() << '\n';
        }
        require(out.good(), ErrorKind::io, "failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
    return path;
}

std::vector<Sample2AFC> load_scope(const std::filesystem::path& manifest_path,
                                   const LoadOptions& options) {
    std::ifstream in(manifest_path);
    require(in.good(), ErrorKind::io, "cannot open manifest '" + manifest_path.string() + "'");
    const auto root = manifest_path.parent_path();
    std::vector<Sample2AFC> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto where = manifest_path.string() + ":" + std::to_string(line_no) + ": ";
        try {
            samples.push_back(nlohmann::json::parse(line).get<Sample2AFC>());
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::parse, where + e.what());
        } catch (const Error& e) {
            fail(ErrorKind::parse, where + e.what());
        }
        if (options.verify_images) {
            const auto& s = samples.back();
            for (const auto* p : {&s.variant_a.left_path, &s.variant_a.right_path,
                                  &s.variant_b.left_path, &s.variant_b.right_path}) {
                require(std::filesystem::exists(root / *p), ErrorKind::not_found,
                        where + "missing image file '" + (root / *p).string() + "'");
            }
        }
    }
    validate_dataset(samples);
    return samples;
}

void validate_dataset(const std::vector<Sample2AFC>& samples) {
    std::set<std::string> ids;
    std::set<std::string> bases;
    for (const auto& s : samples) {
        s.validate();
        require(ids.insert(s.sample_id).second, ErrorKind::invalid_argument,
                "duplicate sample id '" + s.sample_id + "'");
        require(s.base_source_id.empty() || bases.insert(s.base_source_id).second,
                ErrorKind::invalid_argument,
                "base image '" + s.base_source_id + "' is used by more than one sample");
    }
}

}  // namespace sqoe
