// SPDX-License-Identifier: Apache-2.0

#include "sqoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "sqoe/error.hpp"
#include "sqoe/rng.hpp"

namespace sqoe {

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

ClassAccuracy& bucket(SplitAccuracyReport& r, SplitClass c) {
    switch (c) {
        case SplitClass::ambiguous_3_2: return r.split_3_2;
        case SplitClass::majority_4_1: return r.split_4_1;
        case SplitClass::unanimous_5_0: return r.split_5_0;
        case SplitClass::other: break;
    }
    return r.other;
}

bool matches(Majority m, Choice c) {
    return (m == Majority::A && c == Choice::A) || (m == Majority::B && c == Choice::B);
}

}  // namespace

// ---- consensus-split accuracy ----------------------------------------------------------

std::optional<double> SplitAccuracyReport::acc_total() const {
    const auto n = split_3_2.count + split_4_1.count + split_5_0.count;
    if (n == 0) {
        return std::nullopt;
    }
    const auto k = split_3_2.correct + split_4_1.correct + split_5_0.correct;
    return static_cast<double>(k) / static_cast<double>(n);
}

nlohmann::json SplitAccuracyReport::to_json() const {
    auto counts = [](const ClassAccuracy& c) {
        return nlohmann::json{{"count", c.count}, {"correct", c.correct}};
    };
    return {{"acc_3_2", optional_json(acc_3_2())},
            {"acc_4_1", optional_json(acc_4_1())},
            {"acc_5_0", optional_json(acc_5_0())},
            {"acc_total", optional_json(acc_total())},
            {"acc_other", optional_json(other.accuracy())},
            {"counts",
             {{"3_2", counts(split_3_2)},
              {"4_1", counts(split_4_1)},
              {"5_0", counts(split_5_0)},
              {"other", counts(other)}}}};
}

std::string SplitAccuracyReport::to_csv() const {
    std::ostringstream out;
    out << "class,count,correct,accuracy\n";
    auto row = [&](const char* name, std::size_t count, std::size_t correct,
                   const std::optional<double>& acc) {
        out << name << ',' << count << ',' << correct << ',';
        if (acc) {
            out << *acc;
        }
        out << '\n';
    };
    row("3_2", split_3_2.count, split_3_2.correct, acc_3_2());
    row("4_1", split_4_1.count, split_4_1.correct, acc_4_1());
    row("5_0", split_5_0.count, split_5_0.correct, acc_5_0());
    row("other", other.count, other.correct, other.accuracy());
    row("total", split_3_2.count + split_4_1.count + split_5_0.count,
        split_3_2.correct + split_4_1.correct + split_5_0.correct, acc_total());
    return out.str();
}

SplitAccuracyReport accuracy_by_split(const std::vector<ConsensusLabel>& labels,
                                      const std::vector<Choice>& predictions) {
    require(labels.size() == predictions.size(), ErrorKind::dimension_mismatch,
            "accuracy_by_split: " + std::to_string(labels.size()) + " labels but " +
                std::to_string(predictions.size()) + " predictions");
    SplitAccuracyReport r;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& b = bucket(r, labels[i].split_class);
        b.count += 1;
        b.correct += matches(labels[i].majority, predictions[i]) ? 1 : 0;
    }
    return r;
}

SplitAccuracyReport accuracy_by_split(const std::vector<Sample2AFC>& samples,
                                      const std::map<std::string, Choice>& predictions) {
    std::vector<ConsensusLabel> labels;
    std::vector<Choice> preds;
    for (const auto& s : samples) {
        const auto it = predictions.find(s.sample_id);
        require(it != predictions.end(), ErrorKind::invalid_argument,
                "no prediction for sample '" + s.sample_id + "'");
        labels.push_back(consensus(s));
        preds.push_back(it->second);
    }
    require(predictions.size() == samples.size(), ErrorKind::invalid_argument,
            "predictions reference samples that are not in the evaluation set");
    return accuracy_by_split(labels, preds);
}

std::vector<std::uint64_t> repeated_split_seeds(std::uint64_t base_seed, int k) {
    require(k >= 1, ErrorKind::invalid_argument, "need at least one split");
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < k; ++i) {
        seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
    }
    return seeds;
}

RepeatedSplitSummary repeated_split_evaluation(
    const std::vector<std::string>& ids, std::uint64_t base_seed, int k,
    const std::function<SplitAccuracyReport(const DatasetSplit&)>& evaluate) {
    RepeatedSplitSummary summary;
    summary.seeds = repeated_split_seeds(base_seed, k);
    for (const auto seed : summary.seeds) {
        summary.runs.push_back(evaluate(partition(ids, seed)));
    }
    return summary;
}

nlohmann::json RepeatedSplitSummary::to_json() const {
    nlohmann::json j = {{"splits", runs.size()}, {"seeds", seeds}};
    nlohmann::json per_run = nlohmann::json::array();
    for (const auto& r : runs) {
        per_run.push_back(r.to_json());
    }
    j["runs"] = per_run;
    using Getter = std::optional<double> (SplitAccuracyReport::*)() const;
    const std::pair<const char*, Getter> keys[] = {
        {"acc_3_2", &SplitAccuracyReport::acc_3_2},
        {"acc_4_1", &SplitAccuracyReport::acc_4_1},
        {"acc_5_0", &SplitAccuracyReport::acc_5_0},
        {"acc_total", &SplitAccuracyReport::acc_total}};
    for (const auto& [name, get] : keys) {
        std::vector<double> v;
        for (const auto& r : runs) {
            if (auto a = (r.*get)()) {
                v.push_back(*a);
            }
        }
        if (v.empty()) {
            j[name] = {{"mean", nullptr}, {"std", nullptr}, {"n", 0}};
            continue;
        }
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
        }
        const nlohmann::json sd =
            v.size() > 1 ? nlohmann::json(std::sqrt(ss / static_cast<double>(v.size() - 1)))
                         : nlohmann::json(nullptr);
        j[name] = {{"mean", mean}, {"std", sd}, {"n", v.size()}};
    }
    return j;
}

// ---- agreement ---------------------------------------------------------------------------

double cohens_kappa(const std::vector<Choice>& x, const std::vector<Choice>& y) {
    require(x.size() == y.size(), ErrorKind::dimension_mismatch,
            "cohens_kappa: response lists differ in length");
    require(!x.empty(), ErrorKind::invalid_argument, "cohens_kappa: no responses");
    // Integer counts keep the result a single rounded division:
    // kappa = (n*agree - E) / (n^2 - E), E = n^2 * p_e.
    const auto n = static_cast<std::int64_t>(x.size());
    std::int64_t agree = 0;
    std::int64_t xa = 0;
    std::int64_t ya = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        agree += x[i] == y[i] ? 1 : 0;
        xa += x[i] == Choice::A ? 1 : 0;
        ya += y[i] == Choice::A ? 1 : 0;
    }
    const std::int64_t expected = xa * ya + (n - xa) * (n - ya);
    if (expected == n * n) {
        return 1.0;
    }
    return static_cast<double>(n * agree - expected) / static_cast<double>(n * n - expected);
}

nlohmann::json AgreementMatrix::to_json() const {
    return {{"labels", labels}, {"kappa", kappa}};
}

StudyResponses responses_by_participant(const std::vector<Sample2AFC>& samples) {
    StudyResponses out;
    for (const auto& s : samples) {
        for (const auto& j : s.judgments) {
            auto& set = out[j.annotator_id][std::string(to_string(j.medium))];
            require(set.emplace(s.sample_id, j.choice).second, ErrorKind::invalid_argument,
                    "annotator '" + j.annotator_id + "' judged sample '" + s.sample_id +
                        "' twice on one medium");
        }
    }
    return out;
}

namespace {

std::pair<std::vector<Choice>, std::vector<Choice>> align_responses(const ResponseSet& a,
                                                                    const ResponseSet& b) {
    std::pair<std::vector<Choice>, std::vector<Choice>> out;
    for (const auto& [id, choice] : a) {
        const auto it = b.find(id);
        if (it != b.end()) {
            out.first.push_back(choice);
            out.second.push_back(it->second);
        }
    }
    return out;
}

std::vector<std::vector<double>> unit_matrix(std::size_t n) {
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        m[i][i] = 1.0;
    }
    return m;
}

}  // namespace

AgreementMatrix medium_agreement(const StudyResponses& study) {
    std::set<std::string> media;
    for (const auto& [participant, by_medium] : study) {
        for (const auto& [medium, responses] : by_medium) {
            media.insert(medium);
        }
    }
    require(media.size() >= 2, ErrorKind::invalid_argument,
            "medium agreement needs responses on at least two mediums");
    AgreementMatrix m;
    m.labels.assign(media.begin(), media.end());
    m.kappa = unit_matrix(m.labels.size());
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        for (std::size_t k = i + 1; k < m.labels.size(); ++k) {
            double sum = 0.0;
            int n = 0;
            for (const auto& [participant, by_medium] : study) {
                const auto a = by_medium.find(m.labels[i]);
                const auto b = by_medium.find(m.labels[k]);
                if (a == by_medium.end() || b == by_medium.end()) {
                    continue;
                }
                require(a->second.size() == b->second.size() &&
                            std::equal(a->second.begin(), a->second.end(), b->second.begin(),
                                       [](const auto& p, const auto& q) { return p.first == q.first; }),
                        ErrorKind::invalid_argument,
                        "participant '" + participant + "' annotated different samples on " +
                            m.labels[i] + " and " + m.labels[k]);
                const auto [x, y] = align_responses(a->second, b->second);
                sum += cohens_kappa(x, y);
                ++n;
            }
            require(n > 0, ErrorKind::invalid_argument,
                    "no participant covers both " + m.labels[i] + " and " + m.labels[k]);
            m.kappa[i][k] = m.kappa[k][i] = sum / n;
        }
    }
    return m;
}

AgreementMatrix rater_agreement(const StudyResponses& study, const std::string& medium) {
    AgreementMatrix m;
    std::vector<const ResponseSet*> sets;
    for (const auto& [participant, by_medium] : study) {
        const auto it = by_medium.find(medium);
        if (it != by_medium.end()) {
            m.labels.push_back(participant);
            sets.push_back(&it->second);
        }
    }
    require(m.labels.size() >= 2, ErrorKind::invalid_argument,
            "rater agreement needs two participants on medium '" + medium + "'");
    m.kappa = unit_matrix(m.labels.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t k = i + 1; k < sets.size(); ++k) {
            const auto [x, y] = align_responses(*sets[i], *sets[k]);
            require(!x.empty(), ErrorKind::invalid_argument,
                    "participants '" + m.labels[i] + "' and '" + m.labels[k] +
                        "' share no samples");
            m.kappa[i][k] = m.kappa[k][i] = cohens_kappa(x, y);
        }
    }
    return m;
}

// ---- correlation -------------------------------------------------------------------------

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
            ++j;
        }
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_pair(const std::vector<double>& x, const std::vector<double>& y, const char* what) {
    require(x.size() == y.size(), ErrorKind::dimension_mismatch,
            std::string(what) + ": inputs differ in length");
    require(x.size() >= 3, ErrorKind::invalid_argument,
            std::string(what) + ": needs at least 3 points");
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(std::isfinite(x[i]) && std::isfinite(y[i]), ErrorKind::invalid_argument,
                std::string(what) + ": non-finite input");
    }
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nullopt;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

std::optional<double> plcc(const std::vector<double>& x, const std::vector<double>& y) {
    check_pair(x, y, "plcc");
    return pearson(x, y);
}

std::optional<double> srocc(const std::vector<double>& x, const std::vector<double>& y) {
    check_pair(x, y, "srocc");
    return pearson(average_ranks(x), average_ranks(y));
}

// ---- degradation sweep ------------------------------------------------------------------

nlohmann::json SweepCurve::to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points) {
        pts.push_back({{"strength", p.strength},
                       {"mean_score", p.mean_score},
                       {"std_score", p.std_score},
                       {"images", p.images}});
    }
    return {{"kind", to_string(kind)}, {"points", pts}, {"monotonicity", optional_json(monotonicity)}};
}

std::string SweepCurve::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "strength,mean_score,std_score\n";
    for (const auto& p : points) {
        out << p.strength << ',' << p.mean_score << ',' << p.std_score << '\n';
    }
    return out.str();
}

SweepCurve degradation_sweep(const std::vector<StereoImage>& images, DistortionKind kind,
                             const std::vector<double>& strengths, const StereoScorer& scorer,
                             std::uint64_t seed, const DistortionTable& table) {
    require(!images.empty(), ErrorKind::invalid_argument, "sweep needs at least one image");
    require(!strengths.empty(), ErrorKind::invalid_argument, "sweep needs at least one strength");
    require(std::is_sorted(strengths.begin(), strengths.end()), ErrorKind::invalid_argument,
            "sweep strengths must be sorted ascending");
    SweepCurve curve;
    curve.kind = kind;
    for (const double s : strengths) {
        std::vector<double> scores;
        scores.reserve(images.size());
        for (std::size_t i = 0; i < images.size(); ++i) {
            // One seed per image across strengths so only the severity changes.
            const auto spec = make_spec(kind, s, SidePolicy::both, mix_seed(seed, i), table);
            scores.push_back(scorer(apply_distortion(images[i], spec), images[i]));
        }
        const auto n = static_cast<double>(scores.size());
        const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : scores) {
            ss += (v - mean) * (v - mean);
        }
        curve.points.push_back({s, mean, std::sqrt(ss / n), scores.size()});
    }
    if (curve.points.size() >= 3) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& p : curve.points) {
            xs.push_back(p.strength);
            ys.push_back(p.mean_score);
        }
        curve.monotonicity = srocc(xs, ys);
    }
    return curve;
}

double noise_energy_score(const StereoImage& candidate, const StereoImage& clean) {
    return mean_abs_deviation(candidate, clean);
}

// ---- human alignment ---------------------------------------------------------------------

AlignmentScore alignment(const std::vector<std::vector<int>>& votes,
                         const std::vector<int>& model_choice) {
    require(votes.size() == model_choice.size(), ErrorKind::dimension_mismatch,
            "alignment: vote and choice counts differ");
    require(!votes.empty(), ErrorKind::invalid_argument, "alignment: no samples");
    double majority = 0.0;
    double proportional = 0.0;
    for (std::size_t i = 0; i < votes.size(); ++i) {
        const auto& v = votes[i];
        const int c = model_choice[i];
        require(c >= 0 && static_cast<std::size_t>(c) < v.size(), ErrorKind::invalid_argument,
                "alignment: choice index out of range at sample " + std::to_string(i));
        int total = 0;
        for (int x : v) {
            require(x >= 0, ErrorKind::invalid_argument, "alignment: negative vote count");
            total += x;
        }
        require(total > 0, ErrorKind::invalid_argument,
                "alignment: sample " + std::to_string(i) + " has no votes");
        const int top = *std::max_element(v.begin(), v.end());
        const auto holders = std::count(v.begin(), v.end(), top);
        majority += (holders == 1 && v[static_cast<std::size_t>(c)] == top) ? 1.0 : 0.0;
        proportional += static_cast<double>(v[static_cast<std::size_t>(c)]) / total;
    }
    const auto n = static_cast<double>(votes.size());
    return {majority / n, proportional / n};
}

// ---- mono baseline --------------------------------------------------------------------

double mono_iqa_baseline(const StereoImage& stereo, const MonoScorer& scorer) {
    return (scorer(stereo.left()) + scorer(stereo.right())) / 2.0;
}

}  // namespace sqoe
