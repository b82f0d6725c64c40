// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations of the evaluation metrics, written
// without reuse of the library code, plus random fixture generators.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sqoe/dataset.hpp"
#include "sqoe/rng.hpp"

namespace sqoe::oracle {

/// Kappa from the full 2x2 contingency table, kept in integers until the end.
inline double kappa(const std::vector<Choice>& x, const std::vector<Choice>& y) {
    std::int64_t table[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < x.size(); ++i) {
        ++table[x[i] == Choice::A ? 0 : 1][y[i] == Choice::A ? 0 : 1];
    }
    const std::int64_t n = table[0][0] + table[0][1] + table[1][0] + table[1][1];
    std::int64_t expected = 0;
    for (int k = 0; k < 2; ++k) {
        const std::int64_t row = table[k][0] + table[k][1];
        const std::int64_t col = table[0][k] + table[1][k];
        expected += row * col;
    }
    const std::int64_t observed = table[0][0] + table[1][1];
    if (expected == n * n) {
        return 1.0;
    }
    return static_cast<double>(n * observed - expected) / static_cast<double>(n * n - expected);
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
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
    return sxy / std::sqrt(sxx * syy);
}

/// Rank by counting: 1 + #smaller + half the number of other equal values.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double smaller = 0.0;
        double equal = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            smaller += v[j] < v[i] ? 1.0 : 0.0;
            equal += (j != i && v[j] == v[i]) ? 1.0 : 0.0;
        }
        r[i] = 1.0 + smaller + equal / 2.0;
    }
    return r;
}

inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

struct ClassTally {
    std::size_t count[3] = {0, 0, 0};  // 3-2, 4-1, 5-0
    std::size_t correct[3] = {0, 0, 0};
    std::size_t other_count = 0;
    std::size_t other_correct = 0;
};

inline ClassTally split_tally(const std::vector<std::pair<int, int>>& votes,
                              const std::vector<Choice>& predictions) {
    ClassTally t;
    for (std::size_t i = 0; i < votes.size(); ++i) {
        const auto [a, b] = votes[i];
        const bool hit = (a > b && predictions[i] == Choice::A) || (b > a && predictions[i] == Choice::B);
        if (a + b == 5) {
            const int cls = std::max(a, b) - 3;
            ++t.count[cls];
            t.correct[cls] += hit ? 1 : 0;
        } else {
            ++t.other_count;
            t.other_correct += hit ? 1 : 0;
        }
    }
    return t;
}

struct AlignmentPair {
    double majority = 0.0;
    double proportional = 0.0;
};

inline AlignmentPair alignment(const std::vector<std::vector<int>>& votes, const std::vector<int>& choice) {
    AlignmentPair out;
    for (std::size_t i = 0; i < votes.size(); ++i) {
        int total = 0;
        for (int v : votes[i]) {
            total += v;
        }
        // The pick is the plurality when it beats every other option strictly.
        bool strict_best = true;
        for (std::size_t k = 0; k < votes[i].size(); ++k) {
            if (static_cast<int>(k) != choice[i] && votes[i][k] >= votes[i][static_cast<std::size_t>(choice[i])]) {
                strict_best = false;
            }
        }
        out.majority += strict_best ? 1.0 : 0.0;
        out.proportional += static_cast<double>(votes[i][static_cast<std::size_t>(choice[i])]) / total;
    }
    out.majority /= static_cast<double>(votes.size());
    out.proportional /= static_cast<double>(votes.size());
    return out;
}

// ---- fixtures ---------------------------------------------------------------------

inline std::vector<Choice> random_choices(std::size_t n, Rng& rng, double p_a) {
    std::vector<Choice> out(n);
    for (auto& c : out) {
        c = rng.bernoulli(p_a) ? Choice::A : Choice::B;
    }
    return out;
}

/// Small integer-valued scores so that ties are frequent.
inline std::vector<double> random_scores(std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    const auto levels = 2 + rng.below(8);
    for (auto& v : out) {
        v = static_cast<double>(rng.below(levels)) * 0.25 - 1.0;
    }
    return out;
}

/// Mostly five-vote splits, sometimes other totals (including ties).
inline std::pair<int, int> random_votes(Rng& rng) {
    const int total = rng.bernoulli(0.8) ? 5 : static_cast<int>(rng.below(8)) + 1;
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(total) + 1));
    return {a, total - a};
}

}  // namespace sqoe::oracle
