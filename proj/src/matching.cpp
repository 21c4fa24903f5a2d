#include "vicsfm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vicsfm {

namespace {

double sq_distance(const Descriptor& a, const Descriptor& b) {
    double acc = 0.0;
    for (int i = 0; i < 128; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

// Nearest and second-nearest neighbor of `q` in `set`.
void two_nearest(const Descriptor& q, std::span<const Descriptor> set, int& best,
                 double& best_d2, double& second_d2) {
    best = -1;
    best_d2 = std::numeric_limits<double>::infinity();
    second_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < set.size(); ++j) {
        const double d2 = sq_distance(q, set[j]);
        if (d2 < best_d2) {
            second_d2 = best_d2;
            best_d2 = d2;
            best = static_cast<int>(j);
        } else if (d2 < second_d2) {
            second_d2 = d2;
        }
    }
}

}  // namespace

std::vector<Match> match_exhaustive(std::span<const Descriptor> a, std::span<const Descriptor> b,
                                    double ratio) {
    if (ratio <= 0.0 || ratio >= 1.0)
        throw std::invalid_argument("match_exhaustive: ratio must be in (0,1)");
    std::vector<Match> matches;
    if (a.empty() || b.empty()) return matches;

    // Ratio-tested nearest neighbors in both directions; a pair survives only
    // when it is mutual, which keeps the result one-to-one and symmetric.
    const auto directed = [ratio](std::span<const Descriptor> from,
                                  std::span<const Descriptor> to) {
        std::vector<int> nn(from.size(), -1);
        std::vector<double> nn_d2(from.size(), 0.0);
        for (std::size_t i = 0; i < from.size(); ++i) {
            int best;
            double d2, second;
            two_nearest(from[i], to, best, d2, second);
            // The ratio test is waived when no second candidate exists.
            if (to.size() >= 2 && !(std::sqrt(d2) < ratio * std::sqrt(second))) continue;
            nn[i] = best;
            nn_d2[i] = d2;
        }
        return std::pair(std::move(nn), std::move(nn_d2));
    };

    const auto [fwd, fwd_d2] = directed(a, b);
    const auto [bwd, bwd_d2] = directed(b, a);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int j = fwd[i];
        if (j < 0 || bwd[j] != static_cast<int>(i)) continue;
        matches.push_back({static_cast<int>(i), j, std::sqrt(fwd_d2[i])});
    }
    return matches;  // already sorted by index_a by construction
}

std::vector<Descriptor> descriptors_of(const std::vector<Feature>& features) {
    std::vector<Descriptor> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.descriptor);
    return out;
}

std::vector<Match> match_features(const std::vector<Feature>& a, const std::vector<Feature>& b,
                                  double ratio) {
    const auto da = descriptors_of(a);
    const auto db = descriptors_of(b);
    return match_exhaustive(da, db, ratio);
}

double average_feature_count(const std::vector<std::size_t>& set_sizes) {
    if (set_sizes.empty())
        throw std::invalid_argument("average_feature_count: empty sequence");
    double sum = 0.0;
    for (std::size_t s : set_sizes) sum += static_cast<double>(s);
    return sum / static_cast<double>(set_sizes.size());
}

}  // namespace vicsfm
