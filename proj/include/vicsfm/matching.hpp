#pragma once

#include <span>
#include <vector>

#include "vicsfm/sift.hpp"

namespace vicsfm {

struct Match {
    int index_a = 0;
    int index_b = 0;
    double distance = 0.0;  // Euclidean descriptor distance

    bool operator==(const Match&) const = default;
};

/// Exhaustive nearest-neighbor matching with Lowe's ratio test and a mutual
/// cross-check. For each descriptor in a, the nearest and second-nearest in b
/// are found by Euclidean distance; the pair is kept when
/// nearest/second < ratio (the test is waived when b has a single candidate).
/// Cross-checking keeps only mutual nearest neighbors, so the result is
/// one-to-one. Sorted by index_a.
std::vector<Match> match_exhaustive(std::span<const Descriptor> a, std::span<const Descriptor> b,
                                    double ratio);

std::vector<Match> match_features(const std::vector<Feature>& a, const std::vector<Feature>& b,
                                  double ratio);

std::vector<Descriptor> descriptors_of(const std::vector<Feature>& features);

/// Arithmetic mean of per-image feature-set sizes. Throws
/// std::invalid_argument on an empty sequence.
double average_feature_count(const std::vector<std::size_t>& set_sizes);

}  // namespace vicsfm
