#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "vicsfm/camera.hpp"

namespace vicsfm {

/// A correspondence in normalized image coordinates (x/z, y/z).
struct NormalizedPair {
    Eigen::Vector2d a;
    Eigen::Vector2d b;
};

struct EssentialResult {
    Eigen::Matrix3d E;
    std::vector<bool> inliers;
    int inlier_count = 0;
};

/// Robust 8-point essential matrix estimation. Minimal samples of 8, rank-2
/// enforcement by zeroing the smallest singular value, Sampson-distance
/// inlier classification, adaptive iteration count from the confidence, and
/// a final refit on all inliers. Deterministic for a fixed seed. Returns
/// nullopt with fewer than 8 correspondences or when no model reaches 8
/// inliers.
std::optional<EssentialResult> estimate_essential_ransac(const std::vector<NormalizedPair>& pairs,
                                                         double threshold, double confidence,
                                                         std::uint64_t seed);

/// Picks the one of the four (R, t) decompositions of E with the most
/// points in front of both cameras. The translation is unit norm. Returns
/// nullopt on a cheirality tie or when no candidate has support.
std::optional<Pose> decompose_essential(const Eigen::Matrix3d& E,
                                        const std::vector<NormalizedPair>& pairs);

/// Sampson distance of a correspondence under E, in normalized units.
double sampson_distance(const Eigen::Matrix3d& E, const NormalizedPair& pair);

/// Two-view DLT triangulation in pixel coordinates. Rejects (nullopt) points
/// with non-positive depth in either view or a parallax angle below
/// min_parallax_deg.
std::optional<Eigen::Vector3d> triangulate_dlt(const Pose& pose_a, const Pose& pose_b,
                                               const CameraIntrinsics& intr,
                                               const Eigen::Vector2d& pixel_a,
                                               const Eigen::Vector2d& pixel_b,
                                               double min_parallax_deg = 0.5);

/// N-view DLT on normalized coordinates. Same rejection rules; the parallax
/// test uses the widest pair of rays.
std::optional<Eigen::Vector3d> triangulate_nview(
    const std::vector<Pose>& poses, const std::vector<Eigen::Vector2d>& normalized,
    double min_parallax_deg = 0.5);

}  // namespace vicsfm
