#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vicsfm/reconstruction.hpp"

namespace vicsfm {

/// Plane {x : n.x + d = 0} with |n| = 1.
struct Plane {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;

    double signed_distance(const Eigen::Vector3d& x) const { return normal.dot(x) + offset; }
};

struct PlaneFit {
    Plane plane;
    std::vector<char> inliers;  // parallel to the input points
    int inlier_count = 0;
};

/// RANSAC plane fit: 3-point samples, |n.x + d| <= threshold inliers,
/// adaptive iteration count, then a least-squares refit (centroid +
/// smallest-covariance-eigenvector normal) over the consensus set. The refit
/// is kept only if it loses no inliers. Throws std::invalid_argument with
/// fewer than 3 points or an all-collinear input.
PlaneFit fit_plane_ransac(std::span<const Eigen::Vector3d> points, double threshold,
                          double confidence = 0.999, std::uint64_t seed = 0);

enum class PlaneCleanupMode {
    /// Remove points farther than the threshold from the dominant plane on
    /// the side opposite the point-cloud centroid (default).
    RemoveBeyondSignedDistance,
    /// Keep only points within the threshold of the plane (both sides).
    KeepNearPlane,
};

/// Dominant-plane outlier removal. The distance threshold is
/// threshold_factor times the bounding-box diagonal of the current cloud;
/// removed points take their observations with them, frame registrations are
/// untouched. Requires >= 3 points.
Reconstruction remove_outliers_plane(const Reconstruction& recon,
                                     PlaneCleanupMode mode =
                                         PlaneCleanupMode::RemoveBeyondSignedDistance,
                                     double threshold_factor = 0.5,
                                     double fit_threshold_factor = 0.1,
                                     std::uint64_t seed = 0);

}  // namespace vicsfm
