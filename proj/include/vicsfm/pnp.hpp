#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vicsfm/camera.hpp"

namespace vicsfm {

/// Minimal absolute-pose solver from three 3D points and their unit bearing
/// vectors in the camera frame. Returns up to four world-to-camera poses.
std::vector<Pose> solve_p3p(const std::array<Eigen::Vector3d, 3>& points,
                            const std::array<Eigen::Vector3d, 3>& bearings);

struct PnpResult {
    Pose pose;
    std::vector<char> inlier_mask;  // parallel to the input correspondences
    int inlier_count = 0;
};

/// RANSAC over P3P samples (a fourth point disambiguates each minimal
/// solution), followed by Levenberg-Marquardt refinement of the winning pose
/// on its inliers. `threshold` is in pixels. Requires >= 4 correspondences;
/// returns nullopt when no hypothesis reaches 4 inliers.
std::optional<PnpResult> solve_pnp_ransac(std::span<const Eigen::Vector3d> points3d,
                                          std::span<const Eigen::Vector2d> pixels,
                                          const CameraIntrinsics& intr,
                                          double threshold = 4.0,
                                          double confidence = 0.999,
                                          uint64_t seed = 0);

/// Pose-only LM on the given correspondences (squared pixel error, no robust
/// loss). Exposed for reuse by the incremental pipeline.
Pose refine_pose(const CameraIntrinsics& intr, const Pose& initial,
                 std::span<const Eigen::Vector3d> points3d,
                 std::span<const Eigen::Vector2d> pixels, int iterations = 20);

}  // namespace vicsfm
