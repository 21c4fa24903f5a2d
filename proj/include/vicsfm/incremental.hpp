#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vicsfm/bundle.hpp"
#include "vicsfm/matching.hpp"
#include "vicsfm/reconstruction.hpp"

namespace vicsfm {

using PairwiseMatches = std::map<std::pair<FrameId, FrameId>, std::vector<Match>>;

struct IncrementalOptions {
    double essential_threshold_factor = 4.0;  // Sampson threshold = factor / focal
    double pnp_threshold_px = 4.0;
    double obs_filter_px = 4.0;
    double min_point_angle_deg = 0.5;
    double min_init_median_angle_deg = 2.0;
    int min_init_matches = 20;
    int min_pnp_inliers = 6;
    int global_ba_interval = 10;  // frames between global adjustments
    int local_ba_window = 5;      // most recent frames left free in local BA
    bool self_calibrate = true;   // refine intrinsics during global BA
    double ransac_confidence = 0.999;
    std::uint64_t seed = 0;
    BundleOptions bundle;
};

/// Incremental structure from motion over per-frame keypoint pixels and
/// pairwise matches. Bootstraps from the two-view pair maximizing essential
/// inliers subject to a median triangulation angle gate, then alternates PnP
/// registration of the frame seeing the most triangulated points, track
/// triangulation, reprojection-based observation filtering, local bundle
/// adjustment each frame and global adjustment on a fixed interval; stops
/// when no remaining frame reaches the PnP inlier minimum. Tracks are built
/// by union-find over the match graph; tracks that revisit a frame are
/// dropped as inconsistent. Throws ReconstructionError when no valid
/// initial pair exists. Frame ids in the result are indices into
/// `keypoints`.
Reconstruction reconstruct_incremental(const std::vector<std::vector<Eigen::Vector2d>>& keypoints,
                                       const PairwiseMatches& matches,
                                       const CameraIntrinsics& intrinsics_seed, int image_width,
                                       int image_height, const IncrementalOptions& opts = {});

}  // namespace vicsfm
