#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vicsfm/camera.hpp"

namespace vicsfm {

using FrameId = int;
using PointId = int;

struct Observation {
    FrameId frame = 0;
    int feature = 0;  // feature index within the frame
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

struct PointTrack {
    Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
    std::array<std::uint8_t, 3> color = {200, 200, 200};
    std::vector<Observation> observations;
};

struct Frame {
    Pose pose;
    std::string name;
};

/// Sparse scene: shared intrinsics, registered frames, 3D points and the
/// observation tracks linking them. Invariants: every observation references
/// a registered frame, every point keeps >= 2 observations, and no
/// (frame, feature) pair appears twice.
struct Reconstruction {
    CameraIntrinsics intrinsics;
    int image_width = 0;
    int image_height = 0;
    std::map<FrameId, Frame> frames;
    std::map<PointId, PointTrack> points;

    std::size_t observation_count() const;
    /// Removes points with fewer than two observations and observations of
    /// unregistered frames; deduplicates (frame, feature) pairs.
    void prune();
    /// Checks the structural invariants; returns a description of the first
    /// violation, or nullopt when the reconstruction is consistent.
    std::optional<std::string> check_invariants() const;
};

struct ReprojectionStats {
    std::size_t count = 0;  // 0 flags an empty observation set
    double mean_px = 0.0;
    double rmse_px = 0.0;
    double max_px = 0.0;
    std::map<FrameId, double> per_frame_mean;
};

/// Reprojection-error statistics over all observations. Observations that
/// project behind the camera are counted with the image-diagonal as error.
ReprojectionStats reprojection_stats(const Reconstruction& recon);

/// JSON round trip of the full reconstruction.
void save_reconstruction_json(const Reconstruction& recon, const std::filesystem::path& path);
Reconstruction load_reconstruction_json(const std::filesystem::path& path);

/// Binary little-endian PLY point cloud (x, y, z, red, green, blue).
void save_point_cloud_ply(const Reconstruction& recon, const std::filesystem::path& path);

}  // namespace vicsfm
