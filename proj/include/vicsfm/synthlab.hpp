#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "vicsfm/camera.hpp"
#include "vicsfm/image.hpp"
#include "vicsfm/matching.hpp"
#include "vicsfm/reconstruction.hpp"

namespace vicsfm {

struct SceneOptions {
    int image_width = 640;
    int image_height = 480;
    double focal = 420.0;
    double k1 = 0.0;
    double orbit_radius_frac = 0.35;  // camera orbit radius as a fraction of the semi-axes
    double sweep_degrees = 360.0;
    double texture_amplitude = 0.8;   // procedural texture contrast in [0,1]
    std::uint64_t texture_seed = 0;   // 0 derives one from the scene seed
    int n_spots = 256;
    double spot_radius_frac = 0.035;  // of the mean semi-axis
};

/// One simulated feature measurement: the exact projection plus the noisy /
/// corrupted pixel actually "observed", with the corruption labeled.
struct TrackObservation {
    int point = 0;
    int frame = 0;
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();       // observed
    Eigen::Vector2d true_pixel = Eigen::Vector2d::Zero();  // exact projection
    bool outlier = false;
};

/// Ground-truth test scene: points on an ellipsoid inner surface, an interior
/// camera orbit looking outward at the wall, and exact projection tracks.
struct SyntheticScene {
    Eigen::Vector3d semi_axes = Eigen::Vector3d::Ones();
    CameraIntrinsics intrinsics;
    int image_width = 0;
    int image_height = 0;
    std::vector<Eigen::Vector3d> points;
    std::vector<Pose> poses;  // world-to-camera, one per frame
    std::uint64_t texture_seed = 0;
    double texture_amplitude = 0.8;
    std::vector<Eigen::Vector3d> spots;  // dark spot centers, on the surface
    double spot_radius = 0.1;
    std::vector<TrackObservation> tracks;

    double diameter() const { return 2.0 * semi_axes.maxCoeff(); }
};

/// Deterministic scene generator. Points are quasi-uniform on the ellipsoid
/// surface (Fibonacci directions with seeded jitter); cameras orbit the
/// interior looking outward; tracks record every in-frustum projection, with
/// Gaussian pixel noise and a Bernoulli(outlier_frac) fraction replaced by
/// far-off uniform pixels (labeled).
SyntheticScene make_scene(int n_points, int n_frames, const Eigen::Vector3d& semi_axes,
                          double noise_px, double outlier_frac, std::uint64_t seed,
                          const SceneOptions& opts = {});

/// Analytic per-pixel ray-ellipsoid rendering of one camera: value-noise plus
/// dark-spot solid texture on the wall, headlight shading, black background.
GrayImage render_view(const SyntheticScene& scene, const Pose& pose);
std::vector<GrayImage> render_views(const SyntheticScene& scene);

/// Bridges scene tracks to the reconstruction front-end: per-frame observed
/// pixel lists and the implied exact pairwise matches (shared point id).
std::vector<std::vector<Eigen::Vector2d>> track_pixels(const SyntheticScene& scene);
std::map<std::pair<FrameId, FrameId>, std::vector<Match>> tracks_to_matches(
    const SyntheticScene& scene);

struct SimilarityTransform {
    double scale = 1.0;
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double rmse = 0.0;  // post-alignment RMS distance, "to" units

    Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
        return scale * (rotation * x) + translation;
    }
};

/// Closed-form least-squares similarity aligning `from` onto `to`
/// (to ~ scale * R * from + t). Needs >= 3 points.
SimilarityTransform align_similarity(std::span<const Eigen::Vector3d> from,
                                     std::span<const Eigen::Vector3d> to);

/// Aligns reconstructed camera centers to the scene's ground-truth centers
/// (frames matched by id = scene pose index). Needs >= 3 registered frames.
SimilarityTransform align_to_scene(const Reconstruction& recon, const SyntheticScene& scene);

/// Ground-truth JSON (geometry, cameras, texture recipe; tracks omitted as
/// they are exactly reproducible from poses and points).
void save_scene_json(const SyntheticScene& scene, const std::filesystem::path& path);
SyntheticScene load_scene_json(const std::filesystem::path& path);

}  // namespace vicsfm
