#pragma once

#include <filesystem>
#include <map>
#include <utility>

#include "vicsfm/image.hpp"
#include "vicsfm/meshing.hpp"
#include "vicsfm/reconstruction.hpp"

namespace vicsfm {

/// Per-vertex coloring from registered views. Each vertex takes the color of
/// the frame with the most frontal unoccluded view of it (largest |cos|
/// between the viewing ray and the vertex normal, occlusion tested by
/// ray-mesh intersection). Vertices no frame sees stay gray (128,128,128).
/// Frames without an entry in `images` are skipped; throws TexturingError
/// when the reconstruction has no registered frames.
Mesh texture_mesh(const Mesh& mesh, const Reconstruction& recon,
                  const std::map<FrameId, RgbImage>& images);

/// Projects one frame's image onto the mesh: overwrites the colors of every
/// vertex visible from that frame, leaves the rest untouched, and returns the
/// recolored mesh together with the frame's pose. Throws LocalizationError
/// when the frame is not registered.
std::pair<Mesh, Pose> localize_frame(const Reconstruction& recon, const Mesh& mesh,
                                     FrameId frame, const RgbImage& image);

/// Writes the mesh plus a 5-vertex camera-frustum marker (apex at the camera
/// center, four corner rays, colored blue) as binary PLY. frustum_depth <= 0
/// picks a depth proportional to the mesh extent.
void save_localization_ply(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& intr,
                           int image_width, int image_height,
                           const std::filesystem::path& path, double frustum_depth = 0.0);

}  // namespace vicsfm
