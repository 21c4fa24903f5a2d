#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace vicsfm {

struct Mesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<Eigen::Vector3d> normals;  // unit, outward (toward lower density)
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<std::uint8_t, 3>> colors;  // per vertex

    /// V - E + F with E counted over unique undirected edges.
    long euler_characteristic() const;
};

struct MeshingOptions {
    /// Iso level as an absolute density, or <= 0 to pick half the mean
    /// positive node density automatically.
    double iso = 0.0;
    int smoothing_passes = 2;
    int margin_voxels = 3;  // empty border so the surface always closes
};

/// Surface extraction from a point cloud: trilinear splat onto a voxel-node
/// density grid, small-kernel Gaussian smoothing, then iso-surface extraction
/// over a 6-tetrahedra decomposition of each cell with interpolated,
/// edge-welded vertices; only the largest connected component is kept.
/// Requires >= 50 points and a positive voxel size; throws MeshingError when
/// the grid never crosses the iso level.
Mesh mesh_from_points(std::span<const Eigen::Vector3d> points, double voxel_size,
                      const MeshingOptions& opts = {});

/// Binary little-endian PLY (vertex: x,y,z,nx,ny,nz float32 + r,g,b uchar;
/// face: uchar count + int32 indices).
void save_mesh_ply(const Mesh& mesh, const std::filesystem::path& path);

/// Reads meshes in the exact layout save_mesh_ply writes.
Mesh load_mesh_ply(const std::filesystem::path& path);

}  // namespace vicsfm
