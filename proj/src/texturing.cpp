#include "vicsfm/texturing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vicsfm/error.hpp"

namespace vicsfm {

namespace {

// Uniform-grid triangle index for segment occlusion queries.
class TriangleGrid {
public:
    TriangleGrid(const Mesh& mesh, int target_cells_per_axis = 48) : mesh_(mesh) {
        if (mesh.vertices.empty()) return;
        lo_ = hi_ = mesh.vertices[0];
        for (const auto& v : mesh.vertices) {
            lo_ = lo_.cwiseMin(v);
            hi_ = hi_.cwiseMax(v);
        }
        const Eigen::Vector3d extent = hi_ - lo_;
        cell_ = std::max(extent.maxCoeff() / target_cells_per_axis, 1e-12);
        lo_ -= Eigen::Vector3d::Constant(0.5 * cell_);
        for (int a = 0; a < 3; ++a)
            dims_[a] = std::max(1, static_cast<int>(std::ceil((hi_[a] - lo_[a]) / cell_)) + 1);
        cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
        for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
            Eigen::Vector3d tlo = mesh.vertices[mesh.triangles[t][0]];
            Eigen::Vector3d thi = tlo;
            for (int e = 1; e < 3; ++e) {
                tlo = tlo.cwiseMin(mesh.vertices[mesh.triangles[t][e]]);
                thi = thi.cwiseMax(mesh.vertices[mesh.triangles[t][e]]);
            }
            int c0[3], c1[3];
            cell_of(tlo, c0);
            cell_of(thi, c1);
            for (int z = c0[2]; z <= c1[2]; ++z)
                for (int y = c0[1]; y <= c1[1]; ++y)
                    for (int x = c0[0]; x <= c1[0]; ++x)
                        cells_[index(x, y, z)].push_back(t);
        }
        stamp_.assign(mesh.triangles.size(), 0);
    }

    /// True when any triangle not incident to `skip_vertex` blocks the open
    /// segment from `from` to `to`.
    bool segment_blocked(const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                         int skip_vertex) const {
        if (cells_.empty()) return false;
        ++query_;
        const Eigen::Vector3d dir = to - from;

        int c[3];
        cell_of(from, c);
        int cend[3];
        cell_of(to, cend);

        int step[3];
        double t_max[3], t_delta[3];
        for (int a = 0; a < 3; ++a) {
            if (dir[a] > 1e-15) {
                step[a] = 1;
                t_max[a] = ((lo_[a] + (c[a] + 1) * cell_) - from[a]) / dir[a];
                t_delta[a] = cell_ / dir[a];
            } else if (dir[a] < -1e-15) {
                step[a] = -1;
                t_max[a] = ((lo_[a] + c[a] * cell_) - from[a]) / dir[a];
                t_delta[a] = -cell_ / dir[a];
            } else {
                step[a] = 0;
                t_max[a] = std::numeric_limits<double>::infinity();
                t_delta[a] = std::numeric_limits<double>::infinity();
            }
        }

        while (true) {
            if (c[0] >= 0 && c[0] < dims_[0] && c[1] >= 0 && c[1] < dims_[1] && c[2] >= 0 &&
                c[2] < dims_[2]) {
                for (int t : cells_[index(c[0], c[1], c[2])]) {
                    if (stamp_[t] == query_) continue;
                    stamp_[t] = query_;
                    const auto& tri = mesh_.triangles[t];
                    if (skip_vertex >= 0 && (tri[0] == skip_vertex || tri[1] == skip_vertex ||
                                             tri[2] == skip_vertex))
                        continue;
                    if (segment_hits_triangle(from, dir, tri)) return true;
                }
            }
            if (c[0] == cend[0] && c[1] == cend[1] && c[2] == cend[2]) break;
            int axis = 0;
            if (t_max[1] < t_max[axis]) axis = 1;
            if (t_max[2] < t_max[axis]) axis = 2;
            if (t_max[axis] > 1.0 || step[axis] == 0) break;
            c[axis] += step[axis];
            t_max[axis] += t_delta[axis];
        }
        return false;
    }

private:
    void cell_of(const Eigen::Vector3d& p, int out[3]) const {
        for (int a = 0; a < 3; ++a) {
            out[a] = static_cast<int>(std::floor((p[a] - lo_[a]) / cell_));
            out[a] = std::clamp(out[a], 0, dims_[a] - 1);
        }
    }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x;
    }

    bool segment_hits_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               const std::array<int, 3>& tri) const {
        const Eigen::Vector3d& a = mesh_.vertices[tri[0]];
        const Eigen::Vector3d e1 = mesh_.vertices[tri[1]] - a;
        const Eigen::Vector3d e2 = mesh_.vertices[tri[2]] - a;
        const Eigen::Vector3d p = dir.cross(e2);
        const double det = e1.dot(p);
        if (std::abs(det) < 1e-18) return false;
        const double inv = 1.0 / det;
        const Eigen::Vector3d s = origin - a;
        const double u = s.dot(p) * inv;
        if (u < 0.0 || u > 1.0) return false;
        const Eigen::Vector3d q = s.cross(e1);
        const double v = dir.dot(q) * inv;
        if (v < 0.0 || u + v > 1.0) return false;
        const double t = e2.dot(q) * inv;
        return t > 1e-6 && t < 1.0 - 1e-4;
    }

    const Mesh& mesh_;
    Eigen::Vector3d lo_ = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi_ = Eigen::Vector3d::Zero();
    double cell_ = 1.0;
    int dims_[3] = {1, 1, 1};
    std::vector<std::vector<int>> cells_;
    mutable std::vector<std::uint64_t> stamp_;
    mutable std::uint64_t query_ = 0;
};

std::optional<Eigen::Vector2i> visible_pixel(const CameraIntrinsics& intr, const Pose& pose,
                                             const Eigen::Vector3d& vertex, int width,
                                             int height, const TriangleGrid& grid,
                                             int vertex_id) {
    const auto pix = project(intr, pose, vertex);
    if (!pix) return std::nullopt;
    const int px = static_cast<int>(std::lround(pix->x()));
    const int py = static_cast<int>(std::lround(pix->y()));
    if (px < 0 || px >= width || py < 0 || py >= height) return std::nullopt;
    if (grid.segment_blocked(pose.center(), vertex, vertex_id)) return std::nullopt;
    return Eigen::Vector2i(px, py);
}

}  // namespace

Mesh texture_mesh(const Mesh& mesh, const Reconstruction& recon,
                  const std::map<FrameId, RgbImage>& images) {
    if (recon.frames.empty())
        throw TexturingError("texture_mesh: reconstruction has no registered frames");
    if (mesh.normals.size() != mesh.vertices.size())
        throw std::invalid_argument("texture_mesh: mesh is missing vertex normals");

    struct View {
        FrameId id;
        Pose pose;
        Eigen::Vector3d center;
        const RgbImage* image;
    };
    std::vector<View> views;
    for (const auto& [fid, frame] : recon.frames) {
        const auto it = images.find(fid);
        if (it == images.end() || !it->second.valid()) continue;
        views.push_back({fid, frame.pose, frame.pose.center(), &it->second});
    }

    Mesh out = mesh;
    out.colors.assign(out.vertices.size(), {128, 128, 128});
    if (views.empty()) return out;

    const TriangleGrid grid(mesh);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        double best_cos = -1.0;
        for (const auto& view : views) {
            const Eigen::Vector3d ray = mesh.vertices[v] - view.center;
            const double len = ray.norm();
            if (len < 1e-12) continue;
            const double frontality = std::abs(ray.dot(mesh.normals[v])) / len;
            if (frontality <= best_cos) continue;
            const auto px = visible_pixel(recon.intrinsics, view.pose, mesh.vertices[v],
                                          view.image->width, view.image->height, grid,
                                          static_cast<int>(v));
            if (!px) continue;
            best_cos = frontality;
            const std::uint8_t* rgb = view.image->pixel(px->x(), px->y());
            out.colors[v] = {rgb[0], rgb[1], rgb[2]};
        }
    }
    return out;
}

std::pair<Mesh, Pose> localize_frame(const Reconstruction& recon, const Mesh& mesh,
                                     FrameId frame, const RgbImage& image) {
    const auto it = recon.frames.find(frame);
    if (it == recon.frames.end())
        throw LocalizationError("localize_frame: frame " + std::to_string(frame) +
                                " is not registered");
    if (!image.valid()) throw std::invalid_argument("localize_frame: empty image");

    const Pose& pose = it->second.pose;
    Mesh out = mesh;
    if (out.colors.size() != out.vertices.size())
        out.colors.assign(out.vertices.size(), {128, 128, 128});

    const TriangleGrid grid(mesh);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const auto px = visible_pixel(recon.intrinsics, pose, mesh.vertices[v], image.width,
                                      image.height, grid, static_cast<int>(v));
        if (!px) continue;
        const std::uint8_t* rgb = image.pixel(px->x(), px->y());
        out.colors[v] = {rgb[0], rgb[1], rgb[2]};
    }
    return {out, pose};
}

void save_localization_ply(const Mesh& mesh, const Pose& pose, const CameraIntrinsics& intr,
                           int image_width, int image_height,
                           const std::filesystem::path& path, double frustum_depth) {
    if (image_width <= 0 || image_height <= 0)
        throw std::invalid_argument("save_localization_ply: invalid image size");

    double depth = frustum_depth;
    if (depth <= 0.0) {
        if (mesh.vertices.empty()) {
            depth = 1.0;
        } else {
            Eigen::Vector3d lo = mesh.vertices[0], hi = mesh.vertices[0];
            for (const auto& v : mesh.vertices) {
                lo = lo.cwiseMin(v);
                hi = hi.cwiseMax(v);
            }
            depth = std::max(0.15 * (hi - lo).norm(), 1e-6);
        }
    }

    Mesh combined = mesh;
    if (combined.normals.size() != combined.vertices.size())
        combined.normals.assign(combined.vertices.size(), Eigen::Vector3d::UnitZ());
    if (combined.colors.size() != combined.vertices.size())
        combined.colors.assign(combined.vertices.size(), {128, 128, 128});

    const Eigen::Matrix3d world_from_cam = pose.rotation.conjugate().toRotationMatrix();
    const Eigen::Vector3d apex = pose.center();
    const int base = static_cast<int>(combined.vertices.size());
    combined.vertices.push_back(apex);
    const double w = image_width - 1.0, h = image_height - 1.0;
    const Eigen::Vector2d corners[4] = {{0.0, 0.0}, {w, 0.0}, {w, h}, {0.0, h}};
    for (const auto& c : corners) {
        const Eigen::Vector2d n = undistort_pixel(intr, c);
        const Eigen::Vector3d dir = world_from_cam * Eigen::Vector3d(n.x(), n.y(), 1.0);
        combined.vertices.push_back(apex + depth * dir);
    }
    for (int k = 0; k < 5; ++k) {
        combined.normals.push_back(Eigen::Vector3d::UnitZ());
        combined.colors.push_back({0, 0, 255});
    }
    for (int k = 0; k < 4; ++k)
        combined.triangles.push_back({base, base + 1 + k, base + 1 + (k + 1) % 4});
    combined.triangles.push_back({base + 1, base + 2, base + 3});
    combined.triangles.push_back({base + 1, base + 3, base + 4});

    save_mesh_ply(combined, path);
}

}  // namespace vicsfm
