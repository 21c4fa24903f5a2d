#include "vicsfm/meshing.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vicsfm/error.hpp"

namespace vicsfm {

namespace {

struct Grid {
    Eigen::Vector3d origin;
    double voxel = 1.0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> values;  // node-centered

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }
    double at(int x, int y, int z) const { return values[index(x, y, z)]; }
    Eigen::Vector3d node(int x, int y, int z) const {
        return origin + voxel * Eigen::Vector3d(x, y, z);
    }
};

// 5-tap binomial smoothing, separable, zero outside the grid.
void smooth(Grid& g, int passes) {
    static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    std::vector<double> tmp(g.values.size());
    auto run_axis = [&](int axis) {
        const int dims[3] = {g.nx, g.ny, g.nz};
        for (int z = 0; z < g.nz; ++z)
            for (int y = 0; y < g.ny; ++y)
                for (int x = 0; x < g.nx; ++x) {
                    int c[3] = {x, y, z};
                    double s = 0.0;
                    for (int o = -2; o <= 2; ++o) {
                        int q[3] = {c[0], c[1], c[2]};
                        q[axis] += o;
                        if (q[axis] < 0 || q[axis] >= dims[axis]) continue;
                        s += k[o + 2] * g.at(q[0], q[1], q[2]);
                    }
                    tmp[g.index(x, y, z)] = s;
                }
        g.values.swap(tmp);
    };
    for (int p = 0; p < passes; ++p)
        for (int axis = 0; axis < 3; ++axis) run_axis(axis);
}

struct Dsu {
    std::vector<int> parent;
    explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

long Mesh::euler_characteristic() const {
    std::set<std::pair<int, int>> edges;
    for (const auto& t : triangles) {
        for (int e = 0; e < 3; ++e) {
            const int a = t[e], b = t[(e + 1) % 3];
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    return static_cast<long>(vertices.size()) - static_cast<long>(edges.size()) +
           static_cast<long>(triangles.size());
}

Mesh mesh_from_points(std::span<const Eigen::Vector3d> points, double voxel_size,
                      const MeshingOptions& opts) {
    if (points.size() < 50)
        throw std::invalid_argument("mesh_from_points: needs at least 50 points");
    if (voxel_size <= 0.0)
        throw std::invalid_argument("mesh_from_points: voxel size must be positive");
    if (opts.smoothing_passes < 0 || opts.margin_voxels < 1)
        throw std::invalid_argument("mesh_from_points: invalid options");

    Eigen::Vector3d lo = points[0], hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }

    Grid grid;
    grid.voxel = voxel_size;
    grid.origin = lo - voxel_size * static_cast<double>(opts.margin_voxels) *
                           Eigen::Vector3d::Ones();
    const Eigen::Vector3d extent = hi - grid.origin;
    grid.nx = static_cast<int>(std::ceil(extent.x() / voxel_size)) + opts.margin_voxels + 1;
    grid.ny = static_cast<int>(std::ceil(extent.y() / voxel_size)) + opts.margin_voxels + 1;
    grid.nz = static_cast<int>(std::ceil(extent.z() / voxel_size)) + opts.margin_voxels + 1;
    grid.values.assign(static_cast<std::size_t>(grid.nx) * grid.ny * grid.nz, 0.0);

    for (const auto& p : points) {
        const Eigen::Vector3d g = (p - grid.origin) / voxel_size;
        const int x0 = static_cast<int>(std::floor(g.x()));
        const int y0 = static_cast<int>(std::floor(g.y()));
        const int z0 = static_cast<int>(std::floor(g.z()));
        const double fx = g.x() - x0, fy = g.y() - y0, fz = g.z() - z0;
        for (int dz = 0; dz <= 1; ++dz)
            for (int dy = 0; dy <= 1; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                    const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                                     (dz ? fz : 1.0 - fz);
                    grid.values[grid.index(x0 + dx, y0 + dy, z0 + dz)] += w;
                }
    }

    smooth(grid, opts.smoothing_passes);

    double iso = opts.iso;
    if (iso <= 0.0) {
        double sum = 0.0;
        std::size_t count = 0;
        for (double v : grid.values) {
            if (v > 0.0) {
                sum += v;
                ++count;
            }
        }
        if (count == 0) throw MeshingError("mesh_from_points: density grid is empty");
        iso = 0.5 * sum / static_cast<double>(count);
    }

    // Six tetrahedra around the main diagonal of each cell; shared cube-face
    // diagonals agree between neighboring cells, which keeps the surface
    // watertight.
    static constexpr int corner_offset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                                {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    static constexpr int tets[6][4] = {{0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6},
                                       {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}};

    Mesh mesh;
    std::map<std::pair<std::size_t, std::size_t>, int> edge_vertex;
    auto weld = [&](std::size_t na, const Eigen::Vector3d& pa, double va, std::size_t nb,
                    const Eigen::Vector3d& pb, double vb) {
        const Eigen::Vector3d* qa = &pa;
        const Eigen::Vector3d* qb = &pb;
        if (na > nb) {
            std::swap(na, nb);
            std::swap(va, vb);
            std::swap(qa, qb);
        }
        const auto key = std::make_pair(na, nb);
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double t = (iso - va) / (vb - va);
        const Eigen::Vector3d pos = *qa + t * (*qb - *qa);
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pos);
        edge_vertex.emplace(key, id);
        return id;
    };

    for (int z = 0; z + 1 < grid.nz; ++z) {
        for (int y = 0; y + 1 < grid.ny; ++y) {
            for (int x = 0; x + 1 < grid.nx; ++x) {
                std::size_t node_id[8];
                Eigen::Vector3d node_pos[8];
                double node_val[8];
                for (int c = 0; c < 8; ++c) {
                    const int cx = x + corner_offset[c][0];
                    const int cy = y + corner_offset[c][1];
                    const int cz = z + corner_offset[c][2];
                    node_id[c] = grid.index(cx, cy, cz);
                    node_pos[c] = grid.node(cx, cy, cz);
                    node_val[c] = grid.values[node_id[c]];
                }
                for (const auto& tet : tets) {
                    int inside[4], n_in = 0;
                    for (int c = 0; c < 4; ++c)
                        inside[c] = node_val[tet[c]] > iso ? 1 : 0;
                    for (int c = 0; c < 4; ++c) n_in += inside[c];
                    if (n_in == 0 || n_in == 4) continue;

                    auto edge_vert = [&](int ca, int cb) {
                        return weld(node_id[tet[ca]], node_pos[tet[ca]], node_val[tet[ca]],
                                    node_id[tet[cb]], node_pos[tet[cb]], node_val[tet[cb]]);
                    };
                    auto emit = [&](int a, int b, int c, const Eigen::Vector3d& in_centroid) {
                        if (a == b || b == c || a == c) return;
                        const Eigen::Vector3d& va = mesh.vertices[a];
                        const Eigen::Vector3d& vb = mesh.vertices[b];
                        const Eigen::Vector3d& vc = mesh.vertices[c];
                        const Eigen::Vector3d n = (vb - va).cross(vc - va);
                        const Eigen::Vector3d out_dir = (va + vb + vc) / 3.0 - in_centroid;
                        if (n.dot(out_dir) >= 0.0)
                            mesh.triangles.push_back({a, b, c});
                        else
                            mesh.triangles.push_back({a, c, b});
                    };

                    if (n_in == 1 || n_in == 3) {
                        int lone = -1;
                        for (int c = 0; c < 4; ++c)
                            if (inside[c] == (n_in == 1 ? 1 : 0)) lone = c;
                        int others[3], k = 0;
                        for (int c = 0; c < 4; ++c)
                            if (c != lone) others[k++] = c;
                        const int a = edge_vert(lone, others[0]);
                        const int b = edge_vert(lone, others[1]);
                        const int c = edge_vert(lone, others[2]);
                        // Inside centroid: the lone corner when it is inside,
                        // otherwise the centroid of the three inside corners.
                        Eigen::Vector3d in_c;
                        if (n_in == 1) {
                            in_c = node_pos[tet[lone]];
                        } else {
                            in_c = (node_pos[tet[others[0]]] + node_pos[tet[others[1]]] +
                                    node_pos[tet[others[2]]]) /
                                   3.0;
                        }
                        emit(a, b, c, in_c);
                    } else {  // 2 in, 2 out: quad split into two triangles
                        int in_c[2], out_c[2], ki = 0, ko = 0;
                        for (int c = 0; c < 4; ++c) {
                            if (inside[c])
                                in_c[ki++] = c;
                            else
                                out_c[ko++] = c;
                        }
                        const int v00 = edge_vert(in_c[0], out_c[0]);
                        const int v01 = edge_vert(in_c[0], out_c[1]);
                        const int v11 = edge_vert(in_c[1], out_c[1]);
                        const int v10 = edge_vert(in_c[1], out_c[0]);
                        const Eigen::Vector3d centroid_in =
                            0.5 * (node_pos[tet[in_c[0]]] + node_pos[tet[in_c[1]]]);
                        emit(v00, v01, v11, centroid_in);
                        emit(v00, v11, v10, centroid_in);
                    }
                }
            }
        }
    }

    if (mesh.triangles.empty())
        throw MeshingError("mesh_from_points: no surface at the iso level");

    // Keep the largest connected component (by triangle count).
    Dsu dsu(static_cast<int>(mesh.vertices.size()));
    for (const auto& t : mesh.triangles) {
        dsu.unite(t[0], t[1]);
        dsu.unite(t[0], t[2]);
    }
    std::map<int, long> tri_count;
    for (const auto& t : mesh.triangles) ++tri_count[dsu.find(t[0])];
    int best_root = -1;
    long best_tris = -1;
    for (const auto& [root, count] : tri_count) {
        if (count > best_tris) {
            best_tris = count;
            best_root = root;
        }
    }

    Mesh out;
    std::vector<int> remap(mesh.vertices.size(), -1);
    for (const auto& t : mesh.triangles) {
        if (dsu.find(t[0]) != best_root) continue;
        std::array<int, 3> nt{};
        for (int e = 0; e < 3; ++e) {
            if (remap[t[e]] < 0) {
                remap[t[e]] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[t[e]]);
            }
            nt[e] = remap[t[e]];
        }
        out.triangles.push_back(nt);
    }

    out.normals.assign(out.vertices.size(), Eigen::Vector3d::Zero());
    for (const auto& t : out.triangles) {
        const Eigen::Vector3d n = (out.vertices[t[1]] - out.vertices[t[0]])
                                      .cross(out.vertices[t[2]] - out.vertices[t[0]]);
        for (int e = 0; e < 3; ++e) out.normals[t[e]] += n;
    }
    for (auto& n : out.normals) {
        const double len = n.norm();
        if (len > 1e-30) n /= len;
    }
    out.colors.assign(out.vertices.size(), {200, 200, 200});
    return out;
}

void save_mesh_ply(const Mesh& mesh, const std::filesystem::path& path) {
    if (mesh.normals.size() != mesh.vertices.size() ||
        mesh.colors.size() != mesh.vertices.size())
        throw std::invalid_argument("save_mesh_ply: attribute arrays must match vertices");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write mesh file: " + path.string());
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property float nx\nproperty float ny\nproperty float nz\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "element face " << mesh.triangles.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const float v[6] = {static_cast<float>(mesh.vertices[i].x()),
                            static_cast<float>(mesh.vertices[i].y()),
                            static_cast<float>(mesh.vertices[i].z()),
                            static_cast<float>(mesh.normals[i].x()),
                            static_cast<float>(mesh.normals[i].y()),
                            static_cast<float>(mesh.normals[i].z())};
        out.write(reinterpret_cast<const char*>(v), sizeof(v));
        out.write(reinterpret_cast<const char*>(mesh.colors[i].data()), 3);
    }
    for (const auto& t : mesh.triangles) {
        const std::uint8_t n = 3;
        const std::int32_t idx[3] = {t[0], t[1], t[2]};
        out.write(reinterpret_cast<const char*>(&n), 1);
        out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
    if (!out) throw IoError("failed writing mesh file: " + path.string());
}

Mesh load_mesh_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read mesh file: " + path.string());

    std::string line;
    std::size_t n_vertices = 0, n_faces = 0;
    std::vector<std::string> vertex_props;
    std::string element;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "ply" || tok == "comment") continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian")
                throw IoError("unsupported PLY format in " + path.string());
        } else if (tok == "element") {
            std::size_t count = 0;
            ls >> element >> count;
            if (element == "vertex")
                n_vertices = count;
            else if (element == "face")
                n_faces = count;
            else
                throw IoError("unsupported PLY element '" + element + "' in " + path.string());
        } else if (tok == "property") {
            if (element == "vertex") {
                std::string type, name;
                ls >> type >> name;
                vertex_props.push_back(type + " " + name);
            }
        } else if (tok == "end_header") {
            header_done = true;
            break;
        }
    }
    static const std::vector<std::string> expected = {
        "float x",  "float y",  "float z",    "float nx",    "float ny",
        "float nz", "uchar red", "uchar green", "uchar blue"};
    if (!header_done || vertex_props != expected)
        throw IoError("unexpected PLY vertex layout in " + path.string());

    Mesh mesh;
    mesh.vertices.reserve(n_vertices);
    mesh.normals.reserve(n_vertices);
    mesh.colors.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        float v[6];
        std::uint8_t rgb[3];
        in.read(reinterpret_cast<char*>(v), sizeof(v));
        in.read(reinterpret_cast<char*>(rgb), 3);
        if (!in) throw IoError("truncated PLY vertex data in " + path.string());
        mesh.vertices.emplace_back(v[0], v[1], v[2]);
        mesh.normals.emplace_back(v[3], v[4], v[5]);
        mesh.colors.push_back({rgb[0], rgb[1], rgb[2]});
    }
    mesh.triangles.reserve(n_faces);
    for (std::size_t i = 0; i < n_faces; ++i) {
        std::uint8_t n = 0;
        in.read(reinterpret_cast<char*>(&n), 1);
        if (!in || n != 3) throw IoError("non-triangular PLY face in " + path.string());
        std::int32_t idx[3];
        in.read(reinterpret_cast<char*>(idx), sizeof(idx));
        if (!in) throw IoError("truncated PLY face data in " + path.string());
        for (int e = 0; e < 3; ++e)
            if (idx[e] < 0 || static_cast<std::size_t>(idx[e]) >= n_vertices)
                throw IoError("PLY face index out of range in " + path.string());
        mesh.triangles.push_back({idx[0], idx[1], idx[2]});
    }
    return mesh;
}

}  // namespace vicsfm
