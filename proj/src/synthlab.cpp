#include "vicsfm/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "vicsfm/error.hpp"
#include "vicsfm/random.hpp"

namespace vicsfm {

namespace {

// Quasi-uniform unit directions: Fibonacci spiral plus a small seeded jitter
// so different seeds give different (still well-spread) samplings.
std::vector<Eigen::Vector3d> fibonacci_directions(int n, Rng& rng, double jitter) {
    constexpr double golden_angle = 2.399963229728653;
    std::vector<Eigen::Vector3d> dirs;
    dirs.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * i;
        Eigen::Vector3d d(r * std::cos(phi), r * std::sin(phi), z);
        d += jitter * Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
        dirs.push_back(d.normalized());
    }
    return dirs;
}

double value_noise3(std::uint64_t seed, const Eigen::Vector3d& q) {
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(q.x()));
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(q.y()));
    const std::int64_t z0 = static_cast<std::int64_t>(std::floor(q.z()));
    const double fx = q.x() - x0, fy = q.y() - y0, fz = q.z() - z0;
    double v = 0.0;
    for (int dz = 0; dz <= 1; ++dz)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                                 (dz ? fz : 1.0 - fz);
                v += w * lattice_noise(seed, x0 + dx, y0 + dy, z0 + dz);
            }
    return v;
}

double fbm3(std::uint64_t seed, const Eigen::Vector3d& p, double base_wavelength) {
    static constexpr double weights[4] = {1.0, 0.55, 0.3, 0.18};
    double sum = 0.0, norm = 0.0;
    double freq = 1.0 / base_wavelength;
    for (int o = 0; o < 4; ++o) {
        sum += weights[o] * value_noise3(seed + o, p * freq);
        norm += weights[o];
        freq *= 2.0;
    }
    return sum / norm;
}

// Uniform spatial hash over spot centers; query returns candidates for the
// cell containing a point (spots are inserted into every cell their
// influence box overlaps).
class SpotGrid {
public:
    SpotGrid(const std::vector<Eigen::Vector3d>& spots, double cutoff)
        : spots_(spots), cell_(std::max(cutoff, 1e-9)) {
        for (int j = 0; j < static_cast<int>(spots.size()); ++j) {
            const Eigen::Vector3d lo = spots[j].array() - cutoff;
            const Eigen::Vector3d hi = spots[j].array() + cutoff;
            for (std::int64_t z = idx(lo.z()); z <= idx(hi.z()); ++z)
                for (std::int64_t y = idx(lo.y()); y <= idx(hi.y()); ++y)
                    for (std::int64_t x = idx(lo.x()); x <= idx(hi.x()); ++x)
                        cells_[key(x, y, z)].push_back(j);
        }
    }

    const std::vector<int>* candidates(const Eigen::Vector3d& p) const {
        const auto it = cells_.find(key(idx(p.x()), idx(p.y()), idx(p.z())));
        return it == cells_.end() ? nullptr : &it->second;
    }

    const Eigen::Vector3d& spot(int j) const { return spots_[j]; }

private:
    std::int64_t idx(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
    static std::uint64_t key(std::int64_t x, std::int64_t y, std::int64_t z) {
        return hash_combine(hash_combine(static_cast<std::uint64_t>(x) * 0x8da6b343ULL,
                                         static_cast<std::uint64_t>(y) * 0xd8163841ULL),
                            static_cast<std::uint64_t>(z) * 0xcb1ab31fULL);
    }

    const std::vector<Eigen::Vector3d>& spots_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace

SyntheticScene make_scene(int n_points, int n_frames, const Eigen::Vector3d& semi_axes,
                          double noise_px, double outlier_frac, std::uint64_t seed,
                          const SceneOptions& opts) {
    if (n_points < 8) throw std::invalid_argument("make_scene: need at least 8 points");
    if (n_frames < 2) throw std::invalid_argument("make_scene: need at least 2 frames");
    if ((semi_axes.array() <= 0.0).any())
        throw std::invalid_argument("make_scene: semi-axes must be positive");
    if (noise_px < 0.0) throw std::invalid_argument("make_scene: negative noise");
    if (outlier_frac < 0.0 || outlier_frac > 1.0)
        throw std::invalid_argument("make_scene: outlier_frac must be in [0,1]");

    SyntheticScene scene;
    scene.semi_axes = semi_axes;
    scene.image_width = opts.image_width;
    scene.image_height = opts.image_height;
    scene.intrinsics.focal = opts.focal;
    scene.intrinsics.cx = 0.5 * (opts.image_width - 1);
    scene.intrinsics.cy = 0.5 * (opts.image_height - 1);
    scene.intrinsics.k1 = opts.k1;
    scene.texture_seed = opts.texture_seed ? opts.texture_seed : hash_combine(seed, 0x7e87);
    scene.texture_amplitude = opts.texture_amplitude;
    scene.spot_radius = opts.spot_radius_frac * semi_axes.mean();

    Rng rng(seed);
    for (const Eigen::Vector3d& d : fibonacci_directions(n_points, rng, 0.03))
        scene.points.push_back(semi_axes.cwiseProduct(d));
    for (const Eigen::Vector3d& d : fibonacci_directions(opts.n_spots, rng, 0.05))
        scene.spots.push_back(semi_axes.cwiseProduct(d));

    const double sweep = opts.sweep_degrees * std::numbers::pi / 180.0;
    for (int k = 0; k < n_frames; ++k) {
        const double t = sweep * k / n_frames;
        const Eigen::Vector3d center(opts.orbit_radius_frac * semi_axes.x() * std::cos(t),
                                     opts.orbit_radius_frac * semi_axes.y() * std::sin(t),
                                     0.15 * semi_axes.z() * std::sin(3.0 * t));
        const Eigen::Vector3d look_dir =
            Eigen::Vector3d(std::cos(t), std::sin(t), 0.35 * std::sin(2.0 * t + 0.7))
                .normalized();
        const Eigen::Vector3d target = semi_axes.cwiseProduct(look_dir);
        const Eigen::Vector3d forward = (target - center).normalized();
        const Eigen::Vector3d right = Eigen::Vector3d::UnitZ().cross(forward).normalized();
        const Eigen::Vector3d down = forward.cross(right);
        Eigen::Matrix3d R;
        R.row(0) = right;
        R.row(1) = down;
        R.row(2) = forward;
        Pose pose;
        pose.rotation = Eigen::Quaterniond(R).normalized();
        pose.translation = -(R * center);
        scene.poses.push_back(pose);
    }

    for (int f = 0; f < n_frames; ++f) {
        for (int i = 0; i < n_points; ++i) {
            const auto pix = project(scene.intrinsics, scene.poses[f], scene.points[i]);
            if (!pix) continue;
            if (pix->x() < 0.0 || pix->x() > scene.image_width - 1.0 || pix->y() < 0.0 ||
                pix->y() > scene.image_height - 1.0)
                continue;
            TrackObservation obs;
            obs.point = i;
            obs.frame = f;
            obs.true_pixel = *pix;
            if (rng.uniform() < outlier_frac) {
                obs.outlier = true;
                const double min_shift = 10.0 + 3.0 * noise_px;
                do {
                    obs.pixel = Eigen::Vector2d(rng.uniform(0.0, scene.image_width - 1.0),
                                                rng.uniform(0.0, scene.image_height - 1.0));
                } while ((obs.pixel - obs.true_pixel).norm() < min_shift);
            } else {
                obs.pixel = obs.true_pixel;
                if (noise_px > 0.0) {
                    obs.pixel.x() += noise_px * rng.gaussian();
                    obs.pixel.y() += noise_px * rng.gaussian();
                }
            }
            scene.tracks.push_back(obs);
        }
    }
    return scene;
}

GrayImage render_view(const SyntheticScene& scene, const Pose& pose) {
    GrayImage img(scene.image_width, scene.image_height);
    const Eigen::Matrix3d Rt = pose.rotation.toRotationMatrix().transpose();
    const Eigen::Vector3d origin = pose.center();
    const Eigen::Vector3d inv_axes = scene.semi_axes.cwiseInverse();
    const Eigen::Vector3d inv_axes2 = inv_axes.cwiseProduct(inv_axes);
    const double wavelength = 6.0 * scene.spot_radius;
    const double cutoff = 2.5 * scene.spot_radius;
    const SpotGrid grid(scene.spots, cutoff);
    const double amp = scene.texture_amplitude;

    const Eigen::Vector3d o_scaled = origin.cwiseProduct(inv_axes);
    const double C = o_scaled.squaredNorm() - 1.0;

    for (int y = 0; y < scene.image_height; ++y) {
        for (int x = 0; x < scene.image_width; ++x) {
            const Eigen::Vector2d n =
                undistort_pixel(scene.intrinsics, Eigen::Vector2d(x, y));
            const Eigen::Vector3d dir = (Rt * Eigen::Vector3d(n.x(), n.y(), 1.0)).normalized();
            const Eigen::Vector3d d_scaled = dir.cwiseProduct(inv_axes);
            const double A = d_scaled.squaredNorm();
            const double B = o_scaled.dot(d_scaled);
            const double disc = B * B - A * C;
            if (disc < 0.0) {
                img.at(x, y) = 0;
                continue;
            }
            const double sq = std::sqrt(disc);
            const double t1 = (-B - sq) / A;
            const double t2 = (-B + sq) / A;
            double t = 0.0;
            if (t1 > 1e-9)
                t = t1;
            else if (t2 > 1e-9)
                t = t2;
            else {
                img.at(x, y) = 0;
                continue;
            }
            const Eigen::Vector3d p = origin + t * dir;

            const double noise = fbm3(scene.texture_seed, p, wavelength);
            double spot_sum = 0.0;
            if (const std::vector<int>* cand = grid.candidates(p)) {
                for (int j : *cand) {
                    const double d2 = (p - grid.spot(j)).squaredNorm();
                    if (d2 < cutoff * cutoff)
                        spot_sum += std::exp(-4.0 * d2 / (scene.spot_radius * scene.spot_radius));
                }
            }
            const Eigen::Vector3d normal = p.cwiseProduct(inv_axes2).normalized();
            const double shade = 0.35 + 0.65 * std::abs(dir.dot(normal));
            const double base = 0.55 + 0.45 * amp * (2.0 * noise - 1.0);
            const double value =
                base * (1.0 - 0.9 * amp * std::min(1.0, spot_sum)) * shade;
            img.at(x, y) = static_cast<std::uint8_t>(
                std::lround(std::clamp(255.0 * value, 0.0, 255.0)));
        }
    }
    return img;
}

std::vector<GrayImage> render_views(const SyntheticScene& scene) {
    std::vector<GrayImage> views;
    views.reserve(scene.poses.size());
    for (const Pose& pose : scene.poses) views.push_back(render_view(scene, pose));
    return views;
}

std::vector<std::vector<Eigen::Vector2d>> track_pixels(const SyntheticScene& scene) {
    std::vector<std::vector<Eigen::Vector2d>> pixels(scene.poses.size());
    for (const TrackObservation& obs : scene.tracks)
        pixels[obs.frame].push_back(obs.pixel);
    return pixels;
}

std::map<std::pair<FrameId, FrameId>, std::vector<Match>> tracks_to_matches(
    const SyntheticScene& scene) {
    // Per-frame feature index of each track entry, in track_pixels order.
    std::vector<int> next_index(scene.poses.size(), 0);
    std::map<int, std::vector<std::pair<int, int>>> by_point;  // point -> (frame, feature)
    for (const TrackObservation& obs : scene.tracks)
        by_point[obs.point].emplace_back(obs.frame, next_index[obs.frame]++);

    std::map<std::pair<FrameId, FrameId>, std::vector<Match>> matches;
    for (const auto& [point, sightings] : by_point) {
        for (std::size_t a = 0; a < sightings.size(); ++a) {
            for (std::size_t b = a + 1; b < sightings.size(); ++b) {
                auto [fa, ia] = sightings[a];
                auto [fb, ib] = sightings[b];
                if (fa == fb) continue;
                if (fa > fb) {
                    std::swap(fa, fb);
                    std::swap(ia, ib);
                }
                matches[{fa, fb}].push_back(Match{ia, ib, 0.0f});
            }
        }
    }
    for (auto& [pair, list] : matches)
        std::sort(list.begin(), list.end(), [](const Match& l, const Match& r) {
            return l.index_a < r.index_a;
        });
    return matches;
}

SimilarityTransform align_similarity(std::span<const Eigen::Vector3d> from,
                                     std::span<const Eigen::Vector3d> to) {
    if (from.size() != to.size())
        throw std::invalid_argument("align_similarity: size mismatch");
    const std::size_t n = from.size();
    if (n < 3) throw std::invalid_argument("align_similarity: needs at least 3 points");

    Eigen::Vector3d mu_f = Eigen::Vector3d::Zero(), mu_t = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mu_f += from[i];
        mu_t += to[i];
    }
    mu_f /= static_cast<double>(n);
    mu_t /= static_cast<double>(n);

    double var_f = 0.0;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d df = from[i] - mu_f;
        const Eigen::Vector3d dt = to[i] - mu_t;
        var_f += df.squaredNorm();
        cov += dt * df.transpose();
    }
    var_f /= static_cast<double>(n);
    cov /= static_cast<double>(n);
    if (var_f < 1e-30) throw std::invalid_argument("align_similarity: degenerate source points");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d s = Eigen::Vector3d::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s.z() = -1.0;
    const Eigen::Matrix3d R = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();

    SimilarityTransform sim;
    sim.scale = svd.singularValues().dot(s) / var_f;
    sim.rotation = Eigen::Quaterniond(R).normalized();
    sim.translation = mu_t - sim.scale * (R * mu_f);

    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) se += (sim.apply(from[i]) - to[i]).squaredNorm();
    sim.rmse = std::sqrt(se / static_cast<double>(n));
    return sim;
}

SimilarityTransform align_to_scene(const Reconstruction& recon, const SyntheticScene& scene) {
    std::vector<Eigen::Vector3d> from, to;
    for (const auto& [fid, frame] : recon.frames) {
        if (fid < 0 || fid >= static_cast<int>(scene.poses.size())) continue;
        from.push_back(frame.pose.center());
        to.push_back(scene.poses[fid].center());
    }
    if (from.size() < 3)
        throw std::invalid_argument("align_to_scene: needs at least 3 common frames");
    return align_similarity(from, to);
}

void save_scene_json(const SyntheticScene& scene, const std::filesystem::path& path) {
    nlohmann::json j;
    j["semi_axes"] = {scene.semi_axes.x(), scene.semi_axes.y(), scene.semi_axes.z()};
    j["image_width"] = scene.image_width;
    j["image_height"] = scene.image_height;
    j["intrinsics"] = {{"focal", scene.intrinsics.focal},
                       {"cx", scene.intrinsics.cx},
                       {"cy", scene.intrinsics.cy},
                       {"k1", scene.intrinsics.k1}};
    j["texture_seed"] = scene.texture_seed;
    j["texture_amplitude"] = scene.texture_amplitude;
    j["spot_radius"] = scene.spot_radius;
    auto vec3_list = [](const std::vector<Eigen::Vector3d>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : v) arr.push_back({p.x(), p.y(), p.z()});
        return arr;
    };
    j["points"] = vec3_list(scene.points);
    j["spots"] = vec3_list(scene.spots);
    nlohmann::json poses = nlohmann::json::array();
    for (const Pose& pose : scene.poses) {
        poses.push_back({{"rotation",
                          {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(),
                           pose.rotation.z()}},
                         {"translation",
                          {pose.translation.x(), pose.translation.y(), pose.translation.z()}}});
    }
    j["poses"] = poses;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scene file: " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing scene file: " + path.string());
}

SyntheticScene load_scene_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read scene file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed scene file " + path.string() + ": " + e.what());
    }
    try {
        SyntheticScene scene;
        scene.semi_axes = Eigen::Vector3d(j["semi_axes"][0], j["semi_axes"][1],
                                          j["semi_axes"][2]);
        scene.image_width = j["image_width"];
        scene.image_height = j["image_height"];
        scene.intrinsics.focal = j["intrinsics"]["focal"];
        scene.intrinsics.cx = j["intrinsics"]["cx"];
        scene.intrinsics.cy = j["intrinsics"]["cy"];
        scene.intrinsics.k1 = j["intrinsics"]["k1"];
        scene.texture_seed = j["texture_seed"];
        scene.texture_amplitude = j["texture_amplitude"];
        scene.spot_radius = j["spot_radius"];
        for (const auto& p : j["points"])
            scene.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        for (const auto& p : j["spots"])
            scene.spots.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        for (const auto& p : j["poses"]) {
            Pose pose;
            const auto& q = p["rotation"];
            pose.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                               q[2].get<double>(), q[3].get<double>());
            const auto& t = p["translation"];
            pose.translation = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(),
                                               t[2].get<double>());
            scene.poses.push_back(pose);
        }
        // Tracks are reconstructed exactly: they are pure projections.
        for (int f = 0; f < static_cast<int>(scene.poses.size()); ++f) {
            for (int i = 0; i < static_cast<int>(scene.points.size()); ++i) {
                const auto pix = project(scene.intrinsics, scene.poses[f], scene.points[i]);
                if (!pix) continue;
                if (pix->x() < 0.0 || pix->x() > scene.image_width - 1.0 || pix->y() < 0.0 ||
                    pix->y() > scene.image_height - 1.0)
                    continue;
                scene.tracks.push_back(TrackObservation{i, f, *pix, *pix, false});
            }
        }
        return scene;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed scene file " + path.string() + ": " + e.what());
    }
}

}  // namespace vicsfm
