#include "vicsfm/incremental.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "vicsfm/error.hpp"
#include "vicsfm/pnp.hpp"
#include "vicsfm/random.hpp"
#include "vicsfm/two_view.hpp"

namespace vicsfm {

namespace {

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

struct TrackObs {
    FrameId frame;
    int feature;
    Eigen::Vector2d pixel;
};

constexpr double kRad2Deg = 57.29577951308232;

double parallax_deg(const Eigen::Vector3d& X, const Eigen::Vector3d& c0,
                    const Eigen::Vector3d& c1) {
    const Eigen::Vector3d d0 = (X - c0).normalized();
    const Eigen::Vector3d d1 = (X - c1).normalized();
    return std::acos(std::clamp(d0.dot(d1), -1.0, 1.0)) * kRad2Deg;
}

struct Engine {
    const std::vector<std::vector<Eigen::Vector2d>>& keypoints;
    const IncrementalOptions& opts;
    Reconstruction recon;

    std::vector<std::vector<TrackObs>> tracks;
    // per frame: (feature index, track index), one entry per tracked feature
    std::vector<std::vector<std::pair<int, int>>> frame_tracks;
    std::vector<PointId> point_of_track;
    std::map<PointId, int> track_of_point;
    PointId next_point_id = 0;
    std::vector<FrameId> registration_order;

    Engine(const std::vector<std::vector<Eigen::Vector2d>>& kps, const PairwiseMatches& matches,
           const CameraIntrinsics& intr, int width, int height, const IncrementalOptions& o)
        : keypoints(kps), opts(o) {
        recon.intrinsics = intr;
        recon.image_width = width;
        recon.image_height = height;
        build_tracks(matches);
    }

    void build_tracks(const PairwiseMatches& matches) {
        std::map<std::pair<FrameId, int>, int> node_of;
        std::vector<std::pair<FrameId, int>> nodes;
        auto node = [&](FrameId f, int feat) {
            if (f < 0 || f >= static_cast<FrameId>(keypoints.size()) || feat < 0 ||
                feat >= static_cast<int>(keypoints[f].size()))
                throw std::invalid_argument("reconstruct_incremental: match references unknown feature");
            const auto [it, inserted] = node_of.emplace(std::make_pair(f, feat),
                                                        static_cast<int>(nodes.size()));
            if (inserted) nodes.emplace_back(f, feat);
            return it->second;
        };
        std::vector<std::pair<int, int>> edges;
        for (const auto& [pair, list] : matches) {
            if (pair.first == pair.second)
                throw std::invalid_argument("reconstruct_incremental: self-matched frame");
            for (const Match& m : list)
                edges.emplace_back(node(pair.first, m.index_a), node(pair.second, m.index_b));
        }
        Dsu dsu(static_cast<int>(nodes.size()));
        for (const auto& [a, b] : edges) dsu.unite(a, b);

        std::map<int, std::vector<int>> components;
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
            components[dsu.find(i)].push_back(i);

        frame_tracks.assign(keypoints.size(), {});
        for (const auto& [root, members] : components) {
            std::set<FrameId> frames;
            bool consistent = true;
            for (int m : members) {
                if (!frames.insert(nodes[m].first).second) {
                    consistent = false;  // track revisits a frame
                    break;
                }
            }
            if (!consistent || frames.size() < 2) continue;
            const int track_id = static_cast<int>(tracks.size());
            std::vector<TrackObs> track;
            for (int m : members) {
                const auto [f, feat] = nodes[m];
                track.push_back({f, feat, keypoints[f][feat]});
                frame_tracks[f].emplace_back(feat, track_id);
            }
            std::sort(track.begin(), track.end(),
                      [](const TrackObs& a, const TrackObs& b) { return a.frame < b.frame; });
            tracks.push_back(std::move(track));
        }
        point_of_track.assign(tracks.size(), -1);
    }

    bool registered(FrameId f) const { return recon.frames.count(f) != 0; }

    double reproj_error(const Pose& pose, const Eigen::Vector3d& X,
                        const Eigen::Vector2d& pixel) const {
        const auto pix = project(recon.intrinsics, pose, X);
        if (!pix) return std::numeric_limits<double>::infinity();
        return (*pix - pixel).norm();
    }

    // DLT over the track's registered views with a single leave-one-out
    // retry: returns the point and the views that reproject within the
    // filter threshold, maximizing the number of consistent views.
    struct TriResult {
        Eigen::Vector3d X;
        std::vector<int> passing;  // indices into the view list
    };
    std::optional<TriResult> triangulate_track(const std::vector<TrackObs>& track) const {
        std::vector<int> reg;
        for (int i = 0; i < static_cast<int>(track.size()); ++i)
            if (registered(track[i].frame)) reg.push_back(i);
        if (reg.size() < 2) return std::nullopt;

        std::vector<Pose> poses;
        std::vector<Eigen::Vector2d> norm;
        for (int i : reg) {
            poses.push_back(recon.frames.at(track[i].frame).pose);
            norm.push_back(undistort_pixel(recon.intrinsics, track[i].pixel));
        }

        auto evaluate = [&](const std::vector<int>& subset) -> std::optional<TriResult> {
            std::vector<Pose> sub_poses;
            std::vector<Eigen::Vector2d> sub_norm;
            for (int k : subset) {
                sub_poses.push_back(poses[k]);
                sub_norm.push_back(norm[k]);
            }
            const auto X = triangulate_nview(sub_poses, sub_norm, opts.min_point_angle_deg);
            if (!X) return std::nullopt;
            TriResult res;
            res.X = *X;
            for (std::size_t k = 0; k < reg.size(); ++k) {
                if (reproj_error(poses[k], *X, track[reg[k]].pixel) <= opts.obs_filter_px)
                    res.passing.push_back(reg[k]);
            }
            if (res.passing.size() < 2) return std::nullopt;
            return res;
        };

        std::vector<int> all(reg.size());
        std::iota(all.begin(), all.end(), 0);
        std::optional<TriResult> best = evaluate(all);
        if (best && best->passing.size() == reg.size()) return best;
        if (reg.size() >= 3) {
            for (std::size_t drop = 0; drop < reg.size(); ++drop) {
                std::vector<int> subset;
                for (std::size_t k = 0; k < reg.size(); ++k)
                    if (k != drop) subset.push_back(static_cast<int>(k));
                const auto cand = evaluate(subset);
                if (cand && (!best || cand->passing.size() > best->passing.size())) best = cand;
            }
        }
        return best;
    }

    void add_point(int track_id, const TriResult& tri) {
        PointTrack pt;
        pt.xyz = tri.X;
        for (int i : tri.passing) {
            const TrackObs& o = tracks[track_id][i];
            pt.observations.push_back({o.frame, o.feature, o.pixel});
        }
        const PointId pid = next_point_id++;
        recon.points.emplace(pid, std::move(pt));
        point_of_track[track_id] = pid;
        track_of_point[pid] = track_id;
    }

    void drop_point(PointId pid) {
        const auto it = track_of_point.find(pid);
        if (it != track_of_point.end()) {
            point_of_track[it->second] = -1;
            track_of_point.erase(it);
        }
        recon.points.erase(pid);
    }

    // Removes observations reprojecting beyond the filter threshold (or
    // behind the camera) and points left with fewer than two views.
    void filter_observations() {
        std::vector<PointId> dead;
        for (auto& [pid, pt] : recon.points) {
            auto& obs = pt.observations;
            obs.erase(std::remove_if(obs.begin(), obs.end(),
                                     [&](const Observation& o) {
                                         return reproj_error(recon.frames.at(o.frame).pose,
                                                             pt.xyz,
                                                             o.pixel) > opts.obs_filter_px;
                                     }),
                      obs.end());
            if (obs.size() < 2) dead.push_back(pid);
        }
        for (PointId pid : dead) drop_point(pid);
    }

    void run_bundle(bool global) {
        BundleOptions bopts = opts.bundle;
        if (global) {
            bopts.optimize_intrinsics =
                opts.self_calibrate && static_cast<int>(recon.frames.size()) >= 4;
        } else {
            bopts.optimize_intrinsics = false;
            bopts.max_iterations = std::min(bopts.max_iterations, 8);
            const int window = std::max(1, opts.local_ba_window);
            const int n = static_cast<int>(registration_order.size());
            for (int i = 0; i < n - window; ++i)
                bopts.constant_frames.push_back(registration_order[i]);
        }
        recon = bundle_adjust(recon, bopts, true, nullptr);
        filter_observations();
    }

    // Triangulates every point-less track touching the given frame (or all
    // tracks when frame < 0).
    void triangulate_tracks(FrameId frame) {
        if (frame >= 0) {
            for (const auto& [feature, track_id] : frame_tracks[frame]) {
                if (point_of_track[track_id] >= 0) continue;
                if (const auto tri = triangulate_track(tracks[track_id])) add_point(track_id, *tri);
            }
        } else {
            for (int t = 0; t < static_cast<int>(tracks.size()); ++t) {
                if (point_of_track[t] >= 0) continue;
                if (const auto tri = triangulate_track(tracks[t])) add_point(t, *tri);
            }
        }
    }

    // Adds the new frame's observations to already-triangulated tracks.
    void attach_observations(FrameId frame) {
        for (const auto& [feature, track_id] : frame_tracks[frame]) {
            const PointId pid = point_of_track[track_id];
            if (pid < 0) continue;
            auto& pt = recon.points.at(pid);
            bool present = false;
            for (const Observation& o : pt.observations)
                if (o.frame == frame) present = true;
            if (present) continue;
            const Eigen::Vector2d& pixel = keypoints[frame][feature];
            if (reproj_error(recon.frames.at(frame).pose, pt.xyz, pixel) <= opts.obs_filter_px)
                pt.observations.push_back({frame, feature, pixel});
        }
    }

    void register_frame(FrameId frame, const Pose& pose, const std::string& reason) {
        (void)reason;
        recon.frames[frame] = Frame{pose, ""};
        registration_order.push_back(frame);
    }
};

}  // namespace

Reconstruction reconstruct_incremental(const std::vector<std::vector<Eigen::Vector2d>>& keypoints,
                                       const PairwiseMatches& matches,
                                       const CameraIntrinsics& intrinsics_seed, int image_width,
                                       int image_height, const IncrementalOptions& opts) {
    if (keypoints.size() < 2)
        throw std::invalid_argument("reconstruct_incremental: needs at least 2 frames");
    if (image_width <= 0 || image_height <= 0)
        throw std::invalid_argument("reconstruct_incremental: image size must be positive");
    if (intrinsics_seed.focal <= 0.0)
        throw std::invalid_argument("reconstruct_incremental: focal seed must be positive");

    Engine eng(keypoints, matches, intrinsics_seed, image_width, image_height, opts);

    // --- initialization pair: max essential inliers, median parallax gate ---
    struct Candidate {
        FrameId a, b;
        std::size_t match_count;
    };
    std::vector<Candidate> candidates;
    for (const auto& [pair, list] : matches) {
        if (static_cast<int>(list.size()) >= opts.min_init_matches)
            candidates.push_back({pair.first, pair.second, list.size()});
    }
    if (candidates.empty())
        throw ReconstructionError("no image pair with enough matches to initialize");
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& l, const Candidate& r) {
        if (l.match_count != r.match_count) return l.match_count > r.match_count;
        return std::make_pair(l.a, l.b) < std::make_pair(r.a, r.b);
    });

    const double essential_threshold =
        opts.essential_threshold_factor / intrinsics_seed.focal;
    FrameId init_a = -1, init_b = -1;
    Pose init_rel;
    int best_inliers = 0;
    for (const Candidate& cand : candidates) {
        if (static_cast<int>(cand.match_count) <= best_inliers) break;
        const auto& list = matches.at({cand.a, cand.b});
        std::vector<NormalizedPair> norm;
        norm.reserve(list.size());
        for (const Match& m : list) {
            norm.push_back({undistort_pixel(intrinsics_seed, keypoints[cand.a][m.index_a]),
                            undistort_pixel(intrinsics_seed, keypoints[cand.b][m.index_b])});
        }
        const auto ess = estimate_essential_ransac(
            norm, essential_threshold, opts.ransac_confidence,
            hash_combine(opts.seed, hash_combine(cand.a, cand.b)));
        if (!ess || ess->inlier_count <= best_inliers) continue;

        std::vector<NormalizedPair> inlier_pairs;
        for (std::size_t i = 0; i < norm.size(); ++i)
            if (ess->inliers[i]) inlier_pairs.push_back(norm[i]);
        const auto rel = decompose_essential(ess->E, inlier_pairs);
        if (!rel) continue;

        const Pose identity;
        const Eigen::Vector3d c0 = Eigen::Vector3d::Zero();
        const Eigen::Vector3d c1 = rel->center();
        std::vector<double> angles;
        for (const NormalizedPair& p : inlier_pairs) {
            const auto X = triangulate_nview({identity, *rel}, {p.a, p.b}, 0.0);
            if (X) angles.push_back(parallax_deg(*X, c0, c1));
        }
        if (angles.size() < 8) continue;
        std::nth_element(angles.begin(), angles.begin() + angles.size() / 2, angles.end());
        const double median = angles[angles.size() / 2];
        if (median < opts.min_init_median_angle_deg) continue;

        init_a = cand.a;
        init_b = cand.b;
        init_rel = *rel;
        best_inliers = ess->inlier_count;
    }
    if (init_a < 0) throw ReconstructionError("no valid initialization pair");

    eng.register_frame(init_a, Pose{}, "init");
    eng.register_frame(init_b, init_rel, "init");
    eng.triangulate_tracks(init_a);
    eng.triangulate_tracks(init_b);
    if (eng.recon.points.size() < 8)
        throw ReconstructionError("initialization pair produced too few points");
    eng.run_bundle(false);

    // --- incremental registration ---
    int since_global = 0;
    while (true) {
        struct NextFrame {
            FrameId frame;
            int visible;
        };
        std::vector<NextFrame> next;
        for (FrameId f = 0; f < static_cast<FrameId>(keypoints.size()); ++f) {
            if (eng.registered(f)) continue;
            int visible = 0;
            for (const auto& [feature, track_id] : eng.frame_tracks[f])
                if (eng.point_of_track[track_id] >= 0) ++visible;
            if (visible >= std::max(4, opts.min_pnp_inliers)) next.push_back({f, visible});
        }
        std::sort(next.begin(), next.end(), [](const NextFrame& l, const NextFrame& r) {
            if (l.visible != r.visible) return l.visible > r.visible;
            return l.frame < r.frame;
        });

        FrameId added = -1;
        for (const NextFrame& cand : next) {
            std::vector<Eigen::Vector3d> pts3d;
            std::vector<Eigen::Vector2d> pix2d;
            for (const auto& [feature, track_id] : eng.frame_tracks[cand.frame]) {
                const PointId pid = eng.point_of_track[track_id];
                if (pid < 0) continue;
                pts3d.push_back(eng.recon.points.at(pid).xyz);
                pix2d.push_back(keypoints[cand.frame][feature]);
            }
            const auto res = solve_pnp_ransac(
                pts3d, pix2d, eng.recon.intrinsics, opts.pnp_threshold_px,
                opts.ransac_confidence, hash_combine(opts.seed, 0x9e11 + cand.frame));
            if (!res || res->inlier_count < opts.min_pnp_inliers) continue;

            eng.register_frame(cand.frame, res->pose, "pnp");
            eng.attach_observations(cand.frame);
            eng.triangulate_tracks(cand.frame);
            eng.run_bundle(false);
            added = cand.frame;
            break;
        }
        if (added < 0) break;

        if (++since_global >= opts.global_ba_interval) {
            eng.run_bundle(true);
            eng.triangulate_tracks(-1);
            since_global = 0;
        }
    }

    eng.run_bundle(true);
    eng.recon.prune();
    return eng.recon;
}

}  // namespace vicsfm
