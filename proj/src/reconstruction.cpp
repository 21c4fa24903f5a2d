#include "vicsfm/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "vicsfm/error.hpp"

namespace vicsfm {

std::size_t Reconstruction::observation_count() const {
    std::size_t n = 0;
    for (const auto& [id, pt] : points) n += pt.observations.size();
    return n;
}

void Reconstruction::prune() {
    std::set<std::pair<FrameId, int>> seen;
    for (auto it = points.begin(); it != points.end();) {
        auto& obs = it->second.observations;
        obs.erase(std::remove_if(obs.begin(), obs.end(),
                                 [&](const Observation& o) {
                                     if (!frames.count(o.frame)) return true;
                                     return !seen.insert({o.frame, o.feature}).second;
                                 }),
                  obs.end());
        if (obs.size() < 2)
            it = points.erase(it);
        else
            ++it;
    }
}

std::optional<std::string> Reconstruction::check_invariants() const {
    std::set<std::pair<FrameId, int>> seen;
    for (const auto& [id, pt] : points) {
        if (pt.observations.size() < 2)
            return "point " + std::to_string(id) + " has fewer than 2 observations";
        for (const auto& o : pt.observations) {
            if (!frames.count(o.frame))
                return "point " + std::to_string(id) + " observes unregistered frame " +
                       std::to_string(o.frame);
            if (!seen.insert({o.frame, o.feature}).second)
                return "duplicate (frame,feature) pair: frame " + std::to_string(o.frame) +
                       " feature " + std::to_string(o.feature);
        }
    }
    return std::nullopt;
}

ReprojectionStats reprojection_stats(const Reconstruction& recon) {
    ReprojectionStats stats;
    const double fallback =
        std::sqrt(static_cast<double>(recon.image_width) * recon.image_width +
                  static_cast<double>(recon.image_height) * recon.image_height);
    std::map<FrameId, std::pair<double, std::size_t>> per_frame;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& [id, pt] : recon.points) {
        for (const auto& o : pt.observations) {
            const auto& frame = recon.frames.at(o.frame);
            const auto proj = project(recon.intrinsics, frame.pose, pt.xyz);
            const double err = proj ? (*proj - o.pixel).norm() : fallback;
            sum += err;
            sum_sq += err * err;
            stats.max_px = std::max(stats.max_px, err);
            auto& acc = per_frame[o.frame];
            acc.first += err;
            acc.second += 1;
            ++stats.count;
        }
    }
    if (stats.count > 0) {
        stats.mean_px = sum / static_cast<double>(stats.count);
        stats.rmse_px = std::sqrt(sum_sq / static_cast<double>(stats.count));
        for (const auto& [fid, acc] : per_frame)
            stats.per_frame_mean[fid] = acc.first / static_cast<double>(acc.second);
    }
    return stats;
}

namespace {

nlohmann::json pose_to_json(const Pose& pose) {
    return {{"q", {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(), pose.rotation.z()}},
            {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
    Pose p;
    const auto& q = j.at("q");
    p.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                    q[3].get<double>());
    p.rotation.normalize();
    const auto& t = j.at("t");
    p.translation = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    return p;
}

}  // namespace

void save_reconstruction_json(const Reconstruction& recon, const std::filesystem::path& path) {
    nlohmann::json j;
    j["intrinsics"] = {{"focal", recon.intrinsics.focal},
                       {"cx", recon.intrinsics.cx},
                       {"cy", recon.intrinsics.cy},
                       {"k1", recon.intrinsics.k1}};
    j["image_size"] = {recon.image_width, recon.image_height};
    auto& frames = j["frames"];
    frames = nlohmann::json::object();
    for (const auto& [id, frame] : recon.frames) {
        auto fj = pose_to_json(frame.pose);
        fj["name"] = frame.name;
        frames[std::to_string(id)] = std::move(fj);
    }
    auto& points = j["points"];
    points = nlohmann::json::object();
    for (const auto& [id, pt] : recon.points) {
        nlohmann::json pj;
        pj["xyz"] = {pt.xyz.x(), pt.xyz.y(), pt.xyz.z()};
        pj["rgb"] = {pt.color[0], pt.color[1], pt.color[2]};
        auto& obs = pj["obs"];
        obs = nlohmann::json::array();
        for (const auto& o : pt.observations)
            obs.push_back({o.frame, o.feature, o.pixel.x(), o.pixel.y()});
        points[std::to_string(id)] = std::move(pj);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(1) << "\n";
}

Reconstruction load_reconstruction_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    in >> j;

    Reconstruction recon;
    const auto& intr = j.at("intrinsics");
    recon.intrinsics.focal = intr.at("focal").get<double>();
    recon.intrinsics.cx = intr.at("cx").get<double>();
    recon.intrinsics.cy = intr.at("cy").get<double>();
    recon.intrinsics.k1 = intr.at("k1").get<double>();
    recon.image_width = j.at("image_size")[0].get<int>();
    recon.image_height = j.at("image_size")[1].get<int>();
    for (const auto& [key, fj] : j.at("frames").items()) {
        Frame frame;
        frame.pose = pose_from_json(fj);
        frame.name = fj.value("name", "");
        recon.frames[std::stoi(key)] = std::move(frame);
    }
    for (const auto& [key, pj] : j.at("points").items()) {
        PointTrack pt;
        const auto& xyz = pj.at("xyz");
        pt.xyz = Eigen::Vector3d(xyz[0].get<double>(), xyz[1].get<double>(), xyz[2].get<double>());
        const auto& rgb = pj.at("rgb");
        pt.color = {rgb[0].get<std::uint8_t>(), rgb[1].get<std::uint8_t>(),
                    rgb[2].get<std::uint8_t>()};
        for (const auto& oj : pj.at("obs")) {
            Observation o;
            o.frame = oj[0].get<int>();
            o.feature = oj[1].get<int>();
            o.pixel = Eigen::Vector2d(oj[2].get<double>(), oj[3].get<double>());
            pt.observations.push_back(o);
        }
        recon.points[std::stoi(key)] = std::move(pt);
    }
    return recon;
}

void save_point_cloud_ply(const Reconstruction& recon, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << recon.points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "end_header\n";
    for (const auto& [id, pt] : recon.points) {
        const float xyz[3] = {static_cast<float>(pt.xyz.x()), static_cast<float>(pt.xyz.y()),
                              static_cast<float>(pt.xyz.z())};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        out.write(reinterpret_cast<const char*>(pt.color.data()), 3);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vicsfm
