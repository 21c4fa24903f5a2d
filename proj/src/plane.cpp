#include "vicsfm/plane.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "vicsfm/random.hpp"

namespace vicsfm {

namespace {

int count_inliers(std::span<const Eigen::Vector3d> points, const Plane& plane, double threshold,
                  std::vector<char>* mask) {
    int count = 0;
    if (mask) mask->assign(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (std::abs(plane.signed_distance(points[i])) <= threshold) {
            ++count;
            if (mask) (*mask)[i] = 1;
        }
    }
    return count;
}

}  // namespace

PlaneFit fit_plane_ransac(std::span<const Eigen::Vector3d> points, double threshold,
                          double confidence, std::uint64_t seed) {
    if (points.size() < 3)
        throw std::invalid_argument("fit_plane_ransac: needs at least 3 points");
    if (threshold <= 0.0) throw std::invalid_argument("fit_plane_ransac: threshold must be positive");
    if (confidence <= 0.0 || confidence >= 1.0)
        throw std::invalid_argument("fit_plane_ransac: confidence must be in (0,1)");

    const std::size_t n = points.size();
    double span_scale = 0.0;
    for (const auto& p : points) span_scale = std::max(span_scale, (p - points[0]).norm());

    Rng rng(seed);
    Plane best;
    int best_count = -1;
    bool any_valid = false;
    std::size_t max_iterations = 1000;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t iteration = 0; iteration < max_iterations; ++iteration) {
        for (std::size_t j = 0; j < 3; ++j) {
            const std::size_t pick = j + rng.uniform_index(n - j);
            std::swap(order[j], order[pick]);
        }
        const Eigen::Vector3d& p0 = points[order[0]];
        const Eigen::Vector3d normal_raw =
            (points[order[1]] - p0).cross(points[order[2]] - p0);
        // Collinear samples span no plane; skip (degenerate if every sample is).
        if (normal_raw.norm() <= 1e-12 * span_scale * span_scale) continue;
        any_valid = true;
        Plane candidate;
        candidate.normal = normal_raw.normalized();
        candidate.offset = -candidate.normal.dot(p0);

        const int count = count_inliers(points, candidate, threshold, nullptr);
        if (count > best_count) {
            best_count = count;
            best = candidate;
            const double w = static_cast<double>(count) / static_cast<double>(n);
            const double fail = 1.0 - w * w * w;
            if (fail <= 0.0) break;
            if (fail < 1.0) {
                const double need = std::log(1.0 - confidence) / std::log(fail);
                max_iterations = std::min<std::size_t>(
                    max_iterations,
                    static_cast<std::size_t>(std::max(1.0, std::ceil(need))));
            }
        }
    }
    if (!any_valid) throw std::invalid_argument("fit_plane_ransac: degenerate (collinear) input");

    PlaneFit fit;
    fit.plane = best;
    fit.inlier_count = count_inliers(points, best, threshold, &fit.inliers);

    // Least-squares refit over the consensus set.
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    int m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (fit.inliers[i]) {
            centroid += points[i];
            ++m;
        }
    }
    if (m >= 3) {
        centroid /= static_cast<double>(m);
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            if (!fit.inliers[i]) continue;
            const Eigen::Vector3d d = points[i] - centroid;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        Plane refined;
        refined.normal = es.eigenvectors().col(0).normalized();
        refined.offset = -refined.normal.dot(centroid);
        std::vector<char> refined_mask;
        const int refined_count = count_inliers(points, refined, threshold, &refined_mask);
        if (refined_count >= fit.inlier_count) {
            fit.plane = refined;
            fit.inliers = std::move(refined_mask);
            fit.inlier_count = refined_count;
        }
    }
    return fit;
}

Reconstruction remove_outliers_plane(const Reconstruction& recon, PlaneCleanupMode mode,
                                     double threshold_factor, double fit_threshold_factor,
                                     std::uint64_t seed) {
    if (recon.points.size() < 3)
        throw std::invalid_argument("remove_outliers_plane: needs at least 3 points");
    if (threshold_factor <= 0.0 || fit_threshold_factor <= 0.0)
        throw std::invalid_argument("remove_outliers_plane: factors must be positive");

    std::vector<PointId> ids;
    std::vector<Eigen::Vector3d> xyz;
    ids.reserve(recon.points.size());
    for (const auto& [pid, pt] : recon.points) {
        ids.push_back(pid);
        xyz.push_back(pt.xyz);
    }

    Eigen::Vector3d lo = xyz.front(), hi = xyz.front();
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : xyz) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
        centroid += p;
    }
    centroid /= static_cast<double>(xyz.size());
    const double diag = (hi - lo).norm();
    if (diag <= 0.0) return recon;  // all points coincide: nothing beyond any threshold

    const PlaneFit fit =
        fit_plane_ransac(xyz, fit_threshold_factor * diag, 0.999, seed);
    const double threshold = threshold_factor * diag;
    const double centroid_side = fit.plane.signed_distance(centroid) >= 0.0 ? 1.0 : -1.0;

    Reconstruction out = recon;
    for (std::size_t i = 0; i < xyz.size(); ++i) {
        const double dist = fit.plane.signed_distance(xyz[i]);
        bool remove = false;
        if (mode == PlaneCleanupMode::KeepNearPlane) {
            remove = std::abs(dist) > threshold;
        } else {
            remove = dist * centroid_side < 0.0 && std::abs(dist) > threshold;
        }
        if (remove) out.points.erase(ids[i]);
    }
    return out;
}

}  // namespace vicsfm
