#include "vicsfm/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "vicsfm/random.hpp"

namespace vicsfm {

namespace {

// Real roots of c[0] + c[1] v + ... + c[n] v^n via the companion matrix.
std::vector<double> real_roots(std::vector<double> c) {
    double scale = 0.0;
    for (double x : c) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return {};
    while (c.size() > 1 && std::abs(c.back()) < 1e-12 * scale) c.pop_back();
    const int deg = static_cast<int>(c.size()) - 1;
    if (deg < 1) return {};
    if (deg == 1) return {-c[0] / c[1]};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -c[i] / c[deg];

    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
    std::vector<double> roots;
    for (int i = 0; i < deg; ++i) {
        const std::complex<double> z = es.eigenvalues()(i);
        if (std::abs(z.imag()) <= 1e-6 * std::max(1.0, std::abs(z.real())))
            roots.push_back(z.real());
    }
    return roots;
}

// Gauss-Newton polish of the three ray distances against the law-of-cosines
// system; cleans up companion-matrix root error.
void polish_distances(double& s1, double& s2, double& s3, double cab, double cac,
                      double cbc, double a2, double b2, double c2) {
    for (int it = 0; it < 3; ++it) {
        Eigen::Vector3d g(s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * cbc - a2,
                          s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cac - b2,
                          s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cab - c2);
        Eigen::Matrix3d J;
        J << 0.0, 2.0 * (s2 - s3 * cbc), 2.0 * (s3 - s2 * cbc),
            2.0 * (s1 - s3 * cac), 0.0, 2.0 * (s3 - s1 * cac),
            2.0 * (s1 - s2 * cab), 2.0 * (s2 - s1 * cab), 0.0;
        const Eigen::Vector3d delta = J.fullPivLu().solve(-g);
        if (!delta.allFinite()) return;
        s1 += delta.x();
        s2 += delta.y();
        s3 += delta.z();
        if (delta.norm() < 1e-14 * (s1 + s2 + s3)) return;
    }
}

// Rigid transform taking world points onto camera points: p_i = R x_i + t.
Pose absolute_orientation(const std::array<Eigen::Vector3d, 3>& world,
                          const std::array<Eigen::Vector3d, 3>& cam) {
    Eigen::Vector3d wc = (world[0] + world[1] + world[2]) / 3.0;
    Eigen::Vector3d cc = (cam[0] + cam[1] + cam[2]) / 3.0;
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i) H += (world[i] - wc) * (cam[i] - cc).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d R = svd.matrixV() * svd.matrixU().transpose();
    if (R.determinant() < 0.0) {
        Eigen::Matrix3d V = svd.matrixV();
        V.col(2) *= -1.0;
        R = V * svd.matrixU().transpose();
    }
    Pose pose;
    pose.rotation = Eigen::Quaterniond(R).normalized();
    pose.translation = cc - R * wc;
    return pose;
}

}  // namespace

std::vector<Pose> solve_p3p(const std::array<Eigen::Vector3d, 3>& points,
                            const std::array<Eigen::Vector3d, 3>& bearings) {
    const double a2 = (points[1] - points[2]).squaredNorm();
    const double b2 = (points[0] - points[2]).squaredNorm();
    const double c2 = (points[0] - points[1]).squaredNorm();
    if (a2 < 1e-20 || b2 < 1e-20 || c2 < 1e-20) return {};

    const Eigen::Vector3d f1 = bearings[0].normalized();
    const Eigen::Vector3d f2 = bearings[1].normalized();
    const Eigen::Vector3d f3 = bearings[2].normalized();
    const double cab = f1.dot(f2);
    const double cac = f1.dot(f3);
    const double cbc = f2.dot(f3);

    // With u = s2/s1 and v = s3/s1 the law-of-cosines system reduces to a
    // quartic in v: (L - cab*M)^2 - M^2 * Q = 0 where
    //   D(v) = 1 + v^2 - 2 v cac        (so s1^2 = b^2 / D)
    //   Q(v) = (c^2/b^2) D - (1 - cab^2)
    //   L(v) = (a^2 - c^2) D + b^2 (1 - v^2),  M(v) = 2 b^2 (cab - v cbc)
    // and u = L/M on solutions.
    const double k = c2 / b2;
    const double ac = a2 - c2;
    const std::array<double, 3> D = {1.0, -2.0 * cac, 1.0};
    const std::array<double, 3> Q = {k * D[0] - (1.0 - cab * cab), k * D[1], k * D[2]};
    const std::array<double, 3> L = {ac * D[0] + b2, ac * D[1], ac * D[2] - b2};
    const std::array<double, 2> M = {2.0 * b2 * cab, -2.0 * b2 * cbc};
    const std::array<double, 3> P = {L[0] - cab * M[0], L[1] - cab * M[1], L[2]};

    std::vector<double> quartic(5, 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) quartic[i + j] += P[i] * P[j];
    std::array<double, 3> M2 = {M[0] * M[0], 2.0 * M[0] * M[1], M[1] * M[1]};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) quartic[i + j] -= M2[i] * Q[j];

    std::vector<Pose> solutions;
    for (double v : real_roots(quartic)) {
        if (!(v > 0.0)) continue;
        const double Dv = D[0] + D[1] * v + D[2] * v * v;
        if (Dv <= 1e-20) continue;
        const double s1 = std::sqrt(b2 / Dv);
        const double Mv = M[0] + M[1] * v;
        std::vector<double> u_candidates;
        if (std::abs(Mv) > 1e-10 * b2) {
            u_candidates.push_back((L[0] + L[1] * v + L[2] * v * v) / Mv);
        } else {
            const double Qv = Q[0] + Q[1] * v + Q[2] * v * v;
            if (Qv >= 0.0) {
                u_candidates.push_back(cab + std::sqrt(Qv));
                u_candidates.push_back(cab - std::sqrt(Qv));
            }
        }
        for (double u : u_candidates) {
            if (!(u > 0.0)) continue;
            double d1 = s1, d2 = u * s1, d3 = v * s1;
            polish_distances(d1, d2, d3, cab, cac, cbc, a2, b2, c2);
            if (!(d1 > 0.0) || !(d2 > 0.0) || !(d3 > 0.0)) continue;
            const double res = std::abs(d2 * d2 + d3 * d3 - 2.0 * d2 * d3 * cbc - a2);
            if (res > 1e-6 * (a2 + b2 + c2)) continue;
            solutions.push_back(absolute_orientation(
                points, {d1 * f1, d2 * f2, d3 * f3}));
        }
    }
    return solutions;
}

Pose refine_pose(const CameraIntrinsics& intr, const Pose& initial,
                 std::span<const Eigen::Vector3d> points3d,
                 std::span<const Eigen::Vector2d> pixels, int iterations) {
    if (points3d.size() != pixels.size())
        throw std::invalid_argument("refine_pose: size mismatch");
    const size_t n = points3d.size();

    auto cost_of = [&](const Pose& pose) {
        double cost = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const auto pix = project(intr, pose, points3d[i]);
            if (!pix) return std::numeric_limits<double>::infinity();
            cost += (*pix - pixels[i]).squaredNorm();
        }
        return cost;
    };

    Pose pose = initial;
    double cost = cost_of(pose);
    if (!std::isfinite(cost)) return pose;
    double lambda = 1e-3;

    for (int it = 0; it < iterations; ++it) {
        Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
        for (size_t i = 0; i < n; ++i) {
            Eigen::Vector2d pix;
            Eigen::Matrix<double, 2, 6> J;
            if (!projection_jacobians(intr, pose, points3d[i], pix, &J, nullptr, nullptr))
                continue;
            const Eigen::Vector2d r = pix - pixels[i];
            H += J.transpose() * J;
            g += J.transpose() * r;
        }
        bool stepped = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::Matrix<double, 6, 6> damped = H;
            for (int d = 0; d < 6; ++d)
                damped(d, d) += lambda * std::max(H(d, d), 1e-12);
            const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-g);
            if (!delta.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            Pose trial;
            trial.rotation = (quaternion_exp(delta.head<3>()) * pose.rotation).normalized();
            trial.translation = pose.translation + delta.tail<3>();
            const double trial_cost = cost_of(trial);
            if (trial_cost < cost) {
                const double drop = cost - trial_cost;
                pose = trial;
                cost = trial_cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (drop < 1e-14 * (cost + 1e-14)) return pose;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) break;
    }
    return pose;
}

std::optional<PnpResult> solve_pnp_ransac(std::span<const Eigen::Vector3d> points3d,
                                          std::span<const Eigen::Vector2d> pixels,
                                          const CameraIntrinsics& intr,
                                          double threshold, double confidence,
                                          uint64_t seed) {
    if (points3d.size() != pixels.size())
        throw std::invalid_argument("solve_pnp_ransac: size mismatch");
    const size_t n = points3d.size();
    if (n < 4) throw std::invalid_argument("solve_pnp_ransac: needs at least 4 correspondences");

    std::vector<Eigen::Vector3d> bearings(n);
    for (size_t i = 0; i < n; ++i) bearings[i] = pixel_to_bearing(intr, pixels[i]);

    auto count_inliers = [&](const Pose& pose, std::vector<char>* mask) {
        int count = 0;
        if (mask) mask->assign(n, 0);
        for (size_t i = 0; i < n; ++i) {
            const auto pix = project(intr, pose, points3d[i]);
            if (!pix) continue;
            if ((*pix - pixels[i]).norm() <= threshold) {
                ++count;
                if (mask) (*mask)[i] = 1;
            }
        }
        return count;
    };

    Rng rng(seed);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    Pose best_pose;
    int best_count = 0;
    size_t max_iterations = 1000;
    for (size_t iteration = 0; iteration < max_iterations; ++iteration) {
        for (size_t j = 0; j < 4; ++j) {
            const size_t pick = j + rng.uniform_index(n - j);
            std::swap(order[j], order[pick]);
        }
        const std::array<Eigen::Vector3d, 3> sp = {points3d[order[0]], points3d[order[1]],
                                                   points3d[order[2]]};
        const std::array<Eigen::Vector3d, 3> sb = {bearings[order[0]], bearings[order[1]],
                                                   bearings[order[2]]};
        const size_t check = order[3];

        Pose candidate;
        double candidate_err = std::numeric_limits<double>::infinity();
        for (const Pose& pose : solve_p3p(sp, sb)) {
            const auto pix = project(intr, pose, points3d[check]);
            if (!pix) continue;
            const double err = (*pix - pixels[check]).norm();
            if (err < candidate_err) {
                candidate_err = err;
                candidate = pose;
            }
        }
        if (!std::isfinite(candidate_err)) continue;

        const int count = count_inliers(candidate, nullptr);
        if (count > best_count) {
            best_count = count;
            best_pose = candidate;
            const double w = static_cast<double>(count) / static_cast<double>(n);
            const double fail = 1.0 - w * w * w * w;
            if (fail <= 0.0) break;
            if (fail < 1.0) {
                const double need = std::log(1.0 - confidence) / std::log(fail);
                max_iterations = std::min<size_t>(
                    max_iterations,
                    static_cast<size_t>(std::max(1.0, std::ceil(need))));
            }
        }
    }
    if (best_count < 4) return std::nullopt;

    PnpResult result;
    result.pose = best_pose;
    result.inlier_count = count_inliers(best_pose, &result.inlier_mask);

    std::vector<Eigen::Vector3d> in_pts;
    std::vector<Eigen::Vector2d> in_pix;
    for (size_t i = 0; i < n; ++i) {
        if (result.inlier_mask[i]) {
            in_pts.push_back(points3d[i]);
            in_pix.push_back(pixels[i]);
        }
    }
    const Pose refined = refine_pose(intr, result.pose, in_pts, in_pix);
    std::vector<char> refined_mask;
    const int refined_count = count_inliers(refined, &refined_mask);
    if (refined_count >= result.inlier_count) {
        result.pose = refined;
        result.inlier_mask = std::move(refined_mask);
        result.inlier_count = refined_count;
    }
    return result;
}

}  // namespace vicsfm
