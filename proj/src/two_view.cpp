#include "vicsfm/two_view.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "vicsfm/random.hpp"

namespace vicsfm {

namespace {

// Hartley-normalized 8-point solve on the given subset. Returns a rank-2 E.
std::optional<Eigen::Matrix3d> solve_eight_point(const std::vector<NormalizedPair>& pairs,
                                                 const std::vector<int>& subset) {
    const std::size_t n = subset.size();
    if (n < 8) return std::nullopt;

    // Condition both point sets: zero centroid, mean distance sqrt(2).
    Eigen::Vector2d ca = Eigen::Vector2d::Zero(), cb = Eigen::Vector2d::Zero();
    for (int idx : subset) {
        ca += pairs[idx].a;
        cb += pairs[idx].b;
    }
    ca /= static_cast<double>(n);
    cb /= static_cast<double>(n);
    double sa = 0.0, sb = 0.0;
    for (int idx : subset) {
        sa += (pairs[idx].a - ca).norm();
        sb += (pairs[idx].b - cb).norm();
    }
    sa /= static_cast<double>(n);
    sb /= static_cast<double>(n);
    if (sa < 1e-12 || sb < 1e-12) return std::nullopt;
    const double fa = std::numbers::sqrt2 / sa;
    const double fb = std::numbers::sqrt2 / sb;

    Eigen::Matrix<double, Eigen::Dynamic, 9> A(n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d pa = (pairs[subset[i]].a - ca) * fa;
        const Eigen::Vector2d pb = (pairs[subset[i]].b - cb) * fb;
        // Constraint: pb^T E pa = 0.
        A.row(i) << pb.x() * pa.x(), pb.x() * pa.y(), pb.x(), pb.y() * pa.x(), pb.y() * pa.y(),
            pb.y(), pa.x(), pa.y(), 1.0;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::Matrix<double, 9, 1> e = svd.matrixV().col(8);
    Eigen::Matrix3d En;
    En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);

    // Undo the conditioning: pb_n = Tb*pb, pa_n = Ta*pa => E = Tb^T En Ta.
    Eigen::Matrix3d Ta = Eigen::Matrix3d::Identity(), Tb = Eigen::Matrix3d::Identity();
    Ta(0, 0) = Ta(1, 1) = fa;
    Ta.block<2, 1>(0, 2) = -fa * ca;
    Tb(0, 0) = Tb(1, 1) = fb;
    Tb.block<2, 1>(0, 2) = -fb * cb;
    Eigen::Matrix3d E = Tb.transpose() * En * Ta;

    // Essential matrices have singular values (s, s, 0).
    Eigen::JacobiSVD<Eigen::Matrix3d> esvd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d s = esvd.singularValues();
    const double sm = 0.5 * (s(0) + s(1));
    if (sm < 1e-14) return std::nullopt;
    E = esvd.matrixU() * Eigen::Vector3d(sm, sm, 0.0).asDiagonal() * esvd.matrixV().transpose();
    return E / E.norm();
}

Eigen::Vector3d homogeneous(const Eigen::Vector2d& p) {
    return Eigen::Vector3d(p.x(), p.y(), 1.0);
}

}  // namespace

double sampson_distance(const Eigen::Matrix3d& E, const NormalizedPair& pair) {
    const Eigen::Vector3d xa = homogeneous(pair.a);
    const Eigen::Vector3d xb = homogeneous(pair.b);
    const double c = xb.dot(E * xa);
    const Eigen::Vector3d Exa = E * xa;
    const Eigen::Vector3d Etxb = E.transpose() * xb;
    const double denom =
        Exa.x() * Exa.x() + Exa.y() * Exa.y() + Etxb.x() * Etxb.x() + Etxb.y() * Etxb.y();
    if (denom < 1e-24) return std::numeric_limits<double>::infinity();
    return std::abs(c) / std::sqrt(denom);
}

std::optional<EssentialResult> estimate_essential_ransac(const std::vector<NormalizedPair>& pairs,
                                                         double threshold, double confidence,
                                                         std::uint64_t seed) {
    constexpr int kSampleSize = 8;
    const int n = static_cast<int>(pairs.size());
    if (n < kSampleSize) return std::nullopt;
    confidence = std::clamp(confidence, 0.0, 0.999999);

    Rng rng(seed);
    std::vector<int> all_indices(n);
    for (int i = 0; i < n; ++i) all_indices[i] = i;

    std::vector<bool> best_inliers;
    int best_count = 0;
    Eigen::Matrix3d best_E = Eigen::Matrix3d::Zero();
    std::size_t max_iterations = 1000;
    std::vector<int> sample(kSampleSize);

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        // Fisher-Yates prefix shuffle for a distinct minimal sample.
        for (int i = 0; i < kSampleSize; ++i) {
            const int j = i + static_cast<int>(rng.uniform_index(n - i));
            std::swap(all_indices[i], all_indices[j]);
            sample[i] = all_indices[i];
        }
        const auto E = solve_eight_point(pairs, sample);
        if (!E) continue;

        std::vector<bool> inliers(n, false);
        int count = 0;
        for (int i = 0; i < n; ++i) {
            if (sampson_distance(*E, pairs[i]) <= threshold) {
                inliers[i] = true;
                ++count;
            }
        }
        if (count > best_count) {
            best_count = count;
            best_inliers = std::move(inliers);
            best_E = *E;
            // Adaptive stopping: enough iterations to hit an all-inlier
            // sample with the requested confidence.
            const double w = static_cast<double>(count) / n;
            const double p_good = std::pow(w, kSampleSize);
            if (p_good > 1e-12) {
                const double need = std::log(1.0 - confidence) / std::log(1.0 - p_good);
                max_iterations = std::min<std::size_t>(
                    max_iterations,
                    iter + 1 + static_cast<std::size_t>(std::max(0.0, std::ceil(need))));
            }
        }
    }
    if (best_count < kSampleSize) return std::nullopt;

    // Refit on the full consensus set.
    std::vector<int> inlier_idx;
    for (int i = 0; i < n; ++i)
        if (best_inliers[i]) inlier_idx.push_back(i);
    if (const auto refit = solve_eight_point(pairs, inlier_idx)) {
        int count = 0;
        std::vector<bool> inliers(n, false);
        for (int i = 0; i < n; ++i) {
            if (sampson_distance(*refit, pairs[i]) <= threshold) {
                inliers[i] = true;
                ++count;
            }
        }
        if (count >= best_count) {
            best_E = *refit;
            best_inliers = std::move(inliers);
            best_count = count;
        }
    }

    EssentialResult result;
    result.E = best_E;
    result.inliers = std::move(best_inliers);
    result.inlier_count = best_count;
    return result;
}

namespace {

// Depth of the triangulated midpoint-free DLT point in both views for the
// cheirality vote.
int count_cheirality(const Eigen::Matrix3d& R, const Eigen::Vector3d& t,
                     const std::vector<NormalizedPair>& pairs) {
    Pose pose_a;  // identity
    Pose pose_b;
    pose_b.rotation = Eigen::Quaterniond(R);
    pose_b.translation = t;
    int good = 0;
    for (const auto& pr : pairs) {
        const auto X = triangulate_nview({pose_a, pose_b}, {pr.a, pr.b}, 0.0);
        if (!X) continue;
        if (X->z() > 0.0 && (R * *X + t).z() > 0.0) ++good;
    }
    return good;
}

}  // namespace

std::optional<Pose> decompose_essential(const Eigen::Matrix3d& E,
                                        const std::vector<NormalizedPair>& pairs) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d U = svd.matrixU();
    Eigen::Matrix3d V = svd.matrixV();
    if (U.determinant() < 0) U.col(2) *= -1.0;
    if (V.determinant() < 0) V.col(2) *= -1.0;

    Eigen::Matrix3d W;
    W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Eigen::Matrix3d R1 = U * W * V.transpose();
    const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
    const Eigen::Vector3d t = U.col(2).normalized();

    const Eigen::Matrix3d rotations[4] = {R1, R1, R2, R2};
    const Eigen::Vector3d translations[4] = {t, -t, t, -t};

    int best = -1, best_count = 0;
    bool tie = false;
    for (int i = 0; i < 4; ++i) {
        const int count = count_cheirality(rotations[i], translations[i], pairs);
        if (count > best_count) {
            best_count = count;
            best = i;
            tie = false;
        } else if (count == best_count && best >= 0) {
            tie = true;
        }
    }
    if (best < 0 || best_count == 0 || tie) return std::nullopt;

    Pose pose;
    pose.rotation = Eigen::Quaterniond(rotations[best]).normalized();
    pose.translation = translations[best];
    return pose;
}

std::optional<Eigen::Vector3d> triangulate_nview(const std::vector<Pose>& poses,
                                                 const std::vector<Eigen::Vector2d>& normalized,
                                                 double min_parallax_deg) {
    const std::size_t n = poses.size();
    if (n < 2 || normalized.size() != n) return std::nullopt;

    Eigen::MatrixXd A(2 * n, 4);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Matrix<double, 3, 4> P;
        P.leftCols<3>() = poses[i].matrix();
        P.col(3) = poses[i].translation;
        A.row(2 * i) = normalized[i].x() * P.row(2) - P.row(0);
        A.row(2 * i + 1) = normalized[i].y() * P.row(2) - P.row(1);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    Eigen::Vector4d Xh = svd.matrixV().col(3);
    if (std::abs(Xh(3)) < 1e-14) return std::nullopt;
    const Eigen::Vector3d X = Xh.head<3>() / Xh(3);

    for (const auto& pose : poses)
        if (pose.apply(X).z() <= 0.0) return std::nullopt;

    if (min_parallax_deg > 0.0) {
        double max_angle = 0.0;
        for (std::size_t i = 0; i < n && max_angle < min_parallax_deg; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const Eigen::Vector3d ri = (X - poses[i].center()).normalized();
                const Eigen::Vector3d rj = (X - poses[j].center()).normalized();
                const double angle =
                    std::acos(std::clamp(ri.dot(rj), -1.0, 1.0)) * 180.0 / std::numbers::pi;
                max_angle = std::max(max_angle, angle);
                if (max_angle >= min_parallax_deg) break;
            }
        }
        if (max_angle < min_parallax_deg) return std::nullopt;
    }
    return X;
}

std::optional<Eigen::Vector3d> triangulate_dlt(const Pose& pose_a, const Pose& pose_b,
                                               const CameraIntrinsics& intr,
                                               const Eigen::Vector2d& pixel_a,
                                               const Eigen::Vector2d& pixel_b,
                                               double min_parallax_deg) {
    if ((pose_a.center() - pose_b.center()).norm() < 1e-12) return std::nullopt;
    return triangulate_nview({pose_a, pose_b},
                             {undistort_pixel(intr, pixel_a), undistort_pixel(intr, pixel_b)},
                             min_parallax_deg);
}

}  // namespace vicsfm
