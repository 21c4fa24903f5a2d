#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>

namespace vicsfm {

/// Simple-radial pinhole model shared by every frame of a sequence: single
/// focal length, principal point, one radial distortion coefficient.
struct CameraIntrinsics {
    double focal = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double k1 = 0.0;

    /// Standard self-calibration seed for an uncalibrated sequence.
    static CameraIntrinsics from_image_size(int width, int height) {
        CameraIntrinsics intr;
        intr.focal = 1.1 * std::max(width, height);
        intr.cx = 0.5 * width;
        intr.cy = 0.5 * height;
        intr.k1 = 0.0;
        return intr;
    }
};

/// World-to-camera rigid transform: x_cam = R * X + t.
struct Pose {
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Matrix3d matrix() const { return rotation.toRotationMatrix(); }
    Eigen::Vector3d apply(const Eigen::Vector3d& X) const { return rotation * X + translation; }
    /// Camera center in world coordinates.
    Eigen::Vector3d center() const { return rotation.conjugate() * (-translation); }
    Pose inverse() const {
        Pose p;
        p.rotation = rotation.conjugate();
        p.translation = -(rotation.conjugate() * translation);
        return p;
    }
    /// this ∘ other (apply `other` first).
    Pose compose(const Pose& other) const {
        Pose p;
        p.rotation = (rotation * other.rotation).normalized();
        p.translation = rotation * other.translation + translation;
        return p;
    }
};

/// Pinhole + radial projection: n = (x/z, y/z) of the camera-frame point,
/// pixel = focal * (1 + k1*|n|^2) * n + (cx, cy). Returns nullopt when the
/// point is behind the camera (non-positive depth).
std::optional<Eigen::Vector2d> project(const CameraIntrinsics& intr, const Pose& pose,
                                       const Eigen::Vector3d& X);

/// Projection of a camera-frame point.
std::optional<Eigen::Vector2d> project_camera(const CameraIntrinsics& intr,
                                              const Eigen::Vector3d& x_cam);

/// Inverts the radial model: pixel -> normalized image coordinates (x/z, y/z).
/// Newton iterations on the distortion polynomial; exact when k1 = 0.
Eigen::Vector2d undistort_pixel(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel);

/// Unit-norm viewing ray of a pixel in camera coordinates.
Eigen::Vector3d pixel_to_bearing(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel);

/// Rodrigues exponential map: rotation vector -> quaternion.
Eigen::Quaterniond quaternion_exp(const Eigen::Vector3d& omega);

/// Analytic derivatives of the projection at (pose, X). The pose update is
/// left-multiplicative: R <- exp([omega]x) * R, t <- t + dt, so jac_pose
/// columns are [omega(3), t(3)]; jac_intr columns are [focal, cx, cy, k1].
/// Returns false (outputs untouched) for non-positive depth.
bool projection_jacobians(const CameraIntrinsics& intr, const Pose& pose,
                          const Eigen::Vector3d& X, Eigen::Vector2d& pixel,
                          Eigen::Matrix<double, 2, 6>* jac_pose,
                          Eigen::Matrix<double, 2, 3>* jac_point,
                          Eigen::Matrix<double, 2, 4>* jac_intr);

}  // namespace vicsfm
