#include "vicsfm/camera.hpp"

#include <cmath>

namespace vicsfm {

std::optional<Eigen::Vector2d> project_camera(const CameraIntrinsics& intr,
                                              const Eigen::Vector3d& x_cam) {
    if (x_cam.z() <= 0.0) return std::nullopt;
    const Eigen::Vector2d n(x_cam.x() / x_cam.z(), x_cam.y() / x_cam.z());
    const double r = 1.0 + intr.k1 * n.squaredNorm();
    return Eigen::Vector2d(intr.focal * r * n.x() + intr.cx, intr.focal * r * n.y() + intr.cy);
}

std::optional<Eigen::Vector2d> project(const CameraIntrinsics& intr, const Pose& pose,
                                       const Eigen::Vector3d& X) {
    return project_camera(intr, pose.apply(X));
}

Eigen::Vector2d undistort_pixel(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel) {
    const Eigen::Vector2d d((pixel.x() - intr.cx) / intr.focal,
                            (pixel.y() - intr.cy) / intr.focal);
    if (intr.k1 == 0.0) return d;
    // Solve n * (1 + k1*|n|^2) = d for n; reduces to a scalar equation in
    // s = |n| along the fixed direction of d.
    const double dn = d.norm();
    if (dn == 0.0) return d;
    double s = dn;
    for (int i = 0; i < 20; ++i) {
        const double f = s * (1.0 + intr.k1 * s * s) - dn;
        const double fp = 1.0 + 3.0 * intr.k1 * s * s;
        if (std::abs(fp) < 1e-14) break;
        const double step = f / fp;
        s -= step;
        if (std::abs(step) < 1e-14) break;
    }
    return d * (s / dn);
}

Eigen::Vector3d pixel_to_bearing(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel) {
    const Eigen::Vector2d n = undistort_pixel(intr, pixel);
    return Eigen::Vector3d(n.x(), n.y(), 1.0).normalized();
}

Eigen::Quaterniond quaternion_exp(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    if (theta < 1e-12) {
        Eigen::Quaterniond q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
        q.normalize();
        return q;
    }
    const Eigen::Vector3d axis = omega / theta;
    return Eigen::Quaterniond(Eigen::AngleAxisd(theta, axis));
}

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

}  // namespace

bool projection_jacobians(const CameraIntrinsics& intr, const Pose& pose,
                          const Eigen::Vector3d& X, Eigen::Vector2d& pixel,
                          Eigen::Matrix<double, 2, 6>* jac_pose,
                          Eigen::Matrix<double, 2, 3>* jac_point,
                          Eigen::Matrix<double, 2, 4>* jac_intr) {
    const Eigen::Matrix3d R = pose.rotation.toRotationMatrix();
    const Eigen::Vector3d xc = R * X + pose.translation;
    if (xc.z() <= 0.0) return false;

    const double iz = 1.0 / xc.z();
    const Eigen::Vector2d n(xc.x() * iz, xc.y() * iz);
    const double rho = n.squaredNorm();
    const double r = 1.0 + intr.k1 * rho;
    pixel = intr.focal * r * n + Eigen::Vector2d(intr.cx, intr.cy);

    Eigen::Matrix<double, 2, 3> dn_dxc;
    dn_dxc << iz, 0.0, -xc.x() * iz * iz, 0.0, iz, -xc.y() * iz * iz;

    Eigen::Matrix2d dpix_dn;
    dpix_dn << r + 2.0 * intr.k1 * n.x() * n.x(), 2.0 * intr.k1 * n.x() * n.y(),
        2.0 * intr.k1 * n.x() * n.y(), r + 2.0 * intr.k1 * n.y() * n.y();
    dpix_dn *= intr.focal;

    const Eigen::Matrix<double, 2, 3> dpix_dxc = dpix_dn * dn_dxc;
    if (jac_pose) {
        jac_pose->leftCols<3>() = dpix_dxc * (-skew(R * X));
        jac_pose->rightCols<3>() = dpix_dxc;
    }
    if (jac_point) *jac_point = dpix_dxc * R;
    if (jac_intr) {
        jac_intr->col(0) = r * n;
        jac_intr->col(1) = Eigen::Vector2d(1.0, 0.0);
        jac_intr->col(2) = Eigen::Vector2d(0.0, 1.0);
        jac_intr->col(3) = intr.focal * rho * n;
    }
    return true;
}

}  // namespace vicsfm
