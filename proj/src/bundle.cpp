#include "vicsfm/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vicsfm/error.hpp"

namespace vicsfm {

namespace {

struct ObsRef {
    int camera = 0;  // dense camera index
    int point = 0;   // dense point index
    Eigen::Vector2d pixel;
    long id = 0;  // point-id-major flat observation index
};

// Huber cost on the residual norm: e^2 inside delta, 2*delta*e - delta^2 beyond.
double huber_cost(double e, double delta) {
    return e <= delta ? e * e : 2.0 * delta * e - delta * delta;
}

struct Problem {
    std::vector<FrameId> frame_ids;
    std::vector<PointId> point_ids;
    std::vector<Pose> poses;
    std::vector<Eigen::Vector3d> xyz;
    CameraIntrinsics intr;
    std::vector<ObsRef> obs;
    double penalty = 0.0;  // robust cost charged to behind-camera observations
};

double total_cost(const Problem& p, double delta) {
    double cost = 0.0;
    for (const ObsRef& o : p.obs) {
        const auto pix = project(p.intr, p.poses[o.camera], p.xyz[o.point]);
        if (!pix) {
            cost += p.penalty;
            continue;
        }
        if (!pix->allFinite())
            throw NumericalError("bundle_adjust: non-finite residual", o.id);
        cost += huber_cost((*pix - o.pixel).norm(), delta);
    }
    if (!std::isfinite(cost))
        throw NumericalError("bundle_adjust: non-finite total cost", -1);
    return cost;
}

}  // namespace

Reconstruction bundle_adjust(const Reconstruction& recon, const BundleOptions& opts,
                             bool fix_gauge, BundleSummary* summary) {
    if (opts.max_iterations <= 0 || opts.initial_damping <= 0.0 ||
        opts.function_tolerance <= 0.0 || opts.huber_delta <= 0.0)
        throw std::invalid_argument("bundle_adjust: options must be positive");

    Problem p;
    p.intr = recon.intrinsics;
    std::map<FrameId, int> cam_index;
    for (const auto& [fid, frame] : recon.frames) {
        cam_index.emplace(fid, static_cast<int>(p.frame_ids.size()));
        p.frame_ids.push_back(fid);
        p.poses.push_back(frame.pose);
    }
    long flat = 0;
    for (const auto& [pid, track] : recon.points) {
        const int pidx = static_cast<int>(p.point_ids.size());
        p.point_ids.push_back(pid);
        p.xyz.push_back(track.xyz);
        for (const Observation& o : track.observations) {
            const auto it = cam_index.find(o.frame);
            if (it == cam_index.end())
                throw std::invalid_argument("bundle_adjust: observation of unregistered frame");
            if (!o.pixel.allFinite() || !track.xyz.allFinite())
                throw NumericalError("bundle_adjust: non-finite residual", flat);
            p.obs.push_back({it->second, pidx, o.pixel, flat});
            ++flat;
        }
    }
    const int n_cams = static_cast<int>(p.poses.size());
    const int n_pts = static_cast<int>(p.xyz.size());
    const double diag_len = std::hypot(static_cast<double>(recon.image_width),
                                       static_cast<double>(recon.image_height));
    p.penalty = huber_cost(std::max(diag_len, 1.0), opts.huber_delta);

    // Reduced (camera + intrinsics) parameter layout: 6 per camera then 4
    // intrinsics. Fixed entries are masked out of the normal equations.
    const int n_red = 6 * n_cams + 4;
    std::vector<char> fixed(n_red, 0);
    if (!opts.optimize_intrinsics)
        for (int i = 0; i < 4; ++i) fixed[6 * n_cams + i] = 1;
    if (fix_gauge && n_cams >= 1) {
        for (int i = 0; i < 6; ++i) fixed[i] = 1;
        if (n_cams >= 2) {
            int comp = 0;
            p.poses[1].translation.cwiseAbs().maxCoeff(&comp);
            fixed[6 + 3 + comp] = 1;
        }
    }
    for (FrameId fid : opts.constant_frames) {
        const auto it = cam_index.find(fid);
        if (it == cam_index.end()) continue;
        for (int i = 0; i < 6; ++i) fixed[6 * it->second + i] = 1;
    }

    BundleSummary local;
    BundleSummary& sum = summary ? *summary : local;
    sum = BundleSummary{};
    sum.initial_cost = total_cost(p, opts.huber_delta);
    sum.accepted_costs.push_back(sum.initial_cost);

    double cost = sum.initial_cost;
    double lambda = opts.initial_damping;
    const double delta = opts.huber_delta;

    // Per-point scratch for the Schur complement.
    std::vector<std::vector<int>> point_obs(n_pts);
    for (int i = 0; i < static_cast<int>(p.obs.size()); ++i)
        point_obs[p.obs[i].point].push_back(i);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        ++sum.iterations;

        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n_red, n_red);
        Eigen::VectorXd g_r = Eigen::VectorXd::Zero(n_red);
        std::vector<Eigen::Matrix3d> V(n_pts, Eigen::Matrix3d::Zero());
        std::vector<Eigen::Vector3d> g_p(n_pts, Eigen::Vector3d::Zero());
        // Cross blocks per point, stored sparse by reduced-column group.
        struct Cross {
            std::vector<int> cols;                       // reduced base index (camera*6 or intr)
            std::vector<Eigen::Matrix<double, 6, 3>> wc; // camera blocks
            Eigen::Matrix<double, 4, 3> wi;              // intrinsics block
            bool has_intr = false;
        };
        std::vector<Cross> cross(n_pts);

        for (const ObsRef& o : p.obs) {
            Eigen::Vector2d pix;
            Eigen::Matrix<double, 2, 6> Jc;
            Eigen::Matrix<double, 2, 3> Jp;
            Eigen::Matrix<double, 2, 4> Ji;
            if (!projection_jacobians(p.intr, p.poses[o.camera], p.xyz[o.point], pix,
                                      &Jc, &Jp, &Ji))
                continue;  // behind camera: charged the constant penalty, no gradient
            if (!pix.allFinite())
                throw NumericalError("bundle_adjust: non-finite residual", o.id);
            Eigen::Vector2d r = pix - o.pixel;
            const double e = r.norm();
            const double w = e <= delta ? 1.0 : delta / e;  // IRLS weight
            const double sw = std::sqrt(w);
            r *= sw;
            Jc *= sw;
            Jp *= sw;
            Ji *= sw;

            const int cbase = 6 * o.camera;
            const int ibase = 6 * n_cams;
            S.block<6, 6>(cbase, cbase) += Jc.transpose() * Jc;
            S.block<6, 4>(cbase, ibase) += Jc.transpose() * Ji;
            S.block<4, 6>(ibase, cbase) += Ji.transpose() * Jc;
            S.block<4, 4>(ibase, ibase) += Ji.transpose() * Ji;
            g_r.segment<6>(cbase) += Jc.transpose() * r;
            g_r.segment<4>(ibase) += Ji.transpose() * r;

            V[o.point] += Jp.transpose() * Jp;
            g_p[o.point] += Jp.transpose() * r;

            Cross& cr = cross[o.point];
            int slot = -1;
            for (int k = 0; k < static_cast<int>(cr.cols.size()); ++k)
                if (cr.cols[k] == cbase) slot = k;
            if (slot < 0) {
                cr.cols.push_back(cbase);
                cr.wc.push_back(Eigen::Matrix<double, 6, 3>::Zero());
                slot = static_cast<int>(cr.cols.size()) - 1;
            }
            cr.wc[slot] += Jc.transpose() * Jp;
            if (!cr.has_intr) {
                cr.wi.setZero();
                cr.has_intr = true;
            }
            cr.wi += Ji.transpose() * Jp;
        }

        bool accepted = false;
        double accepted_drop = 0.0;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            Eigen::MatrixXd S_d = S;
            Eigen::VectorXd g_d = g_r;
            std::vector<Eigen::Matrix3d> V_inv(n_pts);
            bool bad_point = false;
            for (int j = 0; j < n_pts; ++j) {
                Eigen::Matrix3d Vj = V[j];
                for (int d = 0; d < 3; ++d)
                    Vj(d, d) += lambda * std::max(V[j](d, d), 1e-12);
                const Eigen::Matrix3d inv = Vj.inverse();
                if (!inv.allFinite()) {
                    bad_point = true;
                    break;
                }
                V_inv[j] = inv;
            }
            if (bad_point) {
                lambda *= 10.0;
                continue;
            }

            // Schur complement: S_d -= W V^-1 W^T, g_d -= W V^-1 g_p.
            for (int j = 0; j < n_pts; ++j) {
                const Cross& cr = cross[j];
                const int nb = static_cast<int>(cr.cols.size());
                if (nb == 0 && !cr.has_intr) continue;
                const Eigen::Vector3d vg = V_inv[j] * g_p[j];
                const int ibase = 6 * n_cams;
                for (int a = 0; a < nb; ++a) {
                    const Eigen::Matrix<double, 6, 3> WA_V = cr.wc[a] * V_inv[j];
                    for (int b = 0; b < nb; ++b)
                        S_d.block<6, 6>(cr.cols[a], cr.cols[b]) -=
                            WA_V * cr.wc[b].transpose();
                    if (cr.has_intr) {
                        S_d.block<6, 4>(cr.cols[a], ibase) -= WA_V * cr.wi.transpose();
                        S_d.block<4, 6>(ibase, cr.cols[a]) -=
                            (cr.wi * V_inv[j]) * cr.wc[a].transpose();
                    }
                    g_d.segment<6>(cr.cols[a]) -= cr.wc[a] * vg;
                }
                if (cr.has_intr) {
                    S_d.block<4, 4>(ibase, ibase) -= (cr.wi * V_inv[j]) * cr.wi.transpose();
                    g_d.segment<4>(ibase) -= cr.wi * vg;
                }
            }

            for (int i = 0; i < n_red; ++i)
                S_d(i, i) += lambda * std::max(S(i, i), 1e-12);
            for (int i = 0; i < n_red; ++i) {
                if (!fixed[i]) continue;
                S_d.row(i).setZero();
                S_d.col(i).setZero();
                S_d(i, i) = 1.0;
                g_d(i) = 0.0;
            }

            const Eigen::VectorXd delta_r = S_d.ldlt().solve(-g_d);
            if (!delta_r.allFinite()) {
                lambda *= 10.0;
                continue;
            }

            Problem trial = p;
            for (int ci = 0; ci < n_cams; ++ci) {
                const Eigen::Vector3d omega = delta_r.segment<3>(6 * ci);
                const Eigen::Vector3d dt = delta_r.segment<3>(6 * ci + 3);
                trial.poses[ci].rotation =
                    (quaternion_exp(omega) * p.poses[ci].rotation).normalized();
                trial.poses[ci].translation = p.poses[ci].translation + dt;
            }
            if (opts.optimize_intrinsics) {
                const int ibase = 6 * n_cams;
                trial.intr.focal += delta_r(ibase + 0);
                trial.intr.cx += delta_r(ibase + 1);
                trial.intr.cy += delta_r(ibase + 2);
                trial.intr.k1 += delta_r(ibase + 3);
            }
            double step_norm_sq = delta_r.squaredNorm();
            for (int j = 0; j < n_pts; ++j) {
                Eigen::Matrix<double, 3, 1> rhs = -g_p[j];
                const Cross& cr = cross[j];
                for (int a = 0; a < static_cast<int>(cr.cols.size()); ++a)
                    rhs -= cr.wc[a].transpose() * delta_r.segment<6>(cr.cols[a]);
                if (cr.has_intr)
                    rhs -= cr.wi.transpose() * delta_r.segment<4>(6 * n_cams);
                const Eigen::Vector3d dp = V_inv[j] * rhs;
                trial.xyz[j] = p.xyz[j] + dp;
                step_norm_sq += dp.squaredNorm();
            }

            const double trial_cost = total_cost(trial, delta);
            if (trial_cost < cost) {
                accepted_drop = cost - trial_cost;
                p.poses = std::move(trial.poses);
                p.xyz = std::move(trial.xyz);
                p.intr = trial.intr;
                cost = trial_cost;
                sum.accepted_costs.push_back(cost);
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
            } else {
                lambda *= 10.0;
                if (std::sqrt(step_norm_sq) < 1e-14) break;
            }
        }

        if (!accepted) {
            sum.converged = true;
            break;
        }
        if (accepted_drop <= opts.function_tolerance * std::max(cost, 1e-30)) {
            sum.converged = true;
            break;
        }
    }

    sum.final_cost = cost;

    Reconstruction out = recon;
    out.intrinsics = p.intr;
    for (int ci = 0; ci < n_cams; ++ci) out.frames[p.frame_ids[ci]].pose = p.poses[ci];
    for (int j = 0; j < n_pts; ++j) out.points[p.point_ids[j]].xyz = p.xyz[j];
    return out;
}

}  // namespace vicsfm
