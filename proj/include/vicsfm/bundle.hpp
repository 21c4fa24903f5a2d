#pragma once

#include <vector>

#include "vicsfm/reconstruction.hpp"

namespace vicsfm {

struct BundleOptions {
    int max_iterations = 100;
    double initial_damping = 1e-3;
    double function_tolerance = 1e-8;
    double huber_delta = 2.0;  // pixels
    bool optimize_intrinsics = false;
    /// Frames whose poses are held constant (beyond the gauge); lets the
    /// incremental pipeline run cheap local adjustments.
    std::vector<FrameId> constant_frames;
};

struct BundleSummary {
    double initial_cost = 0.0;
    double final_cost = 0.0;
    std::vector<double> accepted_costs;  // starts at initial_cost, non-increasing
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt over poses, points, and (optionally) the shared
/// intrinsics, minimizing the Huber-robustified reprojection error. The
/// point-block Schur complement reduces each step to a dense camera system.
/// With fix_gauge, the first registered frame's pose is held constant along
/// with the largest translation component of the second frame (fixing the
/// global similarity gauge). Non-finite residuals raise NumericalError with
/// the offending observation id (point-id-major flat index).
Reconstruction bundle_adjust(const Reconstruction& recon, const BundleOptions& opts,
                             bool fix_gauge = true, BundleSummary* summary = nullptr);

}  // namespace vicsfm
