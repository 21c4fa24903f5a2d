#pragma once

#include <array>
#include <vector>

#include "vicsfm/image.hpp"

namespace vicsfm {

/// Subpixel keypoint in image coordinates. scale is the blur sigma of the
/// difference-of-Gaussians level the keypoint was found at, in pixels of the
/// input image; orientation is in [0, 2*pi).
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double scale = 0.0;
    double orientation = 0.0;
};

/// 128-component gradient-histogram descriptor, unit Euclidean norm.
using Descriptor = std::array<float, 128>;

struct Feature {
    Keypoint keypoint;
    Descriptor descriptor{};
};

struct SiftParams {
    int octaves = 4;
    int scales_per_octave = 3;
    double base_sigma = 1.6;
    double contrast_threshold = 0.04;
    double edge_threshold = 10.0;
    double ratio_threshold = 0.8;  // default for matching stages downstream
};

/// Difference-of-Gaussians keypoints with 3D quadratic subpixel refinement,
/// low-contrast and edge rejection, per-dominant-orientation duplication, and
/// Lowe-style descriptors (normalized, clamped at 0.2, renormalized).
/// Output order is deterministic: octave, then y, then x.
/// Throws std::invalid_argument for images smaller than 16x16.
std::vector<Feature> detect_sift(const GrayImage& img, const SiftParams& params = {});

}  // namespace vicsfm
