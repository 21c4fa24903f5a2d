#pragma once

#include <filesystem>
#include <vector>

#include "vicsfm/sift.hpp"

namespace vicsfm {

/// Binary feature dump: 8-byte magic "VICSFMF1", uint32 count, then one
/// record per feature (float32 x, y, scale, orientation followed by 128
/// bytes of quantized descriptor, q = round(512*v) clamped to 255). A JSON
/// sidecar <path>.json records the detector parameters.
void save_features(const std::vector<Feature>& features, const SiftParams& params,
                   const std::filesystem::path& path);

std::vector<Feature> load_features(const std::filesystem::path& path,
                                   SiftParams* params_out = nullptr);

}  // namespace vicsfm
