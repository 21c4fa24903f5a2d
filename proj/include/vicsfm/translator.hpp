#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vicsfm/image.hpp"

namespace vicsfm {

/// Parameters of the built-in texturizing translator. Two effects compose:
/// hashed value-noise "dye pooling" (cells of cell_scale pixels, bilinearly
/// interpolated, blended as in*(1-w*amplitude) + noise*w*amplitude*in so
/// dark regions stay dark) and a local-contrast boost that raises the
/// high-pass residual toward a fixed target level, by at most a factor of
/// detail_gain. The pooling weight w falls off with the local detail
/// energy, and with the image-wide mean of it: only featureless areas of
/// mostly-featureless images receive the full dye texture, anything with
/// usable structure gets the contrast boost alone. That split
/// matters for sequences — amplified structure is attached to the scene and
/// matches across viewpoints, while the pooling pattern is attached to the
/// pixel grid and would decorrelate descriptors if it competed with real
/// texture.
struct SyntheticDyeParams {
    std::uint64_t seed = 7;
    double amplitude = 0.5;    // dye pooling strength, in (0, 1]
    double cell_scale = 14.0;  // dye lattice cell size in pixels
    double detail_gain = 20.0;  // local-contrast amplification cap
};

/// A deterministic image-to-image style translator. The same input and the
/// same configuration always produce byte-identical output. Translators are
/// labeled with the direction they implement (for cycle diagnostics).
class Translator {
public:
    static Translator identity();
    static Translator synthetic_dye(const SyntheticDyeParams& params);
    /// Wraps an external program: each call writes the input as PGM into
    /// in_dir, invokes `command <in_dir> <out_dir>` and reads the same-named
    /// file back from out_dir.
    static Translator external(std::string command, std::filesystem::path in_dir,
                               std::filesystem::path out_dir);
    /// Custom translator from any deterministic function.
    Translator(std::string name, std::function<GrayImage(const GrayImage&)> fn);

    GrayImage operator()(const GrayImage& img) const;
    const std::string& name() const { return name_; }

    std::string direction = "a2b";

private:
    Translator() = default;
    std::string name_;
    std::function<GrayImage(const GrayImage&)> fn_;
};

/// Value-noise dye overlay, exposed directly for tests and tooling.
GrayImage apply_synthetic_dye(const GrayImage& img, const SyntheticDyeParams& params);

/// Mean absolute pixel error of the round trip t_ba(t_ab(img)) against img,
/// in [0, 255]. The translators' cycle-consistency diagnostic.
double cycle_error(const Translator& t_ab, const Translator& t_ba, const GrayImage& img);

/// Batch protocol for externally trained models: writes every image as
/// <name>.pgm into in_dir, invokes `command <in_dir> <out_dir>` once, then
/// reads back out_dir/<name>.pgm in input order. Throws TranslationError
/// identifying the offending frame on missing output, dimension mismatch, or
/// nonzero process exit; no partial results are returned.
std::vector<GrayImage> translate_external_batch(const std::string& command,
                                                const std::filesystem::path& in_dir,
                                                const std::filesystem::path& out_dir,
                                                const std::vector<GrayImage>& images,
                                                const std::vector<std::string>& names);

}  // namespace vicsfm
