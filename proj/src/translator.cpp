#include "vicsfm/translator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "vicsfm/error.hpp"
#include "vicsfm/image_io.hpp"
#include "vicsfm/random.hpp"

namespace vicsfm {

namespace {

// Two box-blur passes (separable, clamped edges) approximate a wide Gaussian.
std::vector<double> box_smooth(std::vector<double> a, int w, int h, int radius) {
    std::vector<double> b(a.size());
    const double inv = 1.0 / (2 * radius + 1);
    for (int pass = 0; pass < 2; ++pass) {
        for (int y = 0; y < h; ++y) {  // horizontal
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    s += a[static_cast<std::size_t>(y) * w + std::clamp(x + k, 0, w - 1)];
                b[static_cast<std::size_t>(y) * w + x] = s * inv;
            }
        }
        for (int x = 0; x < w; ++x) {  // vertical
            for (int y = 0; y < h; ++y) {
                double s = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    s += b[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
                a[static_cast<std::size_t>(y) * w + x] = s * inv;
            }
        }
    }
    return a;
}

}  // namespace

GrayImage apply_synthetic_dye(const GrayImage& img, const SyntheticDyeParams& params) {
    if (!img.valid()) throw std::invalid_argument("apply_synthetic_dye: invalid image");
    if (params.amplitude < 0.0 || params.amplitude > 1.0)
        throw std::invalid_argument("apply_synthetic_dye: amplitude must be in [0,1]");
    if (params.cell_scale <= 0.0)
        throw std::invalid_argument("apply_synthetic_dye: cell_scale must be positive");
    if (params.detail_gain < 0.0)
        throw std::invalid_argument("apply_synthetic_dye: detail_gain must be >= 0");

    const int w = img.width, h = img.height;
    std::vector<double> vals(img.data.begin(), img.data.end());
    // Band-pass split: the light pre-blur suppresses quantization steps so
    // they do not dominate after amplification.
    constexpr int kPreRadius = 1;
    constexpr int kBaseRadius = 16;
    const std::vector<double> pre = box_smooth(vals, w, h, kPreRadius);
    const std::vector<double> base = box_smooth(vals, w, h, kBaseRadius);
    std::vector<double> detail(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) detail[i] = pre[i] - base[i];

    // Local detail energy (smoothed mean absolute deviation). Pooling weight
    // decays with it, so the dye texture lands on smooth areas only.
    std::vector<double> energy(detail.size());
    for (std::size_t i = 0; i < detail.size(); ++i) energy[i] = std::abs(detail[i]);
    energy = box_smooth(std::move(energy), w, h, 8);
    constexpr double kEnergyScale = 1.5;    // gray levels at which pooling halves
    constexpr double kDetailTarget = 28.0;  // desired local detail level, gray

    // Pooling is additionally gated by how featureless the whole image is.
    // Even weak screen-grid texture degrades descriptors of real structure
    // nearby, so images with usable detail get the contrast boost only. The
    // statistic skips the border band, where clamped-edge blurring inflates
    // the residual of any image with a brightness slope.
    const int margin = std::min(kBaseRadius, std::min(w, h) / 4);
    double mean_energy = 0.0;
    std::size_t n_interior = 0;
    for (int y = margin; y < h - margin; ++y)
        for (int x = margin; x < w - margin; ++x) {
            mean_energy += energy[static_cast<std::size_t>(y) * w + x];
            ++n_interior;
        }
    if (n_interior > 0) mean_energy /= static_cast<double>(n_interior);
    constexpr double kFeaturelessScale = 0.4;  // mean gray level of "featureless"
    const double rel = mean_energy / kFeaturelessScale;
    const double global_gate = 1.0 / (1.0 + rel * rel * rel * rel);

    GrayImage out(img.width, img.height);
    const double inv_cell = 1.0 / params.cell_scale;
    for (int y = 0; y < img.height; ++y) {
        const double gy = y * inv_cell;
        const std::int64_t y0 = static_cast<std::int64_t>(std::floor(gy));
        const double wy = gy - static_cast<double>(y0);
        for (int x = 0; x < img.width; ++x) {
            const double gx = x * inv_cell;
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(gx));
            const double wx = gx - static_cast<double>(x0);
            const double n00 = lattice_noise(params.seed, x0, y0);
            const double n10 = lattice_noise(params.seed, x0 + 1, y0);
            const double n01 = lattice_noise(params.seed, x0, y0 + 1);
            const double n11 = lattice_noise(params.seed, x0 + 1, y0 + 1);
            const double noise = (1.0 - wy) * ((1.0 - wx) * n00 + wx * n10) +
                                 wy * ((1.0 - wx) * n01 + wx * n11);
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            const double in = vals[idx];
            const double e = energy[idx];
            const double pool = params.amplitude * global_gate * (kEnergyScale * kEnergyScale) /
                                (kEnergyScale * kEnergyScale + e * e);
            // Contrast boost saturates once local detail reaches the target
            // level; strong texture passes nearly unchanged instead of clipping.
            const double gain =
                std::min(params.detail_gain, std::max(1.0, kDetailTarget / std::max(e, 1e-9)));
            const double v = in * (1.0 - pool) + noise * pool * in + gain * detail[idx];
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

Translator Translator::identity() {
    Translator t;
    t.name_ = "identity";
    t.fn_ = [](const GrayImage& img) { return img; };
    return t;
}

Translator Translator::synthetic_dye(const SyntheticDyeParams& params) {
    Translator t;
    std::ostringstream name;
    name << "synthetic_dye(seed=" << params.seed << ",amplitude=" << params.amplitude
         << ",cell_scale=" << params.cell_scale << ",detail_gain=" << params.detail_gain
         << ")";
    t.name_ = name.str();
    t.fn_ = [params](const GrayImage& img) { return apply_synthetic_dye(img, params); };
    return t;
}

Translator Translator::external(std::string command, std::filesystem::path in_dir,
                                std::filesystem::path out_dir) {
    Translator t;
    t.name_ = "external(" + command + ")";
    t.fn_ = [command, in_dir, out_dir](const GrayImage& img) {
        auto results = translate_external_batch(command, in_dir, out_dir, {img}, {"frame"});
        return results.front();
    };
    return t;
}

Translator::Translator(std::string name, std::function<GrayImage(const GrayImage&)> fn)
    : name_(std::move(name)), fn_(std::move(fn)) {}

GrayImage Translator::operator()(const GrayImage& img) const {
    if (!fn_) throw TranslationError("translator not configured");
    return fn_(img);
}

double cycle_error(const Translator& t_ab, const Translator& t_ba, const GrayImage& img) {
    if (!img.valid()) throw std::invalid_argument("cycle_error: invalid image");
    const GrayImage cycled = t_ba(t_ab(img));
    if (cycled.width != img.width || cycled.height != img.height)
        throw TranslationError("cycle_error: round trip changed image dimensions");
    double sum = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i)
        sum += std::abs(static_cast<int>(img.data[i]) - static_cast<int>(cycled.data[i]));
    return sum / static_cast<double>(img.size());
}

std::vector<GrayImage> translate_external_batch(const std::string& command,
                                                const std::filesystem::path& in_dir,
                                                const std::filesystem::path& out_dir,
                                                const std::vector<GrayImage>& images,
                                                const std::vector<std::string>& names) {
    if (images.size() != names.size())
        throw std::invalid_argument("translate_external_batch: images/names size mismatch");
    if (images.empty()) return {};

    std::filesystem::create_directories(in_dir);
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < images.size(); ++i)
        save_pgm(images[i], in_dir / (names[i] + ".pgm"));

    const std::string cmdline = command + " \"" + in_dir.string() + "\" \"" + out_dir.string() +
                                "\"";
    const int status = std::system(cmdline.c_str());
    if (status != 0) {
        std::ostringstream msg;
        msg << "external translator exited with status " << status << ": " << cmdline;
        throw TranslationError(msg.str());
    }

    std::vector<GrayImage> results;
    results.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto path = out_dir / (names[i] + ".pgm");
        if (!std::filesystem::exists(path))
            throw TranslationError("external translator produced no output for frame '" +
                                   names[i] + "' (" + path.string() + ")");
        GrayImage img = load_pgm(path);
        if (img.width != images[i].width || img.height != images[i].height)
            throw TranslationError("external translator changed dimensions of frame '" +
                                   names[i] + "'");
        results.push_back(std::move(img));
    }
    return results;
}

}  // namespace vicsfm
