#include "vicsfm/sift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vicsfm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    FloatImage() = default;
    FloatImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.f) {}
    float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

FloatImage to_float(const GrayImage& img) {
    FloatImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data[i] = static_cast<float>(img.data[i]) / 255.f;
    return out;
}

// Separable Gaussian blur with clamp-to-edge boundaries.
FloatImage gaussian_blur(const FloatImage& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (auto& k : kernel) k = static_cast<float>(k / sum);

    FloatImage tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, img.width - 1);
                acc += kernel[i + radius] * img.at(xx, y);
            }
            tmp.at(x, y) = acc;
        }
    }
    FloatImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, img.height - 1);
                acc += kernel[i + radius] * tmp.at(x, yy);
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

FloatImage downsample_half(const FloatImage& img) {
    FloatImage out(std::max(1, img.width / 2), std::max(1, img.height / 2));
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(x, y) = img.at(2 * x, 2 * y);
    return out;
}

struct Octave {
    std::vector<FloatImage> gauss;  // scales_per_octave + 3 levels
    std::vector<FloatImage> dog;    // scales_per_octave + 2 levels
};

struct Candidate {
    int octave;
    int level;
    double x, y;       // octave coordinates, subpixel
    double sigma_rel;  // octave-relative blur of the refined level
    double contrast;
};

// 3D quadratic refinement of a DoG extremum. Returns false when the point
// drifts out of bounds or fails the contrast/edge tests.
bool refine_extremum(const Octave& oct, const SiftParams& p, int level, int x, int y,
                     Candidate& out) {
    const int w = oct.dog[0].width;
    const int h = oct.dog[0].height;
    double dx = 0, dy = 0, ds = 0;
    double value = 0;
    for (int iter = 0; iter < 5; ++iter) {
        const FloatImage& d0 = oct.dog[level - 1];
        const FloatImage& d1 = oct.dog[level];
        const FloatImage& d2 = oct.dog[level + 1];

        const double g0 = 0.5 * (d1.at(x + 1, y) - d1.at(x - 1, y));
        const double g1 = 0.5 * (d1.at(x, y + 1) - d1.at(x, y - 1));
        const double g2 = 0.5 * (d2.at(x, y) - d0.at(x, y));

        const double hxx = d1.at(x + 1, y) - 2.0 * d1.at(x, y) + d1.at(x - 1, y);
        const double hyy = d1.at(x, y + 1) - 2.0 * d1.at(x, y) + d1.at(x, y - 1);
        const double hss = d2.at(x, y) - 2.0 * d1.at(x, y) + d0.at(x, y);
        const double hxy = 0.25 * (d1.at(x + 1, y + 1) - d1.at(x - 1, y + 1) -
                                   d1.at(x + 1, y - 1) + d1.at(x - 1, y - 1));
        const double hxs = 0.25 * (d2.at(x + 1, y) - d2.at(x - 1, y) -
                                   d0.at(x + 1, y) + d0.at(x - 1, y));
        const double hys = 0.25 * (d2.at(x, y + 1) - d2.at(x, y - 1) -
                                   d0.at(x, y + 1) + d0.at(x, y - 1));

        // Solve H * delta = -g with a hand-rolled 3x3 solve (Cramer).
        const double det = hxx * (hyy * hss - hys * hys) - hxy * (hxy * hss - hys * hxs) +
                           hxs * (hxy * hys - hyy * hxs);
        if (std::abs(det) < 1e-20) return false;
        const double inv = 1.0 / det;
        dx = -inv * (g0 * (hyy * hss - hys * hys) - g1 * (hxy * hss - hxs * hys) +
                     g2 * (hxy * hys - hxs * hyy));
        dy = -inv * (-g0 * (hxy * hss - hys * hxs) + g1 * (hxx * hss - hxs * hxs) -
                     g2 * (hxx * hys - hxy * hxs));
        ds = -inv * (g0 * (hxy * hys - hyy * hxs) - g1 * (hxx * hys - hxy * hxs) +
                     g2 * (hxx * hyy - hxy * hxy));

        if (std::abs(dx) < 0.5 && std::abs(dy) < 0.5 && std::abs(ds) < 0.5) {
            value = d1.at(x, y) + 0.5 * (g0 * dx + g1 * dy + g2 * ds);

            // Low-contrast rejection.
            if (std::abs(value) < p.contrast_threshold / p.scales_per_octave) return false;

            // Edge rejection on the 2x2 spatial Hessian.
            const double tr = hxx + hyy;
            const double det2 = hxx * hyy - hxy * hxy;
            const double r = p.edge_threshold;
            if (det2 <= 0.0 || tr * tr * r >= det2 * (r + 1.0) * (r + 1.0)) return false;

            out.level = level;
            out.x = x + dx;
            out.y = y + dy;
            out.sigma_rel = p.base_sigma * std::pow(2.0, (level + ds) / p.scales_per_octave);
            out.contrast = value;
            return true;
        }

        x += static_cast<int>(std::lround(std::clamp(dx, -1.0, 1.0)));
        y += static_cast<int>(std::lround(std::clamp(dy, -1.0, 1.0)));
        level += static_cast<int>(std::lround(std::clamp(ds, -1.0, 1.0)));
        if (level < 1 || level > static_cast<int>(oct.dog.size()) - 2 || x < 1 || x >= w - 1 ||
            y < 1 || y >= h - 1)
            return false;
    }
    return false;
}

// Dominant orientations from a 36-bin gradient histogram around (x, y).
std::vector<double> dominant_orientations(const FloatImage& img, double x, double y,
                                          double sigma_rel) {
    constexpr int kBins = 36;
    double hist[kBins] = {};
    const double win_sigma = 1.5 * sigma_rel;
    const int radius = std::max(1, static_cast<int>(std::lround(3.0 * win_sigma)));
    const int cx = static_cast<int>(std::lround(x));
    const int cy = static_cast<int>(std::lround(y));

    for (int j = -radius; j <= radius; ++j) {
        const int py = cy + j;
        if (py < 1 || py >= img.height - 1) continue;
        for (int i = -radius; i <= radius; ++i) {
            const int px = cx + i;
            if (px < 1 || px >= img.width - 1) continue;
            const double gx = 0.5 * (img.at(px + 1, py) - img.at(px - 1, py));
            const double gy = 0.5 * (img.at(px, py + 1) - img.at(px, py - 1));
            const double mag = std::sqrt(gx * gx + gy * gy);
            const double w = std::exp(-0.5 * (i * i + j * j) / (win_sigma * win_sigma));
            double ori = std::atan2(gy, gx);
            if (ori < 0) ori += kTwoPi;
            int bin = static_cast<int>(ori / kTwoPi * kBins) % kBins;
            hist[bin] += w * mag;
        }
    }

    // Two circular box-smoothing passes.
    for (int pass = 0; pass < 2; ++pass) {
        double smoothed[kBins];
        for (int i = 0; i < kBins; ++i) {
            smoothed[i] = (hist[(i + kBins - 1) % kBins] + hist[i] + hist[(i + 1) % kBins]) / 3.0;
        }
        std::copy(smoothed, smoothed + kBins, hist);
    }

    double max_v = 0.0;
    int max_bin = 0;
    for (int i = 0; i < kBins; ++i)
        if (hist[i] > max_v) {
            max_v = hist[i];
            max_bin = i;
        }
    std::vector<double> orientations;
    if (max_v <= 0.0) return orientations;

    // A near-flat histogram (most bins within 80% of the peak) has no
    // dominant direction; radially symmetric blobs land here. Emitting one
    // keypoint per noise peak would create same-descriptor duplicates that
    // only defeat the ratio test downstream, so keep the single best bin.
    int strong = 0;
    for (double v : hist) strong += v >= 0.8 * max_v;
    const bool flat = strong > kBins / 2;

    for (int i = 0; i < kBins; ++i) {
        if (flat && i != max_bin) continue;
        const double l = hist[(i + kBins - 1) % kBins];
        const double r = hist[(i + 1) % kBins];
        if (!flat && !(hist[i] > l && hist[i] > r && hist[i] >= 0.8 * max_v)) continue;
        // Parabolic peak interpolation.
        const double denom = l - 2.0 * hist[i] + r;
        const double offset = std::abs(denom) > 1e-12 ? 0.5 * (l - r) / denom : 0.0;
        double ori = (i + 0.5 + offset) / kBins * kTwoPi;
        if (ori < 0) ori += kTwoPi;
        if (ori >= kTwoPi) ori -= kTwoPi;
        orientations.push_back(ori);
    }
    return orientations;
}

// 4x4x8 descriptor grid with trilinear binning, Lowe's normalization scheme.
bool compute_descriptor(const FloatImage& img, double x, double y, double sigma_rel,
                        double orientation, Descriptor& desc) {
    constexpr int kGrid = 4;
    constexpr int kOri = 8;
    const double hist_width = 3.0 * sigma_rel;
    const int radius = static_cast<int>(
        std::lround(hist_width * std::numbers::sqrt2 * (kGrid + 1) * 0.5));
    const double cos_t = std::cos(orientation) / hist_width;
    const double sin_t = std::sin(orientation) / hist_width;
    const double gauss_denom = 0.5 * kGrid * kGrid;  // sigma = kGrid/2 in bin units

    double hist[kGrid + 2][kGrid + 2][kOri] = {};
    const int cx = static_cast<int>(std::lround(x));
    const int cy = static_cast<int>(std::lround(y));

    for (int j = -radius; j <= radius; ++j) {
        for (int i = -radius; i <= radius; ++i) {
            // Rotate the offset into the keypoint frame, in units of grid bins.
            const double c_rot = i * cos_t + j * sin_t;
            const double r_rot = -i * sin_t + j * cos_t;
            const double cbin = c_rot + kGrid / 2.0 - 0.5;
            const double rbin = r_rot + kGrid / 2.0 - 0.5;
            if (cbin <= -1.0 || cbin >= kGrid || rbin <= -1.0 || rbin >= kGrid) continue;
            const int px = cx + i;
            const int py = cy + j;
            if (px < 1 || px >= img.width - 1 || py < 1 || py >= img.height - 1) continue;

            const double gx = 0.5 * (img.at(px + 1, py) - img.at(px - 1, py));
            const double gy = 0.5 * (img.at(px, py + 1) - img.at(px, py - 1));
            double ori = std::atan2(gy, gx) - orientation;
            while (ori < 0) ori += kTwoPi;
            while (ori >= kTwoPi) ori -= kTwoPi;
            const double obin = ori / kTwoPi * kOri;
            const double mag = std::sqrt(gx * gx + gy * gy) *
                               std::exp(-(c_rot * c_rot + r_rot * r_rot) / gauss_denom);

            const int r0 = static_cast<int>(std::floor(rbin));
            const int c0 = static_cast<int>(std::floor(cbin));
            const int o0 = static_cast<int>(std::floor(obin));
            const double fr = rbin - r0;
            const double fc = cbin - c0;
            const double fo = obin - o0;
            for (int dr = 0; dr <= 1; ++dr) {
                const int rr = r0 + dr + 1;
                if (rr < 0 || rr >= kGrid + 2) continue;
                const double wr = mag * (dr ? fr : 1.0 - fr);
                for (int dc = 0; dc <= 1; ++dc) {
                    const int cc = c0 + dc + 1;
                    if (cc < 0 || cc >= kGrid + 2) continue;
                    const double wc = wr * (dc ? fc : 1.0 - fc);
                    for (int dob = 0; dob <= 1; ++dob) {
                        const int oo = (o0 + dob) % kOri;
                        hist[rr][cc][oo] += wc * (dob ? fo : 1.0 - fo);
                    }
                }
            }
        }
    }

    int idx = 0;
    for (int r = 1; r <= kGrid; ++r)
        for (int c = 1; c <= kGrid; ++c)
            for (int o = 0; o < kOri; ++o) desc[idx++] = static_cast<float>(hist[r][c][o]);

    double norm = 0.0;
    for (float v : desc) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) return false;
    for (auto& v : desc) v = static_cast<float>(std::min(v / norm, 0.2));
    norm = 0.0;
    for (float v : desc) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) return false;
    for (auto& v : desc) v = static_cast<float>(v / norm);
    return true;
}

}  // namespace

std::vector<Feature> detect_sift(const GrayImage& img, const SiftParams& params) {
    if (!img.valid()) throw std::invalid_argument("detect_sift: invalid image");
    if (img.width < 16 || img.height < 16)
        throw std::invalid_argument("detect_sift: image must be at least 16x16");
    if (params.octaves < 1 || params.scales_per_octave < 1 || params.base_sigma <= 0.0 ||
        params.contrast_threshold <= 0.0 || params.edge_threshold <= 0.0)
        throw std::invalid_argument("detect_sift: invalid parameters");

    const int S = params.scales_per_octave;
    const double k = std::pow(2.0, 1.0 / S);

    // Scale space. The input is assumed to carry a nominal blur of 0.5 px.
    constexpr double kInputSigma = 0.5;
    std::vector<Octave> octaves;
    FloatImage base = gaussian_blur(
        to_float(img),
        std::sqrt(std::max(0.0, params.base_sigma * params.base_sigma - kInputSigma * kInputSigma)));
    for (int o = 0; o < params.octaves; ++o) {
        if (base.width < 8 || base.height < 8) break;
        Octave oct;
        oct.gauss.reserve(S + 3);
        oct.gauss.push_back(std::move(base));
        double sigma_prev = params.base_sigma;
        for (int l = 1; l < S + 3; ++l) {
            const double sigma_total = params.base_sigma * std::pow(k, l);
            const double sigma_delta =
                std::sqrt(sigma_total * sigma_total - sigma_prev * sigma_prev);
            oct.gauss.push_back(gaussian_blur(oct.gauss.back(), sigma_delta));
            sigma_prev = sigma_total;
        }
        oct.dog.reserve(S + 2);
        for (int l = 0; l < S + 2; ++l) {
            FloatImage d(oct.gauss[l].width, oct.gauss[l].height);
            for (std::size_t i = 0; i < d.data.size(); ++i)
                d.data[i] = oct.gauss[l + 1].data[i] - oct.gauss[l].data[i];
            oct.dog.push_back(std::move(d));
        }
        // Level S has blur 2*base_sigma: it seeds the next octave.
        base = downsample_half(oct.gauss[S]);
        octaves.push_back(std::move(oct));
    }

    struct Ranked {
        int octave;
        Feature feature;
    };
    std::vector<Ranked> found;

    const double pre_threshold = 0.5 * params.contrast_threshold / S;
    for (std::size_t o = 0; o < octaves.size(); ++o) {
        const Octave& oct = octaves[o];
        const int w = oct.dog[0].width;
        const int h = oct.dog[0].height;
        const double scale_mult = std::pow(2.0, static_cast<double>(o));
        for (int l = 1; l <= S; ++l) {
            const FloatImage& d0 = oct.dog[l - 1];
            const FloatImage& d1 = oct.dog[l];
            const FloatImage& d2 = oct.dog[l + 1];
            for (int y = 1; y < h - 1; ++y) {
                for (int x = 1; x < w - 1; ++x) {
                    const float v = d1.at(x, y);
                    if (std::abs(v) < pre_threshold) continue;
                    bool is_max = true, is_min = true;
                    for (int dy = -1; dy <= 1 && (is_max || is_min); ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const float a = d0.at(x + dx, y + dy);
                            const float b = d1.at(x + dx, y + dy);
                            const float c = d2.at(x + dx, y + dy);
                            if (a >= v || c >= v || (b >= v && !(dx == 0 && dy == 0))) is_max = false;
                            if (a <= v || c <= v || (b <= v && !(dx == 0 && dy == 0))) is_min = false;
                            if (!is_max && !is_min) break;
                        }
                    }
                    if (!is_max && !is_min) continue;

                    Candidate cand;
                    cand.octave = static_cast<int>(o);
                    if (!refine_extremum(oct, params, l, x, y, cand)) continue;

                    const FloatImage& gimg = oct.gauss[cand.level];
                    const auto orientations =
                        dominant_orientations(gimg, cand.x, cand.y, cand.sigma_rel);
                    for (double ori : orientations) {
                        Feature f;
                        if (!compute_descriptor(gimg, cand.x, cand.y, cand.sigma_rel, ori,
                                                f.descriptor))
                            continue;
                        f.keypoint.x = cand.x * scale_mult;
                        f.keypoint.y = cand.y * scale_mult;
                        f.keypoint.scale = cand.sigma_rel * scale_mult;
                        f.keypoint.orientation = ori;
                        if (f.keypoint.x < 0 || f.keypoint.x >= img.width || f.keypoint.y < 0 ||
                            f.keypoint.y >= img.height)
                            continue;
                        found.push_back({static_cast<int>(o), std::move(f)});
                    }
                }
            }
        }
    }

    std::stable_sort(found.begin(), found.end(), [](const Ranked& a, const Ranked& b) {
        if (a.octave != b.octave) return a.octave < b.octave;
        if (a.feature.keypoint.y != b.feature.keypoint.y)
            return a.feature.keypoint.y < b.feature.keypoint.y;
        return a.feature.keypoint.x < b.feature.keypoint.x;
    });

    std::vector<Feature> features;
    features.reserve(found.size());
    for (auto& r : found) features.push_back(std::move(r.feature));
    return features;
}

}  // namespace vicsfm
