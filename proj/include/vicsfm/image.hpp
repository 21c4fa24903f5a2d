#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vicsfm {

enum class Channel { Red, Green, Blue };

const char* channel_name(Channel ch);
Channel channel_from_name(const std::string& name);

/// 8-bit single-channel raster, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    bool valid() const {
        return width > 0 && height > 0 && data.size() == static_cast<std::size_t>(width) * height;
    }
    bool operator==(const GrayImage&) const = default;
};

/// 8-bit RGB raster, row-major interleaved.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* pixel(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* pixel(int x, int y) const {
        return &data[(static_cast<std::size_t>(y) * width + x) * 3];
    }
    bool valid() const {
        return width > 0 && height > 0 &&
               data.size() == static_cast<std::size_t>(width) * height * 3;
    }
    bool operator==(const RgbImage&) const = default;
};

/// Projects one color channel out of an RGB image.
GrayImage extract_channel(const RgbImage& img, Channel ch);

/// Replicates a gray image into all three channels.
RgbImage promote_to_rgb(const GrayImage& img);

/// Bilinear resampling with half-pixel-centered sample positions and
/// clamp-to-edge boundary handling. Values are rounded to the nearest byte.
/// Throws std::invalid_argument when a target dimension is zero.
GrayImage resize_bilinear(const GrayImage& img, int new_w, int new_h);

/// Extracts the rectangle [x0, x0+w) x [y0, y0+h). Throws
/// std::invalid_argument when the rectangle leaves the image.
GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h);

/// Smooth radial gradient, bright in the center. Deliberately feature-poor;
/// used as the canonical low-texture input when exercising translators.
GrayImage make_radial_gradient(int w, int h);

}  // namespace vicsfm
