#include "vicsfm/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vicsfm {

const char* channel_name(Channel ch) {
    switch (ch) {
        case Channel::Red: return "red";
        case Channel::Green: return "green";
        case Channel::Blue: return "blue";
    }
    return "?";
}

Channel channel_from_name(const std::string& name) {
    if (name == "red" || name == "r") return Channel::Red;
    if (name == "green" || name == "g") return Channel::Green;
    if (name == "blue" || name == "b") return Channel::Blue;
    throw std::invalid_argument("unknown channel name: " + name);
}

GrayImage extract_channel(const RgbImage& img, Channel ch) {
    if (!img.valid()) throw std::invalid_argument("extract_channel: invalid image");
    const int offset = static_cast<int>(ch);
    GrayImage out(img.width, img.height);
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.data[i] = img.data[i * 3 + offset];
    return out;
}

RgbImage promote_to_rgb(const GrayImage& img) {
    if (!img.valid()) throw std::invalid_argument("promote_to_rgb: invalid image");
    RgbImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        out.data[i * 3 + 0] = img.data[i];
        out.data[i * 3 + 1] = img.data[i];
        out.data[i * 3 + 2] = img.data[i];
    }
    return out;
}

GrayImage resize_bilinear(const GrayImage& img, int new_w, int new_h) {
    if (!img.valid()) throw std::invalid_argument("resize_bilinear: invalid image");
    if (new_w < 1 || new_h < 1)
        throw std::invalid_argument("resize_bilinear: target dimensions must be positive");

    GrayImage out(new_w, new_h);
    const double sx = static_cast<double>(img.width) / new_w;
    const double sy = static_cast<double>(img.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        // Half-pixel centers: output center (y+0.5) maps to input coordinate
        // (y+0.5)*scale, expressed relative to pixel centers.
        const double fy = (y + 0.5) * sy - 0.5;
        const double cy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(std::floor(cy));
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = cy - y0;
        for (int x = 0; x < new_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const double cx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(std::floor(cx));
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = cx - x0;
            const double v = (1.0 - wy) * ((1.0 - wx) * img.at(x0, y0) + wx * img.at(x1, y0)) +
                             wy * ((1.0 - wx) * img.at(x0, y1) + wx * img.at(x1, y1));
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h) {
    if (!img.valid()) throw std::invalid_argument("crop: invalid image");
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > img.width || y0 + h > img.height)
        throw std::invalid_argument("crop: rectangle out of bounds");
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
        std::copy_n(&img.data[static_cast<std::size_t>(y0 + y) * img.width + x0], w,
                    &out.data[static_cast<std::size_t>(y) * w]);
    return out;
}

GrayImage make_radial_gradient(int w, int h) {
    GrayImage out(w, h);
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);
    const double rmax = std::sqrt(cx * cx + cy * cy);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy)) / rmax;
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(220.0 * (1.0 - 0.7 * r)));
        }
    }
    return out;
}

}  // namespace vicsfm
