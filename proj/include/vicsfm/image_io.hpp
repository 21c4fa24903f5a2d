#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vicsfm/image.hpp"

namespace vicsfm {

// Binary PGM (P5) and PPM (P6), maxval 255. Round-trips are bit-exact.
GrayImage load_pgm(const std::filesystem::path& path);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);
RgbImage load_ppm(const std::filesystem::path& path);
void save_ppm(const RgbImage& img, const std::filesystem::path& path);

RgbImage load_png_rgb(const std::filesystem::path& path);
GrayImage load_png_gray(const std::filesystem::path& path);
void save_png(const GrayImage& img, const std::filesystem::path& path);
void save_png(const RgbImage& img, const std::filesystem::path& path);

/// Dispatch on extension (.png/.pgm for gray, .png/.ppm for RGB).
GrayImage load_gray(const std::filesystem::path& path);
void save_gray(const GrayImage& img, const std::filesystem::path& path);
RgbImage load_rgb(const std::filesystem::path& path);
void save_rgb(const RgbImage& img, const std::filesystem::path& path);

/// Lists frame files (.png/.pgm/.ppm) of a sequence directory in lexicographic
/// order; zero-padded index naming makes this the temporal order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

}  // namespace vicsfm
