#include "vicsfm/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>

#include "vicsfm/error.hpp"

namespace vicsfm {

namespace {

int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments between header fields.
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    return value;
}

void read_pnm_header(std::istream& in, const char* magic, const std::filesystem::path& path,
                     int& w, int& h) {
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != magic[0] || m1 != magic[1])
        throw IoError("not a " + std::string(magic) + " file: " + path.string());
    w = read_pnm_token(in);
    h = read_pnm_token(in);
    const int maxval = read_pnm_token(in);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IoError("unsupported PNM header in " + path.string());
    in.get();  // single whitespace before raster
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads any PNG as 8-bit; grayscale-vs-color conversion handled by libpng
// transforms so palette and 16-bit inputs also work.
std::vector<std::uint8_t> read_png_impl(const std::filesystem::path& path, bool want_rgb, int& w,
                                        int& h) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png read failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    png_set_expand(png);
    const int color = png_get_color_type(png, info);
    if (want_rgb) {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    } else {
        if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const int channels = want_rgb ? 3 : 1;
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = data.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return data;
}

void write_png_impl(const std::uint8_t* data, int w, int h, bool rgb,
                    const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, rgb ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const int channels = rgb ? 3 : 1;
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

bool has_extension(const std::filesystem::path& p, const char* ext) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ext;
}

}  // namespace

GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    int w = 0, h = 0;
    read_pnm_header(in, "P5", path, w, h);
    GrayImage img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.size()))
        throw IoError("truncated PGM raster in " + path.string());
    return img;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
    if (!img.valid()) throw std::invalid_argument("save_pgm: invalid image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

RgbImage load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    int w = 0, h = 0;
    read_pnm_header(in, "P6", path, w, h);
    RgbImage img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw IoError("truncated PPM raster in " + path.string());
    return img;
}

void save_ppm(const RgbImage& img, const std::filesystem::path& path) {
    if (!img.valid()) throw std::invalid_argument("save_ppm: invalid image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

RgbImage load_png_rgb(const std::filesystem::path& path) {
    RgbImage img;
    img.data = read_png_impl(path, true, img.width, img.height);
    return img;
}

GrayImage load_png_gray(const std::filesystem::path& path) {
    GrayImage img;
    img.data = read_png_impl(path, false, img.width, img.height);
    return img;
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
    if (!img.valid()) throw std::invalid_argument("save_png: invalid image");
    write_png_impl(img.data.data(), img.width, img.height, false, path);
}

void save_png(const RgbImage& img, const std::filesystem::path& path) {
    if (!img.valid()) throw std::invalid_argument("save_png: invalid image");
    write_png_impl(img.data.data(), img.width, img.height, true, path);
}

GrayImage load_gray(const std::filesystem::path& path) {
    if (has_extension(path, ".pgm")) return load_pgm(path);
    if (has_extension(path, ".png")) return load_png_gray(path);
    if (has_extension(path, ".ppm")) return extract_channel(load_ppm(path), Channel::Green);
    throw IoError("unsupported image extension: " + path.string());
}

void save_gray(const GrayImage& img, const std::filesystem::path& path) {
    if (has_extension(path, ".pgm"))
        save_pgm(img, path);
    else if (has_extension(path, ".png"))
        save_png(img, path);
    else
        throw IoError("unsupported gray image extension: " + path.string());
}

RgbImage load_rgb(const std::filesystem::path& path) {
    if (has_extension(path, ".ppm")) return load_ppm(path);
    if (has_extension(path, ".png")) return load_png_rgb(path);
    if (has_extension(path, ".pgm")) return promote_to_rgb(load_pgm(path));
    throw IoError("unsupported image extension: " + path.string());
}

void save_rgb(const RgbImage& img, const std::filesystem::path& path) {
    if (has_extension(path, ".ppm"))
        save_ppm(img, path);
    else if (has_extension(path, ".png"))
        save_png(img, path);
    else
        throw IoError("unsupported RGB image extension: " + path.string());
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> frames;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto& p = entry.path();
        if (has_extension(p, ".png") || has_extension(p, ".pgm") || has_extension(p, ".ppm"))
            frames.push_back(p);
    }
    std::sort(frames.begin(), frames.end(),
              [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
    return frames;
}

}  // namespace vicsfm
