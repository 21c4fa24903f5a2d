#include "vicsfm/feature_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vicsfm/error.hpp"

namespace vicsfm {

namespace {

constexpr char kMagic[8] = {'V', 'I', 'C', 'S', 'F', 'M', 'F', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_features(const std::vector<Feature>& features, const SiftParams& params,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, static_cast<std::uint32_t>(features.size()));
    for (const auto& f : features) {
        write_pod(out, static_cast<float>(f.keypoint.x));
        write_pod(out, static_cast<float>(f.keypoint.y));
        write_pod(out, static_cast<float>(f.keypoint.scale));
        write_pod(out, static_cast<float>(f.keypoint.orientation));
        std::uint8_t q[128];
        for (int i = 0; i < 128; ++i) {
            const long v = std::lround(512.0 * f.descriptor[i]);
            q[i] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
        }
        out.write(reinterpret_cast<const char*>(q), sizeof(q));
    }
    if (!out) throw IoError("write failed: " + path.string());

    nlohmann::json sidecar = {
        {"octaves", params.octaves},
        {"scales_per_octave", params.scales_per_octave},
        {"base_sigma", params.base_sigma},
        {"contrast_threshold", params.contrast_threshold},
        {"edge_threshold", params.edge_threshold},
        {"ratio_threshold", params.ratio_threshold},
        {"count", features.size()},
    };
    std::ofstream side(path.string() + ".json");
    side << sidecar.dump(2) << "\n";
}

std::vector<Feature> load_features(const std::filesystem::path& path, SiftParams* params_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("bad feature file magic in " + path.string());
    const auto count = read_pod<std::uint32_t>(in);
    std::vector<Feature> features(count);
    for (auto& f : features) {
        f.keypoint.x = read_pod<float>(in);
        f.keypoint.y = read_pod<float>(in);
        f.keypoint.scale = read_pod<float>(in);
        f.keypoint.orientation = read_pod<float>(in);
        std::uint8_t q[128];
        in.read(reinterpret_cast<char*>(q), sizeof(q));
        for (int i = 0; i < 128; ++i) f.descriptor[i] = static_cast<float>(q[i]) / 512.f;
    }
    if (!in) throw IoError("truncated feature file: " + path.string());

    if (params_out) {
        std::ifstream side(path.string() + ".json");
        if (side) {
            nlohmann::json j;
            side >> j;
            params_out->octaves = j.value("octaves", params_out->octaves);
            params_out->scales_per_octave =
                j.value("scales_per_octave", params_out->scales_per_octave);
            params_out->base_sigma = j.value("base_sigma", params_out->base_sigma);
            params_out->contrast_threshold =
                j.value("contrast_threshold", params_out->contrast_threshold);
            params_out->edge_threshold = j.value("edge_threshold", params_out->edge_threshold);
            params_out->ratio_threshold = j.value("ratio_threshold", params_out->ratio_threshold);
        }
    }
    return features;
}

}  // namespace vicsfm
