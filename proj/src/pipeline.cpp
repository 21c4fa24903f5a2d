#include "vicsfm/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vicsfm/error.hpp"
#include "vicsfm/eval.hpp"
#include "vicsfm/feature_io.hpp"
#include "vicsfm/image_io.hpp"
#include "vicsfm/incremental.hpp"
#include "vicsfm/matching.hpp"
#include "vicsfm/meshing.hpp"
#include "vicsfm/plane.hpp"
#include "vicsfm/reconstruction.hpp"
#include "vicsfm/sift.hpp"
#include "vicsfm/texturing.hpp"
#include "vicsfm/translator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vicsfm {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

struct Fnv {
    std::uint64_t state = kFnvOffset;
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= p[i];
            state *= kFnvPrime;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(state));
        return buf;
    }
};

const ConfigKey* find_key(const std::string& name) {
    for (const auto& k : known_config_keys())
        if (name == k.name) return &k;
    return nullptr;
}

double parse_double(const std::string& key, const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw std::invalid_argument("config value " + key + " is not a number: '" + text + "'");
    return v;
}

/// Exclusive work-dir lock; freed (and the file removed) on destruction.
class WorkDirLock {
public:
    explicit WorkDirLock(const fs::path& work) : path_(work / ".lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw Error("work dir is locked by another run (remove " + path_.string() +
                        " if stale)");
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd_, pid.data(), pid.size());
    }
    ~WorkDirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    WorkDirLock(const WorkDirLock&) = delete;
    WorkDirLock& operator=(const WorkDirLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

struct Ctx {
    const PipelineConfig* cfg = nullptr;
    fs::path input_dir;
    fs::path work;
    std::vector<fs::path> frames;    // input frames, temporal order
    std::vector<std::string> stems;  // frame base names

    fs::path abs(const std::string& rel) const { return work / rel; }
};

struct Stage {
    std::string name;
    std::function<std::string(const Ctx&)> key;               // input identity
    std::function<std::vector<std::string>(const Ctx&)> run;  // returns rel outputs
};

std::string hash_artifacts(const Ctx& ctx, const std::vector<std::string>& rel_paths) {
    Fnv h;
    for (const auto& r : rel_paths) {
        h.update(r);
        h.update(hash_file_hex(ctx.abs(r)));
    }
    return h.hex();
}

std::vector<std::string> stage_rel(const Ctx& ctx, const std::string& dir,
                                   const std::string& ext) {
    std::vector<std::string> rel;
    rel.reserve(ctx.stems.size());
    for (const auto& s : ctx.stems) rel.push_back(dir + "/" + s + ext);
    return rel;
}

// ---- stage bodies ----------------------------------------------------------

std::vector<std::string> run_extract(const Ctx& ctx) {
    const Channel ch = channel_from_name(ctx.cfg->get_string("input.channel"));
    fs::create_directories(ctx.work / "channel");
    auto rel = stage_rel(ctx, "channel", ".pgm");
    for (std::size_t i = 0; i < ctx.frames.size(); ++i) {
        const GrayImage g = extract_channel(load_rgb(ctx.frames[i]), ch);
        save_pgm(g, ctx.abs(rel[i]));
    }
    return rel;
}

Translator make_translator(const PipelineConfig& cfg, const fs::path& work) {
    const std::string kind = cfg.get_string("translate.kind");
    if (kind == "identity") return Translator::identity();
    if (kind == "dye") {
        SyntheticDyeParams params;
        params.seed = cfg.get_seed("translate.seed");
        params.amplitude = cfg.get_double("translate.amplitude");
        params.cell_scale = cfg.get_double("translate.cell_scale");
        params.detail_gain = cfg.get_double("translate.detail_gain");
        return Translator::synthetic_dye(params);
    }
    if (kind == "external")
        return Translator::external(cfg.get_string("translate.command"), work / "ext_in",
                                    work / "ext_out");
    throw std::invalid_argument("unknown translate.kind: " + kind);
}

std::vector<std::string> run_translate(const Ctx& ctx) {
    const Translator tr = make_translator(*ctx.cfg, ctx.work);
    fs::create_directories(ctx.work / "translated");
    const auto in_rel = stage_rel(ctx, "channel", ".pgm");
    auto rel = stage_rel(ctx, "translated", ".pgm");
    for (std::size_t i = 0; i < in_rel.size(); ++i)
        save_pgm(tr(load_pgm(ctx.abs(in_rel[i]))), ctx.abs(rel[i]));
    return rel;
}

SiftParams sift_params(const PipelineConfig& cfg) {
    SiftParams p;
    p.octaves = static_cast<int>(cfg.get_int("features.octaves"));
    p.scales_per_octave = static_cast<int>(cfg.get_int("features.scales_per_octave"));
    p.base_sigma = cfg.get_double("features.base_sigma");
    p.contrast_threshold = cfg.get_double("features.contrast_threshold");
    p.edge_threshold = cfg.get_double("features.edge_threshold");
    p.ratio_threshold = cfg.get_double("match.ratio");
    return p;
}

std::vector<std::string> run_features(const Ctx& ctx) {
    const SiftParams params = sift_params(*ctx.cfg);
    fs::create_directories(ctx.work / "features");
    const auto in_rel = stage_rel(ctx, "translated", ".pgm");
    const auto feat_rel = stage_rel(ctx, "features", ".feat");
    std::vector<std::string> rel;
    for (std::size_t i = 0; i < in_rel.size(); ++i) {
        const auto features = detect_sift(load_pgm(ctx.abs(in_rel[i])), params);
        save_features(features, params, ctx.abs(feat_rel[i]));
        rel.push_back(feat_rel[i]);
        rel.push_back(feat_rel[i] + ".json");
    }
    return rel;
}

std::vector<std::string> run_match(const Ctx& ctx) {
    const double ratio = ctx.cfg->get_double("match.ratio");
    const long gap = ctx.cfg->get_int("match.max_pair_gap");
    const auto feat_rel = stage_rel(ctx, "features", ".feat");
    std::vector<std::vector<Feature>> features;
    features.reserve(feat_rel.size());
    for (const auto& r : feat_rel) features.push_back(load_features(ctx.abs(r)));

    json pairs = json::array();
    for (std::size_t a = 0; a < features.size(); ++a) {
        for (std::size_t b = a + 1; b < features.size(); ++b) {
            if (gap > 0 && static_cast<long>(b - a) > gap) break;
            const auto matches = match_features(features[a], features[b], ratio);
            if (matches.empty()) continue;
            json m = json::array();
            for (const auto& match : matches) m.push_back({match.index_a, match.index_b});
            pairs.push_back({{"a", a}, {"b", b}, {"matches", std::move(m)}});
        }
    }
    json doc;
    doc["frames"] = features.size();
    doc["pairs"] = std::move(pairs);

    fs::create_directories(ctx.work / "matches");
    std::ofstream out(ctx.abs("matches/matches.json"));
    if (!out) throw IoError("cannot write matches/matches.json");
    out << doc.dump(2) << '\n';
    return {"matches/matches.json"};
}

PairwiseMatches load_matches(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string() + "; run the match stage first");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("malformed matches file " + path.string() + ": " + e.what());
    }
    PairwiseMatches matches;
    for (const auto& entry : doc.at("pairs")) {
        const FrameId a = entry.at("a").get<FrameId>();
        const FrameId b = entry.at("b").get<FrameId>();
        std::vector<Match>& list = matches[{a, b}];
        for (const auto& m : entry.at("matches"))
            list.push_back({m.at(0).get<int>(), m.at(1).get<int>(), 0.0});
    }
    return matches;
}

std::vector<std::string> run_reconstruct(const Ctx& ctx) {
    const auto& cfg = *ctx.cfg;
    const auto feat_rel = stage_rel(ctx, "features", ".feat");
    std::vector<std::vector<Eigen::Vector2d>> keypoints;
    keypoints.reserve(feat_rel.size());
    for (const auto& r : feat_rel) {
        const auto features = load_features(ctx.abs(r));
        std::vector<Eigen::Vector2d> kps;
        kps.reserve(features.size());
        for (const auto& f : features) kps.emplace_back(f.keypoint.x, f.keypoint.y);
        keypoints.push_back(std::move(kps));
    }
    const PairwiseMatches matches = load_matches(ctx.abs("matches/matches.json"));

    const GrayImage first = load_pgm(ctx.abs("translated/" + ctx.stems[0] + ".pgm"));
    CameraIntrinsics seed = CameraIntrinsics::from_image_size(first.width, first.height);
    if (cfg.get_double("sfm.focal") > 0.0) seed.focal = cfg.get_double("sfm.focal");
    seed.k1 = cfg.get_double("sfm.k1");

    IncrementalOptions opts;
    opts.essential_threshold_factor = cfg.get_double("sfm.essential_threshold_factor");
    opts.pnp_threshold_px = cfg.get_double("sfm.pnp_threshold_px");
    opts.obs_filter_px = cfg.get_double("sfm.obs_filter_px");
    opts.min_point_angle_deg = cfg.get_double("sfm.min_point_angle_deg");
    opts.min_init_median_angle_deg = cfg.get_double("sfm.min_init_median_angle_deg");
    opts.min_init_matches = static_cast<int>(cfg.get_int("sfm.min_init_matches"));
    opts.min_pnp_inliers = static_cast<int>(cfg.get_int("sfm.min_pnp_inliers"));
    opts.global_ba_interval = static_cast<int>(cfg.get_int("sfm.global_ba_interval"));
    opts.local_ba_window = static_cast<int>(cfg.get_int("sfm.local_ba_window"));
    opts.self_calibrate = cfg.get_bool("sfm.self_calibrate");
    opts.seed = cfg.get_seed("sfm.seed");

    Reconstruction recon =
        reconstruct_incremental(keypoints, matches, seed, first.width, first.height, opts);
    for (auto& [fid, frame] : recon.frames)
        if (fid >= 0 && static_cast<std::size_t>(fid) < ctx.stems.size())
            frame.name = ctx.stems[fid];

    fs::create_directories(ctx.work / "sparse");
    save_reconstruction_json(recon, ctx.abs("sparse/reconstruction.json"));
    save_point_cloud_ply(recon, ctx.abs("sparse/cloud.ply"));
    return {"sparse/reconstruction.json", "sparse/cloud.ply"};
}

std::vector<std::string> run_clean(const Ctx& ctx) {
    const auto& cfg = *ctx.cfg;
    const Reconstruction recon = load_reconstruction_json(ctx.abs("sparse/reconstruction.json"));
    const std::string mode_name = cfg.get_string("clean.mode");
    PlaneCleanupMode mode;
    if (mode_name == "signed")
        mode = PlaneCleanupMode::RemoveBeyondSignedDistance;
    else if (mode_name == "near")
        mode = PlaneCleanupMode::KeepNearPlane;
    else
        throw std::invalid_argument("unknown clean.mode: " + mode_name);
    const Reconstruction cleaned =
        remove_outliers_plane(recon, mode, cfg.get_double("clean.threshold_factor"),
                              cfg.get_double("clean.fit_threshold_factor"),
                              cfg.get_seed("clean.seed"));
    save_reconstruction_json(cleaned, ctx.abs("sparse/cleaned.json"));
    save_point_cloud_ply(cleaned, ctx.abs("sparse/cleaned.ply"));
    return {"sparse/cleaned.json", "sparse/cleaned.ply"};
}

std::vector<std::string> run_mesh(const Ctx& ctx) {
    const auto& cfg = *ctx.cfg;
    const Reconstruction recon = load_reconstruction_json(ctx.abs("sparse/cleaned.json"));
    std::vector<Eigen::Vector3d> points;
    points.reserve(recon.points.size());
    for (const auto& [pid, pt] : recon.points) points.push_back(pt.xyz);

    double voxel = cfg.get_double("mesh.voxel");
    if (voxel <= 0.0) {
        if (points.empty()) throw MeshingError("mesh: empty point cloud");
        Eigen::Vector3d lo = points[0], hi = points[0];
        for (const auto& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        voxel = cfg.get_double("mesh.voxel_frac") * (hi - lo).norm();
        if (voxel <= 0.0) throw MeshingError("mesh: degenerate point cloud extent");
    }
    MeshingOptions opts;
    opts.iso = cfg.get_double("mesh.iso");
    opts.smoothing_passes = static_cast<int>(cfg.get_int("mesh.smoothing_passes"));
    const Mesh mesh = mesh_from_points(points, voxel, opts);

    fs::create_directories(ctx.work / "mesh");
    save_mesh_ply(mesh, ctx.abs("mesh/mesh.ply"));
    return {"mesh/mesh.ply"};
}

std::vector<std::string> run_texture(const Ctx& ctx) {
    const Reconstruction recon = load_reconstruction_json(ctx.abs("sparse/cleaned.json"));
    const Mesh mesh = load_mesh_ply(ctx.abs("mesh/mesh.ply"));
    std::map<FrameId, RgbImage> images;
    for (const auto& [fid, frame] : recon.frames)
        if (fid >= 0 && static_cast<std::size_t>(fid) < ctx.frames.size())
            images[fid] = load_rgb(ctx.frames[fid]);
    const Mesh textured = texture_mesh(mesh, recon, images);
    save_mesh_ply(textured, ctx.abs("mesh/textured.ply"));
    return {"mesh/textured.ply"};
}

std::vector<std::string> run_metrics(const Ctx& ctx) {
    const auto& cfg = *ctx.cfg;
    const Reconstruction recon = load_reconstruction_json(ctx.abs("sparse/cleaned.json"));
    fs::create_directories(ctx.work / "metrics");

    const MetricsRow row = table_metrics(recon, static_cast<int>(ctx.frames.size()),
                                         cfg.get_string("run.label"));
    write_metrics_csv({row}, ctx.abs("metrics/metrics.csv"));

    const auto feat_rel = stage_rel(ctx, "features", ".feat");
    std::vector<std::vector<Feature>> features;
    features.reserve(feat_rel.size());
    for (const auto& r : feat_rel) features.push_back(load_features(ctx.abs(r)));
    int window = static_cast<int>(cfg.get_int("eval.window"));
    window = std::min<int>(window, static_cast<int>(features.size()) - 1);
    const MatchCurve curve =
        anchor_match_curve(features, window, static_cast<int>(cfg.get_int("eval.stride")),
                           cfg.get_double("match.ratio"));
    write_curve_csv(curve, ctx.abs("metrics/curve.csv"));
    write_curve_svg(curve, ctx.abs("metrics/curve.svg"));
    return {"metrics/metrics.csv", "metrics/curve.csv", "metrics/curve.svg"};
}

// ---- stage table -----------------------------------------------------------

std::vector<Stage> make_stages() {
    auto input_hash = [](const Ctx& ctx) {
        Fnv h;
        for (std::size_t i = 0; i < ctx.frames.size(); ++i) {
            h.update(ctx.stems[i]);
            h.update(hash_file_hex(ctx.frames[i]));
        }
        return h.hex();
    };

    std::vector<Stage> stages;
    stages.push_back({"extract-channel",
                      [input_hash](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"input."}));
                          h.update(input_hash(c));
                          return h.hex();
                      },
                      run_extract});
    stages.push_back({"translate",
                      [](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"translate."}));
                          h.update(hash_artifacts(c, stage_rel(c, "channel", ".pgm")));
                          return h.hex();
                      },
                      run_translate});
    stages.push_back({"features",
                      [](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"features.", "match."}));
                          h.update(hash_artifacts(c, stage_rel(c, "translated", ".pgm")));
                          return h.hex();
                      },
                      run_features});
    stages.push_back({"match",
                      [](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"match."}));
                          h.update(hash_artifacts(c, stage_rel(c, "features", ".feat")));
                          return h.hex();
                      },
                      run_match});
    stages.push_back({"reconstruct",
                      [](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"sfm."}));
                          h.update(hash_artifacts(c, stage_rel(c, "features", ".feat")));
                          h.update(hash_artifacts(c, {"matches/matches.json"}));
                          return h.hex();
                      },
                      run_reconstruct});
    stages.push_back({"clean",
                      [](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"clean."}));
                          h.update(hash_artifacts(c, {"sparse/reconstruction.json"}));
                          return h.hex();
                      },
                      run_clean});
    stages.push_back({"mesh",
                      [](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"mesh."}));
                          h.update(hash_artifacts(c, {"sparse/cleaned.json"}));
                          return h.hex();
                      },
                      run_mesh});
    stages.push_back({"texture",
                      [input_hash](const Ctx& c) {
                          Fnv h;
                          h.update(hash_artifacts(c, {"sparse/cleaned.json", "mesh/mesh.ply"}));
                          h.update(input_hash(c));
                          return h.hex();
                      },
                      run_texture});
    stages.push_back({"metrics",
                      [](const Ctx& c) {
                          Fnv h;
                          h.update(c.cfg->subset({"eval.", "match.", "run."}));
                          h.update(hash_artifacts(c, stage_rel(c, "features", ".feat")));
                          h.update(hash_artifacts(c, {"sparse/cleaned.json"}));
                          h.update(std::to_string(c.frames.size()));
                          return h.hex();
                      },
                      run_metrics});
    return stages;
}

json load_cache_record(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return json();
    try {
        json doc;
        in >> doc;
        return doc;
    } catch (const json::exception&) {
        return json();
    }
}

bool outputs_intact(const Ctx& ctx, const json& record) {
    if (!record.contains("outputs")) return false;
    for (const auto& [rel, hash] : record.at("outputs").items()) {
        const fs::path p = ctx.abs(rel);
        std::error_code ec;
        if (!fs::is_regular_file(p, ec)) return false;
        if (hash_file_hex(p) != hash.get<std::string>()) return false;
    }
    return true;
}

void write_manifest(const Ctx& ctx, const std::vector<Stage>& stages) {
    json artifacts = json::object();
    for (const auto& stage : stages) {
        const json record = load_cache_record(ctx.work / "cache" / (stage.name + ".json"));
        if (!record.contains("outputs")) continue;
        for (const auto& [rel, hash] : record.at("outputs").items()) artifacts[rel] = hash;
    }
    json doc;
    doc["artifacts"] = std::move(artifacts);
    std::ofstream out(ctx.work / "manifest.json");
    if (!out) throw IoError("cannot write manifest.json");
    out << doc.dump(2) << '\n';
}

}  // namespace

// ---- configuration ---------------------------------------------------------

const std::vector<ConfigKey>& known_config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"input.dir", "", "directory of input frames (.png/.pgm/.ppm), temporal order"},
        {"input.channel", "green", "color channel fed to the translator (red/green/blue)"},
        {"work.dir", "work", "artifact directory"},
        {"run.label", "run", "label used in metrics rows"},
        {"translate.kind", "dye", "style translator: dye, identity or external"},
        {"translate.seed", "7", "dye noise seed"},
        {"translate.amplitude", "0.5", "dye blend amplitude in (0,1]"},
        {"translate.cell_scale", "14", "dye noise cell size in pixels"},
        {"translate.detail_gain", "20", "dye local-contrast amplification cap"},
        {"translate.command", "", "external translator: command <in_dir> <out_dir>"},
        {"features.octaves", "4", "detector octaves"},
        {"features.scales_per_octave", "3", "detector scales per octave"},
        {"features.base_sigma", "1.6", "detector base blur"},
        {"features.contrast_threshold", "0.04", "detector contrast rejection"},
        {"features.edge_threshold", "10", "detector edge rejection"},
        {"match.ratio", "0.8", "Lowe ratio-test threshold"},
        {"match.max_pair_gap", "0", "only match frames this many apart (0 = all pairs)"},
        {"sfm.focal", "0", "focal seed in pixels (0 = 1.1*max(w,h))"},
        {"sfm.k1", "0", "radial distortion seed"},
        {"sfm.essential_threshold_factor", "4", "Sampson threshold = factor/focal"},
        {"sfm.pnp_threshold_px", "4", "PnP RANSAC inlier threshold"},
        {"sfm.obs_filter_px", "4", "observation reprojection filter"},
        {"sfm.min_point_angle_deg", "0.5", "minimal triangulation parallax"},
        {"sfm.min_init_median_angle_deg", "2", "minimal median parallax of the seed pair"},
        {"sfm.min_init_matches", "20", "minimal matches for a seed pair"},
        {"sfm.min_pnp_inliers", "6", "minimal PnP inliers to register a frame"},
        {"sfm.global_ba_interval", "10", "global bundle adjustment every N registrations"},
        {"sfm.local_ba_window", "5", "frames kept free in local bundle adjustment"},
        {"sfm.self_calibrate", "true", "refine intrinsics in global bundle adjustment"},
        {"sfm.seed", "0", "RANSAC seed"},
        {"clean.mode", "signed", "outlier rule: signed (far side of plane) or near"},
        {"clean.threshold_factor", "0.5", "removal distance as fraction of bbox diagonal"},
        {"clean.fit_threshold_factor", "0.1", "plane RANSAC threshold as fraction of diagonal"},
        {"clean.seed", "0", "plane RANSAC seed"},
        {"mesh.voxel", "0", "absolute voxel size (0 = voxel_frac * diagonal)"},
        {"mesh.voxel_frac", "0.025", "voxel size as fraction of cloud diagonal"},
        {"mesh.iso", "0", "density iso level (0 = automatic)"},
        {"mesh.smoothing_passes", "2", "density grid smoothing passes"},
        {"eval.window", "10", "anchor curve window W"},
        {"eval.stride", "0", "anchor group stride (0 = W+1, disjoint)"},
    };
    return keys;
}

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

PipelineConfig PipelineConfig::from_string(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside quotes
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.erase(i);
                break;
            }
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": unterminated table header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (!section.empty()) key = section + "." + key;
        cfg.values_[key] = value;
    }
    return cfg;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

bool PipelineConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string PipelineConfig::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const ConfigKey* k = find_key(key);
    if (!k) throw std::invalid_argument("unknown config key: " + key);
    return k->def;
}

double PipelineConfig::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

long PipelineConfig::get_int(const std::string& key) const {
    const double v = parse_double(key, get_string(key));
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
        throw std::invalid_argument("config value " + key + " is not an integer");
    return l;
}

bool PipelineConfig::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config value " + key + " is not a boolean: '" + v + "'");
}

std::uint64_t PipelineConfig::get_seed(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const unsigned long long s = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("config value " + key + " is not a seed: '" + v + "'");
    return s;
}

std::string PipelineConfig::subset(std::initializer_list<const char*> prefixes) const {
    std::string out;
    for (const auto& k : known_config_keys()) {
        const std::string name = k.name;
        for (const char* prefix : prefixes) {
            if (name.rfind(prefix, 0) == 0) {
                out += name + "=" + get_string(name) + "\n";
                break;
            }
        }
    }
    return out;
}

std::string PipelineConfig::validate() const {
    for (const auto& [key, value] : values_) {
        const ConfigKey* k = find_key(key);
        if (!k) return "unknown config key: " + key;
    }
    try {
        for (const char* key :
             {"translate.amplitude", "translate.cell_scale", "translate.detail_gain",
              "features.base_sigma", "features.contrast_threshold", "features.edge_threshold",
              "match.ratio", "sfm.focal", "sfm.k1", "sfm.essential_threshold_factor",
              "sfm.pnp_threshold_px", "sfm.obs_filter_px", "sfm.min_point_angle_deg",
              "sfm.min_init_median_angle_deg", "clean.threshold_factor",
              "clean.fit_threshold_factor", "mesh.voxel", "mesh.voxel_frac", "mesh.iso"})
            get_double(key);
        for (const char* key :
             {"features.octaves", "features.scales_per_octave", "match.max_pair_gap",
              "sfm.min_init_matches", "sfm.min_pnp_inliers", "sfm.global_ba_interval",
              "sfm.local_ba_window", "mesh.smoothing_passes", "eval.window", "eval.stride"})
            get_int(key);
        get_bool("sfm.self_calibrate");
        for (const char* key : {"translate.seed", "sfm.seed", "clean.seed"}) get_seed(key);
        channel_from_name(get_string("input.channel"));
        const std::string kind = get_string("translate.kind");
        if (kind != "dye" && kind != "identity" && kind != "external")
            return "translate.kind must be dye, identity or external";
        if (kind == "external" && get_string("translate.command").empty())
            return "translate.kind = external requires translate.command";
        const std::string mode = get_string("clean.mode");
        if (mode != "signed" && mode != "near") return "clean.mode must be signed or near";
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

// ---- driver ----------------------------------------------------------------

const std::vector<std::string>& pipeline_stage_names() {
    static const std::vector<std::string> names = {
        "extract-channel", "translate", "features", "match",  "reconstruct",
        "clean",           "mesh",      "texture",  "metrics"};
    return names;
}

std::string hash_file_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash missing file: " + path.string());
    Fnv h;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    return h.hex();
}

PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream& log,
                            const std::string& only) {
    PipelineResult result;

    const std::string problem = cfg.validate();
    if (!problem.empty()) {
        result.exit_code = 2;
        result.message = problem;
        return result;
    }
    if (!only.empty() &&
        std::find(pipeline_stage_names().begin(), pipeline_stage_names().end(), only) ==
            pipeline_stage_names().end()) {
        result.exit_code = 2;
        result.message = "unknown stage: " + only;
        return result;
    }

    Ctx ctx;
    ctx.cfg = &cfg;
    ctx.input_dir = cfg.get_string("input.dir");
    ctx.work = cfg.get_string("work.dir");
    if (ctx.input_dir.empty() || !fs::is_directory(ctx.input_dir)) {
        result.exit_code = 2;
        result.message = "input.dir is not a directory: " + ctx.input_dir.string();
        return result;
    }
    try {
        ctx.frames = list_frames(ctx.input_dir);
    } catch (const std::exception& e) {
        result.exit_code = 2;
        result.message = e.what();
        return result;
    }
    if (ctx.frames.empty()) {
        result.exit_code = 2;
        result.message = "input.dir contains no frames: " + ctx.input_dir.string();
        return result;
    }
    for (const auto& f : ctx.frames) ctx.stems.push_back(f.stem().string());

    std::error_code ec;
    fs::create_directories(ctx.work, ec);
    fs::create_directories(ctx.work / "cache", ec);
    if (ec) {
        result.exit_code = 2;
        result.message = "cannot create work dir: " + ctx.work.string();
        return result;
    }

    const std::vector<Stage> stages = make_stages();
    try {
        WorkDirLock lock(ctx.work);
        for (const auto& stage : stages) {
            if (!only.empty() && stage.name != only) continue;
            StageStatus status;
            status.name = stage.name;
            const fs::path record_path = ctx.work / "cache" / (stage.name + ".json");
            std::string key;
            try {
                key = stage.key(ctx);
                const json record = load_cache_record(record_path);
                if (record.contains("key") && record.at("key") == key &&
                    outputs_intact(ctx, record)) {
                    status.cached = true;
                    for (const auto& [rel, hash] : record.at("outputs").items())
                        status.outputs.push_back(rel);
                    log << "[" << stage.name << "] cached\n";
                    result.stages.push_back(std::move(status));
                    continue;
                }
                status.outputs = stage.run(ctx);
                json outputs = json::object();
                for (const auto& rel : status.outputs)
                    outputs[rel] = hash_file_hex(ctx.abs(rel));
                json new_record;
                new_record["key"] = key;
                new_record["outputs"] = std::move(outputs);
                std::ofstream out(record_path);
                if (!out) throw IoError("cannot write cache record for " + stage.name);
                out << new_record.dump(2) << '\n';
                log << "[" << stage.name << "] done (" << status.outputs.size()
                    << " artifacts)\n";
                result.stages.push_back(std::move(status));
            } catch (const std::exception& e) {
                result.exit_code = 3;
                result.failed_stage = stage.name;
                result.message = e.what();
                log << "[" << stage.name << "] failed: " << e.what() << "\n";
                return result;
            }
        }
        write_manifest(ctx, stages);
        result.manifest_path = ctx.work / "manifest.json";
    } catch (const std::exception& e) {
        // lock acquisition or manifest write
        result.exit_code = 3;
        result.message = e.what();
        return result;
    }
    return result;
}

}  // namespace vicsfm
