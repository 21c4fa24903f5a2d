#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vicsfm/error.hpp"
#include "vicsfm/image_io.hpp"
#include "vicsfm/meshing.hpp"
#include "vicsfm/pipeline.hpp"
#include "vicsfm/reconstruction.hpp"
#include "vicsfm/synthlab.hpp"
#include "vicsfm/texturing.hpp"

namespace fs = std::filesystem;
using namespace vicsfm;

namespace {

struct ConfigCli {
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "TOML-style config file");
        cmd->add_option("--set", sets, "override a config value: key=value")
            ->type_name("KEY=VALUE");
        for (const auto& key : known_config_keys()) {
            const std::string name = key.name;
            cmd->add_option_function<std::string>(
                   "--" + name, [this, name](const std::string& v) { flags[name] = v; },
                   key.help)
                ->type_name("VALUE");
        }
    }

    PipelineConfig build() const {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = PipelineConfig::from_file(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw std::invalid_argument("--set expects key=value, got '" + s + "'");
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : flags) cfg.set(k, v);
        return cfg;
    }
};

int run_stage(const ConfigCli& cli, const std::string& only) {
    PipelineConfig cfg;
    try {
        cfg = cli.build();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    const PipelineResult result = run_pipeline(cfg, std::cout, only);
    if (result.exit_code == 2)
        std::cerr << "config error: " << result.message << "\n";
    else if (result.exit_code == 3)
        std::cerr << "stage " << (result.failed_stage.empty() ? "?" : result.failed_stage)
                  << " failed: " << result.message << "\n";
    return result.exit_code;
}

int do_localize(const ConfigCli& cli, int frame, const std::string& out_override) {
    PipelineConfig cfg;
    try {
        cfg = cli.build();
        const std::string problem = cfg.validate();
        if (!problem.empty()) throw std::invalid_argument(problem);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        const fs::path work = cfg.get_string("work.dir");
        const Reconstruction recon = load_reconstruction_json(work / "sparse/cleaned.json");
        const fs::path mesh_path = fs::exists(work / "mesh/textured.ply")
                                       ? work / "mesh/textured.ply"
                                       : work / "mesh/mesh.ply";
        const Mesh mesh = load_mesh_ply(mesh_path);
        const auto frames = list_frames(cfg.get_string("input.dir"));
        if (frame < 0 || static_cast<std::size_t>(frame) >= frames.size())
            throw LocalizationError("frame id " + std::to_string(frame) +
                                    " outside the input sequence");
        const RgbImage image = load_rgb(frames[frame]);
        const auto [recolored, pose] = localize_frame(recon, mesh, frame, image);
        const fs::path out =
            out_override.empty() ? work / "mesh/localized.ply" : fs::path(out_override);
        save_localization_ply(recolored, pose, recon.intrinsics, recon.image_width,
                              recon.image_height, out);
        std::cout << "localized frame " << frame << " -> " << out.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "localize failed: " << e.what() << "\n";
        return 3;
    }
}

struct SynthCli {
    std::string out_dir;
    int n_points = 2000;
    int n_frames = 30;
    double noise_px = 0.5;
    double outlier_frac = 0.1;
    std::uint64_t seed = 1;
    std::vector<double> semi = {1.0, 0.8, 0.6};
    int width = 640;
    int height = 480;
    double focal = 420.0;
    double k1 = 0.0;
    double amplitude = 0.8;
    double orbit_frac = 0.35;
    double sweep_deg = 360.0;
};

int do_synth(const SynthCli& s) {
    try {
        if (s.semi.size() != 3) throw std::invalid_argument("--semi expects three values");
        SceneOptions opts;
        opts.image_width = s.width;
        opts.image_height = s.height;
        opts.focal = s.focal;
        opts.k1 = s.k1;
        opts.texture_amplitude = s.amplitude;
        opts.orbit_radius_frac = s.orbit_frac;
        opts.sweep_degrees = s.sweep_deg;
        const SyntheticScene scene =
            make_scene(s.n_points, s.n_frames, Eigen::Vector3d(s.semi[0], s.semi[1], s.semi[2]),
                       s.noise_px, s.outlier_frac, s.seed, opts);
        fs::create_directories(s.out_dir);
        save_scene_json(scene, fs::path(s.out_dir) / "scene.json");
        const auto views = render_views(scene);
        for (std::size_t i = 0; i < views.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%04zu.png", i);
            save_png(views[i], fs::path(s.out_dir) / name);
        }
        std::cout << "wrote " << views.size() << " frames and scene.json to " << s.out_dir
                  << "\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "synth failed: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"monocular structure-from-motion toolkit for texture-poor sequences"};
    app.require_subcommand(1);

    struct StageCmd {
        const char* name;
        const char* help;
        const char* stage;
    };
    static const StageCmd stage_cmds[] = {
        {"extract-channel", "pull one color channel out of the input frames", "extract-channel"},
        {"translate", "apply the style translator to the channel frames", "translate"},
        {"features", "detect keypoints and descriptors", "features"},
        {"match", "exhaustively match feature sets", "match"},
        {"reconstruct", "incremental structure from motion", "reconstruct"},
        {"clean", "plane-based point-cloud outlier removal", "clean"},
        {"mesh", "density-grid surface extraction", "mesh"},
        {"eval", "emit metrics.csv, curve.csv and curve.svg", "metrics"},
        {"run", "run the full staged pipeline", ""},
    };

    std::map<const StageCmd*, ConfigCli> stage_cli;
    for (const auto& sc : stage_cmds) {
        CLI::App* cmd = app.add_subcommand(sc.name, sc.help);
        stage_cli[&sc].attach(cmd);
        cmd->callback([&, scp = &sc] { std::exit(run_stage(stage_cli[scp], scp->stage)); });
    }

    CLI::App* localize = app.add_subcommand("localize", "project a frame onto the mesh");
    ConfigCli localize_cli;
    localize_cli.attach(localize);
    int localize_frame_id = -1;
    std::string localize_out;
    localize->add_option("--frame", localize_frame_id, "frame id to localize")->required();
    localize->add_option("--out", localize_out, "output PLY (default <work>/mesh/localized.ply)");
    localize->callback(
        [&] { std::exit(do_localize(localize_cli, localize_frame_id, localize_out)); });

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic ground-truth sequence");
    SynthCli synth_cli;
    synth->add_option("--out", synth_cli.out_dir, "output directory")->required();
    synth->add_option("--n-points", synth_cli.n_points, "surface points");
    synth->add_option("--n-frames", synth_cli.n_frames, "camera frames");
    synth->add_option("--noise", synth_cli.noise_px, "track noise sigma in pixels");
    synth->add_option("--outliers", synth_cli.outlier_frac, "track outlier fraction");
    synth->add_option("--seed", synth_cli.seed, "scene seed");
    synth->add_option("--semi", synth_cli.semi, "ellipsoid semi-axes a b c")->expected(3);
    synth->add_option("--width", synth_cli.width, "image width");
    synth->add_option("--height", synth_cli.height, "image height");
    synth->add_option("--focal", synth_cli.focal, "focal length in pixels");
    synth->add_option("--k1", synth_cli.k1, "radial distortion");
    synth->add_option("--amplitude", synth_cli.amplitude, "surface texture amplitude [0,1]");
    synth->add_option("--orbit-frac", synth_cli.orbit_frac, "camera orbit radius fraction");
    synth->add_option("--sweep", synth_cli.sweep_deg, "orbit sweep in degrees");
    synth->callback([&] { std::exit(do_synth(synth_cli)); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return 0;
}
