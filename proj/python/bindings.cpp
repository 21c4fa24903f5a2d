#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "vicsfm/error.hpp"
#include "vicsfm/eval.hpp"
#include "vicsfm/image.hpp"
#include "vicsfm/image_io.hpp"
#include "vicsfm/incremental.hpp"
#include "vicsfm/matching.hpp"
#include "vicsfm/meshing.hpp"
#include "vicsfm/pipeline.hpp"
#include "vicsfm/plane.hpp"
#include "vicsfm/reconstruction.hpp"
#include "vicsfm/sift.hpp"
#include "vicsfm/synthlab.hpp"
#include "vicsfm/texturing.hpp"
#include "vicsfm/translator.hpp"

namespace py = pybind11;
using namespace vicsfm;

namespace {

GrayImage gray_from_array(const py::array_t<std::uint8_t, py::array::c_style |
                                                              py::array::forcecast>& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-D uint8 array (H, W)");
    GrayImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.data.data(), a.data(), img.data.size());
    return img;
}

py::array_t<std::uint8_t> gray_to_array(const GrayImage& img) {
    py::array_t<std::uint8_t> a({img.height, img.width});
    std::memcpy(a.mutable_data(), img.data.data(), img.data.size());
    return a;
}

RgbImage rgb_from_array(const py::array_t<std::uint8_t, py::array::c_style |
                                                            py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw py::value_error("expected a 3-D uint8 array (H, W, 3)");
    RgbImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.data.data(), a.data(), img.data.size());
    return img;
}

py::array_t<std::uint8_t> rgb_to_array(const RgbImage& img) {
    py::array_t<std::uint8_t> a({img.height, img.width, 3});
    std::memcpy(a.mutable_data(), img.data.data(), img.data.size());
    return a;
}

py::tuple features_to_arrays(const std::vector<Feature>& feats) {
    const py::ssize_t n = static_cast<py::ssize_t>(feats.size());
    py::array_t<double> kps({n, py::ssize_t(4)});
    py::array_t<float> descs({n, py::ssize_t(128)});
    auto k = kps.mutable_unchecked<2>();
    auto d = descs.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < n; ++i) {
        const Feature& f = feats[static_cast<std::size_t>(i)];
        k(i, 0) = f.keypoint.x;
        k(i, 1) = f.keypoint.y;
        k(i, 2) = f.keypoint.scale;
        k(i, 3) = f.keypoint.orientation;
        for (py::ssize_t j = 0; j < 128; ++j) d(i, j) = f.descriptor[static_cast<std::size_t>(j)];
    }
    return py::make_tuple(kps, descs);
}

std::vector<Descriptor> descriptors_from_array(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(1) != 128)
        throw py::value_error("expected a (N, 128) float32 descriptor array");
    std::vector<Descriptor> out(static_cast<std::size_t>(a.shape(0)));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t j = 0; j < 128; ++j) out[static_cast<std::size_t>(i)][j] = r(i, j);
    return out;
}

py::tuple matches_to_arrays(const std::vector<Match>& ms) {
    const py::ssize_t n = static_cast<py::ssize_t>(ms.size());
    py::array_t<int> pairs({n, py::ssize_t(2)});
    py::array_t<double> dist(n);
    auto p = pairs.mutable_unchecked<2>();
    auto d = dist.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < n; ++i) {
        p(i, 0) = ms[static_cast<std::size_t>(i)].index_a;
        p(i, 1) = ms[static_cast<std::size_t>(i)].index_b;
        d(i) = ms[static_cast<std::size_t>(i)].distance;
    }
    return py::make_tuple(pairs, dist);
}

std::vector<Eigen::Vector3d> points_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("expected a (N, 3) array");
    std::vector<Eigen::Vector3d> pts(static_cast<std::size_t>(a.shape(0)));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        pts[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1), r(i, 2)};
    return pts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Structure-from-motion toolkit for texture-poor image sequences";

    py::register_exception<Error>(m, "VicsfmError", PyExc_RuntimeError);

    // ---- imaging -----------------------------------------------------------
    m.def("make_radial_gradient",
          [](int w, int h) { return gray_to_array(make_radial_gradient(w, h)); },
          py::arg("width"), py::arg("height"));
    m.def("extract_channel",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
             const std::string& ch) {
              return gray_to_array(extract_channel(rgb_from_array(a), channel_from_name(ch)));
          },
          py::arg("image"), py::arg("channel") = "green");
    m.def("promote_to_rgb",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
              return rgb_to_array(promote_to_rgb(gray_from_array(a)));
          },
          py::arg("image"));
    m.def("resize_bilinear",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
             int w, int h) { return gray_to_array(resize_bilinear(gray_from_array(a), w, h)); },
          py::arg("image"), py::arg("width"), py::arg("height"));
    m.def("crop",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
             int x0, int y0, int w, int h) {
              return gray_to_array(crop(gray_from_array(a), x0, y0, w, h));
          },
          py::arg("image"), py::arg("x0"), py::arg("y0"), py::arg("width"), py::arg("height"));
    m.def("load_image", [](const std::filesystem::path& p) { return rgb_to_array(load_rgb(p)); },
          py::arg("path"), "Loads a PNG or PGM frame as an (H, W, 3) array.");
    m.def("save_image",
          [](const std::filesystem::path& p,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
              if (a.ndim() == 2)
                  save_gray(gray_from_array(a), p);
              else
                  save_rgb(rgb_from_array(a), p);
          },
          py::arg("path"), py::arg("image"));

    // ---- style translation -------------------------------------------------
    py::class_<Translator>(m, "Translator")
        .def_static("identity", &Translator::identity)
        .def_static("synthetic_dye",
                    [](std::uint64_t seed, double amplitude, double cell_scale,
                       double detail_gain) {
                        SyntheticDyeParams p;
                        p.seed = seed;
                        p.amplitude = amplitude;
                        p.cell_scale = cell_scale;
                        p.detail_gain = detail_gain;
                        return Translator::synthetic_dye(p);
                    },
                    py::arg("seed") = SyntheticDyeParams{}.seed,
                    py::arg("amplitude") = SyntheticDyeParams{}.amplitude,
                    py::arg("cell_scale") = SyntheticDyeParams{}.cell_scale,
                    py::arg("detail_gain") = SyntheticDyeParams{}.detail_gain)
        .def_static("from_function",
                    [](py::function fn, const std::string& name) {
                        return Translator(name, [fn](const GrayImage& img) {
                            py::gil_scoped_acquire gil;
                            return gray_from_array(fn(gray_to_array(img)));
                        });
                    },
                    py::arg("fn"), py::arg("name") = "python")
        .def_property_readonly("name", &Translator::name)
        .def("__call__", [](const Translator& t,
                            const py::array_t<std::uint8_t,
                                              py::array::c_style | py::array::forcecast>& a) {
            return gray_to_array(t(gray_from_array(a)));
        });
    m.def("apply_synthetic_dye",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
             std::uint64_t seed, double amplitude, double cell_scale, double detail_gain) {
              SyntheticDyeParams p;
              p.seed = seed;
              p.amplitude = amplitude;
              p.cell_scale = cell_scale;
              p.detail_gain = detail_gain;
              return gray_to_array(apply_synthetic_dye(gray_from_array(a), p));
          },
          py::arg("image"), py::arg("seed") = SyntheticDyeParams{}.seed,
          py::arg("amplitude") = SyntheticDyeParams{}.amplitude,
          py::arg("cell_scale") = SyntheticDyeParams{}.cell_scale,
          py::arg("detail_gain") = SyntheticDyeParams{}.detail_gain);
    m.def("cycle_error",
          [](const Translator& ab, const Translator& ba,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
              return cycle_error(ab, ba, gray_from_array(a));
          },
          py::arg("t_ab"), py::arg("t_ba"), py::arg("image"));

    // ---- features & matching -----------------------------------------------
    m.def("detect_sift",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
             int octaves, int scales_per_octave, double base_sigma, double contrast_threshold,
             double edge_threshold) {
              SiftParams p;
              p.octaves = octaves;
              p.scales_per_octave = scales_per_octave;
              p.base_sigma = base_sigma;
              p.contrast_threshold = contrast_threshold;
              p.edge_threshold = edge_threshold;
              return features_to_arrays(detect_sift(gray_from_array(a), p));
          },
          py::arg("image"), py::arg("octaves") = SiftParams{}.octaves,
          py::arg("scales_per_octave") = SiftParams{}.scales_per_octave,
          py::arg("base_sigma") = SiftParams{}.base_sigma,
          py::arg("contrast_threshold") = SiftParams{}.contrast_threshold,
          py::arg("edge_threshold") = SiftParams{}.edge_threshold,
          "Returns (keypoints (N,4) [x, y, scale, orientation], descriptors (N,128)).");
    m.def("match_exhaustive",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<float, py::array::c_style | py::array::forcecast>& b,
             double ratio) {
              const auto da = descriptors_from_array(a);
              const auto db = descriptors_from_array(b);
              return matches_to_arrays(match_exhaustive(da, db, ratio));
          },
          py::arg("descriptors_a"), py::arg("descriptors_b"), py::arg("ratio") = 0.8,
          "Returns (pairs (N,2) of indices, distances (N,)).");

    // ---- cameras & reconstruction ------------------------------------------
    py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
        .def(py::init([](double focal, double cx, double cy, double k1) {
                 CameraIntrinsics i;
                 i.focal = focal;
                 i.cx = cx;
                 i.cy = cy;
                 i.k1 = k1;
                 return i;
             }),
             py::arg("focal"), py::arg("cx"), py::arg("cy"), py::arg("k1") = 0.0)
        .def_static("from_image_size", &CameraIntrinsics::from_image_size, py::arg("width"),
                    py::arg("height"))
        .def_readwrite("focal", &CameraIntrinsics::focal)
        .def_readwrite("cx", &CameraIntrinsics::cx)
        .def_readwrite("cy", &CameraIntrinsics::cy)
        .def_readwrite("k1", &CameraIntrinsics::k1)
        .def("__repr__", [](const CameraIntrinsics& i) {
            std::ostringstream s;
            s << "CameraIntrinsics(focal=" << i.focal << ", cx=" << i.cx << ", cy=" << i.cy
              << ", k1=" << i.k1 << ")";
            return s.str();
        });

    py::class_<Pose>(m, "Pose")
        .def(py::init<>())
        .def_property_readonly("rotation", [](const Pose& p) { return p.matrix(); })
        .def_property_readonly("translation", [](const Pose& p) { return p.translation; })
        .def("center", &Pose::center)
        .def("apply", &Pose::apply, py::arg("point"))
        .def("inverse", &Pose::inverse);

    py::class_<Reconstruction>(m, "Reconstruction")
        .def_property_readonly("intrinsics",
                               [](const Reconstruction& r) { return r.intrinsics; })
        .def_property_readonly("image_width", [](const Reconstruction& r) { return r.image_width; })
        .def_property_readonly("image_height",
                               [](const Reconstruction& r) { return r.image_height; })
        .def_property_readonly("frame_ids",
                               [](const Reconstruction& r) {
                                   std::vector<FrameId> ids;
                                   for (const auto& [fid, fr] : r.frames) ids.push_back(fid);
                                   return ids;
                               })
        .def("pose", [](const Reconstruction& r, FrameId fid) { return r.frames.at(fid).pose; },
             py::arg("frame"))
        .def("frame_name",
             [](const Reconstruction& r, FrameId fid) { return r.frames.at(fid).name; },
             py::arg("frame"))
        .def("points",
             [](const Reconstruction& r) {
                 py::array_t<double> a({py::ssize_t(r.points.size()), py::ssize_t(3)});
                 auto w = a.mutable_unchecked<2>();
                 py::ssize_t i = 0;
                 for (const auto& [pid, pt] : r.points) {
                     w(i, 0) = pt.xyz.x();
                     w(i, 1) = pt.xyz.y();
                     w(i, 2) = pt.xyz.z();
                     ++i;
                 }
                 return a;
             })
        .def("observation_count", &Reconstruction::observation_count)
        .def("check_invariants", &Reconstruction::check_invariants)
        .def("__repr__", [](const Reconstruction& r) {
            std::ostringstream s;
            s << "Reconstruction(frames=" << r.frames.size() << ", points=" << r.points.size()
              << ", observations=" << r.observation_count() << ")";
            return s.str();
        });

    py::class_<ReprojectionStats>(m, "ReprojectionStats")
        .def_readonly("count", &ReprojectionStats::count)
        .def_readonly("mean_px", &ReprojectionStats::mean_px)
        .def_readonly("rmse_px", &ReprojectionStats::rmse_px)
        .def_readonly("max_px", &ReprojectionStats::max_px);
    m.def("reprojection_stats", &reprojection_stats, py::arg("reconstruction"));
    m.def("save_reconstruction_json", &save_reconstruction_json, py::arg("reconstruction"),
          py::arg("path"));
    m.def("load_reconstruction_json", &load_reconstruction_json, py::arg("path"));
    m.def("save_point_cloud_ply", &save_point_cloud_ply, py::arg("reconstruction"),
          py::arg("path"));

    m.def("reconstruct_incremental",
          [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>&
                 keypoints,
             const std::map<std::pair<FrameId, FrameId>,
                            py::array_t<int, py::array::c_style | py::array::forcecast>>& matches,
             const CameraIntrinsics& seed, int width, int height, double pnp_threshold_px,
             int min_init_matches, bool self_calibrate, std::uint64_t rng_seed) {
              std::vector<std::vector<Eigen::Vector2d>> kps;
              kps.reserve(keypoints.size());
              for (const auto& a : keypoints) {
                  if (a.ndim() != 2 || a.shape(1) != 2)
                      throw py::value_error("keypoints must be (N, 2) arrays");
                  auto r = a.unchecked<2>();
                  std::vector<Eigen::Vector2d> v(static_cast<std::size_t>(a.shape(0)));
                  for (py::ssize_t i = 0; i < a.shape(0); ++i)
                      v[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1)};
                  kps.push_back(std::move(v));
              }
              PairwiseMatches pm;
              for (const auto& [key, a] : matches) {
                  if (a.ndim() != 2 || a.shape(1) != 2)
                      throw py::value_error("matches must be (N, 2) index arrays");
                  auto r = a.unchecked<2>();
                  std::vector<Match>& list = pm[key];
                  list.reserve(static_cast<std::size_t>(a.shape(0)));
                  for (py::ssize_t i = 0; i < a.shape(0); ++i)
                      list.push_back({r(i, 0), r(i, 1), 0.0});
              }
              IncrementalOptions opts;
              opts.pnp_threshold_px = pnp_threshold_px;
              opts.min_init_matches = min_init_matches;
              opts.self_calibrate = self_calibrate;
              opts.seed = rng_seed;
              return reconstruct_incremental(kps, pm, seed, width, height, opts);
          },
          py::arg("keypoints"), py::arg("matches"), py::arg("intrinsics"), py::arg("width"),
          py::arg("height"), py::arg("pnp_threshold_px") = IncrementalOptions{}.pnp_threshold_px,
          py::arg("min_init_matches") = IncrementalOptions{}.min_init_matches,
          py::arg("self_calibrate") = IncrementalOptions{}.self_calibrate, py::arg("seed") = 0);

    // ---- plane cleanup -------------------------------------------------------
    m.def("fit_plane_ransac",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             double threshold, double confidence, std::uint64_t seed) {
              const auto pts = points_from_array(a);
              PlaneFit fit = fit_plane_ransac(pts, threshold, confidence, seed);
              py::array_t<bool> mask(static_cast<py::ssize_t>(fit.inliers.size()));
              auto w = mask.mutable_unchecked<1>();
              for (py::ssize_t i = 0; i < mask.shape(0); ++i)
                  w(i) = fit.inliers[static_cast<std::size_t>(i)] != 0;
              return py::make_tuple(fit.plane.normal, fit.plane.offset, mask);
          },
          py::arg("points"), py::arg("threshold"), py::arg("confidence") = 0.999,
          py::arg("seed") = 0, "Returns (normal, offset, inlier_mask).");
    m.def("remove_outliers_plane",
          [](const Reconstruction& r, const std::string& mode, double threshold_factor,
             double fit_threshold_factor, std::uint64_t seed) {
              PlaneCleanupMode m = PlaneCleanupMode::RemoveBeyondSignedDistance;
              if (mode == "near")
                  m = PlaneCleanupMode::KeepNearPlane;
              else if (mode != "signed")
                  throw py::value_error("mode must be 'signed' or 'near'");
              return remove_outliers_plane(r, m, threshold_factor, fit_threshold_factor, seed);
          },
          py::arg("reconstruction"), py::arg("mode") = "signed",
          py::arg("threshold_factor") = 0.5, py::arg("fit_threshold_factor") = 0.1,
          py::arg("seed") = 0);

    // ---- meshing & texturing --------------------------------------------------
    py::class_<Mesh>(m, "Mesh")
        .def("vertices",
             [](const Mesh& mesh) {
                 py::array_t<double> a({py::ssize_t(mesh.vertices.size()), py::ssize_t(3)});
                 auto w = a.mutable_unchecked<2>();
                 for (py::ssize_t i = 0; i < a.shape(0); ++i)
                     for (py::ssize_t j = 0; j < 3; ++j)
                         w(i, j) = mesh.vertices[static_cast<std::size_t>(i)][j];
                 return a;
             })
        .def("triangles",
             [](const Mesh& mesh) {
                 py::array_t<int> a({py::ssize_t(mesh.triangles.size()), py::ssize_t(3)});
                 auto w = a.mutable_unchecked<2>();
                 for (py::ssize_t i = 0; i < a.shape(0); ++i)
                     for (py::ssize_t j = 0; j < 3; ++j)
                         w(i, j) = mesh.triangles[static_cast<std::size_t>(i)]
                                                 [static_cast<std::size_t>(j)];
                 return a;
             })
        .def("colors",
             [](const Mesh& mesh) {
                 py::array_t<std::uint8_t> a({py::ssize_t(mesh.colors.size()), py::ssize_t(3)});
                 auto w = a.mutable_unchecked<2>();
                 for (py::ssize_t i = 0; i < a.shape(0); ++i)
                     for (py::ssize_t j = 0; j < 3; ++j)
                         w(i, j) = mesh.colors[static_cast<std::size_t>(i)]
                                              [static_cast<std::size_t>(j)];
                 return a;
             })
        .def("euler_characteristic", &Mesh::euler_characteristic)
        .def("__repr__", [](const Mesh& mesh) {
            std::ostringstream s;
            s << "Mesh(vertices=" << mesh.vertices.size()
              << ", triangles=" << mesh.triangles.size() << ")";
            return s.str();
        });
    m.def("mesh_from_points",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             double voxel_size, double iso, int smoothing_passes, int margin_voxels) {
              MeshingOptions opts;
              opts.iso = iso;
              opts.smoothing_passes = smoothing_passes;
              opts.margin_voxels = margin_voxels;
              const auto pts = points_from_array(a);
              return mesh_from_points(pts, voxel_size, opts);
          },
          py::arg("points"), py::arg("voxel_size"), py::arg("iso") = 0.0,
          py::arg("smoothing_passes") = MeshingOptions{}.smoothing_passes,
          py::arg("margin_voxels") = MeshingOptions{}.margin_voxels);
    m.def("save_mesh_ply", &save_mesh_ply, py::arg("mesh"), py::arg("path"));
    m.def("load_mesh_ply", &load_mesh_ply, py::arg("path"));
    m.def("texture_mesh",
          [](const Mesh& mesh, const Reconstruction& recon,
             const std::map<FrameId, py::array_t<std::uint8_t, py::array::c_style |
                                                                   py::array::forcecast>>&
                 images) {
              std::map<FrameId, RgbImage> imgs;
              for (const auto& [fid, a] : images) imgs.emplace(fid, rgb_from_array(a));
              return texture_mesh(mesh, recon, imgs);
          },
          py::arg("mesh"), py::arg("reconstruction"), py::arg("images"));
    m.def("localize_frame",
          [](const Reconstruction& recon, const Mesh& mesh, FrameId frame,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& image) {
              return localize_frame(recon, mesh, frame, rgb_from_array(image));
          },
          py::arg("reconstruction"), py::arg("mesh"), py::arg("frame"), py::arg("image"));
    m.def("save_localization_ply", &save_localization_ply, py::arg("mesh"), py::arg("pose"),
          py::arg("intrinsics"), py::arg("image_width"), py::arg("image_height"),
          py::arg("path"), py::arg("frustum_depth") = 0.0);

    // ---- evaluation ------------------------------------------------------------
    py::class_<MatchCurve>(m, "MatchCurve")
        .def_readonly("window", &MatchCurve::window)
        .def_readonly("samples", &MatchCurve::samples)
        .def_readonly("mean_matches", &MatchCurve::mean_matches);
    py::class_<MetricsRow>(m, "MetricsRow")
        .def_readonly("label", &MetricsRow::label)
        .def_readonly("input_images", &MetricsRow::input_images)
        .def_readonly("reconstructed_images", &MetricsRow::reconstructed_images)
        .def_readonly("reconstructed_pct", &MetricsRow::reconstructed_pct)
        .def_readonly("points3d", &MetricsRow::points3d)
        .def_readonly("avg_observations", &MetricsRow::avg_observations);
    m.def("format_percent", &format_percent, py::arg("numerator"), py::arg("denominator"));
    m.def("table_metrics", &table_metrics, py::arg("reconstruction"), py::arg("input_count"),
          py::arg("label") = "run");
    m.def("anchor_match_curve",
          [](const std::vector<py::array_t<float, py::array::c_style | py::array::forcecast>>&
                 frames,
             int window, int stride, double ratio) {
              std::vector<std::vector<Feature>> feats;
              feats.reserve(frames.size());
              for (const auto& a : frames) {
                  const auto descs = descriptors_from_array(a);
                  std::vector<Feature> fs(descs.size());
                  for (std::size_t i = 0; i < descs.size(); ++i) fs[i].descriptor = descs[i];
                  feats.push_back(std::move(fs));
              }
              return anchor_match_curve(feats, window, stride, ratio);
          },
          py::arg("frames"), py::arg("window") = 10, py::arg("stride") = 0,
          py::arg("ratio") = 0.8,
          "frames: per-frame (N, 128) descriptor arrays, in sequence order.");

    // ---- synthetic scenes --------------------------------------------------------
    py::class_<SyntheticScene>(m, "SyntheticScene")
        .def_property_readonly("intrinsics",
                               [](const SyntheticScene& s) { return s.intrinsics; })
        .def_property_readonly("image_width",
                               [](const SyntheticScene& s) { return s.image_width; })
        .def_property_readonly("image_height",
                               [](const SyntheticScene& s) { return s.image_height; })
        .def_property_readonly("n_frames",
                               [](const SyntheticScene& s) { return s.poses.size(); })
        .def_property_readonly("diameter", &SyntheticScene::diameter)
        .def("pose", [](const SyntheticScene& s, std::size_t i) { return s.poses.at(i); },
             py::arg("frame"))
        .def("points",
             [](const SyntheticScene& s) {
                 py::array_t<double> a({py::ssize_t(s.points.size()), py::ssize_t(3)});
                 auto w = a.mutable_unchecked<2>();
                 for (py::ssize_t i = 0; i < a.shape(0); ++i)
                     for (py::ssize_t j = 0; j < 3; ++j)
                         w(i, j) = s.points[static_cast<std::size_t>(i)][j];
                 return a;
             })
        .def("render_view",
             [](const SyntheticScene& s, std::size_t i) {
                 return gray_to_array(render_view(s, s.poses.at(i)));
             },
             py::arg("frame"));
    m.def("make_scene",
          [](int n_points, int n_frames, const Eigen::Vector3d& semi_axes, double noise_px,
             double outlier_frac, std::uint64_t seed, int width, int height, double focal,
             double k1, double orbit_radius_frac, double sweep_degrees, double texture_amplitude) {
              SceneOptions opts;
              opts.image_width = width;
              opts.image_height = height;
              opts.focal = focal;
              opts.k1 = k1;
              opts.orbit_radius_frac = orbit_radius_frac;
              opts.sweep_degrees = sweep_degrees;
              opts.texture_amplitude = texture_amplitude;
              return make_scene(n_points, n_frames, semi_axes, noise_px, outlier_frac, seed,
                                opts);
          },
          py::arg("n_points"), py::arg("n_frames"),
          py::arg("semi_axes") = Eigen::Vector3d(1.0, 0.8, 0.6), py::arg("noise_px") = 0.0,
          py::arg("outlier_frac") = 0.0, py::arg("seed") = 1, py::arg("width") = 640,
          py::arg("height") = 480, py::arg("focal") = 420.0, py::arg("k1") = 0.0,
          py::arg("orbit_radius_frac") = 0.35, py::arg("sweep_degrees") = 360.0,
          py::arg("texture_amplitude") = 0.8);
    m.def("track_pixels",
          [](const SyntheticScene& s) {
              std::vector<py::array_t<double>> out;
              for (const auto& frame : track_pixels(s)) {
                  py::array_t<double> a({py::ssize_t(frame.size()), py::ssize_t(2)});
                  auto w = a.mutable_unchecked<2>();
                  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
                      w(i, 0) = frame[static_cast<std::size_t>(i)].x();
                      w(i, 1) = frame[static_cast<std::size_t>(i)].y();
                  }
                  out.push_back(std::move(a));
              }
              return out;
          },
          py::arg("scene"));
    m.def("tracks_to_matches",
          [](const SyntheticScene& s) {
              std::map<std::pair<FrameId, FrameId>, py::array_t<int>> out;
              for (const auto& [key, list] : tracks_to_matches(s)) {
                  py::array_t<int> a({py::ssize_t(list.size()), py::ssize_t(2)});
                  auto w = a.mutable_unchecked<2>();
                  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
                      w(i, 0) = list[static_cast<std::size_t>(i)].index_a;
                      w(i, 1) = list[static_cast<std::size_t>(i)].index_b;
                  }
                  out.emplace(key, std::move(a));
              }
              return out;
          },
          py::arg("scene"));

    // ---- pipeline ------------------------------------------------------------------
    m.def("run_pipeline",
          [](const std::map<std::string, std::string>& config, const std::string& only) {
              PipelineConfig cfg;
              for (const auto& [k, v] : config) cfg.set(k, v);
              std::ostringstream log;
              PipelineResult res = run_pipeline(cfg, log, only);
              py::dict d;
              d["exit_code"] = res.exit_code;
              d["failed_stage"] = res.failed_stage;
              d["message"] = res.message;
              d["manifest_path"] = res.manifest_path.string();
              d["log"] = log.str();
              py::list stages;
              for (const auto& st : res.stages) {
                  py::dict s;
                  s["name"] = st.name;
                  s["cached"] = st.cached;
                  s["outputs"] = st.outputs;
                  stages.append(s);
              }
              d["stages"] = stages;
              return d;
          },
          py::arg("config"), py::arg("only") = "",
          "config: dotted-key overrides, e.g. {'input.dir': 'frames', 'work.dir': 'work'}.");
    m.def("pipeline_stage_names", [] { return pipeline_stage_names(); });
    m.def("hash_file_hex", &hash_file_hex, py::arg("path"));
}
