#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "inrpatch/checkpoint.hpp"
#include "inrpatch/commands.hpp"
#include "inrpatch/config.hpp"
#include "inrpatch/coords.hpp"
#include "inrpatch/data.hpp"
#include "inrpatch/generator.hpp"
#include "inrpatch/metrics.hpp"
#include "inrpatch/profiler.hpp"
#include "inrpatch/trainer.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace inrpatch;

namespace {

py::array_t<float> image_array(std::vector<float> data, int h, int w) {
    py::array_t<float> out({h, w, 3});
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

std::array<double, kFeatureDim> features_of(const py::array_t<float, py::array::c_style | py::array::forcecast>& img) {
    if (img.ndim() != 3 || img.shape(2) != 3)
        throw std::invalid_argument("expected an (h, w, 3) float image");
    return patch_features(img.data(), static_cast<int>(img.shape(1)), static_cast<int>(img.shape(0)));
}

FeatureStats stats_of(const py::array_t<double, py::array::c_style | py::array::forcecast>& feats) {
    if (feats.ndim() != 2 || feats.shape(1) != kFeatureDim)
        throw std::invalid_argument("expected an (n, 12) feature matrix");
    std::vector<std::array<double, kFeatureDim>> rows(static_cast<size_t>(feats.shape(0)));
    for (py::ssize_t i = 0; i < feats.shape(0); ++i)
        for (int j = 0; j < kFeatureDim; ++j)
            rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = feats.at(i, j);
    return fit_stats(rows);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "multi-stage patch-based training for coordinate-MLP GANs";

    py::class_<CoordGrid>(m, "CoordGrid")
        .def_readonly("H", &CoordGrid::H)
        .def_readonly("W", &CoordGrid::W)
        .def_readonly("N", &CoordGrid::N)
        .def_readonly("stride", &CoordGrid::stride)
        .def_readonly("origin_r", &CoordGrid::origin_r)
        .def_readonly("origin_c", &CoordGrid::origin_c)
        .def_readonly("side", &CoordGrid::side)
        .def("point_count", &CoordGrid::point_count)
        .def("coords",
             [](const CoordGrid& g) {
                 auto pts = pixel_coords(g);
                 py::array_t<int> out({static_cast<py::ssize_t>(pts.size()), static_cast<py::ssize_t>(2)});
                 auto* p = out.mutable_data();
                 for (size_t i = 0; i < pts.size(); ++i) {
                     p[2 * i] = pts[i].first;
                     p[2 * i + 1] = pts[i].second;
                 }
                 return out;
             },
             "pixel (row, col) pairs in row-major window order")
        .def("normalized",
             [](const CoordGrid& g) {
                 auto nc = normalized_coords(g);
                 py::array_t<float> out({static_cast<py::ssize_t>(nc.size() / 2), static_cast<py::ssize_t>(2)});
                 std::copy(nc.begin(), nc.end(), out.mutable_data());
                 return out;
             },
             "normalized (x, y) pairs in [-1, 1]");

    m.def("make_grid", &make_grid, py::arg("H"), py::arg("W"), py::arg("N"));
    m.def("rcrop",
          [](const CoordGrid& g, int crop_side, uint64_t seed) {
              Rng rng(seed);
              return rcrop(g, crop_side, rng);
          },
          py::arg("grid"), py::arg("crop_side"), py::arg("seed"));
    m.def("parent_window", &parent_window, py::arg("grid"));
    m.def("stage_density", &stage_density, py::arg("H"), py::arg("stage"));

    py::class_<GeneratorParams>(m, "Generator")
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"))
        .def("save", [](const GeneratorParams& g, const std::string& path, uint64_t seed) { save_checkpoint(path, g, seed); },
             py::arg("path"), py::arg("seed") = 0)
        .def_property_readonly("stage", [](const GeneratorParams& g) { return g.stage; })
        .def_property_readonly("grid_n", [](const GeneratorParams& g) { return g.grid_n; })
        .def_property_readonly("image_size", [](const GeneratorParams& g) { return g.H; })
        .def("sample",
             [](const GeneratorParams& g, uint64_t seed) {
                 int w = 0, h = 0;
                 return image_array(render_samples(g, 1, seed, w, h), h, w);
             },
             py::arg("seed"))
        .def("sample_sheet",
             [](const GeneratorParams& g, int n, uint64_t seed) {
                 int w = 0, h = 0;
                 return image_array(render_samples(g, n, seed, w, h), h, w);
             },
             py::arg("n"), py::arg("seed"))
        .def("extrapolate",
             [](const GeneratorParams& g, double margin, uint64_t seed) {
                 int side = 0;
                 return image_array(render_extrapolation(g, margin, seed, side), side, side);
             },
             py::arg("margin"), py::arg("seed"))
        .def("superres",
             [](const GeneratorParams& g, int factor, uint64_t seed) {
                 int side = 0;
                 return image_array(render_superres(g, factor, seed, side), side, side);
             },
             py::arg("factor"), py::arg("seed"))
        .def("generate",
             [](const GeneratorParams& g, py::array_t<float, py::array::c_style | py::array::forcecast> z,
                const CoordGrid& grid) {
                 if (z.ndim() != 1 || z.shape(0) != g.cfg.z_dim)
                     throw std::invalid_argument("z must be a (z_dim,) vector");
                 std::vector<float> zv(z.data(), z.data() + z.shape(0));
                 return image_array(generate_image(g, zv, grid), grid.side, grid.side);
             },
             py::arg("z"), py::arg("grid"));

    m.def("train",
          [](const std::string& config_json) {
              RunConfig cfg = parse_config(config_json);
              std::shared_ptr<const Dataset> data;
              if (cfg.dataset_source == "procedural")
                  data = std::make_shared<const Dataset>(make_procedural(cfg.dataset_count, cfg.image_size, cfg.seed));
              else
                  data = std::make_shared<const Dataset>(load_folder(cfg.dataset_path));
              Trainer trainer(cfg, data);
              trainer.run();
              return cfg.out_dir;
          },
          py::arg("config_json"), "run training for a JSON config string; returns the output directory");

    m.def("profile",
          [](const std::string& config_json, int iters) {
              RunConfig cfg = parse_config(config_json);
              auto data = std::make_shared<const Dataset>(make_procedural(cfg.dataset_count, cfg.image_size, cfg.seed));
              ProfileReport rep = run_profile(cfg, data, iters);
              py::dict out;
              for (const auto& r : rep.rows) {
                  py::dict row;
                  row["gen_fwd"] = r.gen_fwd;
                  row["fwd_total"] = r.fwd_total;
                  row["peak_floats"] = r.peak_floats;
                  row["wall_ms"] = r.median_wall_ms;
                  out[to_string(r.mode).c_str()] = row;
              }
              return out;
          },
          py::arg("config_json"), py::arg("iters") = 50);

    m.def("make_procedural",
          [](int n, int size, uint64_t seed) {
              Dataset d = make_procedural(n, size, seed);
              py::array_t<float> out({n, size, size, 3});
              auto* p = out.mutable_data();
              const size_t per = static_cast<size_t>(size) * size * 3;
              for (int i = 0; i < n; ++i)
                  std::copy(d.image(i).begin(), d.image(i).end(), p + static_cast<size_t>(i) * per);
              return out;
          },
          py::arg("n"), py::arg("size"), py::arg("seed"));

    m.def("features",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img) {
              auto f = features_of(img);
              py::array_t<double> out(std::vector<py::ssize_t>{kFeatureDim});
              std::copy(f.begin(), f.end(), out.mutable_data());
              return out;
          },
          py::arg("image"), "12-dim pixel-statistics feature vector of an (h, w, 3) image");

    m.def("pfd",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& fa,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& fb) {
              return pfd(stats_of(fa), stats_of(fb));
          },
          py::arg("features_a"), py::arg("features_b"),
          "pixel-statistics Frechet distance between two (n, 12) feature sets");

#ifdef VERSION_INFO
    m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
