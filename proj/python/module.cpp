#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "voxlift/error.hpp"
#include "voxlift/fixture.hpp"
#include "voxlift/pipeline.hpp"
#include "voxlift/segment.hpp"

namespace py = pybind11;
using namespace voxlift;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Image& img) {
  Array out({img.height(), img.width(), 3});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

Image from_array(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("image array must have shape (height, width, 3)");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  Image img(w, h, std::vector<double>(a.data(), a.data() + a.size()));
  img.validate();
  return img;
}

py::array_t<bool> mask_to_array(const Mask& m) {
  py::array_t<bool> out({m.height(), m.width()});
  auto v = out.mutable_unchecked<2>();
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) v(y, x) = m.at(x, y);
  return out;
}

PromptAnnotation prompt_from(const std::optional<std::pair<int, int>>& point,
                             const std::optional<std::tuple<int, int, int, int>>& box) {
  if (point.has_value() == box.has_value()) throw InvalidArgument("give exactly one of point or box");
  if (point) return PromptAnnotation::point(point->first, point->second);
  const auto [x0, y0, x1, y1] = *box;
  return PromptAnnotation::from_box({x0, y0, x1, y1});
}

}  // namespace

PYBIND11_MODULE(_voxlift, m) {
  m.doc() = "Voxel radiance-field reconstruction from a single image.";

  // later registrations are tried first, so the base class goes first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); }, py::arg("path"),
        "RGB image as a float64 array of shape (height, width, 3) in [0, 1].");
  m.def("save_image", [](const Array& a, const std::filesystem::path& p) { save_image(from_array(a), p); },
        py::arg("image"), py::arg("path"));

  m.def(
      "segment",
      [](const Array& image, std::optional<std::pair<int, int>> point,
         std::optional<std::tuple<int, int, int, int>> box, double tau) {
        return mask_to_array(segment_region_grow(from_array(image), prompt_from(point, box), tau));
      },
      py::arg("image"), py::kw_only(), py::arg("point") = py::none(), py::arg("box") = py::none(),
      py::arg("tau") = 0.1, "Region-grow mask (height, width) from an (x, y) point or (x0, y0, x1, y1) box.");

  m.def("alpha_bar", [](int steps) {
    const DiffusionSchedule s = make_schedule(steps);
    return py::array_t<double>(static_cast<py::ssize_t>(s.values().size()), s.values().data());
  }, py::arg("steps") = 1000);

  py::class_<VoxelRadianceField>(m, "Field")
      .def_static("load", &import_grid, py::arg("path"))
      .def_static("ground_truth", [](int n) { return fixture::ground_truth_field({n, n, n}); }, py::arg("resolution") = 48,
                  "The bundled synthetic object.")
      .def("save", [](const VoxelRadianceField& f, const std::filesystem::path& p) { export_grid(f, p); })
      .def_property_readonly("resolution", [](const VoxelRadianceField& f) {
        const auto& r = f.resolution();
        return py::make_tuple(r.nx, r.ny, r.nz);
      })
      .def(
          "render",
          [](const VoxelRadianceField& f, double azimuth, double elevation, int size, int samples, double radius,
             double fov) {
            const CameraPose pose = make_pose(deg2rad(azimuth), deg2rad(elevation), radius, deg2rad(fov));
            Image img;
            {
              py::gil_scoped_release release;
              img = render(f, pose, size, size, fixture::evaluation_settings(samples)).image;
            }
            return to_array(img);
          },
          py::arg("azimuth") = 0.0, py::arg("elevation") = 0.0, py::arg("size") = 128, py::arg("samples") = 128,
          py::arg("radius") = 2.3, py::arg("fov") = 60.0, "Orbit render; angles in degrees.");

  m.def("write_fixture", &write_fixture, py::arg("directory"), py::arg("image_size") = 160,
        py::arg("iterations") = 2000, "Writes the synthetic input image and config; returns the config path.");

  m.def(
      "reconstruct",
      [](const std::filesystem::path& config, const std::map<std::string, std::string>& overrides) {
        PipelineConfig cfg = load_pipeline_config(config);
        for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg);
        }
        py::dict out;
        out["out_dir"] = r.out_dir;
        out["iterations"] = r.trace.records.size();
        out["held_out_psnr"] = r.held_out_psnr ? py::object(py::float_(*r.held_out_psnr)) : py::none();
        out["caption"] = r.caption ? py::object(py::str(*r.caption)) : py::none();
        out["field"] = std::move(r.field);
        return out;
      },
      py::arg("config"), py::arg("overrides") = std::map<std::string, std::string>{},
      "Runs the full pipeline from a config file; `overrides` maps config keys to values.");
}
