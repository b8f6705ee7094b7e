#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "voxlift/render.hpp"

namespace testing {

/// Closed-form colour of a ray through a cube of uniform density sigma and colour c:
/// c (1 - exp(-sigma L)) + bg exp(-sigma L), L the in-cube path length.
inline voxlift::Rgb uniform_cube_pixel(const voxlift::Aabb& box, const voxlift::Vec3& origin, const voxlift::Vec3& dir,
                                       double sigma, const voxlift::Rgb& c, const voxlift::Rgb& bg) {
  double t0 = 0, t1 = 0;
  double length = 0.0;
  if (voxlift::intersect(box, origin, dir, t0, t1)) length = t1 - t0;
  const double trans = std::exp(-sigma * length);
  return {c[0] * (1 - trans) + bg[0] * trans, c[1] * (1 - trans) + bg[1] * trans, c[2] * (1 - trans) + bg[2] * trans};
}

struct FdReport {
  std::size_t touched = 0;
  std::size_t failures = 0;
  double worst_relative = 0.0;  // among parameters above the absolute floor
  double worst_absolute = 0.0;
};

/// Central finite differences of sum(upstream * render) over every raw
/// parameter, compared to render_backward. The perturbation is applied in
/// float storage, so the difference quotient uses the step actually taken.
inline FdReport finite_difference_check(voxlift::VoxelRadianceField field, const voxlift::CameraPose& pose, int w,
                                        int h, const voxlift::RenderSettings& settings,
                                        const std::vector<double>& upstream, double step, double rel_tol,
                                        double abs_floor) {
  using namespace voxlift;
  const FieldGradients analytic = render_backward(field, pose, w, h, settings, upstream);
  auto objective = [&] {
    const RenderResult r = render(field, pose, w, h, settings);
    double s = 0.0;
    for (std::size_t i = 0; i < upstream.size(); ++i) s += upstream[i] * r.image.data()[i];
    return s;
  };
  FdReport rep;
  auto check = [&](std::span<float> params, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const float orig = params[i];
      params[i] = static_cast<float>(orig + step);
      const double up = params[i] - static_cast<double>(orig);
      const double f_plus = objective();
      params[i] = static_cast<float>(orig - step);
      const double down = static_cast<double>(orig) - params[i];
      const double f_minus = objective();
      params[i] = orig;
      const double fd = (f_plus - f_minus) / (up + down);
      const double a = grad[i];
      if (a == 0.0 && fd == 0.0) continue;
      ++rep.touched;
      const double err = std::abs(a - fd);
      const double scale = std::max(std::abs(a), std::abs(fd));
      rep.worst_absolute = std::max(rep.worst_absolute, err);
      if (err > abs_floor) rep.worst_relative = std::max(rep.worst_relative, err / scale);
      if (err > abs_floor && err > rel_tol * scale) ++rep.failures;
    }
  };
  check(field.density(), analytic.density);
  check(field.color(), analytic.color);
  return rep;
}

}  // namespace testing
