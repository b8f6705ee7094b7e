#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "voxlift/geometry.hpp"
#include "voxlift/image.hpp"

namespace voxlift {

struct GridResolution {
  int nx = 48;
  int ny = 48;
  int nz = 48;

  std::size_t voxels() const { return static_cast<std::size_t>(nx) * ny * nz; }
  bool operator==(const GridResolution&) const = default;
};

/// Raw density used to represent an activated density of exactly zero.
inline constexpr float kEmptyDensityRaw = -100.0f;

inline double softplus(double r) { return std::max(r, 0.0) + std::log1p(std::exp(-std::abs(r))); }
inline double softplus_grad(double r) { return 1.0 / (1.0 + std::exp(-r)); }
/// Inverse of softplus for s > 0; s == 0 maps to kEmptyDensityRaw.
double softplus_inverse(double s);
inline double color_activation(double r) { return std::clamp(r, 0.0, 1.0); }

/// Explicit voxel radiance field: pre-activation density and RGB grids whose
/// nodes sit on the corners of a regular lattice spanning `bounds`. Queries
/// interpolate trilinearly before activation. Colour is view-independent.
///
/// Storage is x-fastest: voxel (x, y, z) lives at (z * ny + y) * nx + x;
/// colour keeps the three channels of a voxel adjacent.
class VoxelRadianceField {
 public:
  VoxelRadianceField() = default;
  VoxelRadianceField(GridResolution res, Aabb bounds);

  const GridResolution& resolution() const noexcept { return res_; }
  const Aabb& bounds() const noexcept { return bounds_; }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * res_.ny + y) * res_.nx + x;
  }

  std::span<float> density() noexcept { return density_; }
  std::span<const float> density() const noexcept { return density_; }
  std::span<float> color() noexcept { return color_; }
  std::span<const float> color() const noexcept { return color_; }

  /// World position of lattice node (x, y, z).
  Vec3 node_position(int x, int y, int z) const;

  /// Throws NumericError when any parameter is non-finite.
  void check_finite() const;

  bool operator==(const VoxelRadianceField&) const = default;

 private:
  GridResolution res_;
  Aabb bounds_;
  std::vector<float> density_;
  std::vector<float> color_;
};

/// Constant field whose activations equal the requested density and colour.
VoxelRadianceField init_field(GridResolution res, Aabb bounds, double init_density, const Rgb& init_color);

/// Eight lattice corners and weights of a trilinear lookup.
struct TrilinearStencil {
  std::array<std::uint32_t, 8> index{};
  std::array<double, 8> weight{};
};

/// Stencil for a point inside the bounds; coordinates are clamped onto the lattice.
TrilinearStencil trilinear_stencil(const VoxelRadianceField& field, const Vec3& p);

struct FieldSample {
  Rgb color{0.0, 0.0, 0.0};
  double density = 0.0;
};

/// C(x; theta) for x = (px, py, pz, theta_dir, phi_dir). The direction is
/// accepted but unused. Outside the bounds density is 0 and colour is `background`.
FieldSample query(const VoxelRadianceField& field, const std::array<double, 5>& x, const Rgb& background = kWhite);

// VXRF grid file: little-endian; "VXRF", u32 version = 1, u32 nx, ny, nz,
// f32 bounds min xyz then max xyz, f32 density[n], f32 color[3n].
inline constexpr std::size_t kGridHeaderBytes = 4 + 4 + 3 * 4 + 6 * 4;

std::vector<std::uint8_t> encode_grid(const VoxelRadianceField& field);
VoxelRadianceField decode_grid(std::span<const std::uint8_t> bytes);
void export_grid(const VoxelRadianceField& field, const std::filesystem::path& path);
VoxelRadianceField import_grid(const std::filesystem::path& path);

}  // namespace voxlift
