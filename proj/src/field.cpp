#include "voxlift/field.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "voxlift/error.hpp"

namespace voxlift {

double softplus_inverse(double s) {
  if (s < 0.0 || !std::isfinite(s)) throw InvalidArgument("softplus_inverse: density must be finite and >= 0");
  if (s == 0.0) return kEmptyDensityRaw;
  // log(exp(s) - 1) without overflow
  return s + std::log(-std::expm1(-s));
}

VoxelRadianceField::VoxelRadianceField(GridResolution res, Aabb bounds) : res_(res), bounds_(bounds) {
  if (res.nx < 2 || res.ny < 2 || res.nz < 2) throw InvalidArgument("field resolution must be >= 2 per axis");
  for (int a = 0; a < 3; ++a) {
    if (!(bounds.max[a] > bounds.min[a])) throw InvalidArgument("field bounds must have positive extent");
  }
  // bounds live at file precision so export/import is lossless
  auto f32 = [](const Vec3& v) {
    return Vec3{static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
  };
  bounds_ = {f32(bounds.min), f32(bounds.max)};
  density_.assign(res.voxels(), 0.0f);
  color_.assign(res.voxels() * 3, 0.0f);
}

Vec3 VoxelRadianceField::node_position(int x, int y, int z) const {
  const Vec3 span = bounds_.max - bounds_.min;
  return {bounds_.min.x + span.x * x / (res_.nx - 1), bounds_.min.y + span.y * y / (res_.ny - 1),
          bounds_.min.z + span.z * z / (res_.nz - 1)};
}

void VoxelRadianceField::check_finite() const {
  for (float v : density_)
    if (!std::isfinite(v)) throw NumericError("non-finite density parameter");
  for (float v : color_)
    if (!std::isfinite(v)) throw NumericError("non-finite colour parameter");
}

VoxelRadianceField init_field(GridResolution res, Aabb bounds, double init_density, const Rgb& init_color) {
  VoxelRadianceField field(res, bounds);
  const auto raw = static_cast<float>(softplus_inverse(init_density));
  std::fill(field.density().begin(), field.density().end(), raw);
  auto color = field.color();
  for (std::size_t i = 0; i < color.size(); i += 3) {
    for (int c = 0; c < 3; ++c) color[i + c] = static_cast<float>(std::clamp(init_color[c], 0.0, 1.0));
  }
  return field;
}

TrilinearStencil trilinear_stencil(const VoxelRadianceField& field, const Vec3& p) {
  const auto& res = field.resolution();
  const auto& b = field.bounds();
  const int n[3] = {res.nx, res.ny, res.nz};
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double g = std::clamp((p[a] - b.min[a]) / (b.max[a] - b.min[a]) * (n[a] - 1), 0.0, n[a] - 1.0);
    i0[a] = std::min(static_cast<int>(g), n[a] - 2);
    f[a] = g - i0[a];
  }
  const auto base = static_cast<std::uint32_t>(field.index(i0[0], i0[1], i0[2]));
  const auto sy = static_cast<std::uint32_t>(res.nx);
  const auto sz = static_cast<std::uint32_t>(res.nx) * static_cast<std::uint32_t>(res.ny);
  const double gx[2] = {1.0 - f[0], f[0]};
  const double gy[2] = {1.0 - f[1], f[1]};
  const double gz[2] = {1.0 - f[2], f[2]};
  TrilinearStencil s;
  for (int k = 0; k < 8; ++k) {
    const int dx = k & 1;
    const int dy = (k >> 1) & 1;
    const int dz = (k >> 2) & 1;
    s.index[k] = base + dx + dy * sy + dz * sz;
    s.weight[k] = gx[dx] * gy[dy] * gz[dz];
  }
  return s;
}

FieldSample query(const VoxelRadianceField& field, const std::array<double, 5>& x, const Rgb& background) {
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidArgument("query: non-finite coordinate");
  const Vec3 p{x[0], x[1], x[2]};
  if (!field.bounds().contains(p)) return {background, 0.0};

  const auto s = trilinear_stencil(field, p);
  double raw_density = 0.0;
  Rgb raw_color{0.0, 0.0, 0.0};
  for (int k = 0; k < 8; ++k) {
    raw_density += s.weight[k] * field.density()[s.index[k]];
    for (int c = 0; c < 3; ++c) raw_color[c] += s.weight[k] * field.color()[3 * s.index[k] + c];
  }
  FieldSample out;
  out.density = softplus(raw_density);
  for (int c = 0; c < 3; ++c) out.color[c] = color_activation(raw_color[c]);
  return out;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little, "VXRF writer assumes a little-endian host");
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DecodeError("VXRF: truncated payload");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void get_floats(std::span<float> dst) {
    const std::size_t n = dst.size() * sizeof(float);
    if (pos_ + n > bytes_.size()) throw DecodeError("VXRF: truncated payload");
    std::memcpy(dst.data(), bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_grid(const VoxelRadianceField& field) {
  std::vector<std::uint8_t> out;
  out.reserve(kGridHeaderBytes + field.density().size_bytes() + field.color().size_bytes());
  out.insert(out.end(), {'V', 'X', 'R', 'F'});
  put<std::uint32_t>(out, 1);
  const auto& r = field.resolution();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.nx));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.ny));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.nz));
  for (int a = 0; a < 3; ++a) put<float>(out, static_cast<float>(field.bounds().min[a]));
  for (int a = 0; a < 3; ++a) put<float>(out, static_cast<float>(field.bounds().max[a]));
  for (float v : field.density()) put<float>(out, v);
  for (float v : field.color()) put<float>(out, v);
  return out;
}

VoxelRadianceField decode_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "VXRF", 4) != 0) throw DecodeError("VXRF: bad magic");
  Reader in(bytes.subspan(4));
  const auto version = in.get<std::uint32_t>();
  if (version != 1) throw DecodeError("VXRF: unsupported version " + std::to_string(version));
  GridResolution res;
  res.nx = static_cast<int>(in.get<std::uint32_t>());
  res.ny = static_cast<int>(in.get<std::uint32_t>());
  res.nz = static_cast<int>(in.get<std::uint32_t>());
  if (res.nx < 2 || res.ny < 2 || res.nz < 2 || res.voxels() > (std::size_t{1} << 30))
    throw DecodeError("VXRF: invalid resolution");
  Aabb bounds;
  float mn[3];
  float mx[3];
  for (auto& v : mn) v = in.get<float>();
  for (auto& v : mx) v = in.get<float>();
  bounds.min = {mn[0], mn[1], mn[2]};
  bounds.max = {mx[0], mx[1], mx[2]};
  const std::size_t payload = res.voxels() * 4 * sizeof(float);
  if (in.remaining() < payload) throw DecodeError("VXRF: truncated payload");
  if (in.remaining() > payload) throw DecodeError("VXRF: trailing bytes after payload");

  VoxelRadianceField field(res, bounds);
  in.get_floats(field.density());
  in.get_floats(field.color());
  return field;
}

void export_grid(const VoxelRadianceField& field, const std::filesystem::path& path) {
  const auto bytes = encode_grid(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

VoxelRadianceField import_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_grid(bytes);
}

}  // namespace voxlift
