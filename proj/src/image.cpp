#include "voxlift/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "voxlift/error.hpp"

namespace voxlift {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw InvalidArgument("image dimensions must be >= 1");
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill[0];
    pixels_[i + 1] = fill[1];
    pixels_[i + 2] = fill[2];
  }
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) throw InvalidArgument("image dimensions must be >= 1");
  if (pixels_.size() != static_cast<std::size_t>(width) * height * 3)
    throw InvalidArgument("pixel buffer size does not match dimensions");
}

Rgb Image::pixel(int x, int y) const {
  const auto i = index(x, y, 0);
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Image::set_pixel(int x, int y, const Rgb& value) {
  const auto i = index(x, y, 0);
  pixels_[i] = value[0];
  pixels_[i + 1] = value[1];
  pixels_[i + 2] = value[2];
}

void Image::validate() const {
  for (double v : pixels_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw InvalidArgument("image channel outside [0,1]");
  }
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw InvalidArgument("mask dimensions must be >= 1");
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void PromptAnnotation::validate(int width, int height) const {
  auto inside = [&](int px, int py) { return px >= 0 && py >= 0 && px < width && py < height; };
  if (kind == Kind::Point) {
    if (!inside(x, y)) throw InvalidArgument("point prompt outside image");
    return;
  }
  if (box.x0 > box.x1 || box.y0 > box.y1) throw InvalidArgument("box prompt has inverted bounds");
  if (!inside(box.x0, box.y0) || !inside(box.x1, box.y1))
    throw InvalidArgument("box prompt outside image");
}

double iou(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InvalidArgument("iou: mask dimensions differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      inter += (a.at(x, y) && b.at(x, y)) ? 1 : 0;
      uni += (a.at(x, y) || b.at(x, y)) ? 1 : 0;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

struct PngReader {
  png_image image{};
  PngReader() { image.version = PNG_IMAGE_VERSION; }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;
};

// Decodes into 8-bit samples with the requested channel layout.
std::vector<std::uint8_t> decode_raw(std::span<const std::uint8_t> bytes, png_uint_32 want_format,
                                     int& width, int& height, png_uint_32& source_format) {
  PngReader r;
  if (!png_image_begin_read_from_memory(&r.image, bytes.data(), bytes.size()))
    throw DecodeError(std::string("png: ") + r.image.message);
  source_format = r.image.format;
  if (source_format & PNG_FORMAT_FLAG_LINEAR) throw DecodeError("png: 16-bit channels are not supported");
  if (source_format & PNG_FORMAT_FLAG_COLORMAP) {
    // palette images are expanded to their colour model by libpng
    source_format &= ~PNG_FORMAT_FLAG_COLORMAP;
  }
  r.image.format = want_format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(r.image));
  if (!png_image_finish_read(&r.image, nullptr, buffer.data(), 0, nullptr))
    throw DecodeError(std::string("png: ") + r.image.message);
  width = static_cast<int>(r.image.width);
  height = static_cast<int>(r.image.height);
  return buffer;
}

std::vector<std::uint8_t> encode_raw(const std::uint8_t* data, int width, int height, png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, data, 0, nullptr))
    throw Error(std::string("png encode: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr))
    throw Error(std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes) {
  int w = 0;
  int h = 0;
  png_uint_32 source = 0;
  auto raw = decode_raw(bytes, PNG_FORMAT_RGBA, w, h, source);
  const bool has_alpha = (source & PNG_FORMAT_FLAG_ALPHA) != 0;
  const bool is_color = (source & PNG_FORMAT_FLAG_COLOR) != 0;
  if (has_alpha && !is_color) throw DecodeError("png: gray+alpha layout is not supported");

  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* p = &raw[(static_cast<std::size_t>(y) * w + x) * 4];
      const double a = p[3] / 255.0;
      for (int c = 0; c < 3; ++c) {
        const double v = p[c] / 255.0;
        // transparent regions composite over white
        img.at(x, y, c) = has_alpha ? a * v + (1.0 - a) : v;
      }
    }
  }
  return img;
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  return decode_png(read_file(path));
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> raw(image.data().size());
  std::transform(image.data().begin(), image.data().end(), raw.begin(), to_byte);
  return encode_raw(raw.data(), image.width(), image.height(), PNG_FORMAT_RGB);
}

void save_image(const Image& image, const std::filesystem::path& path) {
  write_file(path, encode_png(image));
}

Mask decode_mask_png(std::span<const std::uint8_t> bytes) {
  int w = 0;
  int h = 0;
  png_uint_32 source = 0;
  auto raw = decode_raw(bytes, PNG_FORMAT_GRAY, w, h, source);
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, raw[static_cast<std::size_t>(y) * w + x] >= 128);
  return m;
}

Mask load_mask(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  return decode_mask_png(read_file(path));
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) {
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(mask.width()) * mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      raw[static_cast<std::size_t>(y) * mask.width() + x] = mask.at(x, y) ? 255 : 0;
  return encode_raw(raw.data(), mask.width(), mask.height(), PNG_FORMAT_GRAY);
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  write_file(path, encode_mask_png(mask));
}

double psnr(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InvalidArgument("psnr: image dimensions differ");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.data().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

}  // namespace voxlift
