#include "voxlift/wire.hpp"

#include <array>
#include <bit>
#include <cstring>

#include "voxlift/error.hpp"

namespace voxlift::wire {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DecodeError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DecodeError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw DecodeError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw DecodeError("base64: data after padding");
      v[k] = decode_char(c);
      if (v[k] < 0) throw DecodeError("base64: invalid character");
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((w >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(w & 0xff));
  }
  return out;
}

Json encode_tensor(const Raster& raster) {
  static_assert(std::endian::native == std::endian::little, "tensor encoding assumes a little-endian host");
  std::vector<std::uint8_t> bytes(raster.data.size() * sizeof(float));
  for (std::size_t i = 0; i < raster.data.size(); ++i) {
    const auto f = static_cast<float>(raster.data[i]);
    std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
  }
  return Json{{"data", base64_encode(bytes)}, {"shape", {raster.height, raster.width, raster.channels}}};
}

Raster decode_tensor(const Json& j) {
  const auto shape = required<std::vector<long long>>(j, "shape");
  if (shape.size() != 3) throw DecodeError("tensor shape must be [height, width, channels]");
  for (long long d : shape)
    if (d < 1 || d > (1 << 16)) throw DecodeError("tensor dimension out of range");
  const auto bytes = base64_decode(required<std::string>(j, "data"));
  Raster r(static_cast<int>(shape[1]), static_cast<int>(shape[0]), static_cast<int>(shape[2]));
  if (bytes.size() != r.data.size() * sizeof(float))
    throw DecodeError("tensor payload is not 4 * product(shape) bytes");
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
    r.data[i] = f;
  }
  return r;
}

Json encode_prompt(const PromptAnnotation& prompt) {
  if (prompt.kind == PromptAnnotation::Kind::Point) return Json{{"point", {prompt.x, prompt.y}}};
  return Json{{"box", encode_bbox(prompt.box)}};
}

PromptAnnotation decode_prompt(const Json& j) {
  if (j.is_object() && j.contains("point")) {
    const auto p = required<std::vector<int>>(j, "point");
    if (p.size() != 2) throw DecodeError("point prompt must be [x, y]");
    return PromptAnnotation::point(p[0], p[1]);
  }
  if (j.is_object() && j.contains("box")) return PromptAnnotation::from_box(decode_bbox(j.at("box")));
  throw DecodeError("prompt needs a 'point' or 'box' field");
}

Json encode_bbox(const BBox& box) { return Json::array({box.x0, box.y0, box.x1, box.y1}); }

BBox decode_bbox(const Json& j) {
  std::vector<int> v;
  try {
    v = j.get<std::vector<int>>();
  } catch (const nlohmann::json::exception&) {
    throw DecodeError("box must be an array of integers");
  }
  if (v.size() != 4) throw DecodeError("box must be [x0, y0, x1, y1]");
  return {v[0], v[1], v[2], v[3]};
}

std::string encode_image_b64(const Image& image) { return base64_encode(encode_png(image)); }

Image decode_image_b64(const Json& j) {
  if (!j.is_string()) throw DecodeError("image must be a base64 PNG string");
  return decode_png(base64_decode(j.get<std::string>()));
}

Json encode_score_request(const ScoreQuery& query) {
  Json body{{"x_t", encode_tensor(query.noisy)}, {"t", query.t}};
  Json embedding = Json::array();
  for (double v : query.embedding.values) embedding.push_back(static_cast<double>(static_cast<float>(v)));
  body["embedding"] = std::move(embedding);
  if (query.depth != nullptr) body["depth"] = encode_tensor(query.depth->as_raster());
  if (query.target_noise != nullptr) body["target_noise"] = encode_tensor(*query.target_noise);
  return body;
}

Json encode_points(const PointCloud& cloud) {
  Json pts = Json::array();
  for (const auto& p : cloud.points)
    pts.push_back({p.position.x, p.position.y, p.position.z, p.color[0], p.color[1], p.color[2]});
  return pts;
}

PointCloud decode_points(const Json& j) {
  if (!j.is_array()) throw DecodeError("points must be an array");
  PointCloud cloud;
  cloud.points.reserve(j.size());
  for (const auto& row : j) {
    std::vector<double> v;
    try {
      v = row.get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw DecodeError("point rows must be numeric arrays");
    }
    if (v.size() != 6) throw DecodeError("point rows must be [x, y, z, r, g, b]");
    cloud.points.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
  }
  return cloud;
}

Json error_body(std::string_view code, std::string_view message) {
  return Json{{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace voxlift::wire
