#pragma once

#include <cstdint>
#include <json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxlift/camera.hpp"
#include "voxlift/diffusion.hpp"
#include "voxlift/image.hpp"

// JSON encodings shared by the job service and the model-bridge client.
//
// Tensors travel as {"data": base64(little-endian f32, row-major), "shape": [h, w, c]};
// images travel as base64 PNG strings.
namespace voxlift::wire {

using Json = nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws DecodeError on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

Json encode_tensor(const Raster& raster);
/// Validates that the payload holds exactly 4 * product(shape) bytes.
Raster decode_tensor(const Json& j);

Json encode_prompt(const PromptAnnotation& prompt);
PromptAnnotation decode_prompt(const Json& j);

Json encode_bbox(const BBox& box);
BBox decode_bbox(const Json& j);

std::string encode_image_b64(const Image& image);
Image decode_image_b64(const Json& j);

/// POST /v1/score request body.
Json encode_score_request(const ScoreQuery& query);

/// [[x, y, z, r, g, b], ...]
Json encode_points(const PointCloud& cloud);
PointCloud decode_points(const Json& j);

/// Structured error body: {"error": {"code": ..., "message": ...}}.
Json error_body(std::string_view code, std::string_view message);

}  // namespace voxlift::wire
