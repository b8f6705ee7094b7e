#include "voxlift/remote.hpp"

#include <httplib.h>

#include "voxlift/error.hpp"
#include "voxlift/wire.hpp"

namespace voxlift {

using wire::Json;

namespace {

Json parse_response(const std::string& body, const std::string& path) {
  try {
    return Json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw RemoteError(path + ": response is not valid JSON");
  }
}

}  // namespace

RemoteClient::RemoteClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (base_url_.rfind("http://", 0) != 0) throw InvalidArgument("remote url must start with http://");
}

std::string RemoteClient::post(const std::string& path, const std::string& body) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  auto res = client.Post(path, body, "application/json");
  if (!res) throw RemoteError(path + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    std::string message = res->body;
    try {
      const auto j = Json::parse(res->body);
      message = j.at("error").at("message").get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    throw RemoteError(path + ": HTTP " + std::to_string(res->status) + ": " + message);
  }
  return res->body;
}

SegmentResult RemoteClient::segment(const Image& image, const PromptAnnotation& prompt) const {
  prompt.validate(image.width(), image.height());
  const Json body{{"image_png_b64", wire::encode_image_b64(image)}, {"prompt", wire::encode_prompt(prompt)}};
  const Json j = parse_response(post("/v1/segment", body.dump()), "/v1/segment");
  try {
    SegmentResult out{decode_mask_png(wire::base64_decode(j.at("mask_png_b64").get<std::string>())),
                      wire::decode_bbox(j.at("bbox"))};
    if (out.mask.width() != image.width() || out.mask.height() != image.height())
      throw RemoteError("/v1/segment: mask dimensions differ from the image");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(std::string("/v1/segment: ") + e.what());
  } catch (const DecodeError& e) {
    throw RemoteError(std::string("/v1/segment: ") + e.what());
  }
}

std::string RemoteClient::caption(const Image& image) const {
  const Json body{{"image_png_b64", wire::encode_image_b64(image)}};
  const Json j = parse_response(post("/v1/caption", body.dump()), "/v1/caption");
  if (!j.contains("caption") || !j["caption"].is_string()) throw RemoteError("/v1/caption: missing caption");
  return j["caption"].get<std::string>();
}

PointCloud RemoteClient::pointcloud(const Image& image) const {
  const Json body{{"image_png_b64", wire::encode_image_b64(image)}};
  const Json j = parse_response(post("/v1/pointcloud", body.dump()), "/v1/pointcloud");
  try {
    return wire::decode_points(j.at("points"));
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(std::string("/v1/pointcloud: ") + e.what());
  } catch (const DecodeError& e) {
    throw RemoteError(std::string("/v1/pointcloud: ") + e.what());
  }
}

ScorePrediction RemoteClient::predict(const ScoreQuery& query) const {
  const Json j = parse_response(post("/v1/score", wire::encode_score_request(query).dump()), "/v1/score");
  try {
    ScorePrediction out;
    out.eps = wire::decode_tensor(j.at("eps"));
    if (!out.eps.same_shape(query.noisy)) throw RemoteError("/v1/score: eps shape differs from x_t");
    if (j.contains("embedding_grad") && !j["embedding_grad"].is_null()) {
      out.embedding_grad = j["embedding_grad"].get<std::vector<double>>();
      if (out.embedding_grad->size() != query.embedding.values.size())
        throw RemoteError("/v1/score: embedding_grad has the wrong length");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(std::string("/v1/score: ") + e.what());
  } catch (const DecodeError& e) {
    throw RemoteError(std::string("/v1/score: ") + e.what());
  }
}

}  // namespace voxlift
