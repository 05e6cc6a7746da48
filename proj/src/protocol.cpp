#include "scopeline/protocol.hpp"

#include <fmt/format.h>

#include <array>
#include <json.hpp>

namespace scopeline::protocol {

using nlohmann::json;

namespace {

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<std::int8_t, 256> make_reverse_table() {
  std::array<std::int8_t, 256> t{};
  for (auto& v : t) v = -1;
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) {
    t[static_cast<unsigned char>(kAlphabet[i])] = static_cast<std::int8_t>(i);
  }
  return t;
}

constexpr auto kReverse = make_reverse_table();

json parse_object(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("message body is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ProtocolError("message body is not a JSON object");
  auto it = j.find("type");
  if (it == j.end() || !it->is_string()) throw ProtocolError("message lacks a string \"type\"");
  return j;
}

void expect_type(const json& j, std::string_view type) {
  const auto& got = j.at("type").get_ref<const std::string&>();
  if (got != type) throw ProtocolError(fmt::format("expected \"{}\" message, got \"{}\"", type, got));
}

void check_frame_echo(const json& j, std::int64_t expected, bool required) {
  auto it = j.find("frame_index");
  if (it == j.end()) {
    if (required) throw ProtocolError("response lacks \"frame_index\"");
    return;
  }
  if (!it->is_number_integer()) throw ProtocolError("\"frame_index\" is not an integer");
  const auto got = it->get<std::int64_t>();
  if (got != expected) {
    throw DesyncError(fmt::format("response is for frame {} but frame {} was requested", got, expected));
  }
}

std::string encode_frame_request(std::string_view type, const Frame& frame) {
  nlohmann::ordered_json j;
  j["type"] = type;
  j["frame_index"] = frame.frame_index;
  j["width"] = frame.width;
  j["height"] = frame.height;
  j["pixels_b64"] = base64_encode(frame.pixels);
  return j.dump();
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
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
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const auto d = kReverse[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0) throw ProtocolError(fmt::format("invalid base64 at offset {}", i + k));
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> frame_message(std::string_view body) {
  if (body.size() > kMaxBodyBytes) throw ProtocolError("message body exceeds size limit");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

void MessageReader::feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<std::string> MessageReader::pop() {
  if (buffer_.size() < 4) return std::nullopt;
  const std::uint32_t n = (std::uint32_t{buffer_[0]} << 24) | (std::uint32_t{buffer_[1]} << 16) |
                          (std::uint32_t{buffer_[2]} << 8) | std::uint32_t{buffer_[3]};
  if (n > kMaxBodyBytes) throw ProtocolError(fmt::format("length prefix {} exceeds limit", n));
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string body(buffer_.begin() + 4, buffer_.begin() + 4 + n);
  buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + n);
  return body;
}

ParsedMessage parse_body(const std::string& body) {
  const json j = parse_object(body);
  return {j.at("type").get<std::string>(), body};
}

std::string encode_detect_request(const Frame& frame) { return encode_frame_request("detect", frame); }
std::string encode_blur_request(const Frame& frame) { return encode_frame_request("blur", frame); }

std::string encode_detections_response(std::int64_t frame_index, std::span<const ScoredBox> boxes) {
  nlohmann::ordered_json j;
  j["type"] = "detections";
  j["frame_index"] = frame_index;
  j["boxes"] = nlohmann::ordered_json::array();
  for (const auto& b : boxes) {
    j["boxes"].push_back({{"x", b.box.x},
                          {"y", b.box.y},
                          {"w", b.box.w},
                          {"h", b.box.h},
                          {"score", b.score},
                          {"label", std::string(to_string(b.label))}});
  }
  return j.dump();
}

std::string encode_blur_response(bool blurry, std::optional<std::int64_t> frame_index) {
  nlohmann::ordered_json j;
  j["type"] = "blur_verdict";
  if (frame_index) j["frame_index"] = *frame_index;
  j["blurry"] = blurry;
  return j.dump();
}

std::vector<ScoredBox> decode_detections_response(const std::string& body,
                                                  std::int64_t expected_frame_index, Source source,
                                                  int image_w, int image_h) {
  const json j = parse_object(body);
  expect_type(j, "detections");
  check_frame_echo(j, expected_frame_index, true);
  auto it = j.find("boxes");
  if (it == j.end() || !it->is_array()) throw ProtocolError("response lacks a \"boxes\" array");

  std::vector<ScoredBox> out;
  out.reserve(it->size());
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& jb = (*it)[i];
    auto fail = [&](const std::string& why) {
      return DataError(fmt::format("box {}: {}", i, why), i);
    };
    if (!jb.is_object()) throw fail("not an object");
    ScoredBox b;
    try {
      b.box = {jb.at("x").get<int>(), jb.at("y").get<int>(), jb.at("w").get<int>(),
               jb.at("h").get<int>()};
      b.score = jb.at("score").get<double>();
      if (auto lab = jb.find("label"); lab != jb.end()) {
        b.label = label_from_string(lab->get<std::string>());
      }
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
    if (!b.box.valid()) throw fail("requires x, y >= 0 and w, h >= 1");
    if (image_w > 0 && image_h > 0 && !b.box.within(image_w, image_h)) {
      throw fail(fmt::format("extends outside the {}x{} frame", image_w, image_h));
    }
    if (!(b.score >= 0.0 && b.score <= 1.0)) throw fail(fmt::format("score {} outside [0, 1]", b.score));
    b.source = source;
    out.push_back(b);
  }
  return out;
}

BlurVerdict decode_blur_response(const std::string& body, std::int64_t expected_frame_index) {
  const json j = parse_object(body);
  expect_type(j, "blur_verdict");
  check_frame_echo(j, expected_frame_index, false);
  auto it = j.find("blurry");
  if (it == j.end()) throw ProtocolError("blur_verdict lacks \"blurry\"");
  if (!it->is_boolean()) throw ProtocolError("\"blurry\" is not a boolean");
  return it->get<bool>() ? BlurVerdict::blurry : BlurVerdict::clear;
}

DecodedFrameRequest decode_frame_request(const std::string& body) {
  const json j = parse_object(body);
  DecodedFrameRequest req;
  req.type = j.at("type").get<std::string>();
  try {
    req.frame.frame_index = j.at("frame_index").get<std::int64_t>();
    req.frame.width = j.at("width").get<int>();
    req.frame.height = j.at("height").get<int>();
    req.frame.pixels = base64_decode(j.at("pixels_b64").get<std::string>());
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("malformed frame request: {}", e.what()));
  }
  if (!req.frame.valid()) throw ProtocolError("frame request pixel count does not match extent");
  return req;
}

}  // namespace scopeline::protocol
