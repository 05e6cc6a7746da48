#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scopeline/geometry.hpp"
#include "scopeline/media.hpp"

// Framed JSON protocol spoken with out-of-process detectors and blur
// classifiers. A message is a 4-byte big-endian body length followed by a
// UTF-8 JSON object carrying a "type" field.
//
//   -> {"type":"detect","frame_index":N,"width":W,"height":H,"pixels_b64":...}
//   <- {"type":"detections","frame_index":N,"boxes":[{"x","y","w","h","score"}]}
//   -> {"type":"blur","frame_index":N,"width":W,"height":H,"pixels_b64":...}
//   <- {"type":"blur_verdict","blurry":bool}
namespace scopeline::protocol {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The peer answered a different frame than the one asked about. The
// connection can no longer be trusted and must be reset.
class DesyncError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// A well-framed response carried an invalid box.
class DataError : public ProtocolError {
 public:
  DataError(const std::string& what, std::size_t box_index)
      : ProtocolError(what), box_index_(box_index) {}
  std::size_t box_index() const { return box_index_; }

 private:
  std::size_t box_index_;
};

inline constexpr std::uint32_t kMaxBodyBytes = 256u << 20;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> frame_message(std::string_view body);

// Incremental splitter for a byte stream of concatenated messages.
class MessageReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete body, if one is buffered. Throws ProtocolError on an
  // oversized length prefix.
  std::optional<std::string> pop();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::deque<std::uint8_t> buffer_;
};

// Parses a body, checking it is a JSON object with a string "type".
struct ParsedMessage {
  std::string type;
  std::string body;
};
ParsedMessage parse_body(const std::string& body);

std::string encode_detect_request(const Frame& frame);
std::string encode_blur_request(const Frame& frame);

std::string encode_detections_response(std::int64_t frame_index, std::span<const ScoredBox> boxes);
std::string encode_blur_response(bool blurry, std::optional<std::int64_t> frame_index = {});

// Validates type, frame_index echo and every box. Boxes are tagged with
// `source`; an optional "label" field is honoured, polyp otherwise. When
// image_w/image_h are positive boxes must also lie inside that extent.
std::vector<ScoredBox> decode_detections_response(const std::string& body,
                                                  std::int64_t expected_frame_index,
                                                  Source source, int image_w = 0,
                                                  int image_h = 0);
BlurVerdict decode_blur_response(const std::string& body, std::int64_t expected_frame_index);

struct DecodedFrameRequest {
  std::string type;
  Frame frame;
};
// Server side of encode_*_request.
DecodedFrameRequest decode_frame_request(const std::string& body);

}  // namespace scopeline::protocol
