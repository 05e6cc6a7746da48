#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scopeline {

inline constexpr double kDefaultFps = 60.0;
inline constexpr double kDefaultBlurThreshold = 100.0;

// Malformed image data; offset is the byte position where decoding stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB8
};

struct Frame {
  std::int64_t frame_index = 0;
  double timestamp_ms = 0.0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB8

  bool valid() const {
    return width > 0 && height > 0 &&
           pixels.size() == 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

double frame_timestamp_ms(std::int64_t frame_index, double fps);
Frame make_frame(std::int64_t frame_index, double fps, Raster raster);

// Binary PPM ("P6"), maxval 255 only.
Raster decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(int width, int height, std::span<const std::uint8_t> pixels);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// BT.601 luma.
GrayImage luma(const Frame& frame);

// Population variance of the 4-neighbour Laplacian over interior pixels.
// Throws std::invalid_argument when the image is smaller than 3x3.
double laplacian_variance(const GrayImage& gray);

enum class BlurVerdict { clear, blurry };

BlurVerdict heuristic_blur_gate(const Frame& frame, double threshold);

struct VideoManifest {
  std::string video_id;
  double fps = kDefaultFps;
  int width = 0;
  int height = 0;
  std::int64_t frame_count = 0;
};

VideoManifest read_video_manifest(const std::filesystem::path& path);
void write_video_manifest(const std::filesystem::path& path, const VideoManifest& manifest);

std::string frame_file_name(std::int64_t frame_index);

// One slot of a stream: either a decoded frame or the reason it failed.
struct StreamItem {
  std::int64_t frame_index = 0;
  std::optional<Frame> frame;
  std::string error;
};

// Reads <dir>/manifest.json and <dir>/NNNNNN.ppm in frame order. Single
// consumer; distinct streams are independent.
class FrameStream {
 public:
  explicit FrameStream(std::filesystem::path directory);
  FrameStream(std::filesystem::path directory, double fps_override);

  const VideoManifest& manifest() const { return manifest_; }
  const std::filesystem::path& directory() const { return dir_; }

  // Yields frame_index 0..frame_count-1, then nullopt.
  std::optional<StreamItem> next();

 private:
  std::filesystem::path dir_;
  VideoManifest manifest_;
  std::int64_t cursor_ = 0;
};

}  // namespace scopeline
