#include "scopeline/media.hpp"

#include <fmt/format.h>

#include <cctype>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "scopeline/io.hpp"

namespace scopeline {

double frame_timestamp_ms(std::int64_t frame_index, double fps) {
  return static_cast<double>(frame_index) * (1000.0 / fps);
}

Frame make_frame(std::int64_t frame_index, double fps, Raster raster) {
  Frame f;
  f.frame_index = frame_index;
  f.timestamp_ms = frame_timestamp_ms(frame_index, fps);
  f.width = raster.width;
  f.height = raster.height;
  f.pixels = std::move(raster.pixels);
  return f;
}

namespace {

class PpmHeaderReader {
 public:
  PpmHeaderReader(std::span<const std::uint8_t> bytes, std::size_t start)
      : bytes_(bytes), pos_(start) {}

  std::size_t pos() const { return pos_; }

  // Skips whitespace and '#' comments (which run to end of line).
  void skip_separators() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_separators();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw FormatError(fmt::format("PPM {} too large", what), start);
      ++pos_;
    }
    if (pos_ == start) {
      throw FormatError(fmt::format("PPM header: expected {}", what), start);
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void expect_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("PPM header: expected whitespace after maxval", pos_);
    }
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

}  // namespace

Raster decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw FormatError("not a binary PPM: bad magic", 0);
  }
  if (bytes.size() < 3 || !std::isspace(bytes[2])) {
    throw FormatError("PPM header: expected whitespace after magic", 2);
  }
  PpmHeaderReader reader(bytes, 2);
  const long width = reader.read_uint("width");
  const long height = reader.read_uint("height");
  reader.skip_separators();
  const std::size_t maxval_at = reader.pos();
  const long maxval = reader.read_uint("maxval");
  if (width <= 0 || height <= 0) throw FormatError("PPM header: zero image dimension", maxval_at);
  if (maxval != 255) {
    throw FormatError(fmt::format("PPM maxval {} unsupported (only 255)", maxval), maxval_at);
  }
  reader.expect_single_whitespace();
  const std::size_t data_at = reader.pos();
  const std::size_t expected = 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - data_at < expected) {
    throw FormatError(fmt::format("PPM payload truncated: need {} bytes, have {}", expected,
                                  bytes.size() - data_at),
                      bytes.size());
  }
  Raster r;
  r.width = static_cast<int>(width);
  r.height = static_cast<int>(height);
  r.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_at),
                  bytes.begin() + static_cast<std::ptrdiff_t>(data_at + expected));
  return r;
}

std::vector<std::uint8_t> encode_ppm(int width, int height, std::span<const std::uint8_t> pixels) {
  const std::string header = fmt::format("P6\n{} {}\n255\n", width, height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

GrayImage luma(const Frame& frame) {
  GrayImage g;
  g.width = frame.width;
  g.height = frame.height;
  g.values.resize(static_cast<std::size_t>(frame.width) * frame.height);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const auto* p = &frame.pixels[3 * i];
    g.values[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return g;
}

double laplacian_variance(const GrayImage& gray) {
  if (gray.width < 3 || gray.height < 3) {
    throw std::invalid_argument(fmt::format(
        "laplacian_variance: image {}x{} is smaller than 3x3", gray.width, gray.height));
  }
  const std::size_t n = static_cast<std::size_t>(gray.width - 2) * (gray.height - 2);
  std::vector<double> responses;
  responses.reserve(n);
  for (int y = 1; y < gray.height - 1; ++y) {
    for (int x = 1; x < gray.width - 1; ++x) {
      responses.push_back(gray.at(x, y - 1) + gray.at(x - 1, y) + gray.at(x + 1, y) +
                          gray.at(x, y + 1) - 4.0 * gray.at(x, y));
    }
  }
  double mean = 0.0;
  for (double r : responses) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : responses) var += (r - mean) * (r - mean);
  return var / static_cast<double>(n);
}

BlurVerdict heuristic_blur_gate(const Frame& frame, double threshold) {
  return laplacian_variance(luma(frame)) < threshold ? BlurVerdict::blurry : BlurVerdict::clear;
}

VideoManifest read_video_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
  VideoManifest m;
  m.video_id = j.at("video_id").get<std::string>();
  m.fps = j.value("fps", kDefaultFps);
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.frame_count = j.at("frame_count").get<std::int64_t>();
  if (m.fps <= 0 || m.width <= 0 || m.height <= 0 || m.frame_count < 0) {
    throw std::runtime_error("manifest " + path.string() + ": invalid extent, fps or frame_count");
  }
  return m;
}

void write_video_manifest(const std::filesystem::path& path, const VideoManifest& m) {
  nlohmann::ordered_json j;
  j["video_id"] = m.video_id;
  j["fps"] = m.fps;
  j["width"] = m.width;
  j["height"] = m.height;
  j["frame_count"] = m.frame_count;
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string frame_file_name(std::int64_t frame_index) {
  return fmt::format("{:06d}.ppm", frame_index);
}

FrameStream::FrameStream(std::filesystem::path directory)
    : dir_(std::move(directory)), manifest_(read_video_manifest(dir_ / "manifest.json")) {}

FrameStream::FrameStream(std::filesystem::path directory, double fps_override)
    : FrameStream(std::move(directory)) {
  if (fps_override > 0) manifest_.fps = fps_override;
}

std::optional<StreamItem> FrameStream::next() {
  if (cursor_ >= manifest_.frame_count) return std::nullopt;
  StreamItem item;
  item.frame_index = cursor_++;
  const auto path = dir_ / frame_file_name(item.frame_index);
  try {
    const auto bytes = read_file_bytes(path);
    Raster r = decode_ppm(bytes);
    if (r.width != manifest_.width || r.height != manifest_.height) {
      throw std::runtime_error(fmt::format("extent {}x{} differs from manifest {}x{}", r.width,
                                           r.height, manifest_.width, manifest_.height));
    }
    item.frame = make_frame(item.frame_index, manifest_.fps, std::move(r));
  } catch (const std::exception& e) {
    item.error = path.filename().string() + ": " + e.what();
  }
  return item;
}

}  // namespace scopeline
