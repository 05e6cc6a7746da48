#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "scopeline/annotation.hpp"
#include "scopeline/media.hpp"

namespace scopeline {

struct SyntheticDatasetSpec {
  int videos = 1;         // videos that contain polyps
  int empty_videos = 0;   // videos without polyps (false-positive clips)
  int frames = 100;       // frames per video
  int polyps = 1;         // polyps per polyp video
  double blur_fraction = 0.0;
  std::uint64_t seed = 0;
  int width = 384;
  int height = 288;
  double fps = kDefaultFps;

  // Throws ConfigError.
  void validate() const;
};

// Frame content for one generated video, kept in memory.
struct GeneratedVideo {
  VideoManifest manifest;
  std::vector<Raster> frames;
  std::vector<FrameAnnotation> annotations;  // only frames with boxes
  std::vector<bool> blurry;
};

// Clear frames are noise-textured; blurry frames are a single flat colour and
// carry no annotation; pseudo-polyps are flat high-contrast rectangles that
// appear at a seeded frame in the first quarter of the video and stay put.
// Exactly round(blur_fraction * frames) frames per video are blurry, chosen by
// a seeded shuffle.
std::vector<GeneratedVideo> generate_dataset(const SyntheticDatasetSpec& spec);

// Writes <root>/<video_id>/{NNNNNN.ppm, manifest.json, annotations.jsonl} and
// <root>/annotations.jsonl covering every video.
void write_dataset(const std::filesystem::path& root, const std::vector<GeneratedVideo>& videos);

Raster textured_raster(int width, int height, std::uint64_t seed);
Raster flat_raster(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);
void fill_box(Raster& raster, const BoundingBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b);

}  // namespace scopeline
