#include "scopeline/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scopeline/backends.hpp"
#include "scopeline/io.hpp"
#include "scopeline/splitmix.hpp"

namespace scopeline {

namespace {

constexpr int kMinPolypSide = 24;
constexpr int kMaxPolypSide = 96;
constexpr int kPlacementAttempts = 200;

std::uint64_t video_seed(std::uint64_t seed, int ordinal) {
  return seed ^ (static_cast<std::uint64_t>(ordinal + 1) * 0xD1B54A32D192ED03ULL);
}

GeneratedVideo generate_video(const SyntheticDatasetSpec& spec, const std::string& video_id,
                              int ordinal, int polyp_count) {
  SplitMix64 rng(video_seed(spec.seed, ordinal));
  GeneratedVideo v;
  v.manifest = {video_id, spec.fps, spec.width, spec.height, spec.frames};

  // Blurry frame selection: Fisher-Yates over frame indices, first k taken.
  std::vector<std::int64_t> order(static_cast<std::size_t>(spec.frames));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  const auto blur_count = static_cast<std::size_t>(std::llround(spec.blur_fraction * spec.frames));
  v.blurry.assign(static_cast<std::size_t>(spec.frames), false);
  for (std::size_t i = 0; i < blur_count; ++i) v.blurry[static_cast<std::size_t>(order[i])] = true;

  struct Polyp {
    BoundingBox box;
    std::int64_t appears;
  };
  std::vector<Polyp> polyps;
  const int max_side = std::min({kMaxPolypSide, spec.width, spec.height});
  const int min_side = std::min(kMinPolypSide, max_side);
  for (int p = 0; p < polyp_count; ++p) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const int w = static_cast<int>(rng.uniform_int(min_side, max_side));
      const int h = static_cast<int>(rng.uniform_int(min_side, max_side));
      const BoundingBox b{static_cast<int>(rng.uniform_int(0, spec.width - w)),
                          static_cast<int>(rng.uniform_int(0, spec.height - h)), w, h};
      const bool overlaps = std::any_of(polyps.begin(), polyps.end(),
                                        [&](const Polyp& q) { return intersection_area(q.box, b) > 0; });
      if (overlaps) continue;
      polyps.push_back({b, rng.uniform_int(0, std::max(0, spec.frames / 4 - 1))});
      break;
    }
  }

  const std::uint64_t texture_seed = rng.next();
  for (std::int64_t f = 0; f < spec.frames; ++f) {
    if (v.blurry[static_cast<std::size_t>(f)]) {
      v.frames.push_back(flat_raster(spec.width, spec.height, 150, 95, 85));
      continue;
    }
    Raster r = textured_raster(spec.width, spec.height,
                               texture_seed ^ (static_cast<std::uint64_t>(f) * kFrameSeedStride));
    FrameAnnotation ann{video_id, f, {}};
    for (const Polyp& p : polyps) {
      if (f < p.appears) continue;
      fill_box(r, p.box, 250, 220, 40);
      ann.boxes.push_back({p.box, Label::polyp});
    }
    v.frames.push_back(std::move(r));
    if (!ann.boxes.empty()) v.annotations.push_back(std::move(ann));
  }
  return v;
}

}  // namespace

void SyntheticDatasetSpec::validate() const {
  if (videos < 0 || empty_videos < 0) throw ConfigError("video counts must be >= 0");
  if (frames < 0) throw ConfigError("frames must be >= 0");
  if (polyps < 0) throw ConfigError("polyps must be >= 0");
  if (!(blur_fraction >= 0.0 && blur_fraction <= 1.0)) {
    throw ConfigError(fmt::format("blur fraction {} outside [0, 1]", blur_fraction));
  }
  if (width < 3 || height < 3) throw ConfigError("frames must be at least 3x3");
  if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
}

std::vector<GeneratedVideo> generate_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  std::vector<GeneratedVideo> out;
  for (int i = 0; i < spec.videos; ++i) {
    out.push_back(generate_video(spec, fmt::format("video_{:03d}", i), i, spec.polyps));
  }
  for (int i = 0; i < spec.empty_videos; ++i) {
    out.push_back(generate_video(spec, fmt::format("empty_{:03d}", i), spec.videos + i, 0));
  }
  return out;
}

void write_dataset(const std::filesystem::path& root, const std::vector<GeneratedVideo>& videos) {
  std::filesystem::create_directories(root);
  std::vector<FrameAnnotation> all;
  for (const auto& v : videos) {
    const auto dir = root / v.manifest.video_id;
    std::filesystem::create_directories(dir);
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      const Raster& r = v.frames[f];
      write_file_atomic(dir / frame_file_name(static_cast<std::int64_t>(f)),
                        encode_ppm(r.width, r.height, r.pixels));
    }
    write_video_manifest(dir / "manifest.json", v.manifest);
    write_annotations(dir / "annotations.jsonl", v.annotations);
    all.insert(all.end(), v.annotations.begin(), v.annotations.end());
  }
  write_annotations(root / "annotations.jsonl", all);
}

Raster textured_raster(int width, int height, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Raster r;
  r.width = width;
  r.height = height;
  r.pixels.resize(3 * static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < r.pixels.size(); i += 3) {
    const std::uint64_t bits = rng.next();
    const int n = static_cast<int>(bits & 0x3F) - 32;  // [-32, 31]
    r.pixels[i] = static_cast<std::uint8_t>(170 + n);
    r.pixels[i + 1] = static_cast<std::uint8_t>(100 + n);
    r.pixels[i + 2] = static_cast<std::uint8_t>(90 + static_cast<int>((bits >> 8) & 0x1F) - 16);
  }
  return r;
}

Raster flat_raster(int width, int height, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
  Raster r;
  r.width = width;
  r.height = height;
  r.pixels.resize(3 * static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < r.pixels.size(); i += 3) {
    r.pixels[i] = red;
    r.pixels[i + 1] = green;
    r.pixels[i + 2] = blue;
  }
  return r;
}

void fill_box(Raster& raster, const BoundingBox& box, std::uint8_t red, std::uint8_t green,
              std::uint8_t blue) {
  for (int y = box.y; y < std::min(box.bottom(), raster.height); ++y) {
    for (int x = box.x; x < std::min(box.right(), raster.width); ++x) {
      auto* p = &raster.pixels[3 * (static_cast<std::size_t>(y) * raster.width + x)];
      p[0] = red;
      p[1] = green;
      p[2] = blue;
    }
  }
}

}  // namespace scopeline
