#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scopeline/geometry.hpp"

namespace scopeline {

struct AnnotatedBox {
  BoundingBox box;
  Label label = Label::polyp;

  friend bool operator==(const AnnotatedBox&, const AnnotatedBox&) = default;
};

// Ground truth for one frame. Frames absent from an annotation file carry no
// objects.
struct FrameAnnotation {
  std::string video_id;
  std::int64_t frame_index = 0;
  std::vector<AnnotatedBox> boxes;

  std::size_t polyp_count() const;
  friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

// video_id -> frame_index -> annotation
using AnnotationIndex = std::map<std::string, std::map<std::int64_t, FrameAnnotation>>;

std::string annotation_to_json_line(const FrameAnnotation& a);
FrameAnnotation annotation_from_json_line(const std::string& line);

// Throws std::runtime_error naming the file and 1-based line on bad input.
AnnotationIndex read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotation>& rows);

}  // namespace scopeline
