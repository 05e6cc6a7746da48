#include "scopeline/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "scopeline/io.hpp"

namespace scopeline {

std::size_t FrameAnnotation::polyp_count() const {
  return static_cast<std::size_t>(std::count_if(
      boxes.begin(), boxes.end(), [](const AnnotatedBox& b) { return b.label == Label::polyp; }));
}

std::string annotation_to_json_line(const FrameAnnotation& a) {
  nlohmann::ordered_json j;
  j["video_id"] = a.video_id;
  j["frame_index"] = a.frame_index;
  j["boxes"] = nlohmann::ordered_json::array();
  for (const auto& b : a.boxes) {
    j["boxes"].push_back({{"x", b.box.x},
                          {"y", b.box.y},
                          {"w", b.box.w},
                          {"h", b.box.h},
                          {"label", std::string(to_string(b.label))}});
  }
  return j.dump();
}

FrameAnnotation annotation_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  FrameAnnotation a;
  a.video_id = j.at("video_id").get<std::string>();
  a.frame_index = j.at("frame_index").get<std::int64_t>();
  for (const auto& jb : j.at("boxes")) {
    AnnotatedBox b;
    b.box = {jb.at("x").get<int>(), jb.at("y").get<int>(), jb.at("w").get<int>(),
             jb.at("h").get<int>()};
    b.label = label_from_string(jb.value("label", std::string("polyp")));
    if (!b.box.valid()) throw std::invalid_argument("annotation box has w or h < 1 or negative origin");
    a.boxes.push_back(b);
  }
  return a;
}

AnnotationIndex read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotations " + path.string());
  AnnotationIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      FrameAnnotation a = annotation_from_json_line(line);
      auto& slot = index[a.video_id][a.frame_index];
      if (slot.video_id.empty()) {
        slot = std::move(a);
      } else {
        slot.boxes.insert(slot.boxes.end(), a.boxes.begin(), a.boxes.end());
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return index;
}

void write_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotation>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += annotation_to_json_line(r);
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace scopeline
