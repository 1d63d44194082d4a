#include "foodtrack/annotations.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

bool skip_line(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string::npos || line[first] == '#';
}

[[noreturn]] void bad_line(const char* what, int number, const std::string& line) {
  throw FormatError(std::string(what) + " line " + std::to_string(number) + ": cannot parse '" + line + "'");
}

void expect_end(std::istringstream& fields, const char* what, int number, const std::string& line) {
  std::string extra;
  if (fields >> extra) bad_line(what, number, line);
}

std::ostream& precise(std::ostream& out) {
  return out << std::setprecision(std::numeric_limits<double>::max_digits10);
}

}  // namespace

std::vector<GroundTruth> read_annotations(std::istream& in) {
  std::vector<GroundTruth> out;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (skip_line(line)) continue;
    std::istringstream fields(line);
    std::string image_id;
    GroundTruthItem item;
    if (!(fields >> image_id >> item.class_id >> item.box.cx >> item.box.cy >> item.box.w >> item.box.h)) {
      bad_line("annotation", number, line);
    }
    expect_end(fields, "annotation", number, line);
    if (!is_valid(item.box)) {
      throw FormatError("annotation line " + std::to_string(number) + ": box outside the unit image");
    }
    if (item.class_id < 0) throw FormatError("annotation line " + std::to_string(number) + ": negative class id");
    auto [it, inserted] = index.try_emplace(image_id, out.size());
    if (inserted) out.push_back(GroundTruth{image_id, {}});
    out[it->second].items.push_back(item);
  }
  return out;
}

std::vector<GroundTruth> read_annotations(const std::filesystem::path& path) {
  auto in = open(path);
  return read_annotations(in);
}

void write_annotations(std::ostream& out, const std::vector<GroundTruth>& gts) {
  precise(out);
  for (const GroundTruth& gt : gts) {
    for (const GroundTruthItem& item : gt.items) {
      out << gt.image_id << ' ' << item.class_id << ' ' << item.box.cx << ' ' << item.box.cy << ' ' << item.box.w
          << ' ' << item.box.h << '\n';
    }
  }
}

std::vector<ImageDetection> read_detections(std::istream& in) {
  std::vector<ImageDetection> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (skip_line(line)) continue;
    std::istringstream fields(line);
    ImageDetection d;
    BBox& b = d.detection.box;
    if (!(fields >> d.image_id >> d.detection.class_id >> d.detection.confidence >> b.cx >> b.cy >> b.w >> b.h)) {
      bad_line("detection", number, line);
    }
    expect_end(fields, "detection", number, line);
    if (d.detection.confidence < 0.0 || d.detection.confidence > 1.0) {
      throw FormatError("detection line " + std::to_string(number) + ": confidence outside [0, 1]");
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ImageDetection> read_detections(const std::filesystem::path& path) {
  auto in = open(path);
  return read_detections(in);
}

void write_detections(std::ostream& out, const std::vector<ImageDetection>& dets) {
  precise(out);
  for (const ImageDetection& d : dets) {
    const BBox& b = d.detection.box;
    out << d.image_id << ' ' << d.detection.class_id << ' ' << d.detection.confidence << ' ' << b.cx << ' ' << b.cy
        << ' ' << b.w << ' ' << b.h << '\n';
  }
}

std::vector<Anchor> read_anchors(std::istream& in) {
  std::vector<Anchor> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (skip_line(line)) continue;
    std::istringstream fields(line);
    Anchor a;
    if (!(fields >> a.w >> a.h)) bad_line("anchor", number, line);
    expect_end(fields, "anchor", number, line);
    if (!(a.w > 0.0) || !(a.h > 0.0)) throw FormatError("anchor line " + std::to_string(number) + ": non-positive size");
    out.push_back(a);
  }
  return out;
}

std::vector<Anchor> read_anchors(const std::filesystem::path& path) {
  auto in = open(path);
  return read_anchors(in);
}

void write_anchors(std::ostream& out, const std::vector<Anchor>& anchors) {
  precise(out);
  for (const Anchor& a : anchors) out << a.w << ' ' << a.h << '\n';
}

std::vector<std::string> read_labels(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    out.push_back(line.substr(first));
  }
  return out;
}

std::vector<std::string> read_labels(const std::filesystem::path& path) {
  auto in = open(path);
  return read_labels(in);
}

}  // namespace foodtrack
