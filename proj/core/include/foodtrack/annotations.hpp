#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "foodtrack/boxes.hpp"

namespace foodtrack {

// A detection tagged with the image it came from.
struct ImageDetection {
  std::string image_id;
  Detection detection;
};

// Line formats (whitespace separated, '#' starts a comment line):
//   annotations:  image_id class_id cx cy w h      (normalized)
//   detections:   image_id class_id confidence cx cy w h
//   anchors:      w h                               (grid-cell units)
//   labels:       one label per line, line number = class id
// Parse errors throw FormatError with the line number.

// Items are grouped per image in order of first appearance.
std::vector<GroundTruth> read_annotations(std::istream& in);
std::vector<GroundTruth> read_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out, const std::vector<GroundTruth>& gts);

std::vector<ImageDetection> read_detections(std::istream& in);
std::vector<ImageDetection> read_detections(const std::filesystem::path& path);
void write_detections(std::ostream& out, const std::vector<ImageDetection>& dets);

std::vector<Anchor> read_anchors(std::istream& in);
std::vector<Anchor> read_anchors(const std::filesystem::path& path);
void write_anchors(std::ostream& out, const std::vector<Anchor>& anchors);

std::vector<std::string> read_labels(std::istream& in);
std::vector<std::string> read_labels(const std::filesystem::path& path);

}  // namespace foodtrack
