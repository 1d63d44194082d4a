#pragma once

#include <stdexcept>
#include <string>

namespace foodtrack {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/array dimensions disagree with what an operation or spec demands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value is NaN/Inf or otherwise outside its documented domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

// Weight blob is shorter than its manifest says.
class TruncationError : public Error {
 public:
  using Error::Error;
};

// Weight blob content does not hash to the recorded checksum.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (manifest, annotation file, config, image bytes).
class FormatError : public Error {
 public:
  using Error::Error;
};

// k-means cannot produce k distinct anchors.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Two ground-truth boxes claim the same (cell, anchor) slot.
class CollisionError : public Error {
 public:
  using Error::Error;
};

// Nutrition label absent from every configured source.
class NotFoundError : public Error {
 public:
  NotFoundError(const std::string& what, std::string label)
      : Error(what), label_(std::move(label)) {}
  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

// Remote lookup did not answer within its deadline.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace foodtrack
