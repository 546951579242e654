#pragma once

#include <stdexcept>
#include <string>

namespace navfilter {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyLandmarkSet : Error {
  EmptyLandmarkSet() : Error("landmark set is empty") {}
};

struct UnknownLandmarkId : Error {
  explicit UnknownLandmarkId(int id)
      : Error("observation references unknown landmark id " + std::to_string(id)) {}
};

struct InsufficientFeatures : Error {
  explicit InsufficientFeatures(const std::string& what) : Error(what) {}
};

struct EnvelopeViolation : Error {
  explicit EnvelopeViolation(const std::string& what) : Error(what) {}
};

struct NonMonotoneTime : Error {
  explicit NonMonotoneTime(const std::string& what) : Error(what) {}
};

struct RateMismatch : Error {
  explicit RateMismatch(const std::string& what) : Error(what) {}
};

struct FileNotFound : Error {
  explicit FileNotFound(const std::string& path) : Error("cannot open file: " + path) {}
};

struct ParseError : Error {
  ParseError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  long line_number;
};

struct DegenerateTrajectory : Error {
  explicit DegenerateTrajectory(const std::string& what) : Error(what) {}
};

struct NoTimeOverlap : Error {
  explicit NoTimeOverlap(const std::string& what) : Error(what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

struct InvalidState : Error {
  explicit InvalidState(const std::string& what) : Error(what) {}
};

}  // namespace navfilter
