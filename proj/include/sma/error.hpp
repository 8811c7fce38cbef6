#pragma once

#include <stdexcept>
#include <string>

namespace sma {

enum class ErrorKind {
  io,
  format,
  bounds,
  parameter,
  detection_failed,
  registration_failed,
  roi_too_small,
  geometry,
  undefined_orientation,
  input,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::bounds: return "bounds";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::detection_failed: return "detection-failed";
    case ErrorKind::registration_failed: return "registration-failed";
    case ErrorKind::roi_too_small: return "roi-too-small";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::undefined_orientation: return "undefined-orientation";
    case ErrorKind::input: return "input";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// that the pipeline can report which stage broke and why.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sma
