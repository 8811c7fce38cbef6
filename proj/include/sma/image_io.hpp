#pragma once

// Decoding, encoding and overlay rasterization. OpenCV is used only as a
// codec and line-drawing backend; pixel data is converted to GrayImage
// immediately.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sma/image.hpp"

namespace sma {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Color&) const = default;
};

namespace colors {
inline constexpr Color green{0, 255, 0};
inline constexpr Color yellow{255, 255, 0};
inline constexpr Color red{255, 0, 0};
inline constexpr Color white{255, 255, 255};
}  // namespace colors

struct DrawLine {
  double x0, y0, x1, y1;
  Color color;
  int thickness = 1;
  bool dashed = false;
};

struct DrawRect {
  RectRegion rect;
  Color color;
  int thickness = 1;
};

struct DrawText {
  int x, y;
  std::string text;
  Color color;
};

using DrawPrimitive = std::variant<DrawLine, DrawRect, DrawText>;
using DrawList = std::vector<DrawPrimitive>;

namespace detail {

enum class FileKind { png, tiff, bmp, jpeg, unknown };

inline FileKind sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<unsigned char, 8> m{};
  in.read(reinterpret_cast<char*>(m.data()), m.size());
  const auto n = in.gcount();
  if (n >= 8 && m[0] == 0x89 && m[1] == 'P' && m[2] == 'N' && m[3] == 'G')
    return FileKind::png;
  if (n >= 4 && ((m[0] == 'I' && m[1] == 'I' && m[2] == 42 && m[3] == 0) ||
                 (m[0] == 'M' && m[1] == 'M' && m[2] == 0 && m[3] == 42)))
    return FileKind::tiff;
  if (n >= 2 && m[0] == 'B' && m[1] == 'M') return FileKind::bmp;
  if (n >= 3 && m[0] == 0xFF && m[1] == 0xD8 && m[2] == 0xFF)
    return FileKind::jpeg;
  return FileKind::unknown;
}

inline cv::Scalar bgr(Color c) { return cv::Scalar(c.b, c.g, c.r); }

inline void draw_dashed(cv::Mat& canvas, cv::Point2d a, cv::Point2d b,
                        const cv::Scalar& color, int thickness) {
  constexpr double dash = 6.0;
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  if (len <= 0.0) return;
  const cv::Point2d dir((b.x - a.x) / len, (b.y - a.y) / len);
  for (double s = 0.0; s < len; s += 2 * dash) {
    const double e = std::min(s + dash, len);
    cv::line(canvas, cv::Point(cvRound(a.x + dir.x * s), cvRound(a.y + dir.y * s)),
             cv::Point(cvRound(a.x + dir.x * e), cvRound(a.y + dir.y * e)), color,
             thickness, cv::LINE_8);
  }
}

}  // namespace detail

/// Reads PNG, TIFF, BMP or JPEG (8/16-bit, gray or color) into [0,1].
/// Color is reduced by luminance 0.299R + 0.587G + 0.114B.
inline GrayImage decode_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorKind::io, "cannot read " + path.string());
  }
  if (detail::sniff(path) == detail::FileKind::unknown) {
    throw Error(ErrorKind::format, "unsupported image format: " + path.string());
  }
  cv::Mat raw;
  try {
    raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::io, "failed to decode " + path.string() + ": " + e.what());
  }
  if (raw.empty()) {
    throw Error(ErrorKind::io, "failed to decode " + path.string());
  }

  double full_scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: full_scale = 255.0; break;
    case CV_16U: full_scale = 65535.0; break;
    case CV_32F:
    case CV_64F: full_scale = 1.0; break;
    default:
      throw Error(ErrorKind::format, "unsupported sample depth in " + path.string());
  }
  cv::Mat samples;
  raw.convertTo(samples, CV_64F, 1.0 / full_scale);

  const int channels = samples.channels();
  GrayImage out(samples.cols, samples.rows);
  for (int y = 0; y < samples.rows; ++y) {
    const double* src = samples.ptr<double>(y);
    for (int x = 0; x < samples.cols; ++x) {
      const double* p = src + static_cast<std::ptrdiff_t>(x) * channels;
      double v = 0.0;
      if (channels == 1 || channels == 2) {
        v = p[0];
      } else {
        // OpenCV channel order is B, G, R(, A).
        v = 0.299 * p[2] + 0.587 * p[1] + 0.114 * p[0];
      }
      out(x, y) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

/// Rasterizes `overlay` in color over the image; writes 8-bit gray when the
/// overlay is empty.
inline void encode_image(const GrayImage& img, const std::filesystem::path& path,
                         const DrawList& overlay = {}) {
  const auto parent = path.has_parent_path() ? path.parent_path()
                                             : std::filesystem::path(".");
  std::error_code ec;
  if (!std::filesystem::is_directory(parent, ec)) {
    throw Error(ErrorKind::io, "output directory does not exist: " + parent.string());
  }

  cv::Mat gray(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y) {
    auto* dst = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width(); ++x) {
      dst[x] = static_cast<std::uint8_t>(std::lround(std::clamp(img(x, y), 0.0, 1.0) * 255.0));
    }
  }

  cv::Mat canvas = gray;
  if (!overlay.empty()) {
    cv::cvtColor(gray, canvas, cv::COLOR_GRAY2BGR);
    for (const auto& prim : overlay) {
      std::visit(
          [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, DrawLine>) {
              const cv::Point2d a(p.x0, p.y0), b(p.x1, p.y1);
              if (p.dashed) {
                detail::draw_dashed(canvas, a, b, detail::bgr(p.color), p.thickness);
              } else {
                cv::line(canvas, cv::Point(cvRound(a.x), cvRound(a.y)),
                         cv::Point(cvRound(b.x), cvRound(b.y)), detail::bgr(p.color),
                         p.thickness, cv::LINE_8);
              }
            } else if constexpr (std::is_same_v<T, DrawRect>) {
              cv::rectangle(canvas, cv::Rect(p.rect.x, p.rect.y, p.rect.w, p.rect.h),
                            detail::bgr(p.color), p.thickness, cv::LINE_8);
            } else {
              cv::putText(canvas, p.text, cv::Point(p.x, p.y), cv::FONT_HERSHEY_SIMPLEX,
                          0.45, detail::bgr(p.color), 1, cv::LINE_8);
            }
          },
          prim);
    }
  }

  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), canvas);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::io, "failed to write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorKind::io, "failed to write " + path.string());
}

}  // namespace sma
