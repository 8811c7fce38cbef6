#pragma once

// Per-image analysis, batch mode, overlays and the results table.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sma/aponeurosis.hpp"
#include "sma/architecture.hpp"
#include "sma/fov.hpp"
#include "sma/image.hpp"
#include "sma/image_io.hpp"
#include "sma/orientation.hpp"

namespace sma {

enum class CropMode { automatic, manual, none };

struct CropSpec {
  CropMode mode = CropMode::automatic;
  RectRegion rect{};
};

/// Pixel scaling as entered by the user: either mm per pixel, or a scale bar
/// measured in pixels together with its length in mm.
struct ScaleOptions {
  std::optional<double> mm_per_px;
  std::optional<double> bar_px;
  std::optional<double> bar_mm;
  std::optional<double> depth_mm;

  std::optional<ScaleSpec> resolve() const {
    if (mm_per_px) return ScaleSpec::from_mm_per_px(*mm_per_px);
    if (bar_px || bar_mm) {
      if (!bar_px || !bar_mm) {
        throw Error(ErrorKind::parameter, "scale bar needs both a pixel and a millimetre length");
      }
      return ScaleSpec::from_scale_bar(*bar_px, *bar_mm);
    }
    return std::nullopt;
  }
};

struct AnalysisConfig {
  bool flip = false;
  CropSpec crop{};
  FovParams fov{};
  AponeurosisConfig apo{};
  OrientationConfig orient{};
  GeometryConfig geometry{};
  ScaleOptions scale{};
  bool print_params = false;
  std::string input;
  bool batch = false;
  std::string ext;
  std::string output_dir = ".";
  int workers = 1;
};

inline void validate(const AnalysisConfig& c) {
  validate(c.apo);
  validate(c.orient);
  (void)c.scale.resolve();
  if (c.batch && c.ext.empty()) {
    throw Error(ErrorKind::parameter, "batch mode requires an extension filter");
  }
  if (c.workers < 1) throw Error(ErrorKind::parameter, "workers must be >= 1");
  if (!(c.geometry.anchor_fraction > 0.0 && c.geometry.anchor_fraction <= 1.0)) {
    throw Error(ErrorKind::parameter, "fascicle anchor fraction must lie in (0, 1]");
  }
}

/// The built-in parameter set used for movie-derived sequences: tube sigma
/// 7, 3 ROIs of 60% x 90%, automatic spectrum threshold, sigma 4, max.
inline AnalysisConfig preset_sample_c(AnalysisConfig c = {}) {
  c.apo.tube_sigma = 7.0;
  c.orient.n_rois = 3;
  c.orient.roi_width_pct = 60.0;
  c.orient.roi_height_pct = 90.0;
  c.orient.spectrum = AutoThreshold{};
  c.orient.log_sigma = 4.0;
  c.orient.aggregation = Aggregation::max;
  return c;
}

struct AnalysisRecord {
  std::string image_id;
  bool ok = false;
  std::string failed_stage;
  std::string reason;
  ArchitectureResult result;
  std::vector<double> roi_angles;
  std::vector<double> roi_coherences;
  std::vector<RectRegion> rois;  // FoV coordinates
  RectRegion fov{};
  AponeurosisPair apo{};
  double elapsed_ms = 0.0;

  static AnalysisRecord failure(std::string id, std::string stage, std::string reason,
                                double elapsed_ms = 0.0) {
    AnalysisRecord r;
    r.image_id = std::move(id);
    r.failed_stage = std::move(stage);
    r.reason = std::move(reason);
    r.elapsed_ms = elapsed_ms;
    return r;
  }
};

namespace detail {

template <class F>
auto run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw std::pair<std::string, std::string>(stage, e.what());
  } catch (const std::exception& e) {
    throw std::pair<std::string, std::string>(stage, e.what());
  }
}

}  // namespace detail

/// Field of view, aponeuroses, fascicle orientation, architecture, in that
/// order. Every stage works on a duplicate; failures are reported in the
/// record with the stage name.
inline AnalysisRecord analyze_image(const GrayImage& original, const AnalysisConfig& cfg,
                                    std::string image_id = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  AnalysisRecord rec;
  rec.image_id = std::move(image_id);
  try {
    const std::optional<ScaleSpec> scale =
        detail::run_stage("config", [&] { validate(cfg); return cfg.scale.resolve(); });
    const GrayImage img = cfg.flip ? flip_horizontal(original) : original;

    rec.fov = detail::run_stage("fov-detect", [&] {
      switch (cfg.crop.mode) {
        case CropMode::manual:
          if (!cfg.crop.rect.fits(img.width(), img.height())) {
            throw Error(ErrorKind::bounds, "manual crop rectangle exceeds the image");
          }
          return cfg.crop.rect;
        case CropMode::none:
          return RectRegion{0, 0, img.width(), img.height()};
        case CropMode::automatic:
          break;
      }
      return detect_field_of_view(img, cfg.fov).rect;
    });
    const GrayImage fov = crop(img, rec.fov);

    rec.apo = detail::run_stage("aponeurosis-detect", [&] {
      const GrayImage enhanced = preprocess_for_aponeuroses(fov, cfg.apo);
      const GrayImage edges =
          canny_edges(enhanced, cfg.apo.canny_sigma, cfg.apo.canny_low, cfg.apo.canny_high);
      return register_aponeuroses(edges, cfg.apo);
    });

    const double fascicle_deg = detail::run_stage("fascicle-orientation", [&] {
      rec.rois = build_rois(fov.width(), fov.height(), rec.apo, cfg.orient);
      for (const auto& r : rec.rois) {
        const auto d = dominant_orientation(preprocess_roi(crop(fov, r), cfg.orient),
                                            cfg.orient.window_sigma, cfg.orient.gradient);
        rec.roi_angles.push_back(d.angle);
        rec.roi_coherences.push_back(d.coherence);
      }
      return aggregate_orientations(rec.roi_angles, cfg.orient.aggregation);
    });

    rec.result = detail::run_stage("architecture", [&] {
      ArchitectureResult r = compute_architecture(rec.apo, fascicle_deg, fov.width(), cfg.geometry);
      if (scale) r = apply_scale(r, *scale, cfg.scale.depth_mm);
      return r;
    });
    rec.ok = true;
  } catch (const std::pair<std::string, std::string>& failure) {
    return AnalysisRecord::failure(rec.image_id, failure.first, failure.second, elapsed());
  }
  rec.elapsed_ms = elapsed();
  return rec;
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

/// Files in `dir` whose extension matches `ext` (case-insensitive, with or
/// without the leading dot), in lexicographic filename order.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir,
                                                      const std::string& ext) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorKind::input, "not a directory: " + dir.string());
  }
  std::string want = lowercase(ext);
  if (!want.empty() && want.front() != '.') want.insert(want.begin(), '.');
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && lowercase(entry.path().extension().string()) == want) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  if (files.empty()) {
    throw Error(ErrorKind::input, "no *" + want + " files in " + dir.string());
  }
  return files;
}

inline AnalysisRecord analyze_file(const std::filesystem::path& path, const AnalysisConfig& cfg) {
  const std::string id = path.stem().string();
  GrayImage img;
  try {
    img = decode_image(path);
  } catch (const Error& e) {
    return AnalysisRecord::failure(id, "decode", e.what());
  }
  return analyze_image(img, cfg, id);
}

/// One record per matching file, in filename order. Images are distributed
/// over `cfg.workers` threads; each image is analyzed independently so the
/// records do not depend on the worker count.
inline std::vector<AnalysisRecord> analyze_folder(const std::filesystem::path& dir,
                                                  const AnalysisConfig& cfg) {
  const auto files = list_images(dir, cfg.ext);
  std::vector<AnalysisRecord> records(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) records[i] = analyze_file(files[i], cfg);
  };
  const int n = std::max(1, std::min<int>(cfg.workers, static_cast<int>(files.size())));
  std::vector<std::jthread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  return records;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Annotations in the coordinates of the analyzed (possibly flipped) image.
inline DrawList render_overlay(const AnalysisRecord& rec) {
  DrawList draw;
  if (!rec.ok) {
    draw.push_back(DrawText{8, 20, "FAILED (" + rec.failed_stage + "): " + rec.reason, colors::red});
    return draw;
  }
  const double ox = rec.fov.x, oy = rec.fov.y;
  const double x_end = rec.fov.w - 1.0;
  for (const StraightLine* l : {&rec.apo.superficial, &rec.apo.deep}) {
    draw.push_back(DrawLine{ox, oy + l->y_at(0.0), ox + x_end, oy + l->y_at(x_end), colors::green, 2});
  }
  for (const auto& r : rec.rois) draw.push_back(DrawRect{compose(rec.fov, r), colors::yellow, 1});

  const Point p = rec.result.fascicle_start;
  const Point q = rec.result.fascicle_end;
  if (!rec.result.extrapolated) {
    draw.push_back(DrawLine{ox + p.x, oy + p.y, ox + q.x, oy + q.y, colors::red, 2});
  } else {
    // Solid inside the field of view, dashed along the extrapolated part.
    const double xb = std::clamp(q.x, 0.0, x_end);
    const double yb = rec.result.fascicle_line.y_at(xb);
    draw.push_back(DrawLine{ox + p.x, oy + p.y, ox + xb, oy + yb, colors::red, 2});
    draw.push_back(DrawLine{ox + xb, oy + yb, ox + q.x, oy + q.y, colors::red, 2, true});
  }

  const auto& r = rec.result;
  auto with_mm = [](double px, const std::optional<double>& mm) {
    std::string s = format_number(px) + " px";
    if (mm) s += " (" + format_number(*mm) + " mm)";
    return s;
  };
  const int tx = static_cast<int>(ox) + 8;
  int ty = static_cast<int>(oy) + 18;
  draw.push_back(DrawText{tx, ty, "pennation " + format_number(r.pennation_deg) + " deg", colors::white});
  ty += 16;
  draw.push_back(DrawText{tx, ty, "fascicle " + with_mm(r.fascicle_len_px, r.fascicle_len_mm) +
                                      (r.extrapolated ? " extrapolated" : ""),
                          colors::white});
  ty += 16;
  draw.push_back(DrawText{tx, ty, "thickness " + with_mm(r.thickness_px, r.thickness_mm), colors::white});
  return draw;
}

inline constexpr const char* kResultsHeader =
    "image_id,status,pennation_deg,fascicle_len_px,fascicle_len_mm,thickness_px,thickness_mm,"
    "extrapolated,apo_sup_deg,apo_deep_deg,roi_angles,elapsed_ms";

inline std::string status_of(const AnalysisRecord& r) {
  return r.ok ? "ok" : "failed(" + r.failed_stage + ")";
}

inline std::string results_row(const AnalysisRecord& r) {
  std::ostringstream os;
  os << r.image_id << ',' << status_of(r) << ',';
  if (!r.ok) {
    os << ",,,,,,,,," << format_number(r.elapsed_ms);
    return os.str();
  }
  const auto& a = r.result;
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; };
  os << format_number(a.pennation_deg) << ',' << format_number(a.fascicle_len_px) << ','
     << opt(a.fascicle_len_mm) << ',' << format_number(a.thickness_px) << ','
     << opt(a.thickness_mm) << ',' << (a.extrapolated ? "true" : "false") << ','
     << format_number(r.apo.superficial_angle) << ',' << format_number(r.apo.deep_angle) << ',';
  for (std::size_t i = 0; i < r.roi_angles.size(); ++i) {
    if (i) os << ';';
    os << format_number(r.roi_angles[i]);
  }
  os << ',' << format_number(r.elapsed_ms);
  return os.str();
}

struct ColumnValue {
  std::string image_id;
  double value = 0.0;
};

/// Values of one numeric column of a results table, in file order. Comment
/// lines and rows with an empty cell in that column (failed images,
/// unscaled mm columns) are skipped.
inline std::vector<ColumnValue> read_results_column(const std::filesystem::path& path,
                                                    const std::string& column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) {
    throw Error(ErrorKind::parameter, "column '" + column + "' not in " + path.string());
  }
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<ColumnValue> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split(line);
    if (col >= cells.size() || cells[col].empty()) continue;
    try {
      out.push_back({cells[0], std::stod(cells[col])});
    } catch (const std::exception&) {
      throw Error(ErrorKind::format, "non-numeric " + column + " value '" + cells[col] + "' in " +
                                         path.string());
    }
  }
  return out;
}

/// Pairs two result tables on image_id, in the order of the first.
inline std::vector<std::pair<double, double>> pair_by_image(const std::vector<ColumnValue>& a,
                                                            const std::vector<ColumnValue>& b) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& x : a) {
    const auto m = std::find_if(b.begin(), b.end(), [&](const auto& y) { return y.image_id == x.image_id; });
    if (m != b.end()) pairs.emplace_back(x.value, m->value);
  }
  return pairs;
}

}  // namespace sma
