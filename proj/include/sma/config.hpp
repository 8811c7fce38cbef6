#pragma once

// JSON form of AnalysisConfig and the flattened key=value parameter dump.
// Every field is optional in the input; missing keys keep their defaults.

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sma/pipeline.hpp"

namespace sma {

using json = nlohmann::json;

namespace detail {

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) out.reset();
  else out = j.at(key).get<T>();
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline json to_json(const FilterParams& p) {
  return {{"nlm_h", p.nlm_h},           {"nlm_patch", p.nlm_patch},
          {"nlm_search", p.nlm_search}, {"median_radius", p.median_radius},
          {"clahe_tile", p.clahe_tile}, {"clahe_clip", p.clahe_clip}};
}

inline void from_json(const json& j, FilterParams& p) {
  detail::read_if(j, "nlm_h", p.nlm_h);
  detail::read_if(j, "nlm_patch", p.nlm_patch);
  detail::read_if(j, "nlm_search", p.nlm_search);
  detail::read_if(j, "median_radius", p.median_radius);
  detail::read_if(j, "clahe_tile", p.clahe_tile);
  detail::read_if(j, "clahe_clip", p.clahe_clip);
}

inline std::string spectrum_to_string(const SpectrumThreshold& s) {
  if (std::holds_alternative<AutoThreshold>(s)) return "auto";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::get<ManualThreshold>(s).percentile);
  return buf;
}

/// "auto" or a percentile in [0, 100].
inline SpectrumThreshold spectrum_from_string(const std::string& s, double k = 2.0) {
  if (s == "auto") return AutoThreshold{k};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v >= 0.0 && v <= 100.0)) {
    throw Error(ErrorKind::parameter, "spectrum must be 'auto' or a percentile in [0,100], got '" + s + "'");
  }
  return ManualThreshold{v};
}

inline json to_json(const AnalysisConfig& c) {
  json crop;
  switch (c.crop.mode) {
    case CropMode::automatic: crop = "auto"; break;
    case CropMode::none: crop = "none"; break;
    case CropMode::manual: crop = {c.crop.rect.x, c.crop.rect.y, c.crop.rect.w, c.crop.rect.h}; break;
  }
  const auto* autok = std::get_if<AutoThreshold>(&c.orient.spectrum);
  return {
      {"flip", c.flip},
      {"crop", crop},
      {"fov",
       {{"box_size", c.fov.box_size},
        {"median_radius", c.fov.median_radius},
        {"threshold_window", c.fov.threshold_window},
        {"close_radius", c.fov.close_radius},
        {"shrink", c.fov.shrink},
        {"min_area_fraction", c.fov.min_area_fraction}}},
      {"apo",
       {{"tube_sigma", c.apo.tube_sigma},
        {"canny_sigma", c.apo.canny_sigma},
        {"canny_low", c.apo.canny_low},
        {"canny_high", c.apo.canny_high},
        {"wedge_center", c.apo.wedge_center},
        {"wedge_half_width", c.apo.wedge_half_width},
        {"horizontal_keep", c.apo.horizontal_keep},
        {"spectrum_k", c.apo.spectrum_k},
        {"min_separation", c.apo.min_separation},
        {"min_span", c.apo.min_span},
        {"max_fit_rms", c.apo.max_fit_rms},
        {"pad_sigmas", c.apo.pad_sigmas},
        {"filters", to_json(c.apo.filters)}}},
      {"orient",
       {{"n_rois", c.orient.n_rois},
        {"roi_width_pct", c.orient.roi_width_pct},
        {"roi_height_pct", c.orient.roi_height_pct},
        {"spectrum", spectrum_to_string(c.orient.spectrum)},
        {"spectrum_k", autok ? autok->k : AutoThreshold{}.k},
        {"log_sigma", c.orient.log_sigma},
        {"window_sigma", c.orient.window_sigma},
        {"gradient", to_string(c.orient.gradient)},
        {"aggregation", to_string(c.orient.aggregation)},
        {"anchor", to_string(c.orient.anchor)},
        {"guard_px", c.orient.guard_px},
        {"min_gap_px", c.orient.min_gap_px},
        {"low_coherence", c.orient.low_coherence},
        {"filters", to_json(c.orient.filters)}}},
      {"geometry",
       {{"anchor_fraction", c.geometry.anchor_fraction},
        {"thickness_mode", to_string(c.geometry.thickness_mode)},
        {"thickness_samples", c.geometry.thickness_samples}}},
      {"scale",
       {{"mm_per_px", detail::opt_json(c.scale.mm_per_px)},
        {"scale_bar_px", detail::opt_json(c.scale.bar_px)},
        {"scale_bar_mm", detail::opt_json(c.scale.bar_mm)},
        {"depth_mm", detail::opt_json(c.scale.depth_mm)}}},
      {"print_params", c.print_params},
      {"input", c.input},
      {"batch", c.batch},
      {"ext", c.ext},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
  };
}

inline CropSpec crop_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "auto") return {CropMode::automatic, {}};
    if (s == "none") return {CropMode::none, {}};
    throw Error(ErrorKind::parameter, "crop must be \"auto\", \"none\" or [x, y, w, h]");
  }
  if (j.is_array() && j.size() == 4) {
    const RectRegion r{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
    if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1) {
      throw Error(ErrorKind::parameter, "crop rectangle needs x, y >= 0 and w, h >= 1");
    }
    return {CropMode::manual, r};
  }
  throw Error(ErrorKind::parameter, "crop must be \"auto\", \"none\" or [x, y, w, h]");
}

/// Overlays the keys present in `j` onto `base`.
inline AnalysisConfig config_from_json(const json& j, AnalysisConfig c = {}) {
  try {
    detail::read_if(j, "flip", c.flip);
    if (j.contains("crop")) c.crop = crop_from_json(j.at("crop"));
    if (j.contains("fov")) {
      const auto& f = j.at("fov");
      detail::read_if(f, "box_size", c.fov.box_size);
      detail::read_if(f, "median_radius", c.fov.median_radius);
      detail::read_if(f, "threshold_window", c.fov.threshold_window);
      detail::read_if(f, "close_radius", c.fov.close_radius);
      detail::read_if(f, "shrink", c.fov.shrink);
      detail::read_if(f, "min_area_fraction", c.fov.min_area_fraction);
    }
    if (j.contains("apo")) {
      const auto& a = j.at("apo");
      detail::read_if(a, "tube_sigma", c.apo.tube_sigma);
      detail::read_if(a, "canny_sigma", c.apo.canny_sigma);
      detail::read_if(a, "canny_low", c.apo.canny_low);
      detail::read_if(a, "canny_high", c.apo.canny_high);
      detail::read_if(a, "wedge_center", c.apo.wedge_center);
      detail::read_if(a, "wedge_half_width", c.apo.wedge_half_width);
      detail::read_if(a, "horizontal_keep", c.apo.horizontal_keep);
      detail::read_if(a, "spectrum_k", c.apo.spectrum_k);
      detail::read_if(a, "min_separation", c.apo.min_separation);
      detail::read_if(a, "min_span", c.apo.min_span);
      detail::read_if(a, "max_fit_rms", c.apo.max_fit_rms);
      detail::read_if(a, "pad_sigmas", c.apo.pad_sigmas);
      if (a.contains("filters")) from_json(a.at("filters"), c.apo.filters);
    }
    if (j.contains("orient")) {
      const auto& o = j.at("orient");
      detail::read_if(o, "n_rois", c.orient.n_rois);
      detail::read_if(o, "roi_width_pct", c.orient.roi_width_pct);
      detail::read_if(o, "roi_height_pct", c.orient.roi_height_pct);
      double k = AutoThreshold{}.k;
      if (const auto* a = std::get_if<AutoThreshold>(&c.orient.spectrum)) k = a->k;
      detail::read_if(o, "spectrum_k", k);
      std::string spectrum = spectrum_to_string(c.orient.spectrum);
      detail::read_if(o, "spectrum", spectrum);
      c.orient.spectrum = spectrum_from_string(spectrum, k);
      detail::read_if(o, "log_sigma", c.orient.log_sigma);
      detail::read_if(o, "window_sigma", c.orient.window_sigma);
      if (o.contains("gradient")) c.orient.gradient = gradient_from_string(o.at("gradient").get<std::string>());
      if (o.contains("aggregation")) {
        c.orient.aggregation = aggregation_from_string(o.at("aggregation").get<std::string>());
      }
      if (o.contains("anchor")) {
        const auto s = o.at("anchor").get<std::string>();
        if (s == "deep") c.orient.anchor = RoiAnchor::deep;
        else if (s == "centered") c.orient.anchor = RoiAnchor::centered;
        else throw Error(ErrorKind::parameter, "ROI anchor must be deep or centered");
      }
      detail::read_if(o, "guard_px", c.orient.guard_px);
      detail::read_if(o, "min_gap_px", c.orient.min_gap_px);
      detail::read_if(o, "low_coherence", c.orient.low_coherence);
      if (o.contains("filters")) from_json(o.at("filters"), c.orient.filters);
    }
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      detail::read_if(g, "anchor_fraction", c.geometry.anchor_fraction);
      if (g.contains("thickness_mode")) {
        const auto s = g.at("thickness_mode").get<std::string>();
        if (s == "perpendicular") c.geometry.thickness_mode = ThicknessMode::perpendicular;
        else if (s == "vertical") c.geometry.thickness_mode = ThicknessMode::vertical;
        else throw Error(ErrorKind::parameter, "thickness_mode must be perpendicular or vertical");
      }
      detail::read_if(g, "thickness_samples", c.geometry.thickness_samples);
    }
    if (j.contains("scale")) {
      const auto& s = j.at("scale");
      detail::read_opt(s, "mm_per_px", c.scale.mm_per_px);
      detail::read_opt(s, "scale_bar_px", c.scale.bar_px);
      detail::read_opt(s, "scale_bar_mm", c.scale.bar_mm);
      detail::read_opt(s, "depth_mm", c.scale.depth_mm);
    }
    detail::read_if(j, "print_params", c.print_params);
    detail::read_if(j, "input", c.input);
    detail::read_if(j, "batch", c.batch);
    detail::read_if(j, "ext", c.ext);
    detail::read_if(j, "output_dir", c.output_dir);
    detail::read_if(j, "workers", c.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parameter, std::string("config: ") + e.what());
  }
  return c;
}

inline AnalysisConfig load_config(const std::filesystem::path& path, AnalysisConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parameter, "config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::parameter, "config must be a JSON object");
  return config_from_json(j, std::move(base));
}

namespace detail {

inline void flatten(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  std::string value;
  if (j.is_string()) value = j.get<std::string>();
  else if (j.is_null()) value = "";
  else value = j.dump();
  out.push_back(prefix + "=" + value);
}

}  // namespace detail

/// One "key=value" line per leaf field, dotted paths for nested sections.
inline std::vector<std::string> parameter_lines(const AnalysisConfig& c) {
  std::vector<std::string> out;
  detail::flatten(to_json(c), "", out);
  return out;
}

/// results.csv: header, one row per record, and the parameter block when
/// `print_params` is set.
inline void write_results(const std::vector<AnalysisRecord>& records, const AnalysisConfig& cfg,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << kResultsHeader << '\n';
  for (const auto& r : records) out << results_row(r) << '\n';
  if (cfg.print_params) {
    for (const auto& line : parameter_lines(cfg)) out << "# " << line << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

}  // namespace sma
