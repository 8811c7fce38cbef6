// sma: muscle architecture from B-mode ultrasound images.
//
//   sma analyze <path> [options]      pennation, fascicle length, thickness
//   sma phantom --spec FILE --n N     synthetic scans with ground truth
//   sma agree a.csv b.csv --column X  Bland-Altman agreement of two tables

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "sma/sma.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSomeFailed = 2;
constexpr int kExitInput = 3;

struct AnalyzeArgs {
  std::string path;
  bool batch = false;
  std::string ext;
  bool flip = false;
  std::string crop;
  std::optional<double> tube_sigma;
  std::optional<int> rois;
  std::optional<double> roi_width;
  std::optional<double> roi_height;
  std::string spectrum;
  std::optional<double> log_sigma;
  std::string aggregate;
  std::optional<double> mm_per_px;
  std::optional<double> bar_px;
  std::optional<double> bar_mm;
  std::optional<double> depth_mm;
  std::string out;
  bool print_params = false;
  std::string config;
  std::string preset;
  std::optional<int> workers;
};

sma::CropSpec parse_crop(const std::string& s) {
  if (s == "auto") return {sma::CropMode::automatic, {}};
  if (s == "none") return {sma::CropMode::none, {}};
  std::vector<int> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(part, &used));
      if (used != part.size()) v.clear();
    } catch (const std::exception&) {
      v.clear();
      break;
    }
  }
  if (v.size() != 4 || v[0] < 0 || v[1] < 0 || v[2] < 1 || v[3] < 1) {
    throw sma::Error(sma::ErrorKind::parameter, "--crop expects x,y,w,h (or auto, none), got '" + s + "'");
  }
  return {sma::CropMode::manual, {v[0], v[1], v[2], v[3]}};
}

sma::AnalysisConfig build_config(const AnalyzeArgs& a) {
  sma::AnalysisConfig c;
  if (!a.preset.empty()) {
    if (a.preset != "sample-c") throw sma::Error(sma::ErrorKind::parameter, "unknown preset '" + a.preset + "'");
    c = sma::preset_sample_c(c);
  }
  if (!a.config.empty()) c = sma::load_config(a.config, c);
  c.input = a.path;
  if (a.batch) c.batch = true;
  if (!a.ext.empty()) c.ext = a.ext;
  if (a.flip) c.flip = true;
  if (!a.crop.empty()) c.crop = parse_crop(a.crop);
  if (a.tube_sigma) c.apo.tube_sigma = *a.tube_sigma;
  if (a.rois) c.orient.n_rois = *a.rois;
  if (a.roi_width) c.orient.roi_width_pct = *a.roi_width;
  if (a.roi_height) c.orient.roi_height_pct = *a.roi_height;
  if (!a.spectrum.empty()) c.orient.spectrum = sma::spectrum_from_string(a.spectrum);
  if (a.log_sigma) c.orient.log_sigma = *a.log_sigma;
  if (!a.aggregate.empty()) c.orient.aggregation = sma::aggregation_from_string(a.aggregate);
  if (a.mm_per_px) {
    c.scale.mm_per_px = a.mm_per_px;
    c.scale.bar_px.reset();
    c.scale.bar_mm.reset();
  }
  if (a.bar_px) c.scale.bar_px = a.bar_px;
  if (a.bar_mm) c.scale.bar_mm = a.bar_mm;
  if (a.depth_mm) c.scale.depth_mm = a.depth_mm;
  if (!a.out.empty()) c.output_dir = a.out;
  if (a.print_params) c.print_params = true;
  if (a.workers) c.workers = *a.workers;
  sma::validate(c);
  return c;
}

void write_overlay(const fs::path& image_path, const sma::AnalysisRecord& rec,
                   const sma::AnalysisConfig& cfg) {
  if (rec.failed_stage == "decode") return;
  sma::GrayImage img = sma::decode_image(image_path);
  if (cfg.flip) img = sma::flip_horizontal(img);
  sma::encode_image(img, fs::path(cfg.output_dir) / (rec.image_id + "_overlay.png"),
                    sma::render_overlay(rec));
}

int run_analyze(const AnalyzeArgs& args) {
  const sma::AnalysisConfig cfg = build_config(args);
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (!fs::is_directory(cfg.output_dir)) {
    throw sma::Error(sma::ErrorKind::io, "cannot create output directory " + cfg.output_dir);
  }

  std::vector<fs::path> files;
  std::vector<sma::AnalysisRecord> records;
  if (cfg.batch) {
    files = sma::list_images(cfg.input, cfg.ext);
    records = sma::analyze_folder(cfg.input, cfg);
  } else {
    if (!fs::is_regular_file(cfg.input)) {
      throw sma::Error(sma::ErrorKind::input, "not a file: " + cfg.input + " (use --batch --ext for folders)");
    }
    files = {cfg.input};
    records = {sma::analyze_file(cfg.input, cfg)};
  }

  bool all_ok = true;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    all_ok = all_ok && r.ok;
    try {
      write_overlay(files[i], r, cfg);
    } catch (const sma::Error& e) {
      std::cerr << "warning: overlay for " << r.image_id << ": " << e.what() << '\n';
    }
    if (r.ok) {
      std::printf("%s: pennation %.2f deg, fascicle %.1f px, thickness %.1f px%s\n", r.image_id.c_str(),
                  r.result.pennation_deg, r.result.fascicle_len_px, r.result.thickness_px,
                  r.result.extrapolated ? " (extrapolated)" : "");
    } else {
      std::printf("%s: failed(%s): %s\n", r.image_id.c_str(), r.failed_stage.c_str(), r.reason.c_str());
    }
  }
  sma::write_results(records, cfg, fs::path(cfg.output_dir) / "results.csv");
  return all_ok ? kExitOk : kExitSomeFailed;
}

sma::PhantomSpec load_phantom_spec(const std::string& path) {
  sma::PhantomSpec s;
  if (path.empty()) return s;
  std::ifstream in(path);
  if (!in) throw sma::Error(sma::ErrorKind::io, "cannot open phantom spec " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    auto get = [&](const char* k, auto& v) {
      if (j.contains(k)) v = j.at(k).get<std::decay_t<decltype(v)>>();
    };
    get("width", s.width);
    get("height", s.height);
    get("sup_angle", s.sup_angle);
    get("deep_angle", s.deep_angle);
    get("gap_at_right", s.gap_at_right);
    get("band_thickness", s.band_thickness);
    get("fascicle_angle", s.fascicle_angle);
    get("fascicle_spacing", s.fascicle_spacing);
    get("fascicle_contrast", s.fascicle_contrast);
    get("speckle_sigma", s.speckle_sigma);
    get("psf_sigma", s.psf_sigma);
    get("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw sma::Error(sma::ErrorKind::parameter, "phantom spec " + path + ": " + e.what());
  }
  return s;
}

int run_phantom(const std::string& spec_path, int n, const std::string& out_dir,
                std::optional<double> mm_per_px) {
  if (n < 1) throw sma::Error(sma::ErrorKind::parameter, "--n must be >= 1");
  const sma::PhantomSpec base = load_phantom_spec(spec_path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw sma::Error(sma::ErrorKind::io, "cannot create " + out_dir);
  std::vector<sma::AnalysisRecord> truth;
  for (int i = 0; i < n; ++i) {
    sma::PhantomSpec s = base;
    s.seed = base.seed + static_cast<std::uint64_t>(i);
    const sma::Phantom ph = sma::generate_phantom(s);
    char id[32];
    std::snprintf(id, sizeof id, "phantom_%03d", i);
    sma::encode_image(ph.image, fs::path(out_dir) / (std::string(id) + ".png"));
    sma::AnalysisRecord r;
    r.image_id = id;
    r.ok = true;
    r.result = ph.truth;
    if (mm_per_px) r.result = sma::apply_scale(r.result, sma::ScaleSpec::from_mm_per_px(*mm_per_px));
    r.apo = ph.lines;
    r.roi_angles = {s.fascicle_angle};
    truth.push_back(std::move(r));
  }
  sma::AnalysisConfig cfg;
  sma::write_results(truth, cfg, fs::path(out_dir) / "ground_truth.csv");
  std::printf("wrote %d phantoms to %s\n", n, out_dir.c_str());
  return kExitOk;
}

int run_agree(const std::string& a, const std::string& b, const std::string& column,
              const std::string& format) {
  const auto pairs = sma::pair_by_image(sma::read_results_column(a, column), sma::read_results_column(b, column));
  const sma::AgreementStats s = sma::bland_altman(pairs);
  if (format == "json") {
    const nlohmann::json j = {{"column", column},         {"n", s.n},
                              {"bias", s.bias},           {"sd_diff", s.sd_diff},
                              {"loa_low", s.loa_low},     {"loa_high", s.loa_high},
                              {"proportional_slope", s.proportional_slope}};
    std::cout << j.dump(2) << '\n';
  } else {
    std::printf("column,n,bias,sd_diff,loa_low,loa_high,proportional_slope\n");
    std::printf("%s,%zu,%.4f,%.4f,%.4f,%.4f,%.4f\n", column.c_str(), s.n, s.bias, s.sd_diff, s.loa_low,
                s.loa_high, s.proportional_slope);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Muscle architecture from B-mode ultrasound images"};
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Measure pennation, fascicle length and thickness");
  analyze->add_option("path", an.path, "Image file, or folder with --batch")->required();
  analyze->add_flag("--batch", an.batch, "Analyze every matching file in the folder");
  analyze->add_option("--ext", an.ext, "File extension for batch mode (e.g. png)");
  analyze->add_flag("--flip", an.flip, "Flip images horizontally first");
  analyze->add_option("--crop", an.crop, "Field of view x,y,w,h, or auto / none");
  analyze->add_option("--tube-sigma", an.tube_sigma, "Aponeurosis tubeness sigma (px)");
  analyze->add_option("--rois", an.rois, "Number of ROIs");
  analyze->add_option("--roi-width", an.roi_width, "ROI width, % of FoV width");
  analyze->add_option("--roi-height", an.roi_height, "ROI height, % of aponeurosis gap");
  analyze->add_option("--spectrum", an.spectrum, "ROI spectrum threshold: auto or a percentile");
  analyze->add_option("--log-sigma", an.log_sigma, "Fascicle tubeness sigma (px)");
  analyze->add_option("--aggregate", an.aggregate, "ROI angle aggregation: max, mean, median");
  analyze->add_option("--mm-per-px", an.mm_per_px, "Pixel size in mm");
  analyze->add_option("--scale-bar-px", an.bar_px, "Scale bar length in px");
  analyze->add_option("--scale-bar-mm", an.bar_mm, "Scale bar length in mm");
  analyze->add_option("--depth-mm", an.depth_mm, "Scanning depth in mm (recorded only)");
  analyze->add_option("--out", an.out, "Output directory");
  analyze->add_flag("--print-params", an.print_params, "Append all parameters to results.csv");
  analyze->add_option("--config", an.config, "JSON configuration file");
  analyze->add_option("--preset", an.preset, "Built-in parameter set (sample-c)");
  analyze->add_option("--workers", an.workers, "Worker threads for batch mode");

  std::string spec_path, phantom_out = ".";
  int phantom_n = 1;
  std::optional<double> phantom_scale;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic scans with ground truth");
  phantom->add_option("--spec", spec_path, "JSON phantom specification");
  phantom->add_option("--n", phantom_n, "Number of phantoms (seeds spec.seed + i)");
  phantom->add_option("--out", phantom_out, "Output directory");
  phantom->add_option("--mm-per-px", phantom_scale, "Fill the mm columns of ground_truth.csv");

  std::string agree_a, agree_b, agree_column, agree_format = "csv";
  auto* agree = app.add_subcommand("agree", "Bland-Altman agreement between two result tables");
  agree->add_option("a", agree_a, "First results CSV")->required();
  agree->add_option("b", agree_b, "Second results CSV")->required();
  agree->add_option("--column", agree_column, "Column to compare")->required();
  agree->add_option("--format", agree_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*analyze) return run_analyze(an);
    if (*phantom) return run_phantom(spec_path, phantom_n, phantom_out, phantom_scale);
    if (*agree) return run_agree(agree_a, agree_b, agree_column, agree_format);
  } catch (const sma::Error& e) {
    std::cerr << "error (" << sma::to_string(e.kind()) << "): " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
