#include "rissense/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

namespace rissense::config {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

void check_grid_membership(const std::vector<double>& values, const std::set<double>& allowed,
                           const std::string& what) {
  for (const double v : values)
    if (!allowed.count(v))
      throw ConfigError(what + " value " + std::to_string(v) + " outside the supported grid");
}

void validate(const RunConfig& cfg) {
  const auto& g = cfg.generation.grid;
  if (g.n_train <= 0 || g.n_test <= 0) throw ConfigError("n_train and n_test must be positive");
  if (g.capture_rate_hz <= 0 || g.capture_duration_s <= 0)
    throw ConfigError("capture rate and duration must be positive");
  if (g.lte_bandwidths_hz.empty() || g.nr_bandwidths_hz.empty() || g.nr_scs_hz.empty() ||
      g.snr_grid_db.empty() || g.doppler_grid_hz.empty())
    throw ConfigError("parameter grids must be non-empty");
  if (cfg.generation.scenarios.empty()) throw ConfigError("scenario list must be non-empty");

  check_grid_membership(g.lte_bandwidths_hz, {5e6, 10e6, 15e6, 20e6}, "LTE bandwidth");
  check_grid_membership(g.nr_bandwidths_hz, {10e6, 15e6, 20e6, 25e6, 30e6, 40e6, 50e6},
                        "NR bandwidth");
  check_grid_membership(g.nr_scs_hz, {15e3, 30e3}, "NR subcarrier spacing");

  for (const double snr : g.snr_grid_db)
    if (!std::isfinite(snr)) throw ConfigError("non-finite SNR");
  for (const double d : g.doppler_grid_hz)
    if (d < 0 || !std::isfinite(d)) throw ConfigError("Doppler must be finite and >= 0");

  // every configured SCS must divide the capture rate exactly
  for (const double scs : {15e3, 30e3}) {
    const double q = g.capture_rate_hz / scs;
    if (std::abs(q - std::round(q)) > 1e-6)
      throw ConfigError("capture_rate_hz is not an integer multiple of " + std::to_string(scs));
  }
  for (const double bw : g.lte_bandwidths_hz)
    if (bw > g.capture_rate_hz) throw ConfigError("LTE bandwidth exceeds capture rate");
  for (const double bw : g.nr_bandwidths_hz)
    if (bw > g.capture_rate_hz) throw ConfigError("NR bandwidth exceeds capture rate");

  if (cfg.generation.channel.n_elements < 0) throw ConfigError("n_elements must be >= 0");
  if (cfg.generation.channel.rician_k < 0) throw ConfigError("rician_k must be >= 0");
  if (cfg.generation.ris_alpha <= 0 || cfg.generation.ris_alpha > 1)
    throw ConfigError("alpha outside (0,1]");
  if (cfg.generation.ris_iterations < 0) throw ConfigError("ris_iterations must be >= 0");

  const auto& st = cfg.generation.stft;
  if (st.window_len <= 0 || st.fft_size <= 0 || st.window_len > st.fft_size)
    throw ConfigError("invalid stft geometry");
  if (st.overlap_ratio < 0 || st.overlap_ratio >= 1) throw ConfigError("overlap_ratio outside [0,1)");
  const double min_samples = g.capture_rate_hz * g.capture_duration_s;
  if (min_samples < st.window_len) throw ConfigError("capture shorter than one STFT window");

  if (cfg.generation.db_range.floor_db >= cfg.generation.db_range.ceil_db)
    throw ConfigError("image db_floor must lie below db_ceil");

  if (cfg.detector.threshold_offset_db <= 0) throw ConfigError("threshold_offset_db must be > 0");
  if (cfg.detector.morphology_kernel_px % 2 == 0 || cfg.detector.morphology_kernel_px <= 0)
    throw ConfigError("morphology kernel must be odd and positive");
  if (cfg.detector.min_box_area_px < 0) throw ConfigError("min_box_area_px must be >= 0");
  if (cfg.detector.occupancy_split <= 0 || cfg.detector.occupancy_split >= 1)
    throw ConfigError("occupancy_split outside (0,1)");

  if (cfg.match.iou_thresholds.empty()) throw ConfigError("empty IoU threshold list");
  double prev = 0.0;
  for (const double t : cfg.match.iou_thresholds) {
    if (t <= prev || t > 1.0) throw ConfigError("IoU thresholds must be strictly increasing in (0,1]");
    prev = t;
  }

  if (cfg.ris_study_trials <= 0) throw ConfigError("ris_study trials must be positive");
  if (cfg.ris_study_exhaustive && cfg.generation.channel.n_elements > 16)
    throw ConfigError("exhaustive ris_study limited to n_elements <= 16");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  require_keys(j, "config root",
               {"schema_version", "output_root", "jobs", "ris_pipeline", "save_iq", "save_spectra",
                "scenario", "channel", "stft", "image", "detector", "eval", "ris_study",
                "unoccupied_min_width_hz"});
  if (get_or<int>(j, "schema_version", 0) != 1)
    throw ConfigError("schema_version must be present and equal to 1");

  RunConfig cfg;
  cfg.generation.output_root = get_or<std::string>(j, "output_root", "out");
  cfg.generation.jobs = get_or<int>(j, "jobs", 1);
  cfg.generation.pipeline =
      dataset::pipeline_from_string(get_or<std::string>(j, "ris_pipeline", "off"));
  cfg.generation.save_iq = get_or<bool>(j, "save_iq", false);
  cfg.generation.save_spectra = get_or<bool>(j, "save_spectra", false);
  cfg.generation.unoccupied_min_width_hz = get_or<double>(j, "unoccupied_min_width_hz", 1e6);

  if (j.contains("scenario")) {
    const json& s = j.at("scenario");
    require_keys(s, "scenario",
                 {"scenarios", "lte_bandwidths_hz", "nr_bandwidths_hz", "nr_scs_hz", "snr_grid_db",
                  "doppler_grid_hz", "n_train", "n_test", "capture_rate_hz", "capture_duration_s",
                  "master_seed", "time_span"});
    auto& g = cfg.generation.grid;
    if (s.contains("scenarios")) {
      cfg.generation.scenarios.clear();
      for (const auto& name : s.at("scenarios"))
        cfg.generation.scenarios.push_back(dataset::scenario_from_string(name.get<std::string>()));
    }
    g.lte_bandwidths_hz = get_or(s, "lte_bandwidths_hz", g.lte_bandwidths_hz);
    g.nr_bandwidths_hz = get_or(s, "nr_bandwidths_hz", g.nr_bandwidths_hz);
    g.nr_scs_hz = get_or(s, "nr_scs_hz", g.nr_scs_hz);
    g.snr_grid_db = get_or(s, "snr_grid_db", g.snr_grid_db);
    g.doppler_grid_hz = get_or(s, "doppler_grid_hz", g.doppler_grid_hz);
    g.n_train = get_or(s, "n_train", g.n_train);
    g.n_test = get_or(s, "n_test", g.n_test);
    g.capture_rate_hz = get_or(s, "capture_rate_hz", g.capture_rate_hz);
    g.capture_duration_s = get_or(s, "capture_duration_s", g.capture_duration_s);
    g.master_seed = get_or<std::uint64_t>(s, "master_seed", g.master_seed);
    const std::string span = get_or<std::string>(s, "time_span", "full");
    if (span == "full")
      g.time_span_mode = dataset::TimeSpanMode::Full;
    else if (span == "random_1ms")
      g.time_span_mode = dataset::TimeSpanMode::RandomSubframes;
    else
      throw ConfigError("time_span must be 'full' or 'random_1ms'");
  }

  if (j.contains("channel")) {
    const json& c = j.at("channel");
    require_keys(c, "channel",
                 {"n_elements", "rician_k", "direct_gain_db", "alpha", "ris_iterations"});
    cfg.generation.channel.n_elements = get_or(c, "n_elements", cfg.generation.channel.n_elements);
    cfg.generation.channel.rician_k = get_or(c, "rician_k", cfg.generation.channel.rician_k);
    cfg.generation.channel.direct_gain_db =
        get_or(c, "direct_gain_db", cfg.generation.channel.direct_gain_db);
    cfg.generation.ris_alpha = get_or(c, "alpha", cfg.generation.ris_alpha);
    cfg.generation.ris_iterations = get_or(c, "ris_iterations", cfg.generation.ris_iterations);
  }

  if (j.contains("stft")) {
    const json& s = j.at("stft");
    require_keys(s, "stft", {"window_len", "fft_size", "overlap_ratio", "window"});
    cfg.generation.stft.window_len = get_or(s, "window_len", cfg.generation.stft.window_len);
    cfg.generation.stft.fft_size = get_or(s, "fft_size", cfg.generation.stft.fft_size);
    cfg.generation.stft.overlap_ratio =
        get_or(s, "overlap_ratio", cfg.generation.stft.overlap_ratio);
    if (get_or<std::string>(s, "window", "hann") != "hann")
      throw ConfigError("only the hann window is supported");
  }

  if (j.contains("image")) {
    const json& i = j.at("image");
    require_keys(i, "image", {"db_floor", "db_ceil", "export_jpg"});
    cfg.generation.db_range.floor_db = get_or(i, "db_floor", cfg.generation.db_range.floor_db);
    cfg.generation.db_range.ceil_db = get_or(i, "db_ceil", cfg.generation.db_range.ceil_db);
    cfg.generation.export_jpg = get_or(i, "export_jpg", cfg.generation.export_jpg);
  }

  if (j.contains("detector")) {
    const json& d = j.at("detector");
    require_keys(d, "detector",
                 {"threshold_offset_db", "min_box_area_px", "morphology_kernel_px",
                  "occupancy_split"});
    cfg.detector.threshold_offset_db =
        get_or(d, "threshold_offset_db", cfg.detector.threshold_offset_db);
    cfg.detector.min_box_area_px = get_or(d, "min_box_area_px", cfg.detector.min_box_area_px);
    cfg.detector.morphology_kernel_px =
        get_or(d, "morphology_kernel_px", cfg.detector.morphology_kernel_px);
    cfg.detector.occupancy_split = get_or(d, "occupancy_split", cfg.detector.occupancy_split);
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    require_keys(e, "eval", {"iou_low", "iou_high", "iou_step"});
    cfg.match = eval::MatchConfig::range(get_or(e, "iou_low", 0.50), get_or(e, "iou_high", 0.95),
                                         get_or(e, "iou_step", 0.05));
  }

  if (j.contains("ris_study")) {
    const json& r = j.at("ris_study");
    require_keys(r, "ris_study", {"trials", "include_exhaustive"});
    cfg.ris_study_trials = get_or(r, "trials", cfg.ris_study_trials);
    cfg.ris_study_exhaustive = get_or(r, "include_exhaustive", cfg.ris_study_exhaustive);
  }

  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

void apply_overrides(RunConfig& cfg, const Overrides& ov) {
  if (const char* env = std::getenv("RISSENSE_OUT_ROOT"); env && *env)
    cfg.generation.output_root = env;
  if (ov.output_root) cfg.generation.output_root = *ov.output_root;
  if (ov.seed) cfg.generation.grid.master_seed = *ov.seed;
  if (ov.pipeline) cfg.generation.pipeline = *ov.pipeline;
  if (ov.jobs) cfg.generation.jobs = *ov.jobs;
  if (ov.save_iq) cfg.generation.save_iq = *ov.save_iq;
}

}  // namespace rissense::config
