#include "rissense/dataset.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "rissense/rng.hpp"

namespace rissense::dataset {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::LteOnly: return "lte";
    case Scenario::NrOnly: return "nr";
    case Scenario::Both: return "both";
  }
  return "?";
}

const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

const char* to_string(RisPipeline p) {
  switch (p) {
    case RisPipeline::Off: return "off";
    case RisPipeline::Optimized: return "optimized";
    case RisPipeline::Ideal: return "ideal";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "lte") return Scenario::LteOnly;
  if (s == "nr") return Scenario::NrOnly;
  if (s == "both") return Scenario::Both;
  throw ConfigError("unknown scenario '" + s + "'");
}

RisPipeline pipeline_from_string(const std::string& s) {
  if (s == "off") return RisPipeline::Off;
  if (s == "optimized") return RisPipeline::Optimized;
  if (s == "ideal") return RisPipeline::Ideal;
  throw ConfigError("unknown ris pipeline '" + s + "'");
}

namespace {

// stream tags for per-capture seed derivation
enum : std::uint64_t {
  kStreamParams = 1,
  kStreamPayloadLte = 2,
  kStreamPayloadNr = 3,
  kStreamChannel = 4,
  kStreamNoise = 5,
};

std::uint64_t scenario_tag(Scenario s) { return 0x5343454eULL + std::uint64_t(s); }

// uniform draw on the offset raster such that the allocation fits the band
double sample_offset(Rng& rng, double bandwidth_hz, double capture_rate_hz) {
  const double half_range = (capture_rate_hz - bandwidth_hz) / 2.0;
  const auto steps = std::int64_t(std::floor(half_range / kOffsetRasterHz));
  const std::int64_t n = 2 * steps + 1;
  return double(std::int64_t(rng.below(std::uint64_t(n))) - steps) * kOffsetRasterHz;
}

// Uniform draw over all raster offset pairs whose occupied spans stay at
// least min_gap_hz apart. Rejection sampling is hopeless when the feasible
// set is a sliver of the grid (narrow captures), so the set is enumerated.
// Returns false if no placement exists for these bandwidths.
bool sample_offset_pair(Rng& rng, double bw_a, double bw_b, double min_gap_hz,
                        double capture_rate_hz, double& off_a, double& off_b) {
  const auto range_a = std::int64_t(std::floor((capture_rate_hz - bw_a) / 2.0 / kOffsetRasterHz));
  const auto range_b = std::int64_t(std::floor((capture_rate_hz - bw_b) / 2.0 / kOffsetRasterHz));
  const auto min_steps = std::int64_t(std::ceil(min_gap_hz / kOffsetRasterHz - 1e-9));

  auto count_b = [&](std::int64_t ka) {
    const std::int64_t lo_end = std::min(range_b, ka - min_steps);   // [-range_b, lo_end]
    const std::int64_t hi_begin = std::max(-range_b, ka + min_steps); // [hi_begin, range_b]
    std::int64_t c = 0;
    if (lo_end >= -range_b) c += lo_end + range_b + 1;
    if (hi_begin <= range_b) c += range_b - hi_begin + 1;
    return c;
  };

  std::uint64_t total = 0;
  for (std::int64_t ka = -range_a; ka <= range_a; ++ka) total += std::uint64_t(count_b(ka));
  if (total == 0) return false;

  std::uint64_t pick = rng.below(total);
  for (std::int64_t ka = -range_a; ka <= range_a; ++ka) {
    const auto c = std::uint64_t(count_b(ka));
    if (pick >= c) {
      pick -= c;
      continue;
    }
    const std::int64_t lo_end = std::min(range_b, ka - min_steps);
    std::int64_t kb;
    const std::uint64_t lo_count = lo_end >= -range_b ? std::uint64_t(lo_end + range_b + 1) : 0;
    if (pick < lo_count) {
      kb = -range_b + std::int64_t(pick);
    } else {
      kb = std::max(-range_b, ka + min_steps) + std::int64_t(pick - lo_count);
    }
    off_a = double(ka) * kOffsetRasterHz;
    off_b = double(kb) * kOffsetRasterHz;
    return true;
  }
  return false;  // unreachable
}

std::pair<double, double> sample_time_span(Rng& rng, const ScenarioConfig& cfg) {
  if (cfg.time_span_mode == TimeSpanMode::Full) return {0.0, cfg.capture_duration_s};
  // random sub-interval on a 1 ms grid, at least a quarter of the capture
  const int n_sf = std::max(1, int(std::llround(cfg.capture_duration_s / 1e-3)));
  const int min_len = std::max(1, n_sf / 4);
  const int len = min_len + int(rng.below(std::uint64_t(n_sf - min_len + 1)));
  const int start = int(rng.below(std::uint64_t(n_sf - len + 1)));
  return {start * 1e-3, (start + len) * 1e-3};
}

}  // namespace

CapturePlan sample_scenario(const ScenarioConfig& cfg, int index) {
  if (index < 0 || index >= cfg.n_train + cfg.n_test)
    throw SpecViolation("capture index out of range");

  CapturePlan plan;
  plan.scenario = cfg.scenario;
  plan.split = index < cfg.n_train ? Split::Train : Split::Test;
  const int split_index = index < cfg.n_train ? index : index - cfg.n_train;
  char id[64];
  std::snprintf(id, sizeof id, "%s_%s_%04d", to_string(cfg.scenario), to_string(plan.split),
                split_index);
  plan.capture_id = id;

  Rng rng(derive_seed(cfg.master_seed, scenario_tag(cfg.scenario), std::uint64_t(index),
                      kStreamParams));
  plan.snr_db = rng.pick(cfg.snr_grid_db);
  plan.doppler_hz = rng.pick(cfg.doppler_grid_hz);
  plan.channel_seed =
      derive_seed(cfg.master_seed, scenario_tag(cfg.scenario), std::uint64_t(index), kStreamChannel);
  plan.noise_seed =
      derive_seed(cfg.master_seed, scenario_tag(cfg.scenario), std::uint64_t(index), kStreamNoise);

  const bool want_lte = cfg.scenario != Scenario::NrOnly;
  const bool want_nr = cfg.scenario != Scenario::LteOnly;

  for (int attempt = 0;; ++attempt) {
    if (attempt >= kPlacementRetries)
      throw InfeasiblePlacement("no disjoint placement for " + plan.capture_id);

    std::vector<waveform::WaveformSpec> signals;
    if (want_lte) {
      waveform::WaveformSpec s;
      s.kind = SignalClass::Lte;
      s.bandwidth_hz = rng.pick(cfg.lte_bandwidths_hz);
      s.scs_hz = 15e3;
      s.occupancy_ratio = waveform::kLteOccupancy;
      signals.push_back(s);
    }
    if (want_nr) {
      waveform::WaveformSpec s;
      s.kind = SignalClass::Nr;
      s.bandwidth_hz = rng.pick(cfg.nr_bandwidths_hz);
      s.scs_hz = rng.pick(cfg.nr_scs_hz);
      s.occupancy_ratio = waveform::kNrOccupancy;
      signals.push_back(s);
    }

    // disjointness is enforced on the occupied spans (the ground-truth
    // boxes); the full allocations only need to fit the capture band
    const double guard = placement_guard_hz(cfg.capture_rate_hz);
    auto occupied_width = [](const waveform::WaveformSpec& s) {
      return 2.0 * std::floor(s.bandwidth_hz * s.occupancy_ratio / (2.0 * s.scs_hz)) * s.scs_hz;
    };
    bool fits = true;
    for (const auto& s : signals)
      if (s.bandwidth_hz > cfg.capture_rate_hz) fits = false;
    if (!fits) continue;

    if (signals.size() == 1) {
      signals[0].center_offset_hz =
          sample_offset(rng, signals[0].bandwidth_hz, cfg.capture_rate_hz);
    } else {
      // keep at least 5% of the band unoccupied so the detector's noise
      // floor quantile always has noise bins to land on
      double total_occ = 0.0;
      for (const auto& s : signals) total_occ += occupied_width(s);
      if (total_occ > 0.95 * cfg.capture_rate_hz) continue;
      const double min_gap =
          (occupied_width(signals[0]) + occupied_width(signals[1])) / 2.0 + guard;
      if (!sample_offset_pair(rng, signals[0].bandwidth_hz, signals[1].bandwidth_hz, min_gap,
                              cfg.capture_rate_hz, signals[0].center_offset_hz,
                              signals[1].center_offset_hz))
        continue;  // these bandwidths cannot coexist: redraw them
    }

    for (auto& s : signals) {
      std::tie(s.start_s, s.stop_s) = sample_time_span(rng, cfg);
      s.payload_seed = derive_seed(cfg.master_seed, scenario_tag(cfg.scenario), std::uint64_t(index),
                                   s.kind == SignalClass::Lte ? kStreamPayloadLte : kStreamPayloadNr);
    }
    plan.signals = std::move(signals);
    return plan;
  }
}

BuiltCapture build_capture(const CapturePlan& plan, const GenerationConfig& cfg) {
  BuiltCapture out;

  std::vector<waveform::IqFrame> frames;
  std::vector<GroundTruthBox> signal_boxes;
  for (const auto& spec : plan.signals) {
    waveform::Synthesis syn = waveform::synthesize(spec, cfg.grid.capture_rate_hz,
                                                   cfg.grid.capture_duration_s, spec.payload_seed);
    frames.push_back(std::move(syn.frame));
    signal_boxes.insert(signal_boxes.end(), syn.boxes.begin(), syn.boxes.end());
  }
  waveform::IqFrame x = waveform::combine(frames);

  out.gt_boxes = signal_boxes;
  const auto gaps = waveform::unoccupied_boxes(signal_boxes, cfg.grid.capture_rate_hz,
                                               cfg.grid.capture_duration_s,
                                               cfg.unoccupied_min_width_hz);
  out.gt_boxes.insert(out.gt_boxes.end(), gaps.begin(), gaps.end());

  switch (cfg.pipeline) {
    case RisPipeline::Ideal: {
      // no channel: unit gain, no fading, AWGN at the exact target SNR
      channel::ChannelRealization ch;
      ch.p = Complex(1.0, 0.0);
      out.received = channel::apply_channel(x, ch, channel::RisConfig::off(0, cfg.ris_alpha),
                                            channel::Hypothesis::H1, plan.snr_db, 0.0,
                                            plan.noise_seed);
      break;
    }
    case RisPipeline::Off:
    case RisPipeline::Optimized: {
      channel::ChannelModelParams cp = cfg.channel;
      cp.seed = plan.channel_seed;
      const channel::ChannelRealization ch = channel::sample_channel(cp);
      const channel::RisConfig off = channel::RisConfig::off(ch.n_elements(), cfg.ris_alpha);

      // noise is always calibrated against the off configuration, so the
      // optimized corpus keeps the same noise floor and shows the RIS gain
      const CVecD fading =
          plan.doppler_hz > 0.0
              ? channel::jakes_fading(x.samples.size(), x.sample_rate_hz, x.t0_s, plan.doppler_hz,
                                      derive_seed(plan.noise_seed, 0x464144))
              : CVecD();
      const Complex g_off = channel::effective_gain(ch, off);
      const double sigma2 = channel::calibrate_sigma2(x, g_off, fading, plan.snr_db);

      channel::RisConfig ris = off;
      if (cfg.pipeline == RisPipeline::Optimized) {
        ris = channel::optimize_ris_greedy(ch, off, cfg.ris_iterations).first;
        const Complex g_opt = channel::effective_gain(ch, ris);
        out.ris_gain_db = 10.0 * std::log10(std::max(std::norm(g_opt), 1e-300) /
                                            std::max(std::norm(g_off), 1e-300));
      }
      out.received = channel::apply_channel(x, ch, ris, channel::Hypothesis::H1,
                                            channel::NoiseSpec::fixed_sigma2(sigma2),
                                            plan.doppler_hz, plan.noise_seed);
      break;
    }
  }

  out.spec = spectrogram::stft(out.received, cfg.stft);
  return out;
}

namespace {

ordered_json spec_to_json(const waveform::WaveformSpec& s) {
  ordered_json j;
  j["kind"] = to_string(s.kind);
  j["bandwidth_hz"] = s.bandwidth_hz;
  j["scs_hz"] = s.scs_hz;
  j["center_offset_hz"] = s.center_offset_hz;
  j["occupancy_ratio"] = s.occupancy_ratio;
  j["cp_ratio"] = s.cp_ratio;
  j["start_s"] = s.start_s;
  j["stop_s"] = s.stop_s;
  j["payload_seed"] = s.payload_seed;
  return j;
}

waveform::WaveformSpec spec_from_json(const ordered_json& j) {
  waveform::WaveformSpec s;
  s.kind = signal_class_from_string(j.at("kind").get<std::string>());
  s.bandwidth_hz = j.at("bandwidth_hz").get<double>();
  s.scs_hz = j.at("scs_hz").get<double>();
  s.center_offset_hz = j.at("center_offset_hz").get<double>();
  s.occupancy_ratio = j.at("occupancy_ratio").get<double>();
  s.cp_ratio = j.at("cp_ratio").get<double>();
  s.start_s = j.at("start_s").get<double>();
  s.stop_s = j.at("stop_s").get<double>();
  s.payload_seed = j.at("payload_seed").get<std::uint64_t>();
  return s;
}

ordered_json config_to_json(const GenerationConfig& cfg) {
  ordered_json j;
  ordered_json grid;
  ordered_json scen = ordered_json::array();
  for (const Scenario s : cfg.scenarios) scen.push_back(to_string(s));
  grid["scenarios"] = scen;
  grid["lte_bandwidths_hz"] = cfg.grid.lte_bandwidths_hz;
  grid["nr_bandwidths_hz"] = cfg.grid.nr_bandwidths_hz;
  grid["nr_scs_hz"] = cfg.grid.nr_scs_hz;
  grid["snr_grid_db"] = cfg.grid.snr_grid_db;
  grid["doppler_grid_hz"] = cfg.grid.doppler_grid_hz;
  grid["n_train"] = cfg.grid.n_train;
  grid["n_test"] = cfg.grid.n_test;
  grid["capture_rate_hz"] = cfg.grid.capture_rate_hz;
  grid["capture_duration_s"] = cfg.grid.capture_duration_s;
  grid["master_seed"] = cfg.grid.master_seed;
  grid["time_span"] = cfg.grid.time_span_mode == TimeSpanMode::Full ? "full" : "random_1ms";
  j["scenario"] = grid;
  ordered_json ch;
  ch["n_elements"] = cfg.channel.n_elements;
  ch["rician_k"] = cfg.channel.rician_k;
  ch["direct_gain_db"] = cfg.channel.direct_gain_db;
  ch["alpha"] = cfg.ris_alpha;
  ch["ris_iterations"] = cfg.ris_iterations;
  j["channel"] = ch;
  ordered_json st;
  st["window_len"] = cfg.stft.window_len;
  st["fft_size"] = cfg.stft.fft_size;
  st["overlap_ratio"] = cfg.stft.overlap_ratio;
  st["window"] = "hann";
  j["stft"] = st;
  ordered_json im;
  im["db_floor"] = cfg.db_range.floor_db;
  im["db_ceil"] = cfg.db_range.ceil_db;
  im["export_jpg"] = cfg.export_jpg;
  j["image"] = im;
  j["ris_pipeline"] = to_string(cfg.pipeline);
  j["unoccupied_min_width_hz"] = cfg.unoccupied_min_width_hz;
  j["save_iq"] = cfg.save_iq;
  j["save_spectra"] = cfg.save_spectra;
  return j;
}

GenerationConfig config_from_json(const ordered_json& j) {
  GenerationConfig cfg;
  const auto& grid = j.at("scenario");
  cfg.scenarios.clear();
  for (const auto& s : grid.at("scenarios")) cfg.scenarios.push_back(scenario_from_string(s));
  cfg.grid.lte_bandwidths_hz = grid.at("lte_bandwidths_hz").get<std::vector<double>>();
  cfg.grid.nr_bandwidths_hz = grid.at("nr_bandwidths_hz").get<std::vector<double>>();
  cfg.grid.nr_scs_hz = grid.at("nr_scs_hz").get<std::vector<double>>();
  cfg.grid.snr_grid_db = grid.at("snr_grid_db").get<std::vector<double>>();
  cfg.grid.doppler_grid_hz = grid.at("doppler_grid_hz").get<std::vector<double>>();
  cfg.grid.n_train = grid.at("n_train").get<int>();
  cfg.grid.n_test = grid.at("n_test").get<int>();
  cfg.grid.capture_rate_hz = grid.at("capture_rate_hz").get<double>();
  cfg.grid.capture_duration_s = grid.at("capture_duration_s").get<double>();
  cfg.grid.master_seed = grid.at("master_seed").get<std::uint64_t>();
  cfg.grid.time_span_mode = grid.at("time_span").get<std::string>() == "full"
                                ? TimeSpanMode::Full
                                : TimeSpanMode::RandomSubframes;
  const auto& ch = j.at("channel");
  cfg.channel.n_elements = ch.at("n_elements").get<int>();
  cfg.channel.rician_k = ch.at("rician_k").get<double>();
  cfg.channel.direct_gain_db = ch.at("direct_gain_db").get<double>();
  cfg.ris_alpha = ch.at("alpha").get<double>();
  cfg.ris_iterations = ch.at("ris_iterations").get<int>();
  const auto& st = j.at("stft");
  cfg.stft.window_len = st.at("window_len").get<int>();
  cfg.stft.fft_size = st.at("fft_size").get<int>();
  cfg.stft.overlap_ratio = st.at("overlap_ratio").get<double>();
  const auto& im = j.at("image");
  cfg.db_range.floor_db = im.at("db_floor").get<double>();
  cfg.db_range.ceil_db = im.at("db_ceil").get<double>();
  cfg.export_jpg = im.at("export_jpg").get<bool>();
  cfg.pipeline = pipeline_from_string(j.at("ris_pipeline").get<std::string>());
  cfg.unoccupied_min_width_hz = j.at("unoccupied_min_width_hz").get<double>();
  cfg.save_iq = j.at("save_iq").get<bool>();
  cfg.save_spectra = j.at("save_spectra").get<bool>();
  return cfg;
}

ordered_json record_to_json(const CaptureRecord& r) {
  ordered_json j;
  j["capture_id"] = r.plan.capture_id;
  j["scenario"] = to_string(r.plan.scenario);
  j["split"] = to_string(r.plan.split);
  ordered_json sig = ordered_json::array();
  for (const auto& s : r.plan.signals) sig.push_back(spec_to_json(s));
  j["signals"] = sig;
  j["snr_db"] = r.plan.snr_db;
  j["doppler_hz"] = r.plan.doppler_hz;
  j["channel_seed"] = r.plan.channel_seed;
  j["noise_seed"] = r.plan.noise_seed;
  j["ris_mode"] = to_string(r.ris_mode);
  j["ris_gain_db"] = r.ris_gain_db;
  j["image_path"] = r.image_path;
  j["iq_path"] = r.iq_path;
  j["spectrum_path"] = r.spectrum_path;
  ordered_json boxes = ordered_json::array();
  for (const auto& b : r.boxes) {
    ordered_json e;
    e["class"] = to_string(b.physical.cls);
    e["t0_s"] = b.physical.t0_s;
    e["t1_s"] = b.physical.t1_s;
    e["f0_hz"] = b.physical.f0_hz;
    e["f1_hz"] = b.physical.f1_hz;
    e["pixel"] = {b.pixel.x0, b.pixel.y0, b.pixel.x1, b.pixel.y1};
    boxes.push_back(e);
  }
  j["boxes"] = boxes;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

CaptureRecord record_from_json(const ordered_json& j) {
  CaptureRecord r;
  r.plan.capture_id = j.at("capture_id").get<std::string>();
  r.plan.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  r.plan.split = j.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
  for (const auto& s : j.at("signals")) r.plan.signals.push_back(spec_from_json(s));
  r.plan.snr_db = j.at("snr_db").get<double>();
  r.plan.doppler_hz = j.at("doppler_hz").get<double>();
  r.plan.channel_seed = j.at("channel_seed").get<std::uint64_t>();
  r.plan.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  r.ris_mode = pipeline_from_string(j.at("ris_mode").get<std::string>());
  r.ris_gain_db = j.at("ris_gain_db").get<double>();
  r.image_path = j.at("image_path").get<std::string>();
  r.iq_path = j.at("iq_path").get<std::string>();
  r.spectrum_path = j.at("spectrum_path").get<std::string>();
  for (const auto& e : j.at("boxes")) {
    BoxRecord b;
    b.physical.cls = signal_class_from_string(e.at("class").get<std::string>());
    b.physical.t0_s = e.at("t0_s").get<double>();
    b.physical.t1_s = e.at("t1_s").get<double>();
    b.physical.f0_hz = e.at("f0_hz").get<double>();
    b.physical.f1_hz = e.at("f1_hz").get<double>();
    b.pixel.x0 = e.at("pixel").at(0).get<double>();
    b.pixel.y0 = e.at("pixel").at(1).get<double>();
    b.pixel.x1 = e.at("pixel").at(2).get<double>();
    b.pixel.y1 = e.at("pixel").at(3).get<double>();
    r.boxes.push_back(b);
  }
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
  return r;
}

}  // namespace

DatasetManifest generate_dataset(const GenerationConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path root = cfg.output_root;
  std::error_code ec;
  fs::create_directories(root, ec);
  for (const char* split : {"train", "test"}) {
    fs::create_directories(root / "images" / split, ec);
    fs::create_directories(root / "labels_yolo" / split, ec);
    if (cfg.save_iq) fs::create_directories(root / "iq" / split, ec);
    if (cfg.save_spectra) fs::create_directories(root / "spectra" / split, ec);
  }
  if (ec) throw IoFailure("cannot create dataset layout under " + root.string());

  std::vector<CapturePlan> plans;
  for (const Scenario scenario : cfg.scenarios) {
    ScenarioConfig sc = cfg.grid;
    sc.scenario = scenario;
    for (int index = 0; index < sc.n_train + sc.n_test; ++index)
      plans.push_back(sample_scenario(sc, index));
  }

  DatasetManifest manifest;
  manifest.config = cfg;
  manifest.captures.resize(plans.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> io_failed{false};
  std::string io_message;
  std::mutex io_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plans.size() || io_failed.load()) return;
      CaptureRecord& rec = manifest.captures[i];
      rec.plan = plans[i];
      rec.ris_mode = cfg.pipeline;
      try {
        BuiltCapture built = build_capture(plans[i], cfg);
        rec.ris_gain_db = built.ris_gain_db;

        const std::string split = to_string(plans[i].split);
        rec.image_path = "images/" + split + "/" + plans[i].capture_id + ".png";
        image::Image img = image::to_image(built.spec, 256, cfg.db_range);
        image::write_png(root / rec.image_path, img);
        if (cfg.export_jpg)
          image::write_jpeg(root / "images" / split / (plans[i].capture_id + ".jpg"), img);
        if (cfg.save_iq) {
          rec.iq_path = "iq/" + split + "/" + plans[i].capture_id + ".iq";
          waveform::write_iq(root / rec.iq_path, built.received, plans[i].noise_seed);
        }
        if (cfg.save_spectra) {
          rec.spectrum_path = "spectra/" + split + "/" + plans[i].capture_id + ".f32";
          spectrogram::write_spectrogram(root / rec.spectrum_path, built.spec);
        }

        for (const GroundTruthBox& gt : built.gt_boxes)
          rec.boxes.push_back({gt, spectrogram::map_box(gt, built.spec, 256)});
      } catch (const IoFailure& e) {
        std::lock_guard<std::mutex> lock(io_mutex);
        io_failed = true;
        io_message = e.what();
        return;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    }
  };

  const int jobs = cfg.jobs > 0 ? cfg.jobs : int(std::thread::hardware_concurrency());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (io_failed) throw IoFailure(io_message);

  write_manifest(root / "manifest.json", manifest);
  export_coco(manifest, Split::Train, root / "annotations_train.json");
  export_coco(manifest, Split::Test, root / "annotations_test.json");
  export_yolo(manifest, Split::Train, root / "labels_yolo" / "train");
  export_yolo(manifest, Split::Test, root / "labels_yolo" / "test");
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  ordered_json j;
  j["schema_version"] = manifest.schema_version;
  j["kind"] = "rissense_manifest";
  j["axis_convention"] = manifest.axis_convention;
  j["image_size"] = manifest.image_size;
  j["config"] = config_to_json(manifest.config);
  ordered_json caps = ordered_json::array();
  for (const auto& r : manifest.captures) caps.push_back(record_to_json(r));
  j["captures"] = caps;

  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw IoFailure("short write to " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw IoFailure("cannot parse " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  m.axis_convention = j.at("axis_convention").get<std::string>();
  m.image_size = j.at("image_size").get<int>();
  m.config = config_from_json(j.at("config"));
  for (const auto& c : j.at("captures")) m.captures.push_back(record_from_json(c));
  return m;
}

void export_coco(const DatasetManifest& manifest, Split split,
                 const std::filesystem::path& path) {
  ordered_json j;
  j["info"] = {{"description", "rissense synthetic spectrum sensing dataset"}};
  ordered_json images = ordered_json::array();
  ordered_json annotations = ordered_json::array();
  int image_id = 0, ann_id = 0;
  for (const auto& r : manifest.captures) {
    if (r.plan.split != split || !r.error.empty()) continue;
    ++image_id;
    ordered_json im;
    im["id"] = image_id;
    im["file_name"] = std::filesystem::path(r.image_path).filename().string();
    im["width"] = manifest.image_size;
    im["height"] = manifest.image_size;
    images.push_back(im);
    for (const auto& b : r.boxes) {
      ordered_json a;
      a["id"] = ++ann_id;
      a["image_id"] = image_id;
      a["category_id"] = class_index(b.physical.cls) + 1;
      a["bbox"] = {b.pixel.x0, b.pixel.y0, b.pixel.width(), b.pixel.height()};
      a["area"] = b.pixel.area();
      a["iscrowd"] = 0;
      annotations.push_back(a);
    }
  }
  j["images"] = images;
  j["annotations"] = annotations;
  ordered_json cats = ordered_json::array();
  for (const SignalClass c : {SignalClass::Lte, SignalClass::Nr, SignalClass::Unoccupied})
    cats.push_back({{"id", class_index(c) + 1}, {"name", to_string(c)}});
  j["categories"] = cats;

  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw IoFailure("short write to " + path.string());
}

std::map<std::string, std::vector<CocoBox>> import_coco(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  ordered_json j = ordered_json::parse(f);
  std::map<int, std::string> names;
  for (const auto& im : j.at("images")) names[im.at("id").get<int>()] = im.at("file_name");
  std::map<int, SignalClass> cats;
  for (const auto& c : j.at("categories"))
    cats[c.at("id").get<int>()] = signal_class_from_string(c.at("name").get<std::string>());
  std::map<std::string, std::vector<CocoBox>> out;
  for (const auto& name : names) out[name.second];  // images with zero boxes stay present
  for (const auto& a : j.at("annotations")) {
    CocoBox b;
    b.cls = cats.at(a.at("category_id").get<int>());
    const auto& bbox = a.at("bbox");
    b.box.x0 = bbox.at(0).get<double>();
    b.box.y0 = bbox.at(1).get<double>();
    b.box.x1 = b.box.x0 + bbox.at(2).get<double>();
    b.box.y1 = b.box.y0 + bbox.at(3).get<double>();
    out[names.at(a.at("image_id").get<int>())].push_back(b);
  }
  return out;
}

void export_yolo(const DatasetManifest& manifest, Split split,
                 const std::filesystem::path& dir) {
  const double size = manifest.image_size;
  for (const auto& r : manifest.captures) {
    if (r.plan.split != split || !r.error.empty()) continue;
    std::ofstream f(dir / (r.plan.capture_id + ".txt"));
    if (!f) throw IoFailure("cannot open label file for " + r.plan.capture_id);
    char buf[160];
    for (const auto& b : r.boxes) {
      const double cx = (b.pixel.x0 + b.pixel.x1) / 2.0 / size;
      const double cy = (b.pixel.y0 + b.pixel.y1) / 2.0 / size;
      const double w = b.pixel.width() / size;
      const double h = b.pixel.height() / size;
      std::snprintf(buf, sizeof buf, "%d %.9f %.9f %.9f %.9f\n", class_index(b.physical.cls), cx,
                    cy, w, h);
      f << buf;
    }
  }
}

detector::BandContext band_context(const DatasetManifest& manifest) {
  detector::BandContext ctx;
  ctx.sample_rate_hz = manifest.config.grid.capture_rate_hz;
  ctx.capture_duration_s = manifest.config.grid.capture_duration_s;
  ctx.grid_bandwidths_hz.clear();
  for (const double b : manifest.config.grid.lte_bandwidths_hz) ctx.grid_bandwidths_hz.push_back(b);
  for (const double b : manifest.config.grid.nr_bandwidths_hz) ctx.grid_bandwidths_hz.push_back(b);
  std::sort(ctx.grid_bandwidths_hz.begin(), ctx.grid_bandwidths_hz.end());
  ctx.grid_bandwidths_hz.erase(
      std::unique(ctx.grid_bandwidths_hz.begin(), ctx.grid_bandwidths_hz.end()),
      ctx.grid_bandwidths_hz.end());
  ctx.candidate_scs_hz = manifest.config.grid.nr_scs_hz;
  if (std::find(ctx.candidate_scs_hz.begin(), ctx.candidate_scs_hz.end(), 15e3) ==
      ctx.candidate_scs_hz.end())
    ctx.candidate_scs_hz.push_back(15e3);
  std::sort(ctx.candidate_scs_hz.begin(), ctx.candidate_scs_hz.end());
  ctx.unoccupied_min_width_hz = manifest.config.unoccupied_min_width_hz;
  return ctx;
}

}  // namespace rissense::dataset
