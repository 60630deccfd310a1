#include "rissense/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "rissense/rng.hpp"

namespace rissense::commands {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct SplitCounts {
  int train = 0, test = 0, failed = 0;
};

SplitCounts count_captures(const dataset::DatasetManifest& m) {
  SplitCounts c;
  for (const auto& r : m.captures) {
    if (!r.error.empty()) {
      ++c.failed;
      continue;
    }
    (r.plan.split == dataset::Split::Train ? c.train : c.test)++;
  }
  return c;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const std::size_t i = std::size_t(pos);
  if (i + 1 >= v.size()) return v.back();
  const double w = pos - double(i);
  return (1.0 - w) * v[i] + w * v[i + 1];
}

double exhaustive_max_power(const channel::ChannelRealization& ch, double alpha) {
  const int n = int(ch.n_elements());
  channel::RisConfig ris = channel::RisConfig::off(n, alpha);
  double best = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    for (int i = 0; i < n; ++i) ris.bits[std::size_t(i)] = (mask >> i) & 1;
    best = std::max(best, std::norm(channel::effective_gain(ch, ris)));
  }
  return best;
}

// ground truth and detections for one manifest, in eval's shapes
struct EvalInputs {
  std::vector<eval::GroundTruth> gts;
  std::vector<eval::Detection> dets;
};

std::vector<eval::GroundTruth> manifest_ground_truth(const dataset::DatasetManifest& m) {
  std::vector<eval::GroundTruth> gts;
  for (const auto& r : m.captures) {
    if (!r.error.empty()) continue;
    for (const auto& b : r.boxes) gts.push_back({r.plan.capture_id, b.physical.cls, b.pixel});
  }
  return gts;
}

std::vector<eval::GroundTruth> coco_ground_truth(const fs::path& path) {
  std::vector<eval::GroundTruth> gts;
  for (const auto& [file_name, boxes] : dataset::import_coco(path)) {
    const std::string capture_id = fs::path(file_name).stem().string();
    for (const auto& b : boxes) gts.push_back({capture_id, b.cls, b.box});
  }
  return gts;
}

bool is_coco_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  ordered_json j = ordered_json::parse(f, nullptr, false);
  return j.is_object() && j.contains("images") && j.contains("annotations");
}

std::vector<std::string> capture_ids(const std::vector<eval::GroundTruth>& gts) {
  std::vector<std::string> ids;
  for (const auto& g : gts) ids.push_back(g.capture_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// mean over ground-truth signal boxes of the best same-class detection IoU
double mean_best_iou(const std::vector<eval::Detection>& dets,
                     const std::vector<eval::GroundTruth>& gts) {
  double sum = 0.0;
  int count = 0;
  for (const auto& g : gts) {
    if (g.cls == SignalClass::Unoccupied) continue;
    double best = 0.0;
    for (const auto& d : dets)
      if (d.cls == g.cls && d.capture_id == g.capture_id)
        best = std::max(best, eval::iou(d.box, g.box));
    sum += best;
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

void print_report(const eval::ApReport& report, std::ostream& out) {
  char buf[160];
  out << "class        AP@0.5   AP@0.5:0.95\n";
  for (const auto& [cls, aps] : report.ap) {
    double mean = 0.0;
    for (const double a : aps) mean += a;
    mean = aps.empty() ? 0.0 : mean / double(aps.size());
    std::snprintf(buf, sizeof buf, "%-12s %.4f   %.4f\n", to_string(cls),
                  report.ap50.count(cls) ? report.ap50.at(cls) : 0.0, mean);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mAP@0.5 = %.4f, mAP@0.5:0.95 = %.4f\n", report.map50,
                report.map_range);
  out << buf;
}

int run_detect(const dataset::DatasetManifest& manifest, const fs::path& manifest_path,
               const fs::path& detections_dir, const config::RunConfig& cfg, std::ostream& out) {
  fs::create_directories(detections_dir);
  const detector::BandContext ctx = dataset::band_context(manifest);
  const fs::path root = manifest_path.parent_path();

  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  std::mutex log_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= manifest.captures.size()) return;
      const auto& rec = manifest.captures[i];
      if (!rec.error.empty()) continue;
      try {
        dataset::GenerationConfig gen = manifest.config;
        waveform::IqFrame iq;
        spectrogram::SpectrogramMatrix spec;
        if (!rec.iq_path.empty() && fs::exists(root / rec.iq_path)) {
          iq = waveform::read_iq(root / rec.iq_path);
          spec = !rec.spectrum_path.empty() && fs::exists(root / rec.spectrum_path)
                     ? spectrogram::read_spectrogram(root / rec.spectrum_path)
                     : spectrogram::stft(iq, gen.stft);
        } else {
          dataset::BuiltCapture built = dataset::build_capture(rec.plan, gen);
          iq = std::move(built.received);
          spec = std::move(built.spec);
        }
        const auto dets = detector::detect(spec, &iq, ctx, cfg.detector);
        std::vector<eval::Detection> rows;
        for (const auto& d : dets)
          rows.push_back({rec.plan.capture_id, d.cls, d.pixel_box, d.score});
        eval::write_detections(detections_dir / (rec.plan.capture_id + ".txt"), rows);
      } catch (const std::exception& e) {
        ++failures;
        std::lock_guard<std::mutex> lock(log_mutex);
        out << "capture " << rec.plan.capture_id << " failed: " << e.what() << "\n";
      }
    }
  };

  const int jobs = cfg.generation.jobs > 0 ? cfg.generation.jobs
                                           : int(std::thread::hardware_concurrency());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  out << "wrote detections for " << (manifest.captures.size() - std::size_t(failures.load()))
      << " captures to " << detections_dir.string() << "\n";
  return failures.load() == 0 ? kOk : kGenerationError;
}

std::vector<eval::Detection> load_detections(const std::vector<std::string>& ids,
                                             const fs::path& detections_dir, std::ostream& out) {
  std::vector<eval::Detection> dets;
  for (const auto& id : ids) {
    const fs::path file = detections_dir / (id + ".txt");
    if (!fs::exists(file)) {
      out << "missing detections for " << id << " (treated as none)\n";
      continue;
    }
    const auto rows = eval::read_detections(file, id);
    dets.insert(dets.end(), rows.begin(), rows.end());
  }
  return dets;
}

}  // namespace

int cmd_generate(const config::RunConfig& cfg, std::ostream& out) {
  const dataset::DatasetManifest manifest = dataset::generate_dataset(cfg.generation);
  const SplitCounts counts = count_captures(manifest);
  out << "manifest: " << (cfg.generation.output_root / "manifest.json").string() << "\n";
  out << "captures: " << counts.train << " train + " << counts.test << " test";
  if (counts.failed > 0) out << " (" << counts.failed << " failed)";
  out << "\n";
  return counts.failed == 0 ? kOk : kGenerationError;
}

int cmd_ris_study(const config::RunConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.generation.output_root / "ris_study";
  fs::create_directories(dir);

  const int trials = cfg.ris_study_trials;
  const int n = cfg.generation.channel.n_elements;
  std::vector<double> gains_db(static_cast<std::size_t>(trials), 0.0);
  std::vector<double> ratios(static_cast<std::size_t>(trials), 1.0);

  std::ofstream csv(dir / "gains.csv");
  if (!csv) throw IoFailure("cannot open gains.csv");
  csv << (cfg.ris_study_exhaustive ? "trial,initial_db,final_db,gain_db,greedy_over_exhaustive\n"
                                   : "trial,initial_db,final_db,gain_db\n");

  char buf[160];
  for (int trial = 0; trial < trials; ++trial) {
    channel::ChannelModelParams params = cfg.generation.channel;
    params.seed = derive_seed(cfg.generation.grid.master_seed, 0x52535459, std::uint64_t(trial));
    const auto ch = channel::sample_channel(params);
    const auto start = channel::RisConfig::off(n, cfg.generation.ris_alpha);
    const auto [ris, trace] =
        channel::optimize_ris_greedy(ch, start, cfg.generation.ris_iterations);

    const double initial = std::max(trace.powers.front(), 1e-300);
    const double final_p = std::max(trace.powers.back(), 1e-300);
    const double gain_db = trace.powers.front() == trace.powers.back()
                               ? 0.0
                               : 10.0 * std::log10(final_p / initial);
    gains_db[std::size_t(trial)] = gain_db;

    if (cfg.ris_study_exhaustive) {
      const double ex = exhaustive_max_power(ch, cfg.generation.ris_alpha);
      ratios[std::size_t(trial)] = ex > 0.0 ? final_p / ex : 1.0;
      std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f\n", trial,
                    10.0 * std::log10(initial), 10.0 * std::log10(final_p), gain_db,
                    ratios[std::size_t(trial)]);
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f\n", trial, 10.0 * std::log10(initial),
                    10.0 * std::log10(final_p), gain_db);
    }
    csv << buf;
    if (trial < 5) channel::write_trace(dir / ("trace_" + std::to_string(trial) + ".csv"), trace);
  }

  const double median = percentile(gains_db, 0.5);
  const double p10 = percentile(gains_db, 0.10);
  const double p90 = percentile(gains_db, 0.90);
  double mean = 0.0;
  for (const double g : gains_db) mean += g;
  mean /= double(trials);

  out << "RIS greedy optimization study: n_elements=" << n
      << ", iterations=" << cfg.generation.ris_iterations << ", trials=" << trials << "\n";
  std::snprintf(buf, sizeof buf, "gain_db: median=%.2f p10=%.2f p90=%.2f mean=%.2f\n", median, p10,
                p90, mean);
  out << buf;
  if (cfg.ris_study_exhaustive) {
    std::snprintf(buf, sizeof buf, "greedy/exhaustive power ratio: min=%.4f median=%.4f\n",
                  percentile(ratios, 0.0), percentile(ratios, 0.5));
    out << buf;
  }

  ordered_json summary;
  summary["n_elements"] = n;
  summary["iterations"] = cfg.generation.ris_iterations;
  summary["trials"] = trials;
  summary["gain_db"] = {{"median", median}, {"p10", p10}, {"p90", p90}, {"mean", mean}};
  if (cfg.ris_study_exhaustive)
    summary["greedy_over_exhaustive"] = {{"min", percentile(ratios, 0.0)},
                                         {"median", percentile(ratios, 0.5)}};
  std::ofstream js(dir / "summary.json");
  js << summary.dump(2) << "\n";
  return kOk;
}

int cmd_detect(const fs::path& manifest_path, const fs::path& detections_dir,
               const config::RunConfig& cfg, std::ostream& out) {
  const dataset::DatasetManifest manifest = dataset::read_manifest(manifest_path);
  return run_detect(manifest, manifest_path, detections_dir, cfg, out);
}

int cmd_evaluate(const fs::path& truth_path, const fs::path& detections_dir,
                 const fs::path& report_dir, const config::RunConfig& cfg, std::ostream& out) {
  std::vector<eval::GroundTruth> gts = is_coco_file(truth_path)
                                           ? coco_ground_truth(truth_path)
                                           : manifest_ground_truth(dataset::read_manifest(truth_path));
  const std::vector<eval::Detection> dets = load_detections(capture_ids(gts), detections_dir, out);

  const eval::ApReport report = eval::map_range(dets, gts, cfg.match);
  fs::create_directories(report_dir);
  eval::write_report(report_dir / "report.json", report);
  eval::write_pr_curves(report_dir / "pr_curves.csv", report);
  print_report(report, out);
  out << "report: " << (report_dir / "report.json").string() << "\n";
  return kOk;
}

int cmd_experiment(const config::RunConfig& cfg, std::ostream& out) {
  const fs::path root = cfg.generation.output_root;
  struct ModeResult {
    eval::ApReport report;
    double mean_iou = 0.0;
  };
  std::map<std::string, ModeResult> results;

  for (const auto pipeline : {dataset::RisPipeline::Off, dataset::RisPipeline::Optimized}) {
    const std::string mode = dataset::to_string(pipeline);
    config::RunConfig run = cfg;
    run.generation.pipeline = pipeline;
    run.generation.output_root = root / mode;
    out << "--- pipeline: " << mode << " ---\n";

    const dataset::DatasetManifest manifest = dataset::generate_dataset(run.generation);
    const SplitCounts counts = count_captures(manifest);
    if (counts.failed > 0) {
      out << counts.failed << " captures failed during generation\n";
      return kGenerationError;
    }
    const fs::path det_dir = run.generation.output_root / "detections";
    const int rc = run_detect(manifest, run.generation.output_root / "manifest.json", det_dir, run, out);
    if (rc != kOk) return rc;

    const auto gts = manifest_ground_truth(manifest);
    const auto dets = load_detections(capture_ids(gts), det_dir, out);
    ModeResult res;
    res.report = eval::map_range(dets, gts, cfg.match);
    res.mean_iou = mean_best_iou(dets, gts);
    eval::write_report(run.generation.output_root / "report.json", res.report);
    eval::write_pr_curves(run.generation.output_root / "pr_curves.csv", res.report);
    print_report(res.report, out);
    results[mode] = res;
  }

  const auto& off = results.at("off");
  const auto& opt = results.at("optimized");
  char buf[200];
  out << "=== off vs optimized ===\n";
  out << "metric                     off      optimized  delta\n";
  for (const SignalClass cls : {SignalClass::Lte, SignalClass::Nr, SignalClass::Unoccupied}) {
    const double a = off.report.ap50.count(cls) ? off.report.ap50.at(cls) : 0.0;
    const double b = opt.report.ap50.count(cls) ? opt.report.ap50.at(cls) : 0.0;
    std::snprintf(buf, sizeof buf, "AP@0.5 %-12s        %.4f   %.4f     %+.4f\n", to_string(cls),
                  a, b, b - a);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mAP@0.5                    %.4f   %.4f     %+.4f\n",
                off.report.map50, opt.report.map50, opt.report.map50 - off.report.map50);
  out << buf;
  std::snprintf(buf, sizeof buf, "mAP@0.5:0.95               %.4f   %.4f     %+.4f\n",
                off.report.map_range, opt.report.map_range,
                opt.report.map_range - off.report.map_range);
  out << buf;
  std::snprintf(buf, sizeof buf, "mean best-match IoU        %.4f   %.4f     %+.4f\n",
                off.mean_iou, opt.mean_iou, opt.mean_iou - off.mean_iou);
  out << buf;

  ordered_json summary;
  for (const auto& [mode, res] : results) {
    ordered_json m;
    m["map_50"] = res.report.map50;
    m["map_50_95"] = res.report.map_range;
    m["mean_best_iou"] = res.mean_iou;
    ordered_json per_class = ordered_json::object();
    for (const auto& [cls, ap] : res.report.ap50) per_class[to_string(cls)] = ap;
    m["ap50_per_class"] = per_class;
    summary[mode] = m;
  }
  summary["delta"] = {{"map_50", opt.report.map50 - off.report.map50},
                      {"mean_best_iou", opt.mean_iou - off.mean_iou}};
  std::ofstream js(root / "summary.json");
  if (!js) throw IoFailure("cannot open summary.json");
  js << summary.dump(2) << "\n";
  out << "summary: " << (root / "summary.json").string() << "\n";
  return kOk;
}

int exit_code_for(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const IoFailure*>(&e)) return kIoError;
  return kGenerationError;
}

}  // namespace rissense::commands
