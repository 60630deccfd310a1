#include "rissense/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace rissense::eval {

using ordered_json = nlohmann::ordered_json;

MatchConfig MatchConfig::coco() { return range(0.50, 0.95, 0.05); }

MatchConfig MatchConfig::range(double lo, double hi, double step) {
  MatchConfig cfg;
  const int n = int(std::round((hi - lo) / step)) + 1;
  for (int i = 0; i < n; ++i) cfg.iou_thresholds.push_back(lo + i * step);
  return cfg;
}

double iou(const PixelBox& a, const PixelBox& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

void sort_detections(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.capture_id != b.capture_id) return a.capture_id < b.capture_id;
    return a.box < b.box;
  });
}

}  // namespace

MatchResult match(std::vector<Detection> dets, const std::vector<GroundTruth>& gts,
                  SignalClass cls, double iou_thr) {
  std::erase_if(dets, [cls](const Detection& d) { return d.cls != cls; });
  sort_detections(dets);

  std::unordered_map<std::string, std::vector<std::size_t>> by_capture;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < gts.size(); ++i)
    if (gts[i].cls == cls) {
      by_capture[gts[i].capture_id].push_back(i);
      ++n_gt;
    }

  MatchResult res;
  res.n_gt = n_gt;
  res.tp.assign(dets.size(), 0);
  res.fp.assign(dets.size(), 0);
  std::vector<std::uint8_t> taken(gts.size(), 0);

  for (std::size_t di = 0; di < dets.size(); ++di) {
    double best = 0.0;
    std::size_t best_gt = SIZE_MAX;
    const auto it = by_capture.find(dets[di].capture_id);
    if (it != by_capture.end()) {
      for (const std::size_t gi : it->second) {  // ascending gt index
        if (taken[gi]) continue;
        const double v = iou(dets[di].box, gts[gi].box);
        if (v >= iou_thr && v > best) {  // IoU ties keep the lowest gt index
          best = v;
          best_gt = gi;
        }
      }
    }
    if (best_gt != SIZE_MAX) {
      taken[best_gt] = 1;
      res.tp[di] = 1;
    } else {
      res.fp[di] = 1;
    }
  }
  return res;
}

std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruth>& gts, SignalClass cls,
                                        double iou_thr, PrCurve* curve) {
  const MatchResult m = match(dets, gts, cls, iou_thr);
  if (m.n_gt == 0) return std::nullopt;

  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < m.tp.size(); ++i) {
    tp += m.tp[i];
    fp += m.fp[i];
    precision.push_back(double(tp) / double(tp + fp));
    recall.push_back(double(tp) / double(m.n_gt));
  }
  if (curve) {
    curve->recall = recall;
    curve->precision = precision;
  }

  // max precision at recall >= r, for r in {0.00, 0.01, ..., 1.00}
  double ap = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double target = double(r) / 100.0;
    double best = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i)
      if (recall[i] >= target - 1e-12) best = std::max(best, precision[i]);
    ap += best;
  }
  return ap / 101.0;
}

ApReport map_range(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                   const MatchConfig& cfg) {
  ApReport report;
  report.thresholds = cfg.iou_thresholds;

  double sum = 0.0, sum50 = 0.0;
  int count = 0, count50 = 0;
  for (const SignalClass cls : {SignalClass::Lte, SignalClass::Nr, SignalClass::Unoccupied}) {
    std::vector<double> aps;
    bool present = false;
    for (const double thr : cfg.iou_thresholds) {
      const auto ap = average_precision(dets, gts, cls, thr);
      if (!ap) break;  // class absent from ground truth: excluded entirely
      present = true;
      aps.push_back(*ap);
      sum += *ap;
      ++count;
    }
    if (!present) continue;
    report.ap[cls] = aps;

    PrCurve curve;
    const auto ap50 = average_precision(dets, gts, cls, 0.5, &curve);
    if (ap50) {
      report.ap50[cls] = *ap50;
      report.pr50[cls] = curve;
      sum50 += *ap50;
      ++count50;
    }
  }
  report.map_range = count > 0 ? sum / count : 0.0;
  report.map50 = count50 > 0 ? sum50 / count50 : 0.0;
  return report;
}

void write_report(const std::filesystem::path& json_path, const ApReport& report) {
  ordered_json j;
  j["iou_thresholds"] = report.thresholds;
  ordered_json per_class = ordered_json::object();
  for (const auto& [cls, aps] : report.ap) {
    ordered_json e;
    e["ap_per_threshold"] = aps;
    e["ap50"] = report.ap50.count(cls) ? report.ap50.at(cls) : 0.0;
    double mean = 0.0;
    for (const double a : aps) mean += a;
    e["ap_range_mean"] = aps.empty() ? 0.0 : mean / double(aps.size());
    per_class[to_string(cls)] = e;
  }
  j["per_class"] = per_class;
  j["map_50_95"] = report.map_range;
  j["map_50"] = report.map50;

  std::ofstream f(json_path);
  if (!f) throw IoFailure("cannot open " + json_path.string());
  f << j.dump(2) << "\n";
}

void write_pr_curves(const std::filesystem::path& csv_path, const ApReport& report) {
  std::ofstream f(csv_path);
  if (!f) throw IoFailure("cannot open " + csv_path.string());
  f << "class,recall,precision\n";
  char buf[96];
  for (const auto& [cls, curve] : report.pr50)
    for (std::size_t i = 0; i < curve.recall.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%.9f,%.9f\n", to_string(cls), curve.recall[i],
                    curve.precision[i]);
      f << buf;
    }
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  char buf[192];
  for (const auto& d : dets) {
    std::snprintf(buf, sizeof buf, "%s %.12g %.12g %.12g %.12g %.12g\n", to_string(d.cls), d.score,
                  d.box.x0, d.box.y0, d.box.x1, d.box.y1);
    f << buf;
  }
  if (!f) throw IoFailure("short write to " + path.string());
}

std::vector<Detection> read_detections(const std::filesystem::path& path,
                                       const std::string& capture_id) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  std::vector<Detection> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string cls;
    Detection d;
    d.capture_id = capture_id;
    if (!(is >> cls >> d.score >> d.box.x0 >> d.box.y0 >> d.box.x1 >> d.box.y1))
      throw IoFailure("malformed detection line in " + path.string() + ": " + line);
    d.cls = signal_class_from_string(cls);
    out.push_back(d);
  }
  return out;
}

}  // namespace rissense::eval
