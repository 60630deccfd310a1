#ifndef RISSENSE_EVAL_HPP
#define RISSENSE_EVAL_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rissense/common.hpp"

namespace rissense::eval {

struct Detection {
  std::string capture_id;
  SignalClass cls = SignalClass::Unoccupied;
  PixelBox box;
  double score = 0.0;
};

struct GroundTruth {
  std::string capture_id;
  SignalClass cls = SignalClass::Unoccupied;
  PixelBox box;
};

struct MatchConfig {
  std::vector<double> iou_thresholds;  // strictly increasing, in (0,1]

  // COCO convention: 0.50:0.05:0.95, 10 thresholds.
  static MatchConfig coco();
  static MatchConfig range(double lo, double hi, double step);
};

double iou(const PixelBox& a, const PixelBox& b);

struct MatchResult {
  std::vector<std::uint8_t> tp;  // aligned with score-sorted detections
  std::vector<std::uint8_t> fp;
  std::size_t n_gt = 0;
};

// Greedy one-to-one matching per class: detections in descending score
// order (ties by capture id, then box lexicographic order) take the
// highest-IoU unmatched ground truth of the same capture with IoU >= thr
// (IoU ties go to the lowest ground-truth index).
MatchResult match(std::vector<Detection> dets, const std::vector<GroundTruth>& gts,
                  SignalClass cls, double iou_thr);

struct PrCurve {
  std::vector<double> recall;
  std::vector<double> precision;
};

// 101-point interpolated AP; absent (not 0) when the class has no ground
// truth at all.
std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruth>& gts, SignalClass cls,
                                        double iou_thr, PrCurve* curve = nullptr);

struct ApReport {
  std::vector<double> thresholds;
  // class -> AP per threshold (absent classes omitted)
  std::map<SignalClass, std::vector<double>> ap;
  std::map<SignalClass, double> ap50;
  std::map<SignalClass, PrCurve> pr50;
  double map_range = 0.0;  // mAP@lo:hi over thresholds and present classes
  double map50 = 0.0;
};

ApReport map_range(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                   const MatchConfig& cfg);

// Report files: structured JSON summary plus one CSV of PR curves.
void write_report(const std::filesystem::path& json_path, const ApReport& report);
void write_pr_curves(const std::filesystem::path& csv_path, const ApReport& report);

// Detection files: one text file per capture, lines "class score x0 y0 x1 y1".
// The same schema is accepted for externally produced detections.
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::filesystem::path& path,
                                       const std::string& capture_id);

}  // namespace rissense::eval

#endif
