#ifndef RISSENSE_DETECTOR_HPP
#define RISSENSE_DETECTOR_HPP

#include <optional>
#include <vector>

#include "rissense/common.hpp"
#include "rissense/spectrogram.hpp"
#include "rissense/waveform.hpp"

namespace rissense::detector {

// Classical baseline: spectrogram thresholding with connected-component box
// extraction, plus cyclic-prefix lag classification of the isolated band.
// This is the stand-in for the paper-external DL detectors, so the whole
// pipeline can be scored without a network.

struct DetectorParams {
  double threshold_offset_db = 8.0;  // above the estimated noise floor
  int min_box_area_px = 16;          // in 256x256 pixel units
  int morphology_kernel_px = 3;      // odd, square
  double occupancy_split = 0.935;    // LTE/NR discriminant at 15 kHz SCS
};

// Capture-level context the classifier needs: geometry plus the bandwidth
// grids the occupancy ratio is measured against.
struct BandContext {
  double sample_rate_hz = 60e6;
  double capture_duration_s = 0.040;
  std::vector<double> grid_bandwidths_hz = {5e6,  10e6, 15e6, 20e6,
                                            25e6, 30e6, 40e6, 50e6};
  std::vector<double> candidate_scs_hz = {15e3, 30e3};
  double unoccupied_min_width_hz = 1e6;
};

struct DetectionBox {
  PixelBox pixel_box;
  SignalClass cls = SignalClass::Unoccupied;
  double score = 0.0;
};

// Median of all dB cells (lower of the two central order statistics for
// even counts); robust while occupancy stays below half the cells.
double estimate_noise_floor(const spectrogram::SpectrogramMatrix& spec);

struct RawBox {
  PixelBox pixel_box;  // already in 256x256 coordinates
  double score = 0.0;  // mean dB excess over threshold, scaled to [0,1]
};

// Threshold at floor + offset, one open-then-close morphology pass,
// 4-connected components, components below min_box_area_px dropped.
// Boxes are returned frequency-ordered.
std::vector<RawBox> extract_boxes(const spectrogram::SpectrogramMatrix& spec,
                                  const DetectorParams& params, int image_size = 256);

struct BandClassification {
  SignalClass cls = SignalClass::Nr;
  double score = 0.0;       // normalized CP autocorrelation peak
  double dominant_scs_hz = 0.0;
  double occupancy_ratio = 0.0;
  bool low_confidence = false;  // score below 0.2
};

// Isolates the box's band (frequency-domain mask), then reads the SCS from
// the CP autocorrelation lag; 15 kHz signals split LTE/NR on the measured
// occupancy ratio against the nearest grid bandwidth.
BandClassification classify_band(const waveform::IqFrame& iq, const PixelBox& box,
                                 const BandContext& ctx, const DetectorParams& params,
                                 int image_size = 256);

// Full baseline detector. Signal boxes come from extract_boxes, classified
// via classify_band when IQ is present (occupancy heuristic with a 0.5x
// score penalty otherwise); unoccupied bands are emitted as the frequency
// complement of the detected signal boxes.
std::vector<DetectionBox> detect(const spectrogram::SpectrogramMatrix& spec,
                                 const waveform::IqFrame* iq, const BandContext& ctx,
                                 const DetectorParams& params, int image_size = 256);

}  // namespace rissense::detector

#endif
