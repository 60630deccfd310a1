#ifndef RISSENSE_SPECTROGRAM_HPP
#define RISSENSE_SPECTROGRAM_HPP

#include <filesystem>

#include "rissense/common.hpp"
#include "rissense/waveform.hpp"

namespace rissense::spectrogram {

// dB floor guard: 10*log10(eps) = -120 dB.
constexpr double kDbFloorEps = 1e-12;

struct StftParams {
  int window_len = 4096;
  int fft_size = 4096;
  double overlap_ratio = 0.10;  // fraction of the window shared by frames
  enum class Window { Hann } window_kind = Window::Hann;
};

inline int hop_of(const StftParams& p) {
  return int(std::lround((1.0 - p.overlap_ratio) * p.window_len));
}

inline Eigen::Index frame_count(Eigen::Index n_samples, const StftParams& p) {
  return (n_samples - p.window_len) / hop_of(p) + 1;
}

// Time-frequency grid: rows are frames, columns are DFT bins rotated so the
// center column n_bins/2 is DC. capture_duration_s keeps the pixel mapping
// tied to the capture extent rather than the frame grid.
struct SpectrogramMatrix {
  MatrixRM values_db;  // n_frames x n_bins
  int frame_hop = 0;
  double sample_rate_hz = 0.0;
  double t0_s = 0.0;
  double capture_duration_s = 0.0;

  Eigen::Index n_frames() const { return values_db.rows(); }
  Eigen::Index n_bins() const { return values_db.cols(); }
};

// Linear power |DFT(window .* segment)/fft_size|^2, centered. Per frame,
// sum of power bins = windowed-segment energy / fft_size (Parseval).
MatrixRM stft_power(const waveform::IqFrame& iq, const StftParams& params);

// 10*log10(power + eps) of stft_power.
SpectrogramMatrix stft(const waveform::IqFrame& iq, const StftParams& params);

// Periodic Hann window, length n.
RVecD hann_window(int n);

// Affine map between physical (t, f) boxes and size x size pixel boxes:
// x = (t - t0)/duration * size, y = (f + rate/2)/rate * size, clamped.
PixelBox map_box(const GroundTruthBox& box, const SpectrogramMatrix& spec, int size = 256);

// Inverse of map_box (before clamping); cls is copied through.
GroundTruthBox unmap_box(const PixelBox& px, SignalClass cls, const SpectrogramMatrix& spec,
                         int size = 256);

// Flat binary float32 (row-major frames x bins) with a text sidecar
// (<path>.meta: dims, hop, rate, t0, duration).
void write_spectrogram(const std::filesystem::path& path, const SpectrogramMatrix& spec);
SpectrogramMatrix read_spectrogram(const std::filesystem::path& path);

}  // namespace rissense::spectrogram

#endif
