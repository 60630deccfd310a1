#include "rissense/spectrogram.hpp"

#include <unsupported/Eigen/FFT>

#include <fstream>
#include <sstream>

namespace rissense::spectrogram {

RVecD hann_window(int n) {
  RVecD w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

MatrixRM stft_power(const waveform::IqFrame& iq, const StftParams& params) {
  if (iq.samples.size() == 0) throw EmptyFrame("stft of empty frame");
  if (iq.samples.size() < params.window_len)
    throw FrameTooShort(std::to_string(iq.samples.size()) + " < window " +
                        std::to_string(params.window_len));
  if (params.overlap_ratio < 0.0 || params.overlap_ratio >= 1.0)
    throw SpecViolation("overlap_ratio outside [0,1)");
  if (params.window_len > params.fft_size) throw SpecViolation("window_len > fft_size");

  const int hop = hop_of(params);
  const int nfft = params.fft_size;
  const int nwin = params.window_len;
  const Eigen::Index n_frames = frame_count(iq.samples.size(), params);
  const RVecD window = hann_window(nwin);

  MatrixRM power(n_frames, nfft);
  Eigen::FFT<double> fft;
  CVecD segment(nfft);
  CVecD bins(nfft);
  const double inv_n2 = 1.0 / (double(nfft) * double(nfft));

  for (Eigen::Index m = 0; m < n_frames; ++m) {
    const Eigen::Index off = m * hop;
    for (int i = 0; i < nwin; ++i) segment[i] = Complex(iq.samples[off + i]) * window[i];
    segment.tail(nfft - nwin).setZero();
    fft.fwd(bins, segment);
    // rotate so column nfft/2 is DC
    for (int b = 0; b < nfft; ++b)
      power(m, b) = std::norm(bins[(b + nfft / 2) % nfft]) * inv_n2;
  }
  return power;
}

SpectrogramMatrix stft(const waveform::IqFrame& iq, const StftParams& params) {
  SpectrogramMatrix out;
  MatrixRM power = stft_power(iq, params);
  out.values_db = (10.0 / std::log(10.0)) * (power.array() + kDbFloorEps).log().matrix();
  out.frame_hop = hop_of(params);
  out.sample_rate_hz = iq.sample_rate_hz;
  out.t0_s = iq.t0_s;
  out.capture_duration_s = iq.duration_s();
  return out;
}

PixelBox map_box(const GroundTruthBox& box, const SpectrogramMatrix& spec, int size) {
  const double rate = spec.sample_rate_hz;
  const double dur = spec.capture_duration_s;
  auto clamp = [size](double v) { return std::min(std::max(v, 0.0), double(size)); };
  PixelBox px;
  px.x0 = clamp((box.t0_s - spec.t0_s) / dur * size);
  px.x1 = clamp((box.t1_s - spec.t0_s) / dur * size);
  px.y0 = clamp((box.f0_hz + rate / 2.0) / rate * size);
  px.y1 = clamp((box.f1_hz + rate / 2.0) / rate * size);
  return px;
}

GroundTruthBox unmap_box(const PixelBox& px, SignalClass cls, const SpectrogramMatrix& spec,
                         int size) {
  const double rate = spec.sample_rate_hz;
  const double dur = spec.capture_duration_s;
  GroundTruthBox box;
  box.cls = cls;
  box.t0_s = spec.t0_s + px.x0 / size * dur;
  box.t1_s = spec.t0_s + px.x1 / size * dur;
  box.f0_hz = px.y0 / size * rate - rate / 2.0;
  box.f1_hz = px.y1 / size * rate - rate / 2.0;
  return box;
}

void write_spectrogram(const std::filesystem::path& path, const SpectrogramMatrix& spec) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path.string());
  for (Eigen::Index m = 0; m < spec.n_frames(); ++m)
    for (Eigen::Index b = 0; b < spec.n_bins(); ++b) {
      const float v = float(spec.values_db(m, b));
      f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  if (!f) throw IoFailure("short write to " + path.string());

  std::ostringstream meta;
  char buf[64];
  meta << "n_frames=" << spec.n_frames() << "\n";
  meta << "n_bins=" << spec.n_bins() << "\n";
  meta << "frame_hop=" << spec.frame_hop << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.sample_rate_hz);
  meta << "sample_rate_hz=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.t0_s);
  meta << "t0_s=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.capture_duration_s);
  meta << "capture_duration_s=" << buf << "\n";
  std::ofstream m(path.string() + ".meta");
  if (!m) throw IoFailure("cannot open " + path.string() + ".meta");
  m << meta.str();
}

SpectrogramMatrix read_spectrogram(const std::filesystem::path& path) {
  std::ifstream m(path.string() + ".meta");
  if (!m) throw IoFailure("missing sidecar for " + path.string());
  SpectrogramMatrix spec;
  Eigen::Index n_frames = 0, n_bins = 0;
  std::string line;
  while (std::getline(m, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "n_frames") n_frames = std::stoll(val);
    if (key == "n_bins") n_bins = std::stoll(val);
    if (key == "frame_hop") spec.frame_hop = std::stoi(val);
    if (key == "sample_rate_hz") spec.sample_rate_hz = std::stod(val);
    if (key == "t0_s") spec.t0_s = std::stod(val);
    if (key == "capture_duration_s") spec.capture_duration_s = std::stod(val);
  }
  if (n_frames <= 0 || n_bins <= 0) throw IoFailure("bad sidecar dims for " + path.string());

  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path.string());
  spec.values_db.resize(n_frames, n_bins);
  for (Eigen::Index i = 0; i < n_frames; ++i)
    for (Eigen::Index b = 0; b < n_bins; ++b) {
      float v;
      f.read(reinterpret_cast<char*>(&v), sizeof v);
      spec.values_db(i, b) = v;
    }
  if (!f) throw IoFailure("short read from " + path.string());
  return spec;
}

}  // namespace rissense::spectrogram
