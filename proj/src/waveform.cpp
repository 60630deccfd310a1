#include "rissense/waveform.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rissense/rng.hpp"

namespace rissense {

const char* to_string(SignalClass c) {
  switch (c) {
    case SignalClass::Lte: return "LTE";
    case SignalClass::Nr: return "NR";
    case SignalClass::Unoccupied: return "Unoccupied";
  }
  return "?";
}

SignalClass signal_class_from_string(const std::string& s) {
  if (s == "LTE") return SignalClass::Lte;
  if (s == "NR") return SignalClass::Nr;
  if (s == "Unoccupied") return SignalClass::Unoccupied;
  throw Error("unknown signal class '" + s + "'");
}

}  // namespace rissense

namespace rissense::waveform {

Numerology derive_numerology(const WaveformSpec& spec, double capture_rate_hz) {
  if (spec.scs_hz <= 0 || capture_rate_hz <= 0)
    throw SpecViolation("scs and capture rate must be positive");
  const double q = capture_rate_hz / spec.scs_hz;
  const double qr = std::round(q);
  if (std::abs(q - qr) > 1e-6 * q)
    throw NonIntegerSymbolLength("capture_rate/scs = " + std::to_string(q));
  if (std::abs(spec.center_offset_hz) + spec.bandwidth_hz / 2.0 > capture_rate_hz / 2.0 + 1e-9)
    throw BandExceedsCapture("offset " + std::to_string(spec.center_offset_hz) + " Hz, bandwidth " +
                             std::to_string(spec.bandwidth_hz) + " Hz at rate " +
                             std::to_string(capture_rate_hz) + " Hz");

  Numerology num;
  num.symbol_len = int(qr);
  num.cp_len = int(std::lround(spec.cp_ratio * num.symbol_len));
  num.n_subcarriers = 2 * int(std::floor(spec.bandwidth_hz * spec.occupancy_ratio / (2.0 * spec.scs_hz)));
  if (num.n_subcarriers < 2)
    throw SpecViolation("band too narrow: no subcarriers fit " + std::to_string(spec.bandwidth_hz) + " Hz");
  if (num.n_subcarriers >= num.symbol_len)
    throw SpecViolation("subcarrier count exceeds symbol length");
  return num;
}

Synthesis synthesize(const WaveformSpec& spec, double capture_rate_hz,
                     double capture_duration_s, std::uint64_t rng_seed) {
  if (spec.occupancy_ratio <= 0.0 || spec.occupancy_ratio > 1.0)
    throw SpecViolation("occupancy_ratio outside (0,1]");
  if (spec.start_s < 0.0 || spec.stop_s > capture_duration_s + 1e-12 || spec.start_s > spec.stop_s)
    throw SpecViolation("time span outside capture");

  const Numerology num = derive_numerology(spec, capture_rate_hz);
  const Eigen::Index n_total = Eigen::Index(std::llround(capture_rate_hz * capture_duration_s));

  Synthesis out;
  out.frame.samples = CVecF::Zero(n_total);
  out.frame.sample_rate_hz = capture_rate_hz;
  out.frame.t0_s = 0.0;

  const Eigen::Index k0 = std::min<Eigen::Index>(n_total, std::llround(spec.start_s * capture_rate_hz));
  const Eigen::Index k1 = std::min<Eigen::Index>(n_total, std::llround(spec.stop_s * capture_rate_hz));
  if (k1 <= k0) return out;  // degenerate span: all-zero frame, no boxes

  const int n_sym = num.symbol_len;
  const int n_sub = num.n_subcarriers;
  const int sym_total = n_sym + num.cp_len;
  const double amp = double(n_sym) / std::sqrt(double(n_sub));

  Rng payload(derive_seed(rng_seed, spec.payload_seed));
  Eigen::FFT<double> fft;
  CVecD spectrum = CVecD::Zero(n_sym);
  CVecD sym_time(n_sym);

  Eigen::Index k = k0;
  while (k < k1) {
    // occupied bins m in [-n_sub/2, n_sub/2); the +scs/2 half-bin shift is
    // folded into the frequency shift below
    for (int j = 0; j < n_sub; ++j) {
      const int m = j - n_sub / 2;
      spectrum[(m + n_sym) % n_sym] = payload.qpsk();
    }
    fft.inv(sym_time, spectrum);  // applies 1/N; amp restores unit mean power

    const Eigen::Index remaining = k1 - k;
    const Eigen::Index take = std::min<Eigen::Index>(sym_total, remaining);
    for (Eigen::Index i = 0; i < take; ++i) {
      const Eigen::Index src = (i < num.cp_len) ? (n_sym - num.cp_len + i) : (i - num.cp_len);
      out.frame.samples[k + i] = ComplexF(amp * sym_time[src]);
    }
    k += take;
  }

  // single frequency shift moves subcarrier m to (m + 0.5)*scs + offset
  const double f_shift = spec.center_offset_hz + spec.scs_hz / 2.0;
  if (f_shift != 0.0) {
    const double dphi = 2.0 * M_PI * f_shift / capture_rate_hz;
    const Complex step(std::cos(dphi), std::sin(dphi));
    Complex phasor(std::cos(dphi * double(k0)), std::sin(dphi * double(k0)));
    for (Eigen::Index i = k0; i < k1; ++i) {
      out.frame.samples[i] = ComplexF(Complex(out.frame.samples[i]) * phasor);
      phasor *= step;
      if ((i & 0xfff) == 0xfff)  // keep |phasor| = 1 over long frames
        phasor /= std::abs(phasor);
    }
  }

  const double half_bw = double(n_sub) * spec.scs_hz / 2.0;
  out.boxes.push_back({spec.kind, spec.start_s, spec.stop_s,
                       spec.center_offset_hz - half_bw, spec.center_offset_hz + half_bw});
  return out;
}

IqFrame combine(const std::vector<IqFrame>& frames) {
  if (frames.empty()) throw EmptyFrame("combine of zero frames");
  IqFrame out = frames.front();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].sample_rate_hz != out.sample_rate_hz)
      throw RateMismatch(std::to_string(frames[i].sample_rate_hz) + " vs " +
                         std::to_string(out.sample_rate_hz));
    if (frames[i].samples.size() != out.samples.size())
      throw LengthMismatch(std::to_string(frames[i].samples.size()) + " vs " +
                           std::to_string(out.samples.size()));
    out.samples += frames[i].samples;
  }
  return out;
}

std::vector<GroundTruthBox> unoccupied_boxes(const std::vector<GroundTruthBox>& signal_boxes,
                                             double capture_rate_hz, double duration_s,
                                             double min_width_hz) {
  std::vector<std::pair<double, double>> spans;
  for (const auto& b : signal_boxes) spans.emplace_back(b.f0_hz, b.f1_hz);
  std::sort(spans.begin(), spans.end());

  std::vector<GroundTruthBox> out;
  double cursor = -capture_rate_hz / 2.0;
  const double top = capture_rate_hz / 2.0;
  auto emit = [&](double f0, double f1) {
    if (f1 - f0 >= min_width_hz)
      out.push_back({SignalClass::Unoccupied, 0.0, duration_s, f0, f1});
  };
  for (const auto& [f0, f1] : spans) {
    if (f0 > cursor) emit(cursor, std::min(f0, top));
    cursor = std::max(cursor, f1);
  }
  if (cursor < top) emit(cursor, top);
  return out;
}

void write_iq(const std::filesystem::path& path, const IqFrame& frame, std::uint64_t seed) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path.string());
  static_assert(sizeof(ComplexF) == 8);
  f.write(reinterpret_cast<const char*>(frame.samples.data()),
          std::streamsize(sizeof(ComplexF)) * frame.samples.size());
  if (!f) throw IoFailure("short write to " + path.string());

  std::ostringstream meta;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", frame.sample_rate_hz);
  meta << "sample_rate_hz=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", frame.duration_s());
  meta << "duration_s=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", frame.t0_s);
  meta << "t0_s=" << buf << "\n";
  meta << "seed=" << seed << "\n";
  std::ofstream m(path.string() + ".meta");
  if (!m) throw IoFailure("cannot open " + path.string() + ".meta");
  m << meta.str();
}

IqFrame read_iq(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoFailure("cannot open " + path.string());
  const std::streamsize bytes = f.tellg();
  f.seekg(0);
  IqFrame frame;
  frame.samples.resize(bytes / std::streamsize(sizeof(ComplexF)));
  f.read(reinterpret_cast<char*>(frame.samples.data()),
         std::streamsize(sizeof(ComplexF)) * frame.samples.size());
  if (!f) throw IoFailure("short read from " + path.string());

  std::ifstream m(path.string() + ".meta");
  if (!m) throw IoFailure("missing sidecar for " + path.string());
  std::string line;
  while (std::getline(m, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "sample_rate_hz") frame.sample_rate_hz = std::stod(val);
    if (key == "t0_s") frame.t0_s = std::stod(val);
  }
  if (frame.sample_rate_hz <= 0) throw IoFailure("sidecar missing sample_rate_hz");
  return frame;
}

}  // namespace rissense::waveform
