#ifndef RISSENSE_WAVEFORM_HPP
#define RISSENSE_WAVEFORM_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rissense/common.hpp"

namespace rissense::waveform {

// Toolbox waveforms are approximated by CP-OFDM with matching numerology:
// same bandwidth, subcarrier spacing and cyclic-prefix periodicity, QPSK
// payload, no pilot or sync channels.

constexpr double kLteOccupancy = 0.90;
constexpr double kNrOccupancy = 0.97;
constexpr double kDefaultCpRatio = 144.0 / 2048.0;  // LTE normal CP, uniform

struct WaveformSpec {
  SignalClass kind = SignalClass::Lte;  // Lte or Nr
  double bandwidth_hz = 20e6;
  double scs_hz = 15e3;
  double center_offset_hz = 0.0;  // signal center relative to capture center
  double occupancy_ratio = kLteOccupancy;
  double cp_ratio = kDefaultCpRatio;
  double start_s = 0.0;  // time span within the capture
  double stop_s = 0.0;
  std::uint64_t payload_seed = 0;
};

struct Numerology {
  int symbol_len = 0;     // capture_rate / scs, exact
  int cp_len = 0;         // round(cp_ratio * symbol_len)
  int n_subcarriers = 0;  // even: 2*floor(bw*occupancy / (2*scs))
};

struct IqFrame {
  CVecF samples;
  double sample_rate_hz = 0.0;
  double t0_s = 0.0;

  double duration_s() const {
    return sample_rate_hz > 0 ? double(samples.size()) / sample_rate_hz : 0.0;
  }
};

Numerology derive_numerology(const WaveformSpec& spec, double capture_rate_hz);

struct Synthesis {
  IqFrame frame;
  std::vector<GroundTruthBox> boxes;
};

// Back-to-back CP-OFDM symbols inside [start_s, stop_s), zero outside.
// Occupied subcarriers sit at (k - n/2 + 0.5)*scs + center_offset so the
// occupied band is exactly center_offset +- n_subcarriers*scs/2, which is
// also the emitted ground-truth box. Mean per-sample power of the occupied
// span is 1. Deterministic in (spec, rng_seed).
Synthesis synthesize(const WaveformSpec& spec, double capture_rate_hz,
                     double capture_duration_s, std::uint64_t rng_seed);

// Element-wise sum; callers concatenate the inputs' ground-truth boxes.
IqFrame combine(const std::vector<IqFrame>& frames);

// Maximal frequency intervals of [-rate/2, +rate/2] not covered by any
// signal box, spanning the full capture duration. Intervals narrower than
// min_width_hz are dropped.
std::vector<GroundTruthBox> unoccupied_boxes(const std::vector<GroundTruthBox>& signal_boxes,
                                             double capture_rate_hz, double duration_s,
                                             double min_width_hz);

// Interleaved little-endian float32 I/Q pairs plus a UTF-8 key/value sidecar
// (<path>.meta) with sample_rate_hz, duration_s, t0_s and the generator seed.
void write_iq(const std::filesystem::path& path, const IqFrame& frame, std::uint64_t seed);
IqFrame read_iq(const std::filesystem::path& path);

}  // namespace rissense::waveform

#endif
