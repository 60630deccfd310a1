#ifndef RISSENSE_CHANNEL_HPP
#define RISSENSE_CHANNEL_HPP

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "rissense/common.hpp"
#include "rissense/waveform.hpp"

namespace rissense::channel {

// Cascaded RIS channel: the secondary user receives
//   H0: r[k] = n[k]
//   H1: r[k] = (g^H Theta h + p) d[k] x[k] + n[k]
// with Theta = diag{alpha * exp(j*phi_n)}, phi_n in {0, 180} degrees, and
// d[k] an optional flat Jakes fading factor.

struct ChannelRealization {
  CVecD h;               // PT -> RIS
  CVecD g;               // RIS -> SU
  Complex p{0.0, 0.0};   // PT -> SU direct path
  double sigma_n2 = 1.0; // noise variance used by the H0 branch

  Eigen::Index n_elements() const { return h.size(); }
};

struct RisConfig {
  std::vector<std::uint8_t> bits;  // bit 1 => 180 degree phase
  double alpha = 1.0;

  static RisConfig off(Eigen::Index n, double alpha = 1.0) {
    return {std::vector<std::uint8_t>(std::size_t(n), 0), alpha};
  }
};

struct ChannelModelParams {
  int n_elements = 76;
  double rician_k = 0.0;         // 0 => Rayleigh
  double direct_gain_db = -20.0; // |p|^2 relative to mean per-element cascaded power
  std::uint64_t seed = 0;
};

// h, g i.i.d. Rician with factor rician_k (unit mean power per element);
// p complex Gaussian with power 10^(direct_gain_db/10).
ChannelRealization sample_channel(const ChannelModelParams& params);

// g^H Theta h + p for the given binary phase bits.
Complex effective_gain(const ChannelRealization& ch, const RisConfig& ris);

// (alpha * sum |g_n||h_n| + |p|)^2: the co-phased continuous-phase optimum;
// no binary configuration can exceed it.
double continuous_phase_upper_bound(const ChannelRealization& ch, double alpha);

struct OptimizationTrace {
  std::vector<double> powers;        // powers[0] = initial, then one entry per iteration
  std::vector<int> elements;         // element visited at each iteration
  std::vector<std::uint8_t> accepted;
  int flips_accepted = 0;
  int iterations = 0;
};

enum class VisitOrder { Sequential, Random };

// One-by-one coordinate ascent on the binary phases: iteration t flips
// element (t mod N), keeps the flip iff |effective gain|^2 strictly
// increases (ties revert). Stops at max_iterations or after a full sweep
// with no accepted flip.
std::pair<RisConfig, OptimizationTrace> optimize_ris_greedy(
    const ChannelRealization& ch, const RisConfig& start, int max_iterations,
    VisitOrder order = VisitOrder::Sequential, std::uint64_t order_seed = 0);

// CSV trace: iteration, element, accepted, power_db.
void write_trace(const std::filesystem::path& path, const OptimizationTrace& trace);

enum class Hypothesis { H0, H1 };

// Noise calibration for apply_channel: either sigma_n2 is derived from a
// target SNR against this call's own effective gain, or it is fixed by the
// caller (matched-noise comparisons across RIS configurations).
struct NoiseSpec {
  enum class Mode { TargetSnr, FixedSigma2 } mode = Mode::TargetSnr;
  double value = 0.0;

  static NoiseSpec target_snr_db(double db) { return {Mode::TargetSnr, db}; }
  static NoiseSpec fixed_sigma2(double s2) { return {Mode::FixedSigma2, s2}; }
};

// Unit-power Jakes sum-of-sinusoids fading (16 oscillators), normalized to
// exact unit RMS over the frame. doppler_hz = 0 yields all-ones.
CVecD jakes_fading(Eigen::Index n, double sample_rate_hz, double t0_s, double doppler_hz,
                   std::uint64_t seed);

// sigma_n2 achieving the target SNR over the occupied (nonzero) samples of
// gain * fading .* x. fading may be empty (treated as all-ones).
double calibrate_sigma2(const waveform::IqFrame& x, Complex gain, const CVecD& fading,
                        double target_snr_db);

waveform::IqFrame apply_channel(const waveform::IqFrame& x, const ChannelRealization& ch,
                                const RisConfig& ris, Hypothesis hyp, const NoiseSpec& noise,
                                double doppler_hz, std::uint64_t seed);

// Target-SNR convenience overload.
inline waveform::IqFrame apply_channel(const waveform::IqFrame& x, const ChannelRealization& ch,
                                       const RisConfig& ris, Hypothesis hyp, double target_snr_db,
                                       double doppler_hz, std::uint64_t seed) {
  return apply_channel(x, ch, ris, hyp, NoiseSpec::target_snr_db(target_snr_db), doppler_hz, seed);
}

}  // namespace rissense::channel

#endif
