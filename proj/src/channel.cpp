#include "rissense/channel.hpp"

#include <cmath>
#include <fstream>

#include "rissense/rng.hpp"

namespace rissense::channel {

ChannelRealization sample_channel(const ChannelModelParams& params) {
  if (params.n_elements < 0) throw SpecViolation("negative element count");
  if (params.rician_k < 0) throw SpecViolation("negative Rician factor");

  Rng rng(derive_seed(params.seed, 0x9d2c5680));
  const int n = params.n_elements;
  ChannelRealization ch;
  ch.h.resize(n);
  ch.g.resize(n);

  const double k = params.rician_k;
  const double los = std::sqrt(k / (k + 1.0));
  const double nlos = std::sqrt(1.0 / (k + 1.0));
  auto rician = [&]() {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    return los * Complex(std::cos(theta), std::sin(theta)) + nlos * rng.cnormal();
  };
  for (int i = 0; i < n; ++i) ch.h[i] = rician();
  for (int i = 0; i < n; ++i) ch.g[i] = rician();

  const double p_amp = std::pow(10.0, params.direct_gain_db / 20.0);
  ch.p = p_amp * rng.cnormal();
  ch.sigma_n2 = 1.0;
  return ch;
}

Complex effective_gain(const ChannelRealization& ch, const RisConfig& ris) {
  if (Eigen::Index(ris.bits.size()) != ch.n_elements() || ch.g.size() != ch.h.size())
    throw DimensionMismatch("bits " + std::to_string(ris.bits.size()) + ", channel " +
                            std::to_string(ch.n_elements()));
  Complex sum{0.0, 0.0};
  for (Eigen::Index i = 0; i < ch.n_elements(); ++i) {
    const double sign = ris.bits[std::size_t(i)] ? -1.0 : 1.0;  // e^{j*180 deg} = -1
    sum += std::conj(ch.g[i]) * (ris.alpha * sign) * ch.h[i];
  }
  return sum + ch.p;
}

double continuous_phase_upper_bound(const ChannelRealization& ch, double alpha) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < ch.n_elements(); ++i) s += std::abs(ch.g[i]) * std::abs(ch.h[i]);
  const double a = alpha * s + std::abs(ch.p);
  return a * a;
}

std::pair<RisConfig, OptimizationTrace> optimize_ris_greedy(const ChannelRealization& ch,
                                                            const RisConfig& start,
                                                            int max_iterations, VisitOrder order,
                                                            std::uint64_t order_seed) {
  if (max_iterations < 0) throw SpecViolation("negative iteration budget");
  RisConfig ris = start;
  const int n = int(ris.bits.size());

  OptimizationTrace trace;
  double power = std::norm(effective_gain(ch, ris));
  trace.powers.push_back(power);
  if (n == 0) return {ris, trace};

  std::vector<int> visit(n);
  for (int i = 0; i < n; ++i) visit[i] = i;
  Rng order_rng(derive_seed(order_seed, 0x52495353));

  int sweep_accepts = 0;
  for (int t = 0; t < max_iterations; ++t) {
    const int pos = t % n;
    if (pos == 0) {
      sweep_accepts = 0;
      if (order == VisitOrder::Random)  // fresh permutation each sweep
        for (int i = n - 1; i > 0; --i) std::swap(visit[i], visit[int(order_rng.below(i + 1))]);
    }
    const int e = visit[pos];
    ris.bits[e] ^= 1;
    const double cand = std::norm(effective_gain(ch, ris));
    const bool accept = cand > power;  // ties revert
    if (accept) {
      power = cand;
      ++trace.flips_accepted;
      ++sweep_accepts;
    } else {
      ris.bits[e] ^= 1;
    }
    trace.elements.push_back(e);
    trace.accepted.push_back(accept);
    trace.powers.push_back(power);
    ++trace.iterations;
    if (pos == n - 1 && sweep_accepts == 0) break;  // converged: full no-accept sweep
  }
  return {ris, trace};
}

void write_trace(const std::filesystem::path& path, const OptimizationTrace& trace) {
  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open " + path.string());
  f << "iteration,element,accepted,power_db\n";
  char buf[64];
  for (int i = 0; i < trace.iterations; ++i) {
    const double db = 10.0 * std::log10(std::max(trace.powers[std::size_t(i) + 1], 1e-300));
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6f\n", i, trace.elements[std::size_t(i)],
                  int(trace.accepted[std::size_t(i)]), db);
    f << buf;
  }
  if (!f) throw IoFailure("short write to " + path.string());
}

CVecD jakes_fading(Eigen::Index n, double sample_rate_hz, double t0_s, double doppler_hz,
                   std::uint64_t seed) {
  if (doppler_hz <= 0.0) return CVecD::Ones(n);

  constexpr int kOscillators = 16;
  Rng rng(derive_seed(seed, 0x4a414b45));
  const double theta = rng.uniform(0.0, 2.0 * M_PI);
  double wc[kOscillators], ws[kOscillators], phi[kOscillators], psi[kOscillators];
  for (int m = 0; m < kOscillators; ++m) {
    const double a = (2.0 * M_PI * (m + 1) - M_PI + theta) / (4.0 * kOscillators);
    wc[m] = 2.0 * M_PI * doppler_hz * std::cos(a);
    ws[m] = 2.0 * M_PI * doppler_hz * std::sin(a);
    phi[m] = rng.uniform(0.0, 2.0 * M_PI);
    psi[m] = rng.uniform(0.0, 2.0 * M_PI);
  }

  // the process varies on millisecond scales vs. microsecond samples, so it
  // is evaluated exactly on a coarse grid and linearly interpolated
  constexpr Eigen::Index kStride = 64;
  const Eigen::Index n_knots = (n + kStride - 1) / kStride + 1;
  CVecD knots(n_knots);
  const double scale = 1.0 / std::sqrt(2.0 * kOscillators);
  for (Eigen::Index i = 0; i < n_knots; ++i) {
    const double t = t0_s + double(i * kStride) / sample_rate_hz;
    double re = 0.0, im = 0.0;
    for (int m = 0; m < kOscillators; ++m) {
      re += std::cos(wc[m] * t + phi[m]);
      im += std::cos(ws[m] * t + psi[m]);
    }
    knots[i] = Complex(re, im) * (scale * M_SQRT2);
  }

  CVecD d(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = k / kStride;
    const double w = double(k - i * kStride) / double(kStride);
    d[k] = (1.0 - w) * knots[i] + w * knots[i + 1];
  }
  const double rms = std::sqrt(d.squaredNorm() / double(n));
  d /= rms;  // exact unit power over the frame
  return d;
}

double calibrate_sigma2(const waveform::IqFrame& x, Complex gain, const CVecD& fading,
                        double target_snr_db) {
  double acc = 0.0;
  Eigen::Index occupied = 0;
  const bool faded = fading.size() == x.samples.size();
  for (Eigen::Index k = 0; k < x.samples.size(); ++k) {
    const Complex xv(x.samples[k]);
    if (xv == Complex(0.0, 0.0)) continue;
    const Complex s = faded ? gain * fading[k] * xv : gain * xv;
    acc += std::norm(s);
    ++occupied;
  }
  if (occupied == 0) throw SpecViolation("cannot calibrate SNR against an all-zero frame");
  const double mean_power = acc / double(occupied);
  return mean_power / std::pow(10.0, target_snr_db / 10.0);
}

waveform::IqFrame apply_channel(const waveform::IqFrame& x, const ChannelRealization& ch,
                                const RisConfig& ris, Hypothesis hyp, const NoiseSpec& noise,
                                double doppler_hz, std::uint64_t seed) {
  if (x.samples.size() == 0) throw EmptyFrame("apply_channel on empty frame");
  if (!std::isfinite(noise.value)) throw SpecViolation("non-finite noise spec");

  waveform::IqFrame out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.t0_s = x.t0_s;
  out.samples.resize(x.samples.size());

  Rng rng(derive_seed(seed, 0x4e4f4953));
  if (hyp == Hypothesis::H0) {
    const double s2 = noise.mode == NoiseSpec::Mode::FixedSigma2 ? noise.value : ch.sigma_n2;
    const double s = std::sqrt(s2);
    for (Eigen::Index k = 0; k < out.samples.size(); ++k)
      out.samples[k] = ComplexF(s * rng.cnormal());
    return out;
  }

  const Complex gain = effective_gain(ch, ris);
  const CVecD d = doppler_hz > 0.0
                      ? jakes_fading(x.samples.size(), x.sample_rate_hz, x.t0_s, doppler_hz,
                                     derive_seed(seed, 0x464144))
                      : CVecD();
  const double s2 = noise.mode == NoiseSpec::Mode::FixedSigma2
                        ? noise.value
                        : calibrate_sigma2(x, gain, d, noise.value);
  const double s = std::sqrt(s2);
  const bool faded = d.size() == x.samples.size();
  for (Eigen::Index k = 0; k < out.samples.size(); ++k) {
    const Complex xv(x.samples[k]);
    const Complex sig = faded ? gain * d[k] * xv : gain * xv;
    out.samples[k] = ComplexF(sig + s * rng.cnormal());
  }
  return out;
}

}  // namespace rissense::channel
