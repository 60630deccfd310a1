#include "rissense/image.hpp"

namespace rissense::image {

// Blue -> cyan -> green -> yellow ramp with monotonically rising luminance.
const std::array<std::array<float, 3>, 33> kBlueYellowColormap = {{
    {0.0440f, 0.0440f, 0.5500f}, {0.0451f, 0.0937f, 0.5634f}, {0.0464f, 0.1458f, 0.5769f},
    {0.0477f, 0.2003f, 0.5903f}, {0.0492f, 0.2572f, 0.6038f}, {0.0509f, 0.3163f, 0.6172f},
    {0.0527f, 0.3778f, 0.6306f}, {0.0546f, 0.4414f, 0.6441f}, {0.0567f, 0.5073f, 0.6575f},
    {0.0590f, 0.5753f, 0.6709f}, {0.0614f, 0.6454f, 0.6844f}, {0.0641f, 0.6978f, 0.6780f},
    {0.0669f, 0.7113f, 0.6307f}, {0.0699f, 0.7247f, 0.5815f}, {0.0732f, 0.7381f, 0.5303f},
    {0.0766f, 0.7516f, 0.4774f}, {0.0803f, 0.7650f, 0.4227f}, {0.0842f, 0.7784f, 0.3663f},
    {0.0884f, 0.7919f, 0.3082f}, {0.0928f, 0.8053f, 0.2487f}, {0.0975f, 0.8188f, 0.1876f},
    {0.1024f, 0.8322f, 0.1252f}, {0.1537f, 0.8456f, 0.1076f}, {0.2297f, 0.8591f, 0.1131f},
    {0.3073f, 0.8725f, 0.1189f}, {0.3865f, 0.8859f, 0.1249f}, {0.4673f, 0.8994f, 0.1313f},
    {0.5496f, 0.9128f, 0.1380f}, {0.6333f, 0.9263f, 0.1450f}, {0.7182f, 0.9397f, 0.1524f},
    {0.8044f, 0.9531f, 0.1600f}, {0.8917f, 0.9666f, 0.1680f}, {0.9800f, 0.9800f, 0.1764f},
}};

std::array<std::uint8_t, 3> colormap_lookup(double u) {
  u = std::min(std::max(u, 0.0), 1.0);
  const double pos = u * (kBlueYellowColormap.size() - 1);
  const std::size_t i0 = std::size_t(pos) >= kBlueYellowColormap.size() - 1
                             ? kBlueYellowColormap.size() - 2
                             : std::size_t(pos);
  const double w = pos - double(i0);
  std::array<std::uint8_t, 3> out;
  for (int c = 0; c < 3; ++c) {
    const double v = (1.0 - w) * kBlueYellowColormap[i0][c] + w * kBlueYellowColormap[i0 + 1][c];
    out[c] = std::uint8_t(std::lround(255.0 * std::min(std::max(v, 0.0), 1.0)));
  }
  return out;
}

}  // namespace rissense::image
