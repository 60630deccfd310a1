#ifndef RISSENSE_IMAGE_HPP
#define RISSENSE_IMAGE_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rissense/common.hpp"
#include "rissense/spectrogram.hpp"

namespace rissense::image {

// 8-bit RGB, row-major; row r is pixel coordinate y = r, so the lowest
// frequency sits in the first scanline.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (std::size_t(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (std::size_t(y) * width + x);
  }
};

struct DbRange {
  double floor_db = -110.0;
  double ceil_db = -10.0;
};

// Blue (low) to yellow (high), 33 control points, linearly interpolated.
extern const std::array<std::array<float, 3>, 33> kBlueYellowColormap;
std::array<std::uint8_t, 3> colormap_lookup(double u);

// Exact box-filter average over fractional source cells; handles both
// down- and up-sampling.
Eigen::MatrixXd resample_area(const Eigen::Ref<const MatrixRM>& in, Eigen::Index out_rows,
                              Eigen::Index out_cols);

// Clip to db_range, normalize to [0,1], area-resample to size x size
// (x = time, y = frequency) and colormap.
Image to_image(const spectrogram::SpectrogramMatrix& spec, int size, const DbRange& range);

void write_png(const std::filesystem::path& path, const Image& img);
void write_jpeg(const std::filesystem::path& path, const Image& img, int quality = 95);

// Reads width/height from a PNG IHDR header without decoding.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

}  // namespace rissense::image

#endif
