#include "rissense/image.hpp"

#include <jpeglib.h>
#include <zlib.h>

#include <cstring>
#include <fstream>

namespace rissense::image {

Eigen::MatrixXd resample_area(const Eigen::Ref<const MatrixRM>& in, Eigen::Index out_rows,
                              Eigen::Index out_cols) {
  const Eigen::Index nr = in.rows(), nc = in.cols();
  const double sr = double(nr) / double(out_rows);
  const double sc = double(nc) / double(out_cols);

  // separable box filter: rows first, then columns
  Eigen::MatrixXd rows(out_rows, nc);
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    const double lo = r * sr, hi = (r + 1) * sr;
    const Eigen::Index i0 = Eigen::Index(lo);
    const Eigen::Index i1 = std::min<Eigen::Index>(nr - 1, Eigen::Index(std::ceil(hi)) - 1);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(nc);
    for (Eigen::Index i = i0; i <= i1; ++i) {
      const double w = std::min(hi, double(i + 1)) - std::max(lo, double(i));
      if (w > 0) acc += w * in.row(i);
    }
    rows.row(r) = acc / (hi - lo);
  }

  Eigen::MatrixXd out(out_rows, out_cols);
  for (Eigen::Index c = 0; c < out_cols; ++c) {
    const double lo = c * sc, hi = (c + 1) * sc;
    const Eigen::Index j0 = Eigen::Index(lo);
    const Eigen::Index j1 = std::min<Eigen::Index>(nc - 1, Eigen::Index(std::ceil(hi)) - 1);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(out_rows);
    for (Eigen::Index j = j0; j <= j1; ++j) {
      const double w = std::min(hi, double(j + 1)) - std::max(lo, double(j));
      if (w > 0) acc += w * rows.col(j);
    }
    out.col(c) = acc / (hi - lo);
  }
  return out;
}

Image to_image(const spectrogram::SpectrogramMatrix& spec, int size, const DbRange& range) {
  if (spec.n_frames() == 0 || spec.n_bins() == 0) throw EmptyFrame("empty spectrogram");
  if (range.floor_db >= range.ceil_db)
    throw DegenerateRange(std::to_string(range.floor_db) + " >= " + std::to_string(range.ceil_db));

  const double span = range.ceil_db - range.floor_db;
  MatrixRM norm = ((spec.values_db.array() - range.floor_db) / span).cwiseMin(1.0).cwiseMax(0.0);

  // transpose: output rows follow frequency (y), columns follow time (x)
  MatrixRM flipped = norm.transpose();
  Eigen::MatrixXd small = resample_area(flipped, size, size);

  Image img;
  img.width = size;
  img.height = size;
  img.rgb.resize(std::size_t(size) * size * 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const auto rgb = colormap_lookup(small(y, x));
      std::memcpy(img.pixel(x, y), rgb.data(), 3);
    }
  return img;
}

namespace {

void put_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(std::uint8_t(x >> 24));
  v.push_back(std::uint8_t(x >> 16));
  v.push_back(std::uint8_t(x >> 8));
  v.push_back(std::uint8_t(x));
}

void put_chunk(std::ofstream& f, const char type[4], const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> hdr;
  put_u32be(hdr, std::uint32_t(data.size()));
  f.write(reinterpret_cast<const char*>(hdr.data()), 4);
  f.write(type, 4);
  if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  std::uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), uInt(data.size()));
  std::vector<std::uint8_t> tail;
  put_u32be(tail, crc);
  f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
  // raw scanlines, filter type 0 per row
  std::vector<std::uint8_t> raw;
  raw.reserve((std::size_t(img.width) * 3 + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.pixel(0, y), img.pixel(0, y) + std::size_t(img.width) * 3);
  }
  uLongf zlen = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> zdata(zlen);
  if (compress2(zdata.data(), &zlen, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw IoFailure("deflate failed for " + path.string());
  zdata.resize(zlen);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path.string());
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr;
  put_u32be(ihdr, std::uint32_t(img.width));
  put_u32be(ihdr, std::uint32_t(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace
  put_chunk(f, "IHDR", ihdr);
  put_chunk(f, "IDAT", zdata);
  put_chunk(f, "IEND", {});
  if (!f) throw IoFailure("short write to " + path.string());
}

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path.string());
  std::uint8_t hdr[24];
  f.read(reinterpret_cast<char*>(hdr), 24);
  if (!f || std::memcmp(hdr, "\x89PNG\r\n\x1a\n", 8) != 0)
    throw IoFailure("not a PNG: " + path.string());
  auto be = [&](int off) {
    return (int(hdr[off]) << 24) | (int(hdr[off + 1]) << 16) | (int(hdr[off + 2]) << 8) |
           int(hdr[off + 3]);
  };
  return {be(16), be(20)};
}

void write_jpeg(const std::filesystem::path& path, const Image& img, int quality) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoFailure("cannot open " + path.string());

  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, fp);
  cinfo.image_width = JDIMENSION(img.width);
  cinfo.image_height = JDIMENSION(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<std::uint8_t> row(std::size_t(img.width) * 3);
  while (cinfo.next_scanline < cinfo.image_height) {
    std::memcpy(row.data(), img.pixel(0, int(cinfo.next_scanline)), row.size());
    JSAMPROW rp = row.data();
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(fp);
}

}  // namespace rissense::image
