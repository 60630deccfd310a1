#ifndef RISSENSE_COMMON_HPP
#define RISSENSE_COMMON_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rissense {

using Real = double;
using Complex = std::complex<double>;
using ComplexF = std::complex<float>;

// IQ sample vectors are single precision (matching the float32 on-disk
// format); all derived math runs in double.
using CVecF = Eigen::VectorXcf;
using CVecD = Eigen::VectorXcd;
using RVecD = Eigen::VectorXd;

// Row-major so each STFT frame is one contiguous row.
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class SignalClass { Lte, Nr, Unoccupied };

const char* to_string(SignalClass c);
SignalClass signal_class_from_string(const std::string& s);

// Fixed export order: 0 = LTE, 1 = NR, 2 = Unoccupied.
inline int class_index(SignalClass c) { return static_cast<int>(c); }

// Time/frequency rectangle in physical units. Frequencies are relative to
// the capture center and satisfy f0 < f1.
struct GroundTruthBox {
  SignalClass cls = SignalClass::Unoccupied;
  double t0_s = 0.0, t1_s = 0.0;
  double f0_hz = 0.0, f1_hz = 0.0;
};

// Rectangle in image coordinates. x = time, y = frequency, lowest frequency
// at y = 0. Image row r corresponds to y = r, so annotations and pixels share
// one orientation.
struct PixelBox {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }

  friend bool operator==(const PixelBox& a, const PixelBox& b) {
    return a.x0 == b.x0 && a.y0 == b.y0 && a.x1 == b.x1 && a.y1 == b.y1;
  }
  friend auto operator<=>(const PixelBox& a, const PixelBox& b) {
    return std::tie(a.x0, a.y0, a.x1, a.y1) <=> std::tie(b.x0, b.y0, b.x1, b.y1);
  }
};

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define RISSENSE_ERROR_TYPE(NAME) \
  struct NAME : Error {           \
    explicit NAME(const std::string& what) : Error(#NAME ": " + what) {} \
  }

RISSENSE_ERROR_TYPE(NonIntegerSymbolLength);
RISSENSE_ERROR_TYPE(BandExceedsCapture);
RISSENSE_ERROR_TYPE(RateMismatch);
RISSENSE_ERROR_TYPE(LengthMismatch);
RISSENSE_ERROR_TYPE(DimensionMismatch);
RISSENSE_ERROR_TYPE(EmptyFrame);
RISSENSE_ERROR_TYPE(FrameTooShort);
RISSENSE_ERROR_TYPE(DegenerateRange);
RISSENSE_ERROR_TYPE(BandTooNarrow);
RISSENSE_ERROR_TYPE(InfeasiblePlacement);
RISSENSE_ERROR_TYPE(IoFailure);
RISSENSE_ERROR_TYPE(SpecViolation);
RISSENSE_ERROR_TYPE(ConfigError);

#undef RISSENSE_ERROR_TYPE

}  // namespace rissense

#endif
