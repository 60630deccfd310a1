#ifndef RISSENSE_DATASET_HPP
#define RISSENSE_DATASET_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rissense/channel.hpp"
#include "rissense/common.hpp"
#include "rissense/detector.hpp"
#include "rissense/image.hpp"
#include "rissense/spectrogram.hpp"
#include "rissense/waveform.hpp"

namespace rissense::dataset {

enum class Scenario { LteOnly, NrOnly, Both };
enum class Split { Train, Test };
enum class RisPipeline { Off, Optimized, Ideal };
enum class TimeSpanMode { Full, RandomSubframes };

const char* to_string(Scenario s);
const char* to_string(Split s);
const char* to_string(RisPipeline p);
Scenario scenario_from_string(const std::string& s);
RisPipeline pipeline_from_string(const std::string& s);

// Center offsets are drawn on a 100 kHz raster. Coexisting signals keep a
// guard gap between their occupied band edges of four image pixels worth of
// spectrum (rate/64), at least 200 kHz, so thresholded masks never merge.
constexpr double kOffsetRasterHz = 100e3;
constexpr int kPlacementRetries = 100;

inline double placement_guard_hz(double capture_rate_hz) {
  return std::max(200e3, capture_rate_hz / 64.0);
}

struct ScenarioConfig {
  Scenario scenario = Scenario::Both;
  std::vector<double> lte_bandwidths_hz = {5e6, 10e6, 15e6, 20e6};
  std::vector<double> nr_bandwidths_hz = {10e6, 15e6, 20e6, 25e6, 30e6, 40e6, 50e6};
  std::vector<double> nr_scs_hz = {15e3, 30e3};
  std::vector<double> snr_grid_db = {0.0, 20.0, 50.0};
  std::vector<double> doppler_grid_hz = {0.0, 10.0, 500.0};
  int n_train = 900;
  int n_test = 300;
  double capture_rate_hz = 60e6;
  double capture_duration_s = 0.040;
  std::uint64_t master_seed = 1;
  TimeSpanMode time_span_mode = TimeSpanMode::Full;
};

// Fully-bound parameters of one capture; everything downstream is a pure
// function of this record.
struct CapturePlan {
  std::string capture_id;
  Scenario scenario = Scenario::Both;
  Split split = Split::Train;
  std::vector<waveform::WaveformSpec> signals;
  double snr_db = 0.0;
  double doppler_hz = 0.0;
  std::uint64_t channel_seed = 0;
  std::uint64_t noise_seed = 0;
};

CapturePlan sample_scenario(const ScenarioConfig& cfg, int index);

struct GenerationConfig {
  ScenarioConfig grid;  // grid.scenario is ignored; `scenarios` drives generation
  std::vector<Scenario> scenarios = {Scenario::LteOnly, Scenario::NrOnly, Scenario::Both};
  RisPipeline pipeline = RisPipeline::Off;
  channel::ChannelModelParams channel;
  double ris_alpha = 1.0;
  int ris_iterations = 300;
  spectrogram::StftParams stft;
  image::DbRange db_range;
  bool export_jpg = false;
  double unoccupied_min_width_hz = 1e6;
  bool save_iq = false;
  bool save_spectra = false;
  int jobs = 1;
  std::filesystem::path output_root;
};

struct BoxRecord {
  GroundTruthBox physical;
  PixelBox pixel;
};

struct CaptureRecord {
  CapturePlan plan;
  RisPipeline ris_mode = RisPipeline::Off;
  double ris_gain_db = 0.0;  // optimized-over-off power gain; 0 for off/ideal
  std::string image_path;    // relative to the dataset root
  std::string iq_path;       // empty unless save_iq
  std::string spectrum_path; // empty unless save_spectra
  std::vector<BoxRecord> boxes;
  std::string error;  // non-empty if this capture failed
};

struct DatasetManifest {
  int schema_version = 1;
  std::string axis_convention = "x=time,y=frequency,low-frequency-at-y0";
  int image_size = 256;
  GenerationConfig config;
  std::vector<CaptureRecord> captures;
};

// Intermediate products of one capture, shared by generation and the
// detection command (which regenerates deterministically from the plan).
struct BuiltCapture {
  waveform::IqFrame received;
  std::vector<GroundTruthBox> gt_boxes;  // signals plus unoccupied complement
  spectrogram::SpectrogramMatrix spec;
  double ris_gain_db = 0.0;
};

BuiltCapture build_capture(const CapturePlan& plan, const GenerationConfig& cfg);

// synthesize -> apply channel -> stft -> image -> annotations for every
// (scenario, index); writes images, labels, annotation files and
// manifest.json under cfg.output_root.
DatasetManifest generate_dataset(const GenerationConfig& cfg);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

// COCO-style annotation JSON for one split (bbox = [x, y, w, h] pixels).
void export_coco(const DatasetManifest& manifest, Split split,
                 const std::filesystem::path& path);

struct CocoBox {
  SignalClass cls;
  PixelBox box;
};
std::map<std::string, std::vector<CocoBox>> import_coco(const std::filesystem::path& path);

// YOLO labels: one "<class> cx cy w h" line per box, normalized to [0,1].
void export_yolo(const DatasetManifest& manifest, Split split,
                 const std::filesystem::path& dir);

// BandContext matching how a manifest's captures were generated.
detector::BandContext band_context(const DatasetManifest& manifest);

}  // namespace rissense::dataset

#endif
