#pragma once

// On-disk artifacts and plot emission.
//
// Dataset directory:
//   manifest.json           metadata, annotations and per-blob FNV-1a digests
//   s<subject>_r<routine>.bin
//                           n_samples x 16 channels, interleaved
//                           [ch1_re, ch1_im, ..., ch16_re, ch16_im], f32 LE
//
// Window directory (preprocessed):
//   windows.json, windows.bin (rows x cols f32 per window, row-major)

#include "rmg/evalharness.hpp"
#include "rmg/preprocess.hpp"
#include "rmg/synth.hpp"
#include "rmg/timefreq.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rmg::io {

namespace fs = std::filesystem;

inline constexpr int kDatasetFormatVersion = 1;

// Whole-file write through a temporary sibling and a rename.
void write_file_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

std::string hex64(std::uint64_t v);
std::uint64_t fnv1a(std::string_view bytes);

// ---------------------------------------------------------------------------
// Datasets.

struct RoutineEntry {
  int subject_id = 0;
  int routine_id = 0;
  std::string data_file;
  std::int64_t n_samples = 0;
  std::vector<synth::Annotation> annotations;
  std::string digest;  // hex FNV-1a of the blob
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  double fs = 250.0;
  std::vector<RoutineEntry> routines;  // grouped by subject in JSON
  std::vector<std::string> label_names;
  std::string synth_config_digest;
  nlohmann::json synth_config;  // generator settings when known, else null

  std::vector<int> subjects() const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

std::vector<std::string> gesture_label_names();

nlohmann::json to_json(const synth::DatasetConfig& c);
synth::DatasetConfig dataset_config_from_json(const nlohmann::json& j);

// Streams recordings to disk one blob at a time; finish() writes the
// manifest. Recordings carry their subject and routine in the annotations,
// so every recording needs at least one annotation.
class DatasetWriter {
 public:
  explicit DatasetWriter(fs::path dir, std::string synth_config_digest = {}, nlohmann::json synth_config = nullptr);
  void add(const synth::RawRecording& rec);
  DatasetManifest finish();

 private:
  fs::path dir_;
  DatasetManifest m_;
  bool fs_set_ = false;
};

void save_dataset(const std::vector<synth::RawRecording>& recordings, const fs::path& dir,
                  const std::string& synth_config_digest = {}, const nlohmann::json& synth_config = nullptr);

DatasetManifest load_manifest(const fs::path& dir);

// One routine's blob; digest and size are checked.
synth::RawRecording load_routine(const fs::path& dir, const RoutineEntry& entry, double fs);

struct StoredDataset {
  DatasetManifest manifest;
  std::vector<synth::RawRecording> recordings;  // manifest order
};

StoredDataset load_dataset(const fs::path& dir);

// Evaluation view that reads one subject's blobs on demand.
eval::Dataset open_dataset(const fs::path& dir, timefreq::FeatureConfig fc = {});

// ---------------------------------------------------------------------------
// Preprocessed windows and feature tensors.

void save_windows(const std::vector<preprocess::GestureWindow>& windows, const fs::path& dir);
std::vector<preprocess::GestureWindow> load_windows(const fs::path& dir);

// features_<name>.bin (planes x height x width f32 per window) plus
// features_<name>.json.
void save_features(const std::vector<timefreq::Spectrogram>& specs, const std::vector<int>& labels,
                   const fs::path& dir, std::string_view name);

// ---------------------------------------------------------------------------
// Provenance.

struct RunRecord {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;  // effective settings after flags and config file
  nlohmann::json seeds;
  nlohmann::json outputs;
};

nlohmann::json to_json(const RunRecord& r);
void write_run_record(const fs::path& dir, const RunRecord& r);

// ---------------------------------------------------------------------------
// SVG.

// 23 x 23 grid, gray level proportional to the row-normalized percentage;
// rows with no tested windows are hatched.
std::string emit_confusion_svg(const eval::EvalReport& report);

struct Trace {
  std::string name;
  std::vector<double> values;
  double fs = 250.0;
  std::string color = "#1f77b4";
  double stroke = 1.0;
};

std::string emit_waveform_svg(const std::vector<Trace>& traces, std::string_view title);

// Scatter with the y = x diagonal.
std::string emit_scatter_svg(const std::vector<std::pair<double, double>>& points, std::string_view title,
                             std::string_view x_label, std::string_view y_label);

}  // namespace rmg::io
