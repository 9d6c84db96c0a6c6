#include "rmg/cli_io.hpp"

#include "rmg/error.hpp"
#include "rmg/learn/serialize.hpp"
#include "rmg/rng.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

namespace rmg::io {

static_assert(std::endian::native == std::endian::little, "blob layout assumes a little-endian host");

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::FormatError, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("field '") + key + "': " + e.what());
  }
}

json parse_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

std::string floats_to_bytes(const std::vector<float>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float)};
}

std::vector<float> bytes_to_floats(const std::string& b) {
  std::vector<float> v(b.size() / sizeof(float));
  std::memcpy(v.data(), b.data(), v.size() * sizeof(float));
  return v;
}

// Reads a blob and checks its exact size, then its digest.
std::string read_blob(const fs::path& path, std::size_t expected_bytes, const std::string& digest) {
  std::string bytes = read_file(path);
  if (bytes.size() != expected_bytes)
    throw Error(ErrorCode::SizeError, path.string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                                          std::to_string(expected_bytes));
  if (hex64(fnv1a(bytes)) != digest) throw Error(ErrorCode::CorruptDataset, path.string() + ": digest mismatch");
  return bytes;
}

std::string routine_file(int subject, int routine) {
  return "s" + std::to_string(subject) + "_r" + std::to_string(routine) + ".bin";
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes.data(), bytes.size());
  return h.digest();
}

// --- datasets ---------------------------------------------------------------

std::vector<int> DatasetManifest::subjects() const {
  std::set<int> s;
  for (const auto& r : routines) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

std::vector<std::string> gesture_label_names() {
  std::vector<std::string> names;
  for (const auto& g : synth::gesture_catalog()) names.push_back(g.code);
  return names;
}

json to_json(const DatasetManifest& m) {
  json subjects = json::array();
  for (int s : m.subjects()) {
    json routines = json::array();
    for (const auto& r : m.routines) {
      if (r.subject_id != s) continue;
      json ann = json::array();
      for (const auto& a : r.annotations) ann.push_back({a.start_sample, a.gesture_id});
      routines.push_back({{"routine_id", r.routine_id},
                          {"data_file", r.data_file},
                          {"n_samples", r.n_samples},
                          {"digest", r.digest},
                          {"annotations", ann}});
    }
    subjects.push_back({{"subject_id", s}, {"routines", routines}});
  }
  return {{"format_version", m.format_version},
          {"fs", m.fs},
          {"subjects", subjects},
          {"label_names", m.label_names},
          {"synth_config_digest", m.synth_config_digest},
          {"synth_config", m.synth_config}};
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.format_version = field<int>(j, "format_version");
  if (m.format_version != kDatasetFormatVersion)
    throw Error(ErrorCode::FormatError, "unsupported dataset format " + std::to_string(m.format_version));
  m.fs = field<double>(j, "fs");
  m.label_names = field<std::vector<std::string>>(j, "label_names");
  m.synth_config_digest = field<std::string>(j, "synth_config_digest");
  m.synth_config = j.contains("synth_config") ? j.at("synth_config") : json(nullptr);
  const int n_labels = static_cast<int>(m.label_names.size());
  for (const auto& s : field<json>(j, "subjects")) {
    const int sid = field<int>(s, "subject_id");
    for (const auto& r : field<json>(s, "routines")) {
      RoutineEntry e;
      e.subject_id = sid;
      e.routine_id = field<int>(r, "routine_id");
      e.data_file = field<std::string>(r, "data_file");
      e.n_samples = field<std::int64_t>(r, "n_samples");
      e.digest = field<std::string>(r, "digest");
      if (e.n_samples < 0) throw Error(ErrorCode::FormatError, "negative n_samples");
      if (fs::path(e.data_file).has_parent_path() || e.data_file.empty())
        throw Error(ErrorCode::FormatError, "data_file must be a plain file name: " + e.data_file);
      for (const auto& a : field<json>(r, "annotations")) {
        if (!a.is_array() || a.size() != 2) throw Error(ErrorCode::FormatError, "annotation must be [start, gesture]");
        synth::Annotation an;
        an.start_sample = a[0].get<std::int64_t>();
        an.gesture_id = a[1].get<int>();
        an.subject_id = sid;
        an.routine_id = e.routine_id;
        if (an.gesture_id < 0 || an.gesture_id >= n_labels)
          throw Error(ErrorCode::LabelError, "gesture id " + std::to_string(an.gesture_id) + " not in label set");
        e.annotations.push_back(an);
      }
      m.routines.push_back(std::move(e));
    }
  }
  return m;
}

json to_json(const synth::DatasetConfig& c) {
  const auto& s = c.synth;
  return {{"subjects", c.subjects},
          {"reps", c.reps},
          {"extra_reps_max", c.extra_reps_max},
          {"target_total", c.target_total ? json(*c.target_total) : json(nullptr)},
          {"routine_len", c.routine_len},
          {"subject_spread", c.subject_spread},
          {"routine_spread", c.routine_spread},
          {"scale_lo", c.scale_lo},
          {"scale_hi", c.scale_hi},
          {"shift_cm", c.shift_cm},
          {"shifted_subject", c.shifted_subject ? json(*c.shifted_subject) : json(nullptr)},
          {"synth",
           {{"fs", s.fs},
            {"t_win_s", s.t_win_s},
            {"noise_std", s.noise_std},
            {"subject_scale", s.subject_scale},
            {"timing_jitter_s", s.timing_jitter_s},
            {"nonlin_beta", s.nonlin_beta},
            {"carrier_level", s.carrier_level},
            {"seed", s.seed},
            {"f_rf_hz", s.f_rf_hz},
            {"semg_noise_floor", s.semg_noise_floor},
            {"semg_tail_s", s.semg_tail_s},
            {"semg_tail_gain", s.semg_tail_gain}}}};
}

synth::DatasetConfig dataset_config_from_json(const json& j) {
  synth::DatasetConfig c;
  auto opt = [&](const json& o, const char* key, auto& dst) {
    if (o.contains(key) && !o.at(key).is_null()) dst = o.at(key).get<std::decay_t<decltype(dst)>>();
  };
  try {
    opt(j, "subjects", c.subjects);
    opt(j, "reps", c.reps);
    opt(j, "extra_reps_max", c.extra_reps_max);
    if (j.contains("target_total") && !j["target_total"].is_null()) c.target_total = j["target_total"].get<int>();
    opt(j, "routine_len", c.routine_len);
    opt(j, "subject_spread", c.subject_spread);
    opt(j, "routine_spread", c.routine_spread);
    opt(j, "scale_lo", c.scale_lo);
    opt(j, "scale_hi", c.scale_hi);
    opt(j, "shift_cm", c.shift_cm);
    if (j.contains("shifted_subject") && !j["shifted_subject"].is_null())
      c.shifted_subject = j["shifted_subject"].get<int>();
    if (j.contains("synth")) {
      const json& s = j["synth"];
      opt(s, "fs", c.synth.fs);
      opt(s, "t_win_s", c.synth.t_win_s);
      opt(s, "noise_std", c.synth.noise_std);
      opt(s, "subject_scale", c.synth.subject_scale);
      opt(s, "timing_jitter_s", c.synth.timing_jitter_s);
      opt(s, "nonlin_beta", c.synth.nonlin_beta);
      opt(s, "carrier_level", c.synth.carrier_level);
      opt(s, "seed", c.synth.seed);
      opt(s, "f_rf_hz", c.synth.f_rf_hz);
      opt(s, "semg_noise_floor", c.synth.semg_noise_floor);
      opt(s, "semg_tail_s", c.synth.semg_tail_s);
      opt(s, "semg_tail_gain", c.synth.semg_tail_gain);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("dataset config: ") + e.what());
  }
  return c;
}

DatasetWriter::DatasetWriter(fs::path dir, std::string synth_config_digest, json synth_config) : dir_(std::move(dir)) {
  m_.label_names = gesture_label_names();
  m_.synth_config_digest = std::move(synth_config_digest);
  m_.synth_config = std::move(synth_config);
}

void DatasetWriter::add(const synth::RawRecording& rec) {
  if (rec.channels.size() != static_cast<std::size_t>(synth::kNumChannels))
    throw Error(ErrorCode::ChannelCountError, "recording has " + std::to_string(rec.channels.size()) + " channels");
  if (rec.annotations.empty()) throw Error(ErrorCode::EmptySequence, "recording without annotations");
  if (!fs_set_) {
    m_.fs = rec.fs;
    fs_set_ = true;
  }
  if (rec.fs != m_.fs) throw Error(ErrorCode::ShapeMismatch, "recordings disagree on fs");
  const std::size_t n = rec.n_samples();
  for (const auto& ch : rec.channels)
    if (ch.size() != n) throw Error(ErrorCode::ShapeMismatch, "channel lengths differ");

  RoutineEntry e;
  e.subject_id = rec.annotations.front().subject_id;
  e.routine_id = rec.annotations.front().routine_id;
  for (const auto& r : m_.routines)
    if (r.subject_id == e.subject_id && r.routine_id == e.routine_id)
      throw Error(ErrorCode::FormatError, "duplicate subject/routine " + std::to_string(e.subject_id) + "/" +
                                              std::to_string(e.routine_id));
  e.data_file = routine_file(e.subject_id, e.routine_id);
  e.n_samples = static_cast<std::int64_t>(n);
  for (const auto& a : rec.annotations) {
    if (a.gesture_id < 0 || a.gesture_id >= synth::kNumGestures)
      throw Error(ErrorCode::LabelError, "gesture id " + std::to_string(a.gesture_id));
    e.annotations.push_back(a);
  }

  std::vector<float> v(n * 2 * synth::kNumChannels);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t c = 0; c < static_cast<std::size_t>(synth::kNumChannels); ++c) {
      const auto z = rec.channels[c][k];
      v[(k * synth::kNumChannels + c) * 2] = static_cast<float>(z.real());
      v[(k * synth::kNumChannels + c) * 2 + 1] = static_cast<float>(z.imag());
    }
  const std::string bytes = floats_to_bytes(v);
  e.digest = hex64(fnv1a(bytes));
  write_file_atomic(dir_ / e.data_file, bytes);
  m_.routines.push_back(std::move(e));
}

DatasetManifest DatasetWriter::finish() {
  if (m_.routines.empty()) throw Error(ErrorCode::EmptySequence, "no recordings to save");
  // Manifest order: by subject, then as added.
  std::stable_sort(m_.routines.begin(), m_.routines.end(),
                   [](const RoutineEntry& a, const RoutineEntry& b) { return a.subject_id < b.subject_id; });
  write_file_atomic(dir_ / "manifest.json", to_json(m_).dump(1) + "\n");
  return m_;
}

void save_dataset(const std::vector<synth::RawRecording>& recordings, const fs::path& dir,
                  const std::string& synth_config_digest, const json& synth_config) {
  DatasetWriter w(dir, synth_config_digest, synth_config);
  for (const auto& r : recordings) w.add(r);
  w.finish();
}

DatasetManifest load_manifest(const fs::path& dir) { return manifest_from_json(parse_json(dir / "manifest.json")); }

synth::RawRecording load_routine(const fs::path& dir, const RoutineEntry& e, double fs) {
  const auto n = static_cast<std::size_t>(e.n_samples);
  const std::string bytes = read_blob(dir / e.data_file, n * 2 * synth::kNumChannels * sizeof(float), e.digest);
  const auto v = bytes_to_floats(bytes);
  synth::RawRecording rec;
  rec.fs = fs;
  rec.channels.assign(synth::kNumChannels, std::vector<std::complex<double>>(n));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t c = 0; c < static_cast<std::size_t>(synth::kNumChannels); ++c)
      rec.channels[c][k] = {v[(k * synth::kNumChannels + c) * 2], v[(k * synth::kNumChannels + c) * 2 + 1]};
  rec.annotations = e.annotations;
  return rec;
}

StoredDataset load_dataset(const fs::path& dir) {
  StoredDataset d;
  d.manifest = load_manifest(dir);
  for (const auto& e : d.manifest.routines) d.recordings.push_back(load_routine(dir, e, d.manifest.fs));
  return d;
}

eval::Dataset open_dataset(const fs::path& dir, timefreq::FeatureConfig fc) {
  auto m = std::make_shared<DatasetManifest>(load_manifest(dir));
  return eval::Dataset(m->subjects(),
                       [m, dir](int subject) {
                         std::vector<synth::RawRecording> out;
                         for (const auto& e : m->routines)
                           if (e.subject_id == subject) out.push_back(load_routine(dir, e, m->fs));
                         return out;
                       },
                       fc);
}

// --- windows and features ---------------------------------------------------

void save_windows(const std::vector<preprocess::GestureWindow>& windows, const fs::path& dir) {
  if (windows.empty()) throw Error(ErrorCode::EmptySequence, "no windows to save");
  const auto rows = windows.front().data.rows(), cols = windows.front().data.cols();
  std::vector<float> v;
  v.reserve(windows.size() * static_cast<std::size_t>(rows * cols));
  json meta = json::array();
  for (const auto& w : windows) {
    if (w.data.rows() != rows || w.data.cols() != cols) throw Error(ErrorCode::ShapeMismatch, "window shapes differ");
    for (Eigen::Index i = 0; i < w.data.size(); ++i) v.push_back(static_cast<float>(w.data.data()[i]));
    meta.push_back({w.subject_id, w.routine_id, w.label, w.start_sample});
  }
  const std::string bytes = floats_to_bytes(v);
  write_file_atomic(dir / "windows.bin", bytes);
  write_file_atomic(dir / "windows.json", json{{"format_version", kDatasetFormatVersion},
                                               {"fs", windows.front().fs},
                                               {"rows", rows},
                                               {"cols", cols},
                                               {"digest", hex64(fnv1a(bytes))},
                                               {"windows", meta}}
                                                  .dump(1) + "\n");
}

std::vector<preprocess::GestureWindow> load_windows(const fs::path& dir) {
  const json j = parse_json(dir / "windows.json");
  const auto rows = field<Eigen::Index>(j, "rows"), cols = field<Eigen::Index>(j, "cols");
  const json meta = field<json>(j, "windows");
  const std::size_t per = static_cast<std::size_t>(rows * cols);
  const auto v = bytes_to_floats(read_blob(dir / "windows.bin", meta.size() * per * sizeof(float),
                                           field<std::string>(j, "digest")));
  std::vector<preprocess::GestureWindow> out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    preprocess::GestureWindow w;
    w.subject_id = meta[i][0].get<int>();
    w.routine_id = meta[i][1].get<int>();
    w.label = meta[i][2].get<int>();
    w.start_sample = meta[i][3].get<std::int64_t>();
    w.fs = field<double>(j, "fs");
    w.data = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                 v.data() + i * per, rows, cols)
                 .cast<double>();
    out.push_back(std::move(w));
  }
  return out;
}

void save_features(const std::vector<timefreq::Spectrogram>& specs, const std::vector<int>& labels,
                   const fs::path& dir, std::string_view name) {
  if (specs.empty() || specs.size() != labels.size())
    throw Error(ErrorCode::ShapeMismatch, "feature and label counts differ");
  const auto& f = specs.front();
  std::vector<float> v;
  for (const auto& s : specs) {
    if (s.planes != f.planes || s.height != f.height || s.width != f.width)
      throw Error(ErrorCode::ShapeMismatch, "spectrogram shapes differ");
    v.insert(v.end(), s.values.begin(), s.values.end());
  }
  const std::string bytes = floats_to_bytes(v);
  const std::string stem = "features_" + std::string(name);
  write_file_atomic(dir / (stem + ".bin"), bytes);
  write_file_atomic(dir / (stem + ".json"), json{{"transform", name},
                                                 {"count", specs.size()},
                                                 {"planes", f.planes},
                                                 {"height", f.height},
                                                 {"width", f.width},
                                                 {"series", f.series},
                                                 {"freq_axis", f.freq_axis},
                                                 {"time_axis", f.time_axis},
                                                 {"labels", labels},
                                                 {"digest", hex64(fnv1a(bytes))}}
                                                    .dump(1) + "\n");
}

// --- provenance -------------------------------------------------------------

json to_json(const RunRecord& r) {
  return {{"command", r.command},
          {"argv", r.argv},
          {"config", r.config},
          {"config_digest", hex64(fnv1a(r.config.dump()))},
          {"seeds", r.seeds},
          {"outputs", r.outputs},
          {"versions",
           {{"dataset_format", kDatasetFormatVersion},
            {"model_format", learn::kModelFormatVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"compiler", __VERSION__}}}};
}

void write_run_record(const fs::path& dir, const RunRecord& r) {
  write_file_atomic(dir / "run.json", to_json(r).dump(1) + "\n");
}

// --- SVG --------------------------------------------------------------------

namespace {

std::string fmt(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string svg_open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w, 0) + "\" height=\"" + fmt(h, 0) +
         "\" viewBox=\"0 0 " + fmt(w, 0) + " " + fmt(h, 0) +
         "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, std::string_view s, double size, std::string_view extra = {}) {
  return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" + fmt(size, 1) + "\"" +
         (extra.empty() ? "" : " " + std::string(extra)) + ">" + xml_escape(s) + "</text>\n";
}

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) return {lo - 1.0, hi + 1.0};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string emit_confusion_svg(const eval::EvalReport& report) {
  const int n = report.num_classes;
  auto names = gesture_label_names();
  names.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    if (names[static_cast<std::size_t>(i)].empty()) names[static_cast<std::size_t>(i)] = std::to_string(i);
  const auto pct = report.percent();
  const double cell = 22.0, left = 60.0, top = 80.0;
  const double w = left + n * cell + 20.0, h = top + n * cell + 50.0;

  std::string s = svg_open(w, h);
  s += "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
       "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#f4f4f4\"/>"
       "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#999\" stroke-width=\"2\"/></pattern></defs>\n";
  s += text(left, 20, "accuracy " + fmt(100.0 * report.accuracy, 1) + "% (" + std::to_string(report.tested) +
                          " windows, " + report.meta.kind + ", " + report.meta.model + ")",
            13);
  for (int i = 0; i < n; ++i) {
    const auto& name = names[static_cast<std::size_t>(i)];
    s += text(left - 4, top + (i + 0.65) * cell, name, 9, "text-anchor=\"end\"");
    const double cx = left + (i + 0.5) * cell, cy = top - 4;
    s += text(cx, cy, name, 9, "transform=\"rotate(-60 " + fmt(cx) + " " + fmt(cy) + ")\"");
  }
  for (int i = 0; i < n; ++i) {
    long row_total = 0;
    for (long c : report.counts[static_cast<std::size_t>(i)]) row_total += c;
    for (int j = 0; j < n; ++j) {
      const double p = pct[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      std::string fill;
      if (row_total == 0) {
        fill = "url(#hatch)";
      } else {
        const int g = static_cast<int>(std::lround(255.0 * (1.0 - p / 100.0)));
        fill = "rgb(" + std::to_string(g) + "," + std::to_string(g) + "," + std::to_string(g) + ")";
      }
      const double x = left + j * cell, y = top + i * cell;
      s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(cell) + "\" height=\"" + fmt(cell) +
           "\" fill=\"" + fill + "\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n";
      if (row_total > 0 && p >= 0.5)
        s += text(x + cell / 2, y + cell * 0.65, fmt(p, 0), 8,
                  std::string("text-anchor=\"middle\" fill=\"") + (p > 50.0 ? "white" : "black") + "\"");
    }
  }
  s += text(left + n * cell / 2, h - 15, "predicted", 11, "text-anchor=\"middle\"");
  s += "</svg>\n";
  return s;
}

std::string emit_waveform_svg(const std::vector<Trace>& traces, std::string_view title) {
  const double w = 800, h = 320, left = 60, right = 150, top = 35, bottom = 40;
  double t_max = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& t : traces) {
    if (t.values.empty()) continue;
    t_max = std::max(t_max, (static_cast<double>(t.values.size()) - 1) / t.fs);
    for (double v : t.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(t_max > 0.0)) t_max = 1.0;
  if (!std::isfinite(lo)) lo = hi = 0.0;
  std::tie(lo, hi) = padded_range(lo, hi);
  const double pw = w - left - right, ph = h - top - bottom;
  auto px = [&](double t) { return left + pw * t / t_max; };
  auto py = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::string s = svg_open(w, h);
  s += text(left, 20, title, 13);
  s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>\n";
  const double step = t_max > 10 ? 5.0 : (t_max > 2 ? 1.0 : 0.5);
  for (double t = 0.0; t <= t_max + 1e-9; t += step)
    s += text(px(t), top + ph + 14, fmt(t, 1), 9, "text-anchor=\"middle\"");
  s += text(left + pw / 2, h - 6, "time (s)", 10, "text-anchor=\"middle\"");
  s += text(left - 4, top + 8, fmt(hi, 2), 9, "text-anchor=\"end\"");
  s += text(left - 4, top + ph, fmt(lo, 2), 9, "text-anchor=\"end\"");
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    std::string pts;
    for (std::size_t k = 0; k < t.values.size(); ++k) {
      if (k) pts += ' ';
      pts += fmt(px(static_cast<double>(k) / t.fs)) + "," + fmt(py(t.values[k]));
    }
    s += "<polyline fill=\"none\" stroke=\"" + xml_escape(t.color) + "\" stroke-width=\"" + fmt(t.stroke, 1) +
         "\" points=\"" + pts + "\"/>\n";
    const double ly = top + 12 + 14.0 * static_cast<double>(i);
    s += "<line x1=\"" + fmt(w - right + 10) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(w - right + 30) +
         "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + xml_escape(t.color) + "\" stroke-width=\"2\"/>\n";
    s += text(w - right + 34, ly, t.name, 10);
  }
  s += "</svg>\n";
  return s;
}

std::string emit_scatter_svg(const std::vector<std::pair<double, double>>& points, std::string_view title,
                             std::string_view x_label, std::string_view y_label) {
  const double size = 420, left = 60, top = 35, plot = size - left - 25;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto [x, y] : points) {
    lo = std::min({lo, x, y});
    hi = std::max({hi, x, y});
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  std::tie(lo, hi) = padded_range(lo, hi);
  auto px = [&](double v) { return left + plot * (v - lo) / (hi - lo); };
  auto py = [&](double v) { return top + plot * (hi - v) / (hi - lo); };

  std::string s = svg_open(size, size + 20);
  s += text(left, 20, title, 13);
  s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(plot) + "\" height=\"" + fmt(plot) +
       "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>\n";
  s += "<line x1=\"" + fmt(px(lo)) + "\" y1=\"" + fmt(py(lo)) + "\" x2=\"" + fmt(px(hi)) + "\" y2=\"" + fmt(py(hi)) +
       "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  for (auto [x, y] : points)
    s += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) + "\" r=\"2.5\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>\n";
  s += text(left, top + plot + 14, fmt(lo, 3), 9);
  s += text(left + plot, top + plot + 14, fmt(hi, 3), 9, "text-anchor=\"end\"");
  s += text(left - 4, top + plot, fmt(lo, 3), 9, "text-anchor=\"end\"");
  s += text(left - 4, top + 8, fmt(hi, 3), 9, "text-anchor=\"end\"");
  s += text(left + plot / 2, top + plot + 30, x_label, 11, "text-anchor=\"middle\"");
  const double yx = 18, yy = top + plot / 2;
  s += text(yx, yy, y_label, 11, "text-anchor=\"middle\" transform=\"rotate(-90 " + fmt(yx) + " " + fmt(yy) + ")\"");
  s += "</svg>\n";
  return s;
}

}  // namespace rmg::io
