#include "rmg/cli_io.hpp"
#include "rmg/error.hpp"

#include <doctest.h>

#include <fstream>
#include <regex>

using namespace rmg;
using namespace rmg::io;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("rmg_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<synth::RawRecording> two_routines() {
  synth::SynthConfig cfg = synth::DatasetConfig::standard_synth();
  const auto layout = synth::nominal_layout(1);
  return {synth::synth_routine(3, 0, {0, 5, 22}, layout, cfg), synth::synth_routine(3, 1, {7, 14}, layout, cfg)};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

void flip_byte(const fs::path& p, std::size_t at) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(at));
  char c = 0;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0x10);
  f.seekp(static_cast<std::streamoff>(at));
  f.write(&c, 1);
}

eval::EvalReport identity_report(bool drop_row) {
  std::vector<eval::Outcome> out;
  for (int g = 0; g < synth::kNumGestures; ++g) {
    if (drop_row && g == 4) continue;
    for (int r = 0; r < 3; ++r) out.push_back({0, g * 3 + r, g, {g}, g, 0});
  }
  return eval::make_report(out, {});
}

}  // namespace

TEST_CASE("dataset round trip keeps annotations and samples") {
  TempDir dir("ds");
  const auto recs = two_routines();
  save_dataset(recs, dir.path, "abc", {{"note", 1}});

  const auto m = load_manifest(dir.path);
  REQUIRE(m.routines.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(fs::file_size(dir.path / m.routines[i].data_file) == recs[i].n_samples() * 16 * 2 * 4);

  const auto d = load_dataset(dir.path);
  CHECK(d.manifest.synth_config_digest == "abc");
  CHECK(d.manifest.synth_config == nlohmann::json{{"note", 1}});
  CHECK(d.manifest.label_names.size() == 23);
  CHECK(d.manifest.subjects() == std::vector<int>{3});
  REQUIRE(d.recordings.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& a = recs[i];
    const auto& b = d.recordings[i];
    CHECK(b.fs == a.fs);
    REQUIRE(b.annotations.size() == a.annotations.size());
    for (std::size_t k = 0; k < a.annotations.size(); ++k) {
      CHECK(b.annotations[k].start_sample == a.annotations[k].start_sample);
      CHECK(b.annotations[k].gesture_id == a.annotations[k].gesture_id);
      CHECK(b.annotations[k].subject_id == 3);
      CHECK(b.annotations[k].routine_id == a.annotations[k].routine_id);
    }
    REQUIRE(b.n_samples() == a.n_samples());
    double worst = 0.0;
    for (int c = 0; c < 16; ++c)
      for (std::size_t k = 0; k < a.n_samples(); ++k) {
        const auto x = a.channels[c][k];
        const std::complex<double> f{static_cast<float>(x.real()), static_cast<float>(x.imag())};
        worst = std::max(worst, std::abs(b.channels[c][k] - f));
      }
    CHECK(worst == 0.0);
  }

  // Saving the loaded set again gives the same bytes.
  TempDir again("ds2");
  save_dataset(d.recordings, again.path, "abc", {{"note", 1}});
  CHECK(read_file(again.path / "manifest.json") == read_file(dir.path / "manifest.json"));
  CHECK(read_file(again.path / "s3_r1.bin") == read_file(dir.path / "s3_r1.bin"));
}

TEST_CASE("blob layout is interleaved re/im per sample") {
  TempDir dir("layout");
  synth::RawRecording r;
  r.channels.assign(16, std::vector<std::complex<double>>(2));
  for (int c = 0; c < 16; ++c) {
    r.channels[c][0] = {1.0 + c, -1.0 - c};
    r.channels[c][1] = {100.0 + c, 0.5};
  }
  r.annotations.push_back({0, 2, 0, 0});
  save_dataset({r}, dir.path);
  const std::string bytes = read_file(dir.path / "s0_r0.bin");
  REQUIRE(bytes.size() == 2 * 16 * 2 * 4);
  std::vector<float> v(64);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  CHECK(v[0] == 1.0f);
  CHECK(v[1] == -1.0f);
  CHECK(v[30] == 16.0f);
  CHECK(v[31] == -16.0f);
  CHECK(v[32] == 100.0f);
  CHECK(v[33] == 0.5f);
}

TEST_CASE("corrupt and truncated blobs are rejected") {
  TempDir dir("bad");
  save_dataset(two_routines(), dir.path);
  const fs::path blob = dir.path / "s3_r0.bin";
  const std::string original = read_file(blob);

  flip_byte(blob, 1234);
  CHECK(code_of([&] { load_dataset(dir.path); }) == ErrorCode::CorruptDataset);

  write_file_atomic(blob, std::string_view(original).substr(0, original.size() - 4));
  CHECK(code_of([&] { load_dataset(dir.path); }) == ErrorCode::SizeError);

  write_file_atomic(blob, original);
  CHECK_NOTHROW(load_dataset(dir.path));

  fs::remove(blob);
  CHECK(code_of([&] { load_dataset(dir.path); }) == ErrorCode::IoError);
}

TEST_CASE("manifest validation") {
  TempDir dir("manifest");
  save_dataset(two_routines(), dir.path);
  auto j = nlohmann::json::parse(read_file(dir.path / "manifest.json"));
  j["subjects"][0]["routines"][0]["annotations"][0][1] = 23;
  CHECK(code_of([&] { manifest_from_json(j); }) == ErrorCode::LabelError);
  j = nlohmann::json::parse(read_file(dir.path / "manifest.json"));
  j.erase("fs");
  CHECK(code_of([&] { manifest_from_json(j); }) == ErrorCode::FormatError);
  write_file_atomic(dir.path / "manifest.json", "{not json");
  CHECK(code_of([&] { load_manifest(dir.path); }) == ErrorCode::FormatError);

  auto recs = two_routines();
  recs.push_back(recs[0]);
  CHECK(code_of([&] { save_dataset(recs, dir.path); }) == ErrorCode::FormatError);
  recs = two_routines();
  recs[0].channels.pop_back();
  CHECK(code_of([&] { save_dataset(recs, dir.path); }) == ErrorCode::ChannelCountError);
}

TEST_CASE("open_dataset gives the same windows as the in-memory recordings") {
  TempDir dir("open");
  const auto recs = two_routines();
  save_dataset(recs, dir.path);
  const auto data = open_dataset(dir.path);
  CHECK(data.subjects() == std::vector<int>{3});
  const std::array kinds{eval::InputKind::Waveform};
  const auto bank = data.load(3, kinds);
  CHECK(bank.windows.size() == 5);
  CHECK(bank.input(eval::InputKind::Waveform).cols() == 64 * 1250);
}

TEST_CASE("dataset config JSON round trip") {
  synth::DatasetConfig c;
  c.subjects = 3;
  c.target_total = 100;
  c.shifted_subject = 2;
  c.shift_cm = 3.0;
  c.synth.seed = 9;
  const auto back = dataset_config_from_json(to_json(c));
  CHECK(synth::config_digest(back) == synth::config_digest(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(synth::config_digest(dataset_config_from_json(nlohmann::json::object())) ==
        synth::config_digest(synth::DatasetConfig{}));
}

TEST_CASE("window files round trip within float32") {
  TempDir dir("win");
  const auto recs = two_routines();
  const auto w = preprocess::preprocess_pipeline(recs[0], recs[0].annotations);
  save_windows(w, dir.path);
  const auto back = load_windows(dir.path);
  REQUIRE(back.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(back[i].label == w[i].label);
    CHECK(back[i].start_sample == w[i].start_sample);
    CHECK(back[i].data.isApprox(w[i].data.cast<float>().cast<double>(), 0.0));
  }
  flip_byte(dir.path / "windows.bin", 10);
  CHECK(code_of([&] { load_windows(dir.path); }) == ErrorCode::CorruptDataset);
}

TEST_CASE("run record carries a config digest") {
  TempDir dir("run");
  RunRecord r{"synth", {"synth", "--seed", "1"}, {{"seed", 1}}, {{"root", 1}}, {{"dataset", "x"}}};
  write_run_record(dir.path, r);
  const auto j = nlohmann::json::parse(read_file(dir.path / "run.json"));
  CHECK(j["command"] == "synth");
  CHECK(j["config_digest"] == hex64(fnv1a(nlohmann::json{{"seed", 1}}.dump())));
  CHECK(j["versions"].contains("model_format"));
  CHECK(!fs::exists(dir.path / "run.json.tmp"));
}

TEST_CASE("confusion SVG: identity diagonal darkest, deterministic, hatched empty rows") {
  const auto rep = identity_report(false);
  const std::string a = emit_confusion_svg(rep);
  CHECK(a == emit_confusion_svg(rep));
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("</svg>") != std::string::npos);

  const std::regex rect(R"re(<rect x="[^"]+" y="[^"]+" width="22.00" height="22.00" fill="([^"]+)")re");
  std::vector<std::string> fills;
  for (auto it = std::sregex_iterator(a.begin(), a.end(), rect); it != std::sregex_iterator(); ++it)
    fills.push_back((*it)[1]);
  REQUIRE(fills.size() == 23 * 23);
  for (int i = 0; i < 23; ++i)
    for (int j = 0; j < 23; ++j) CHECK(fills[i * 23 + j] == (i == j ? "rgb(0,0,0)" : "rgb(255,255,255)"));
  CHECK(a.find("url(#hatch)\"") == std::string::npos);

  const std::string b = emit_confusion_svg(identity_report(true));
  std::vector<std::string> fb;
  for (auto it = std::sregex_iterator(b.begin(), b.end(), rect); it != std::sregex_iterator(); ++it)
    fb.push_back((*it)[1]);
  REQUIRE(fb.size() == 23 * 23);
  for (int j = 0; j < 23; ++j) CHECK(fb[4 * 23 + j] == "url(#hatch)");
  CHECK(fb[5 * 23 + 5] == "rgb(0,0,0)");
}

TEST_CASE("waveform and scatter SVGs are deterministic and well formed") {
  std::vector<Trace> t{{"a", {0.0, 1.0, 0.5, 0.2}, 2.0}, {"b & c", {1.0, 1.0}, 2.0, "#ff0000", 2.0}};
  const auto w = emit_waveform_svg(t, "title");
  CHECK(w == emit_waveform_svg(t, "title"));
  CHECK(w.find("b &amp; c") != std::string::npos);
  CHECK(std::count(w.begin(), w.end(), '<') == std::count(w.begin(), w.end(), '>'));
  CHECK(w.find("<polyline") != std::string::npos);

  const auto s = emit_scatter_svg({{0.1, 0.2}, {0.3, 0.5}}, "widths", "rmg", "semg");
  CHECK(s == emit_scatter_svg({{0.1, 0.2}, {0.3, 0.5}}, "widths", "rmg", "semg"));
  std::size_t circles = 0;
  for (auto p = s.find("<circle"); p != std::string::npos; p = s.find("<circle", p + 1)) ++circles;
  CHECK(circles == 2);
  CHECK_NOTHROW(emit_scatter_svg({}, "empty", "x", "y"));
  CHECK_NOTHROW(emit_waveform_svg({}, "empty"));
}
