#include "cli.hpp"
#include "rmg/cli_io.hpp"
#include "rmg/learn/serialize.hpp"

#include <doctest.h>

#include <sstream>

using namespace rmg;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int c = cli::run(args, o, e);
  return {c, o.str(), e.str()};
}

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("rmg_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

// One tiny dataset shared by the tests below.
const Scratch& scratch() {
  static Scratch s;
  static bool made = false;
  if (!made) {
    REQUIRE(run({"synth", "--subjects", "2", "--reps", "2", "--seed", "7", "--out", s("ds")}).code == 0);
    made = true;
  }
  return s;
}

nlohmann::json parse(const std::string& path) { return nlohmann::json::parse(io::read_file(path)); }

std::size_t windows_of(const std::string& dataset, int subject) {
  std::size_t n = 0;
  for (const auto& e : io::load_manifest(dataset).routines)
    if (e.subject_id == subject) n += e.annotations.size();
  return n;
}

}  // namespace

TEST_CASE("cli usage errors exit 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"nosuch"}).code == 1);
  CHECK(run({"synth", "--bogus", "1", "--out", "x"}).code == 1);
  CHECK(run({"synth"}).code == 1);  // --out is required
  CHECK(run({"train", "--in", "x", "--out", "y", "--model", "rnn"}).code == 1);
  CHECK(run({"eval", "--in", "x", "--out", "y", "--cv", "loo"}).code == 1);
  const auto h = run({"synth", "--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("--shift-cm") != std::string::npos);
}

TEST_CASE("cli data errors exit 2 and numeric failures exit 3") {
  const auto& s = scratch();
  CHECK(run({"eval", "--in", s("missing"), "--out", s("ev_missing")}).code == 2);
  CHECK(run({"train", "--in", s("ds"), "--model", "vit", "--transform", "waveform", "--out", s("m.rmgm")}).code == 2);
  CHECK(run({"train", "--in", s("ds"), "--model", "cnn1d", "--epochs", "1", "--lr", "1e30", "--subjects", "0", "--out",
             s("bad.rmgm")})
            .code == 3);
  CHECK(run({"plot", "--confusion", s("ds") + "/manifest.json", "--out", s("bad.svg")}).code == 2);
}

TEST_CASE("synth writes a loadable dataset with provenance and is reproducible") {
  const auto& s = scratch();
  const auto d = io::load_dataset(s("ds"));
  CHECK(d.manifest.subjects() == std::vector<int>{0, 1});
  CHECK(fs::exists(s("ds") + "/run.json"));
  const auto run_json = parse(s("ds") + "/run.json");
  CHECK(run_json["command"] == "synth");
  CHECK(run_json["config"]["seed"] == "7");

  REQUIRE(run({"synth", "--subjects", "2", "--reps", "2", "--seed", "7", "--out", s("ds_again")}).code == 0);
  for (const auto& e : d.manifest.routines)
    CHECK(io::read_file(s("ds") + "/" + e.data_file) == io::read_file(s("ds_again") + "/" + e.data_file));
  CHECK(io::read_file(s("ds") + "/manifest.json") == io::read_file(s("ds_again") + "/manifest.json"));
}

TEST_CASE("config file supplies flags and the command line overrides it") {
  const auto& s = scratch();
  io::write_file_atomic(s("cfg.json"), nlohmann::json{{"subjects", 1}, {"reps", 3}, {"seed", 9}, {"out", s("cfg_ds")}}.dump());
  REQUIRE(run({"synth", "--config", s("cfg.json"), "--reps", "1"}).code == 0);
  const auto cfg = parse(s("cfg_ds") + "/run.json")["config"];
  CHECK(cfg["reps"] == "1");
  CHECK(cfg["seed"] == "9");
  CHECK(cfg["subjects"] == "1");
  CHECK(io::load_manifest(s("cfg_ds")).synth_config["reps"] == 1);

  io::write_file_atomic(s("cfg_bad.json"), R"({"subjects": 1, "nonsense": 2})");
  CHECK(run({"synth", "--config", s("cfg_bad.json"), "--out", s("x")}).code == 1);
  CHECK(run({"synth", "--config", s("no_such.json")}).code == 1);
}

TEST_CASE("preprocess, features, train and plot chain") {
  const auto& s = scratch();
  REQUIRE(run({"preprocess", "--in", s("ds"), "--out", s("win"), "--subjects", "1"}).code == 0);
  const auto w = io::load_windows(s("win") + "/subject_1");
  CHECK(w.size() == windows_of(s("ds"), 1));
  REQUIRE(run({"features", "--in", s("win") + "/subject_1", "--out", s("feat"), "--transforms", "cwt-ricker"}).code == 0);
  const auto fj = parse(s("feat") + "/features_cwt-ricker.json");
  CHECK(fj["count"] == w.size());
  CHECK(fs::file_size(s("feat") + "/features_cwt-ricker.bin") == w.size() * 48 * 40 * 40 * 4);

  const std::vector<std::string> train = {"train", "--in", s("ds"), "--model", "cnn2d", "--transform", "stft-b",
                                          "--epochs", "1", "--subjects", "0"};
  auto a = train, b = train;
  a.insert(a.end(), {"--out", s("a.rmgm")});
  b.insert(b.end(), {"--out", s("b.rmgm")});
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  const std::string bytes = io::read_file(s("a.rmgm"));
  CHECK(bytes == io::read_file(s("b.rmgm")));
  CHECK(learn::deserialize_model<float>(bytes)->config().arch == learn::Arch::CNN2D);
  CHECK(fs::exists(s("a.rmgm") + ".run.json"));

  REQUIRE(run({"plot", "--waveforms", s("ds"), "--subject", "1", "--gesture", "3", "--out", s("wf.svg")}).code == 0);
  CHECK(io::read_file(s("wf.svg")).find("DBA average") != std::string::npos);
  CHECK(run({"plot", "--out", s("none.svg")}).code == 1);
}

TEST_CASE("eval writes report and confusion CSV; plot renders it") {
  const auto& s = scratch();
  const auto r = run({"eval", "--in", s("ds"), "--cv", "kfold", "--k", "2", "--epochs", "1", "--inputs", "stft-a",
                      "--subjects", "0", "--out", s("ev")});
  REQUIRE(r.code == 0);
  const auto rep = eval::report_from_json(parse(s("ev") + "/report.json"));
  CHECK(rep.tested == static_cast<long>(windows_of(s("ds"), 0)));
  CHECK(rep.meta.k == 2);
  CHECK(rep.meta.inputs == std::vector<std::string>{"stft-a"});
  const std::string csv = io::read_file(s("ev") + "/confusion.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 24);

  REQUIRE(run({"plot", "--confusion", s("ev") + "/report.json", "--out", s("c1.svg")}).code == 0);
  REQUIRE(run({"plot", "--confusion", s("ev") + "/report.json", "--out", s("c2.svg")}).code == 0);
  CHECK(io::read_file(s("c1.svg")) == io::read_file(s("c2.svg")));
  CHECK(run({"eval", "--in", s("ds"), "--cv", "transfer", "--ablation", "units3", "--out", s("ev2")}).code == 1);
}

TEST_CASE("benchmark recovers the injected lead on noise-free pairs") {
  const auto& s = scratch();
  const auto r = run({"benchmark", "--lag", "0.183", "--noise-free", "--subjects", "1", "--reps", "2", "--out-csv",
                      s("bench.csv")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["n_samples"] == 14);
  CHECK(std::abs(j["mean_delay_s"].get<double>() - 0.183) <= 0.02);
  const std::string csv = io::read_file(s("bench.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 15);
  REQUIRE(run({"plot", "--scatter", s("bench.csv"), "--out", s("sc.svg")}).code == 0);
}
