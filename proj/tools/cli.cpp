#include "cli.hpp"

#include "rmg/benchmark.hpp"
#include "rmg/cli_io.hpp"
#include "rmg/error.hpp"
#include "rmg/evalharness.hpp"
#include "rmg/learn/models.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <ostream>
#include <sstream>

namespace rmg::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Flags as they were resolved: given, from --config, or the default.
json effective(const CLI::App* app) {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::vector<std::string> vals = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    if (vals.empty() && !opt->get_default_str().empty()) vals.push_back(opt->get_default_str());
    if (opt->get_expected_max() > 1)
      j[name] = vals;
    else
      j[name] = vals.empty() ? json(nullptr) : json(vals.front());
  }
  return j;
}

class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool, bool, std::string) const override { return effective(app).dump(1); }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    // Flat keys belong to the invoked subcommand; {"<subcommand>": {...}} is
    // accepted too.
    if (j.size() == 1 && j.contains(section) && j[section].is_object()) j = j[section];
    std::vector<CLI::ConfigItem> items;
    collect(j, {section}, items);
    return items;
  }

  std::string section;

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      std::string name = key;
      std::replace(name.begin(), name.end(), '_', '-');
      if (value.is_null()) continue;
      if (value.is_object()) {
        auto p = parents;
        p.push_back(name);
        collect(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = name;
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(value));
      items.push_back(std::move(item));
    }
  }
};

CLI::App* subcommand(CLI::App& app, const std::string& name, const std::string& desc) {
  return app.add_subcommand(name, desc);
}

void write_run(const fs::path& dir_or_file, bool is_file, const std::string& command,
               const std::vector<std::string>& args, const CLI::App* sub, json seeds, json outputs) {
  io::RunRecord r{command, args, effective(sub), std::move(seeds), std::move(outputs)};
  if (is_file) {
    fs::path p = dir_or_file;
    p += ".run.json";
    io::write_file_atomic(p, io::to_json(r).dump(1) + "\n");
  } else {
    io::write_run_record(dir_or_file, r);
  }
}

learn::ModelConfig base_model(const std::string& name) {
  if (name == "vit") return learn::ModelConfig::vit_desk();
  if (name == "cnn2d") return learn::ModelConfig::cnn2d();
  return learn::ModelConfig::cnn1d();
}

std::vector<eval::InputKind> default_inputs(const std::string& model) {
  if (model == "cnn1d") return {eval::InputKind::Waveform};
  return {eval::kSpectrogramInputs.begin(), eval::kSpectrogramInputs.end()};
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> input_names() {
  std::vector<std::string> v;
  for (auto k : eval::kSpectrogramInputs) v.emplace_back(eval::input_name(k));
  v.emplace_back(eval::input_name(eval::InputKind::Waveform));
  return v;
}

std::vector<std::string> transform_names() {
  std::vector<std::string> v;
  for (auto t : timefreq::kAllTransforms) v.emplace_back(timefreq::transform_name(t));
  return v;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radiomyography gesture pipeline", "rmg"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  // CLI11 reads config files at the top level only; subcommands pass
  // --config up to it.
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  auto config = std::make_shared<JsonConfig>();
  config->section = args.empty() ? std::string() : args.front();
  app.config_formatter(config);
  app.set_config("--config", "", "JSON file mirroring the subcommand's flags; flags given on the command line win");

  // synth
  CLI::App* synth_cmd = subcommand(app, "synth", "Generate a synthetic multi-subject dataset");
  int s_subjects = 8, s_reps = 30, s_shifted = -1;
  std::uint64_t s_seed = 42;
  double s_shift = 0.0, s_noise = -1.0;
  std::string s_out;
  synth_cmd->add_option("--subjects", s_subjects, "Number of subjects")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--reps", s_reps, "Repetitions per gesture")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", s_seed, "Root seed");
  synth_cmd->add_option("--shift-cm", s_shift, "Armband shift in cm");
  synth_cmd->add_option("--shifted-subject", s_shifted, "Apply the shift to this subject only (-1: all)");
  synth_cmd->add_option("--noise", s_noise, "Baseband noise std (-1: standard)");
  synth_cmd->add_option("--out", s_out, "Output dataset directory")->required();

  // preprocess
  CLI::App* pre_cmd = subcommand(app, "preprocess", "Bandpass, normalize, segment and detrend");
  std::string p_in, p_out;
  std::vector<int> p_subjects;
  double p_lo = 0.1, p_hi = 5.0;
  pre_cmd->add_option("--in", p_in, "Dataset directory")->required();
  pre_cmd->add_option("--out", p_out, "Output directory (one subject_<id> folder per subject)")->required();
  pre_cmd->add_option("--subjects", p_subjects, "Subjects to process (default: all)");
  pre_cmd->add_option("--lo-hz", p_lo, "Bandpass low edge");
  pre_cmd->add_option("--hi-hz", p_hi, "Bandpass high edge");

  // features
  CLI::App* feat_cmd = subcommand(app, "features", "Spectrogram tensors for preprocessed windows");
  std::string f_in, f_out;
  std::vector<std::string> f_transforms = transform_names();
  feat_cmd->add_option("--in", f_in, "Window directory written by preprocess")->required();
  feat_cmd->add_option("--out", f_out, "Output directory")->required();
  feat_cmd->add_option("--transforms", f_transforms, "Transforms to compute")
      ->check(CLI::IsMember(transform_names()));

  // train
  CLI::App* train_cmd = subcommand(app, "train", "Train one model on every window of the chosen subjects");
  std::string t_in, t_model = "vit", t_transform, t_out;
  int t_epochs = 15, t_batch = 32;
  double t_lr = 1e-3;
  std::uint64_t t_seed = 42;
  std::vector<int> t_subjects;
  train_cmd->add_option("--in", t_in, "Dataset directory")->required();
  train_cmd->add_option("--model", t_model, "vit, cnn2d or cnn1d")->check(CLI::IsMember({"vit", "cnn2d", "cnn1d"}));
  train_cmd->add_option("--transform", t_transform, "Input (default: cwt-morlet, waveform for cnn1d)")
      ->check(CLI::IsMember(input_names()));
  train_cmd->add_option("--epochs", t_epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", t_batch, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", t_lr, "Adam learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", t_seed, "Root seed");
  train_cmd->add_option("--subjects", t_subjects, "Training subjects (default: all)");
  train_cmd->add_option("--out", t_out, "Output model file (RMGM)")->required();

  // eval
  CLI::App* eval_cmd = subcommand(app, "eval", "Cross-validation, ablation and transfer experiments");
  std::string e_in, e_cv = "kfold", e_ablation = "all16", e_model = "vit", e_out;
  int e_k = 7, e_m = 5, e_epochs = 15, e_ft_epochs = 40;
  double e_lr = 1e-3;
  std::uint64_t e_seed = 42;
  std::vector<int> e_subjects;
  std::vector<std::string> e_inputs;
  eval_cmd->add_option("--in", e_in, "Dataset directory")->required();
  eval_cmd->add_option("--cv", e_cv, "kfold, routine or transfer")->check(CLI::IsMember({"kfold", "routine", "transfer"}));
  eval_cmd->add_option("--k", e_k, "Folds for kfold");
  eval_cmd->add_option("--m", e_m, "Transfer split: fine-tune on 1/m")->check(CLI::Range(2, 100));
  eval_cmd->add_option("--ablation", e_ablation, "all16, self4 or units3")
      ->check(CLI::IsMember({"all16", "self4", "units3"}));
  eval_cmd->add_option("--model", e_model, "vit, cnn2d or cnn1d")->check(CLI::IsMember({"vit", "cnn2d", "cnn1d"}));
  eval_cmd->add_option("--inputs", e_inputs, "Ensemble inputs (default: five spectrograms, waveform for cnn1d)")
      ->check(CLI::IsMember(input_names()));
  eval_cmd->add_option("--epochs", e_epochs, "Training epochs")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--finetune-epochs", e_ft_epochs, "Transfer fine-tune epochs")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--lr", e_lr, "Adam learning rate")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", e_seed, "Root seed");
  eval_cmd->add_option("--subjects", e_subjects, "Subjects (held-out subjects for transfer; default: all)");
  eval_cmd->add_option("--out", e_out, "Output directory")->required();

  // benchmark
  CLI::App* bench_cmd = subcommand(app, "benchmark", "Compare RMG and sEMG pulse timing on quick gestures");
  double b_lag = 0.183;
  std::string b_csv;
  std::uint64_t b_seed = 42;
  int b_subjects = 8, b_reps = 10;
  bool b_noise_free = false;
  bench_cmd->add_option("--lag", b_lag, "sEMG lead in seconds")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--out-csv", b_csv, "Per-window peak and width table")->required();
  bench_cmd->add_option("--seed", b_seed, "Root seed");
  bench_cmd->add_option("--subjects", b_subjects, "Subjects")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--reps", b_reps, "Windows per quick gesture")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--noise-free", b_noise_free, "Disable baseband and sEMG noise");

  // plot
  CLI::App* plot_cmd = subcommand(app, "plot", "Render SVG figures");
  std::string g_confusion, g_scatter, g_waveforms, g_out;
  int g_subject = 0, g_gesture = 0, g_channel = bench::kExtensorSelfChannel, g_max = 10;
  plot_cmd->add_option("--confusion", g_confusion, "Report JSON written by eval");
  plot_cmd->add_option("--scatter", g_scatter, "CSV written by benchmark");
  plot_cmd->add_option("--waveforms", g_waveforms, "Dataset directory");
  plot_cmd->add_option("--subject", g_subject, "Subject for --waveforms");
  plot_cmd->add_option("--gesture", g_gesture, "Gesture id for --waveforms")->check(CLI::Range(0, synth::kNumGestures - 1));
  plot_cmd->add_option("--channel", g_channel, "Channel for --waveforms")->check(CLI::Range(0, synth::kNumChannels - 1));
  plot_cmd->add_option("--max-traces", g_max, "Repetitions drawn for --waveforms")->check(CLI::PositiveNumber);
  plot_cmd->add_option("--out", g_out, "Output SVG file")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, x;
    const int code = app.exit(e, o, x);
    out << o.str();
    err << x.str();
    if (code == 0) return 0;
    if (x.str().find("--help") == std::string::npos) err << "Run with --help for usage.\n";
    return 1;
  }

  auto logger = [&err](const std::string& msg) { err << msg << "\n"; };

  try {
    if (*synth_cmd) {
      synth::DatasetConfig dc;
      dc.subjects = s_subjects;
      dc.reps = s_reps;
      dc.synth.seed = s_seed;
      dc.shift_cm = s_shift;
      if (s_shifted >= 0) dc.shifted_subject = s_shifted;
      if (s_noise >= 0.0) dc.synth.noise_std = s_noise;
      const auto plans = synth::plan_dataset(dc);
      io::DatasetWriter w(s_out, io::hex64(synth::config_digest(dc)), io::to_json(dc));
      long windows = 0;
      json per = json::object();
      for (const auto& p : plans) {
        for (const auto& r : synth::synth_subject(dc, p)) w.add(r);
        windows += static_cast<long>(p.n_windows());
        per[std::to_string(p.subject_id)] = p.n_windows();
        logger("subject " + std::to_string(p.subject_id) + ": " + std::to_string(p.n_windows()) + " windows");
      }
      w.finish();
      const json summary{{"dataset", s_out}, {"windows", windows}, {"windows_per_subject", per}};
      write_run(s_out, false, "synth", args, synth_cmd, {{"root", s_seed}}, summary);
      out << summary.dump() << "\n";
      return 0;
    }

    if (*pre_cmd) {
      const auto m = io::load_manifest(p_in);
      const std::vector<int> ids = p_subjects.empty() ? m.subjects() : p_subjects;
      preprocess::PipelineOptions po;
      po.lo_hz = p_lo;
      po.hi_hz = p_hi;
      json written = json::object();
      for (int s : ids) {
        std::vector<preprocess::GestureWindow> windows;
        for (const auto& e : m.routines) {
          if (e.subject_id != s) continue;
          const auto rec = io::load_routine(p_in, e, m.fs);
          auto w = preprocess::preprocess_pipeline(rec, rec.annotations, po);
          std::move(w.begin(), w.end(), std::back_inserter(windows));
        }
        if (windows.empty()) throw Error(ErrorCode::SubjectError, "no windows for subject " + std::to_string(s));
        const fs::path dir = fs::path(p_out) / ("subject_" + std::to_string(s));
        io::save_windows(windows, dir);
        written[std::to_string(s)] = windows.size();
        logger("subject " + std::to_string(s) + ": " + std::to_string(windows.size()) + " windows");
      }
      write_run(p_out, false, "preprocess", args, pre_cmd, json::object(), written);
      out << json{{"windows", written}}.dump() << "\n";
      return 0;
    }

    if (*feat_cmd) {
      const auto windows = io::load_windows(f_in);
      if (windows.empty()) throw Error(ErrorCode::EmptySequence, "no windows in " + f_in);
      timefreq::FeatureExtractor fx;
      std::vector<int> labels;
      for (const auto& w : windows) labels.push_back(w.label);
      json written = json::array();
      for (const auto& name : f_transforms) {
        const auto t = timefreq::parse_transform(name);
        std::vector<timefreq::Spectrogram> specs;
        specs.reserve(windows.size());
        for (const auto& w : windows) specs.push_back(fx.spectrogram(w, t));
        io::save_features(specs, labels, f_out, name);
        written.push_back(name);
        logger(name + ": " + std::to_string(specs.size()) + " windows");
      }
      write_run(f_out, false, "features", args, feat_cmd, json::object(), {{"transforms", written}});
      out << json{{"transforms", written}, {"windows", windows.size()}}.dump() << "\n";
      return 0;
    }

    if (*train_cmd) {
      const auto data = io::open_dataset(t_in);
      eval::InputKind kind = t_model == "cnn1d" ? eval::InputKind::Waveform : eval::InputKind::CwtMorlet;
      if (!t_transform.empty()) kind = eval::parse_input(t_transform);
      eval::TransferOptions topts;
      topts.cv.inputs = {kind};
      topts.cv.model = base_model(t_model);
      topts.cv.seed = t_seed;
      topts.cv.log = logger;
      topts.pretrain.epochs = t_epochs;
      topts.pretrain.batch_size = t_batch;
      topts.pretrain.lr = t_lr;
      const std::vector<int> ids = t_subjects.empty() ? data.subjects() : t_subjects;
      const auto pre = eval::pretrain(data, ids, topts);
      const std::string& bytes = pre.models.at(kind);
      io::write_file_atomic(t_out, bytes);
      const json summary{{"model", t_out}, {"input", eval::input_name(kind)}, {"bytes", bytes.size()},
                         {"digest", io::hex64(io::fnv1a(bytes))}};
      write_run(t_out, true, "train", args, train_cmd, {{"root", t_seed}}, summary);
      out << summary.dump() << "\n";
      return 0;
    }

    if (*eval_cmd) {
      const auto data = io::open_dataset(e_in);
      eval::CvOptions opts;
      opts.model = base_model(e_model);
      opts.inputs.clear();
      for (const auto& n : e_inputs) opts.inputs.push_back(eval::parse_input(n));
      if (opts.inputs.empty()) opts.inputs = default_inputs(e_model);
      opts.k = e_k;
      opts.seed = e_seed;
      opts.train.epochs = e_epochs;
      opts.train.lr = e_lr;
      opts.log = logger;
      const fs::path dir = e_out;
      json outputs;
      if (e_cv == "transfer") {
        if (e_ablation != "all16") throw UsageError("--ablation applies to kfold and routine CV only");
        eval::TransferOptions topts;
        topts.cv = opts;
        topts.m = e_m;
        topts.pretrain = opts.train;
        topts.finetune.epochs = e_ft_epochs;
        topts.finetune.lr = e_lr;
        const auto res = eval::transfer_cv(data, e_subjects.empty() ? data.subjects() : e_subjects, topts);
        io::write_file_atomic(dir / "report.json", eval::to_json(res.with_tl).dump(1) + "\n");
        io::write_file_atomic(dir / "confusion.csv", eval::confusion_csv(res.with_tl));
        io::write_file_atomic(dir / "report_direct.json", eval::to_json(res.without_tl).dump(1) + "\n");
        io::write_file_atomic(dir / "confusion_direct.csv", eval::confusion_csv(res.without_tl));
        outputs = {{"accuracy_transfer", res.with_tl.accuracy}, {"accuracy_direct", res.without_tl.accuracy},
                   {"tested", res.with_tl.tested}};
      } else {
        const auto kind = eval::parse_plan_kind(e_cv);
        const auto rep = eval::run_cv(data, kind, opts, e_subjects, eval::parse_selector(e_ablation));
        io::write_file_atomic(dir / "report.json", eval::to_json(rep).dump(1) + "\n");
        io::write_file_atomic(dir / "confusion.csv", eval::confusion_csv(rep));
        outputs = {{"accuracy", rep.accuracy}, {"mean_subject_accuracy", rep.mean_subject_accuracy},
                   {"tested", rep.tested}};
      }
      write_run(dir, false, "eval", args, eval_cmd, {{"root", e_seed}}, outputs);
      out << outputs.dump() << "\n";
      return 0;
    }

    if (*bench_cmd) {
      synth::DatasetConfig dc;
      dc.subjects = b_subjects;
      dc.synth.seed = b_seed;
      synth::SynthConfig cfg = dc.synth;
      if (b_noise_free) {
        cfg.noise_std = 0.0;
        cfg.semg_noise_floor = 0.0;
      }
      bench::ModalityPairs all;
      std::vector<int> subject_of;
      for (int s = 0; s < b_subjects; ++s) {
        auto p = bench::quick_gesture_pairs(cfg, synth::subject_layout(dc, s), s, b_reps, b_lag);
        all.fs = p.fs;
        for (std::size_t i = 0; i < p.labels.size(); ++i) {
          all.rmg.push_back(std::move(p.rmg[i]));
          all.semg.push_back(std::move(p.semg[i]));
          all.labels.push_back(p.labels[i]);
          subject_of.push_back(s);
        }
      }
      const auto m = bench::compare_modalities(all.rmg, all.semg, all.labels, all.fs);
      std::string csv = "subject,gesture,rmg_peak_s,semg_peak_s,rmg_width_s,semg_width_s\n";
      int above = 0;
      for (std::size_t i = 0; i < m.used.size(); ++i) {
        const auto idx = static_cast<std::size_t>(m.used[i]);
        csv += std::to_string(subject_of[idx]) + "," + std::to_string(all.labels[idx]) + "," +
               num(m.peak_pairs[i].first) + "," + num(m.peak_pairs[i].second) + "," + num(m.width_pairs[i].first) +
               "," + num(m.width_pairs[i].second) + "\n";
        above += m.width_pairs[i].second > m.width_pairs[i].first;
      }
      io::write_file_atomic(b_csv, csv);
      const json summary{{"n_samples", m.n_samples},
                         {"excluded", m.excluded},
                         {"mean_delay_s", m.mean_delay_s},
                         {"pearson_r", m.pearson_r},
                         {"r_degenerate", m.r_degenerate},
                         {"semg_wider_fraction", m.n_samples ? static_cast<double>(above) / m.n_samples : 0.0}};
      write_run(b_csv, true, "benchmark", args, bench_cmd, {{"root", b_seed}}, summary);
      out << summary.dump() << "\n";
      return 0;
    }

    if (*plot_cmd) {
      const int chosen = !g_confusion.empty() + !g_scatter.empty() + !g_waveforms.empty();
      if (chosen != 1) throw UsageError("give exactly one of --confusion, --scatter, --waveforms");
      std::string svg;
      if (!g_confusion.empty()) {
        json j;
        try {
          j = json::parse(io::read_file(g_confusion));
        } catch (const json::exception& e) {
          throw Error(ErrorCode::FormatError, g_confusion + ": " + e.what());
        }
        svg = io::emit_confusion_svg(eval::report_from_json(j));
      } else if (!g_scatter.empty()) {
        std::istringstream in(io::read_file(g_scatter));
        std::string line;
        std::getline(in, line);
        std::vector<std::string> cols;
        {
          std::istringstream hs(line);
          for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
        }
        const auto find = [&](const std::string& name) {
          const auto it = std::find(cols.begin(), cols.end(), name);
          if (it == cols.end()) throw Error(ErrorCode::FormatError, g_scatter + ": missing column " + name);
          return static_cast<std::size_t>(it - cols.begin());
        };
        const std::size_t cx = find("rmg_width_s"), cy = find("semg_width_s");
        std::vector<std::pair<double, double>> pts;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          std::vector<std::string> cells;
          std::istringstream ls(line);
          for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
          if (cells.size() != cols.size()) throw Error(ErrorCode::FormatError, g_scatter + ": ragged row");
          try {
            pts.emplace_back(std::stod(cells[cx]), std::stod(cells[cy]));
          } catch (const std::logic_error&) {
            throw Error(ErrorCode::FormatError, g_scatter + ": bad number");
          }
        }
        svg = io::emit_scatter_svg(pts, "pulse width (s)", "RMG width (s)", "sEMG width (s)");
      } else {
        const auto m = io::load_manifest(g_waveforms);
        const auto win = static_cast<std::size_t>(std::lround(5.0 * m.fs));
        std::vector<std::vector<double>> set;
        for (const auto& e : m.routines) {
          if (e.subject_id != g_subject || static_cast<int>(set.size()) >= g_max) continue;
          bool wanted = false;
          for (const auto& a : e.annotations) wanted |= a.gesture_id == g_gesture;
          if (!wanted) continue;
          const auto rec = io::load_routine(g_waveforms, e, m.fs);
          const auto& ch = rec.channels[static_cast<std::size_t>(g_channel)];
          for (const auto& a : e.annotations) {
            if (a.gesture_id != g_gesture || static_cast<int>(set.size()) >= g_max) continue;
            const auto start = static_cast<std::size_t>(a.start_sample);
            if (start + win > ch.size()) continue;
            set.push_back(bench::baseband_deviation(std::span(ch).subspan(start, win)));
          }
        }
        if (set.empty())
          throw Error(ErrorCode::SubjectError, "no windows of gesture " + std::to_string(g_gesture) + " for subject " +
                                                   std::to_string(g_subject));
        std::vector<io::Trace> traces;
        for (std::size_t i = 0; i < set.size(); ++i)
          traces.push_back({"rep " + std::to_string(i + 1), set[i], m.fs, "#b0b0b0", 0.8});
        traces.push_back({"DBA average", bench::dtw_barycenter(set, 5).average, m.fs, "#d62728", 2.0});
        svg = io::emit_waveform_svg(traces, "subject " + std::to_string(g_subject) + ", gesture " +
                                                synth::gesture(g_gesture).code + ", channel " +
                                                std::to_string(g_channel) + " |h(t) - h(0)|");
      }
      io::write_file_atomic(g_out, svg);
      write_run(g_out, true, "plot", args, plot_cmd, json::object(), {{"svg", g_out}, {"bytes", svg.size()}});
      out << json{{"svg", g_out}}.dump() << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numeric(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace rmg::cli
