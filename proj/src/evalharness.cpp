#include "rmg/evalharness.hpp"

#include "rmg/error.hpp"
#include "rmg/learn/serialize.hpp"
#include "rmg/preprocess.hpp"
#include "rmg/rng.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace rmg::eval {

std::string_view plan_kind_name(PlanKind k) {
  switch (k) {
    case PlanKind::KFold: return "kfold";
    case PlanKind::RoutineIndependent: return "routine";
    case PlanKind::Transfer: return "transfer";
  }
  return "?";
}

PlanKind parse_plan_kind(std::string_view name) {
  for (PlanKind k : {PlanKind::KFold, PlanKind::RoutineIndependent, PlanKind::Transfer})
    if (plan_kind_name(k) == name) return k;
  throw Error(ErrorCode::FormatError, "unknown CV kind '" + std::string(name) + "'");
}

// --- splits -----------------------------------------------------------------

namespace {

std::map<int, std::vector<int>> by_subject(std::span<const WindowInfo> windows) {
  std::map<int, std::vector<int>> out;
  for (std::size_t i = 0; i < windows.size(); ++i) out[windows[i].subject_id].push_back(static_cast<int>(i));
  return out;
}

// Fold index per id (ids of one subject), stratified round-robin.
std::vector<int> deal_folds(std::span<const WindowInfo> windows, const std::vector<int>& ids, int k, std::uint64_t seed,
                            std::vector<std::string>* warnings) {
  std::map<int, std::vector<int>> by_class;  // class -> positions in ids
  for (std::size_t p = 0; p < ids.size(); ++p) by_class[windows[static_cast<std::size_t>(ids[p])].label].push_back(static_cast<int>(p));
  std::vector<int> fold(ids.size(), 0);
  int next = 0;
  for (auto& [label, pos] : by_class) {
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(label), 0xf01d}));
    std::shuffle(pos.begin(), pos.end(), rng);
    if (static_cast<int>(pos.size()) < k && warnings)
      warnings->push_back("StratifyError: class " + std::to_string(label) + " has " + std::to_string(pos.size()) +
                          " windows for " + std::to_string(k) + " folds");
    for (int p : pos) {
      fold[static_cast<std::size_t>(p)] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

}  // namespace

std::vector<SplitPlan> kfold_splits(std::span<const WindowInfo> windows, int k, std::uint64_t seed,
                                    std::vector<std::string>* warnings) {
  if (k < 2) throw Error(ErrorCode::PlanError, "k-fold needs k >= 2");
  std::vector<SplitPlan> plans;
  for (const auto& [subject, ids] : by_subject(windows)) {
    if (static_cast<int>(ids.size()) < k)
      throw Error(ErrorCode::StratifyError, "subject " + std::to_string(subject) + " has fewer than k windows");
    const std::vector<int> fold =
        deal_folds(windows, ids, k, derive_seed(seed, {static_cast<std::uint64_t>(subject)}), warnings);
    for (int f = 0; f < k; ++f) {
      SplitPlan p;
      p.kind = PlanKind::KFold;
      p.subject_id = subject;
      p.fold_index = f;
      p.k = k;
      for (std::size_t q = 0; q < ids.size(); ++q) (fold[q] == f ? p.test_ids : p.train_ids).push_back(ids[q]);
      plans.push_back(std::move(p));
    }
  }
  return plans;
}

std::vector<SplitPlan> routine_splits(std::span<const WindowInfo> windows) {
  std::vector<SplitPlan> plans;
  for (const auto& [subject, ids] : by_subject(windows)) {
    std::set<int> routines;
    for (int i : ids) routines.insert(windows[static_cast<std::size_t>(i)].routine_id);
    if (routines.size() < 2)
      throw Error(ErrorCode::NotEnoughRoutines, "subject " + std::to_string(subject) + " has a single routine");
    int f = 0;
    for (int r : routines) {
      SplitPlan p;
      p.kind = PlanKind::RoutineIndependent;
      p.subject_id = subject;
      p.fold_index = f++;
      p.k = static_cast<int>(routines.size());
      for (int i : ids) (windows[static_cast<std::size_t>(i)].routine_id == r ? p.test_ids : p.train_ids).push_back(i);
      plans.push_back(std::move(p));
    }
  }
  return plans;
}

SplitPlan transfer_splits(std::span<const WindowInfo> windows, int new_subject, int m, std::uint64_t seed) {
  if (m < 2) throw Error(ErrorCode::PlanError, "transfer needs m >= 2");
  const auto groups = by_subject(windows);
  const auto it = groups.find(new_subject);
  if (it == groups.end()) throw Error(ErrorCode::SubjectError, "no windows for subject " + std::to_string(new_subject));
  if (static_cast<int>(it->second.size()) < m) throw Error(ErrorCode::StratifyError, "fewer than m windows");
  SplitPlan p;
  p.kind = PlanKind::Transfer;
  p.subject_id = new_subject;
  p.k = m;
  const std::vector<int> fold =
      deal_folds(windows, it->second, m, derive_seed(seed, {static_cast<std::uint64_t>(new_subject), 0x7f}), nullptr);
  for (std::size_t q = 0; q < it->second.size(); ++q) (fold[q] == 0 ? p.train_ids : p.test_ids).push_back(it->second[q]);
  for (const auto& [s, ids] : groups)
    if (s != new_subject) p.pretrain_ids.insert(p.pretrain_ids.end(), ids.begin(), ids.end());
  return p;
}

int ensemble_vote(std::span<const learn::Prediction> members) {
  if (members.empty()) throw Error(ErrorCode::ShapeMismatch, "no ensemble members");
  std::map<int, int> votes;
  std::map<int, double> conf;
  for (const auto& p : members) {
    ++votes[p.label];
    for (std::size_t c = 0; c < p.prob.size(); ++c) conf[static_cast<int>(c)] += p.prob[c];
  }
  int best = -1;
  for (const auto& [label, n] : votes) {
    if (best < 0 || n > votes[best] || (n == votes[best] && conf[label] > conf[best])) best = label;
  }
  return best;
}

// --- inputs -----------------------------------------------------------------

std::string_view input_name(InputKind k) {
  switch (k) {
    case InputKind::StftA: return "stft-a";
    case InputKind::StftB: return "stft-b";
    case InputKind::CwtMorlet: return "cwt-morlet";
    case InputKind::CwtRicker: return "cwt-ricker";
    case InputKind::CwtGaus: return "cwt-gaus";
    case InputKind::Waveform: return "waveform";
  }
  return "?";
}

InputKind parse_input(std::string_view name) {
  for (InputKind k : {InputKind::StftA, InputKind::StftB, InputKind::CwtMorlet, InputKind::CwtRicker,
                      InputKind::CwtGaus, InputKind::Waveform})
    if (input_name(k) == name) return k;
  return input_for(timefreq::parse_transform(name));
}

InputKind input_for(timefreq::Transform t) { return static_cast<InputKind>(static_cast<int>(t)); }

std::string_view selector_name(Selector s) {
  switch (s) {
    case Selector::All16: return "all16";
    case Selector::Self4: return "self4";
    case Selector::Units3: return "units3";
  }
  return "?";
}

Selector parse_selector(std::string_view name) {
  for (Selector s : {Selector::All16, Selector::Self4, Selector::Units3})
    if (selector_name(s) == name) return s;
  throw Error(ErrorCode::SelectorError, "unknown selector '" + std::string(name) + "'");
}

std::vector<int> selector_channels(Selector s) {
  std::vector<int> ch;
  for (int tx = 0; tx < synth::kNumUnits; ++tx)
    for (int rx = 0; rx < synth::kNumUnits; ++rx) {
      const bool keep = s == Selector::All16 || (s == Selector::Self4 && tx == rx) ||
                        (s == Selector::Units3 && tx < 3 && rx < 3);
      if (keep) ch.push_back(synth::channel_index(tx, rx));
    }
  return ch;
}

std::vector<int> selector_series(Selector s) {
  const std::vector<int> ch = selector_channels(s);
  if (ch.empty()) throw Error(ErrorCode::SelectorError, "selector keeps no channels");
  std::vector<int> out;
  for (int kind = 0; kind < 3; ++kind)
    for (int c : ch) out.push_back(kind * synth::kNumChannels + c);
  return out;
}

const RowMatrixXf& Bank::input(InputKind k) const {
  const auto it = inputs.find(k);
  if (it == inputs.end()) throw Error(ErrorCode::ShapeMismatch, "input " + std::string(input_name(k)) + " not loaded");
  return it->second;
}

std::uint64_t row_digest(const RowMatrixXf& x, Eigen::Index row) {
  Fnv1a h;
  h.update(x.row(row).data(), static_cast<std::size_t>(x.cols()) * sizeof(float));
  return h.digest();
}

Dataset::Dataset(std::vector<int> subjects, Loader loader, timefreq::FeatureConfig fc)
    : subjects_(std::move(subjects)),
      loader_(std::move(loader)),
      fx_(std::make_shared<timefreq::FeatureExtractor>(fc)) {}

Dataset Dataset::synthetic(const synth::DatasetConfig& cfg) {
  auto plans = std::make_shared<std::vector<synth::SubjectPlan>>(synth::plan_dataset(cfg));
  std::vector<int> ids;
  for (const auto& p : *plans) ids.push_back(p.subject_id);
  return Dataset(ids, [cfg, plans](int subject) {
    for (const auto& p : *plans)
      if (p.subject_id == subject) return synth::synth_subject(cfg, p);
    throw Error(ErrorCode::SubjectError, "unknown subject " + std::to_string(subject));
  });
}

Bank Dataset::load(int subject, std::span<const InputKind> kinds, std::span<const int> series) const {
  if (std::find(subjects_.begin(), subjects_.end(), subject) == subjects_.end())
    throw Error(ErrorCode::SubjectError, "unknown subject " + std::to_string(subject));
  if (kinds.empty()) throw Error(ErrorCode::ShapeMismatch, "no inputs requested");
  Bank bank;
  bank.subject_id = subject;
  if (series.empty()) {
    bank.series.resize(preprocess::kNumSeries);
    std::iota(bank.series.begin(), bank.series.end(), 0);
  } else {
    bank.series.assign(series.begin(), series.end());
  }
  const auto recs = loader_(subject);
  std::size_t total = 0;
  for (const auto& r : recs) total += r.annotations.size();
  const int grid = fx_->config().grid;
  const auto n = static_cast<Eigen::Index>(total);

  Eigen::Index row = 0;
  for (const auto& rec : recs) {
    const auto windows = preprocess::preprocess_pipeline(rec, rec.annotations);
    for (const auto& w : windows) {
      for (InputKind k : kinds) {
        RowMatrixXf& m = bank.inputs[k];
        if (k == InputKind::Waveform) {
          if (m.rows() == 0) m.resize(n, w.data.size());
          if (m.cols() != w.data.size()) throw Error(ErrorCode::ShapeMismatch, "window length varies");
          m.row(row) = Eigen::Map<const Eigen::RowVectorXd>(w.data.data(), w.data.size()).cast<float>();
        } else {
          const auto t = static_cast<timefreq::Transform>(static_cast<int>(k));
          const auto s = fx_->spectrogram(w, t, bank.series);
          if (m.rows() == 0) m.resize(n, static_cast<Eigen::Index>(bank.series.size()) * grid * grid);
          m.row(row) = Eigen::Map<const Eigen::RowVectorXf>(s.values.data(), static_cast<Eigen::Index>(s.values.size()));
        }
      }
      bank.windows.push_back({w.subject_id, w.routine_id, w.label, w.start_sample});
      ++row;
    }
  }
  const RowMatrixXf& first = bank.inputs.at(kinds.front());
  bank.digests.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) bank.digests.push_back(row_digest(first, r));
  return bank;
}

// --- running ----------------------------------------------------------------

learn::TrainConfig CvOptions::desk_train() {
  learn::TrainConfig t;
  t.lr = 1e-3;
  t.epochs = 15;
  t.batch_size = 32;
  return t;
}

learn::TrainConfig TransferOptions::desk_finetune() {
  learn::TrainConfig t = CvOptions::desk_train();
  t.epochs = 40;
  return t;
}

learn::ModelConfig model_for(const learn::ModelConfig& base, const Bank& bank, InputKind k) {
  learn::ModelConfig c = base;
  const RowMatrixXf& x = bank.input(k);
  if (c.arch == learn::Arch::Linear) {
    c.in_channels = static_cast<int>(x.cols());
  } else if (k == InputKind::Waveform) {
    if (c.arch != learn::Arch::CNN1D) throw Error(ErrorCode::ShapeMismatch, "waveform input needs the 1D CNN");
    c.in_channels = preprocess::kNumRows;
    c.length = static_cast<int>(x.cols()) / c.in_channels;
  } else {
    if (c.arch == learn::Arch::CNN1D) throw Error(ErrorCode::ShapeMismatch, "the 1D CNN takes waveform input");
    c.in_channels = static_cast<int>(bank.series.size());
  }
  c.num_classes = synth::kNumGestures;
  c.validate();
  if (c.input_dim() != x.cols()) throw Error(ErrorCode::ShapeMismatch, "model input does not match bank");
  return c;
}

namespace {

void say(const CvOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

std::vector<std::string> input_names(const std::vector<InputKind>& in) {
  std::vector<std::string> out;
  for (auto k : in) out.emplace_back(input_name(k));
  return out;
}

}  // namespace

std::vector<Outcome> run_plans(const Bank& bank, std::span<const SplitPlan> plans, const CvOptions& opts,
                               const Pretrained* pre, const learn::TrainConfig* train_override) {
  if (opts.inputs.empty()) throw Error(ErrorCode::PlanError, "no model inputs");
  std::vector<Outcome> out;
  for (const auto& plan : plans) {
    if (plan.train_ids.empty() || plan.test_ids.empty())
      throw Error(ErrorCode::PlanError, "degenerate plan: empty train or test set");
    const std::unordered_set<std::uint64_t> test_digests = [&] {
      std::unordered_set<std::uint64_t> s;
      for (int i : plan.test_ids) s.insert(bank.digests.at(static_cast<std::size_t>(i)));
      return s;
    }();
    const auto check = [&](std::span<const int> rows) {
      for (int r : rows)
        if (test_digests.count(bank.digests[static_cast<std::size_t>(r)]))
          throw Error(ErrorCode::PlanError, "test window leaked into a training batch (subject " +
                                                std::to_string(plan.subject_id) + ", fold " +
                                                std::to_string(plan.fold_index) + ")");
    };

    learn::DataView view;
    view.rows = plan.train_ids;
    for (int i : plan.train_ids) view.labels.push_back(bank.windows[static_cast<std::size_t>(i)].label);

    std::vector<std::vector<learn::Prediction>> member_preds;
    for (std::size_t q = 0; q < opts.inputs.size(); ++q) {
      const InputKind kind = opts.inputs[q];
      const auto tag = derive_seed(opts.seed, {static_cast<std::uint64_t>(plan.subject_id),
                                               static_cast<std::uint64_t>(plan.fold_index),
                                               static_cast<std::uint64_t>(kind)});
      std::unique_ptr<learn::Model<float>> model;
      if (pre) {
        const auto it = pre->models.find(kind);
        if (it == pre->models.end())
          throw Error(ErrorCode::PlanError, "no pretrained model for " + std::string(input_name(kind)));
        model = learn::deserialize_model<float>(it->second);
        if (model->config().input_dim() != bank.input(kind).cols())
          throw Error(ErrorCode::ShapeMismatch, "pretrained model does not match bank");
      } else {
        model = learn::make_model<float>(model_for(opts.model, bank, kind), tag);
      }
      learn::TrainConfig tc = train_override ? *train_override : opts.train;
      tc.seed = derive_seed(tag, {0x7a1});
      view.x = &bank.input(kind);
      try {
        const auto res = learn::train(*model, view, tc, check);
        say(opts, "subject " + std::to_string(plan.subject_id) + " fold " + std::to_string(plan.fold_index) + " " +
                      std::string(input_name(kind)) + " loss " + std::to_string(res.loss_curve.empty() ? 0.0 : res.loss_curve.back()));
      } catch (const Error& e) {
        throw Error(e.code(), std::string(plan_kind_name(plan.kind)) + " subject " + std::to_string(plan.subject_id) +
                                  " fold " + std::to_string(plan.fold_index) + " input " +
                                  std::string(input_name(kind)) + ": " + e.what());
      }
      member_preds.push_back(learn::predict(*model, bank.input(kind), plan.test_ids));
    }
    for (std::size_t t = 0; t < plan.test_ids.size(); ++t) {
      Outcome o;
      o.subject_id = plan.subject_id;
      o.window = plan.test_ids[t];
      o.truth = bank.windows[static_cast<std::size_t>(o.window)].label;
      o.fold = plan.fold_index;
      std::vector<learn::Prediction> members;
      for (const auto& mp : member_preds) {
        o.members.push_back(mp[t].label);
        members.push_back(mp[t]);
      }
      o.predicted = ensemble_vote(members);
      out.push_back(std::move(o));
    }
  }
  return out;
}

EvalReport run_cv(const Dataset& data, PlanKind kind, const CvOptions& opts, std::span<const int> subjects,
                  Selector sel) {
  if (kind == PlanKind::Transfer) throw Error(ErrorCode::PlanError, "use transfer_cv for transfer plans");
  if (kind == PlanKind::KFold && opts.k < 2) throw Error(ErrorCode::PlanError, "k-fold needs k >= 2");
  const std::vector<int> ids = subjects.empty() ? data.subjects() : std::vector<int>(subjects.begin(), subjects.end());
  const std::vector<int> series = selector_series(sel);
  std::vector<Outcome> all;
  for (int s : ids) {
    say(opts, "loading subject " + std::to_string(s));
    const Bank bank = data.load(s, opts.inputs, series);
    const auto plans = kind == PlanKind::KFold ? kfold_splits(bank.windows, opts.k, opts.seed) : routine_splits(bank.windows);
    auto o = run_plans(bank, plans, opts);
    all.insert(all.end(), o.begin(), o.end());
  }
  ReportMeta meta;
  meta.kind = std::string(plan_kind_name(kind));
  meta.model = std::string(learn::arch_name(opts.model.arch));
  meta.selector = std::string(selector_name(sel));
  meta.inputs = input_names(opts.inputs);
  meta.seed = opts.seed;
  meta.k = kind == PlanKind::KFold ? opts.k : 0;
  return make_report(all, meta);
}

EvalReport channel_ablation(const Dataset& data, Selector sel, const CvOptions& opts, std::span<const int> subjects) {
  return run_cv(data, PlanKind::KFold, opts, subjects, sel);
}

Pretrained pretrain(const Dataset& data, std::span<const int> subjects, const TransferOptions& opts) {
  if (subjects.empty()) throw Error(ErrorCode::SubjectError, "no pretraining subjects");
  Pretrained pre;
  for (InputKind kind : opts.cv.inputs) {
    // One input at a time keeps the pooled matrix within memory.
    std::vector<Bank> banks;
    Eigen::Index rows = 0;
    for (int s : subjects) {
      const InputKind one[] = {kind};
      banks.push_back(data.load(s, one));
      rows += banks.back().input(kind).rows();
    }
    Bank pooled;
    pooled.subject_id = -1;
    pooled.series = banks.front().series;
    RowMatrixXf& x = pooled.inputs[kind];
    x.resize(rows, banks.front().input(kind).cols());
    learn::DataView view;
    Eigen::Index r = 0;
    for (auto& b : banks) {
      RowMatrixXf& bx = b.inputs[kind];
      x.middleRows(r, bx.rows()) = bx;
      for (const auto& w : b.windows) {
        view.rows.push_back(static_cast<int>(r++));
        view.labels.push_back(w.label);
      }
      bx.resize(0, 0);
    }
    view.x = &x;
    const auto tag = derive_seed(opts.cv.seed, {0x9e7a, static_cast<std::uint64_t>(kind)});
    auto model = learn::make_model<float>(model_for(opts.cv.model, pooled, kind), tag);
    learn::TrainConfig tc = opts.pretrain;
    tc.seed = derive_seed(tag, {0x7a1});
    const auto res = learn::train(*model, view, tc);
    say(opts.cv, "pretrained " + std::string(input_name(kind)) + " on " + std::to_string(rows) + " windows, loss " +
                     std::to_string(res.loss_curve.empty() ? 0.0 : res.loss_curve.back()));
    pre.models[kind] = learn::serialize_model(*model);
  }
  return pre;
}

namespace {

ReportMeta transfer_meta(const TransferOptions& opts, const char* kind) {
  ReportMeta meta;
  meta.kind = kind;
  meta.model = std::string(learn::arch_name(opts.cv.model.arch));
  meta.inputs = input_names(opts.cv.inputs);
  meta.seed = opts.cv.seed;
  meta.k = opts.m;
  return meta;
}

}  // namespace

TransferResult run_transfer(const Bank& bank, const Pretrained& pre, const TransferOptions& opts) {
  const SplitPlan plans[] = {transfer_splits(bank.windows, bank.subject_id, opts.m, opts.cv.seed)};
  TransferResult r;
  r.with_outcomes = run_plans(bank, plans, opts.cv, &pre, &opts.finetune);
  r.without_outcomes = run_plans(bank, plans, opts.cv, nullptr, &opts.finetune);
  r.with_tl = make_report(r.with_outcomes, transfer_meta(opts, "transfer"));
  r.without_tl = make_report(r.without_outcomes, transfer_meta(opts, "direct"));
  return r;
}

TransferResult transfer_cv(const Dataset& data, std::span<const int> new_subjects, const TransferOptions& opts) {
  if (new_subjects.empty()) throw Error(ErrorCode::SubjectError, "no held-out subjects");
  TransferResult all;
  for (int s : new_subjects) {
    std::vector<int> others;
    for (int o : data.subjects())
      if (o != s) others.push_back(o);
    const Pretrained pre = pretrain(data, others, opts);
    const TransferResult r = run_transfer(data.load(s, opts.cv.inputs), pre, opts);
    all.with_outcomes.insert(all.with_outcomes.end(), r.with_outcomes.begin(), r.with_outcomes.end());
    all.without_outcomes.insert(all.without_outcomes.end(), r.without_outcomes.begin(), r.without_outcomes.end());
  }
  all.with_tl = make_report(all.with_outcomes, transfer_meta(opts, "transfer"));
  all.without_tl = make_report(all.without_outcomes, transfer_meta(opts, "direct"));
  return all;
}

ShiftResult position_shift_scenario(const synth::DatasetConfig& nominal, int subject, double shift_cm,
                                    const Pretrained& pre, const TransferOptions& opts) {
  synth::DatasetConfig shifted = nominal;
  shifted.shift_cm = shift_cm;
  shifted.shifted_subject = subject;
  const Dataset data = Dataset::synthetic(shifted);
  const Bank bank = data.load(subject, opts.cv.inputs);
  ShiftResult s;
  s.detail = run_transfer(bank, pre, opts);
  s.acc_with_tl = s.detail.with_tl.accuracy;
  s.acc_without_tl = s.detail.without_tl.accuracy;
  return s;
}

// --- reports ----------------------------------------------------------------

std::vector<std::vector<double>> EvalReport::percent() const {
  std::vector<std::vector<double>> p(counts.size());
  for (std::size_t r = 0; r < counts.size(); ++r) {
    const long n = std::accumulate(counts[r].begin(), counts[r].end(), 0L);
    p[r].assign(counts[r].size(), 0.0);
    if (n > 0)
      for (std::size_t c = 0; c < counts[r].size(); ++c) p[r][c] = 100.0 * static_cast<double>(counts[r][c]) / static_cast<double>(n);
  }
  return p;
}

EvalReport make_report(std::span<const Outcome> outcomes, const ReportMeta& meta, int num_classes) {
  EvalReport r;
  r.meta = meta;
  r.num_classes = num_classes;
  r.counts.assign(static_cast<std::size_t>(num_classes), std::vector<long>(static_cast<std::size_t>(num_classes), 0));
  std::map<int, std::pair<long, long>> per_subject;  // correct, total
  std::vector<long> member_correct(meta.inputs.size(), 0);
  for (const auto& o : outcomes) {
    if (o.truth < 0 || o.truth >= num_classes || o.predicted < 0 || o.predicted >= num_classes)
      throw Error(ErrorCode::LabelError, "outcome label out of range");
    ++r.counts[static_cast<std::size_t>(o.truth)][static_cast<std::size_t>(o.predicted)];
    auto& ps = per_subject[o.subject_id];
    ps.first += o.truth == o.predicted;
    ++ps.second;
    for (std::size_t q = 0; q < o.members.size() && q < member_correct.size(); ++q)
      member_correct[q] += o.members[q] == o.truth;
  }
  r.tested = static_cast<long>(outcomes.size());
  long correct = 0;
  for (int c = 0; c < num_classes; ++c) correct += r.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  r.accuracy = r.tested ? static_cast<double>(correct) / static_cast<double>(r.tested) : 0.0;
  double sum = 0.0;
  for (const auto& [s, ct] : per_subject) {
    r.subject_accuracy[s] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    sum += r.subject_accuracy[s];
  }
  r.mean_subject_accuracy = per_subject.empty() ? 0.0 : sum / static_cast<double>(per_subject.size());
  for (std::size_t q = 0; q < meta.inputs.size(); ++q)
    r.input_accuracy[meta.inputs[q]] = r.tested ? static_cast<double>(member_correct[q]) / static_cast<double>(r.tested) : 0.0;
  r.precision.assign(static_cast<std::size_t>(num_classes), 0.0);
  r.recall.assign(static_cast<std::size_t>(num_classes), 0.0);
  for (int c = 0; c < num_classes; ++c) {
    long col = 0, row = 0;
    for (int o = 0; o < num_classes; ++o) {
      col += r.counts[static_cast<std::size_t>(o)][static_cast<std::size_t>(c)];
      row += r.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(o)];
    }
    const double tp = static_cast<double>(r.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
    r.precision[static_cast<std::size_t>(c)] = col ? tp / static_cast<double>(col) : 0.0;
    r.recall[static_cast<std::size_t>(c)] = row ? tp / static_cast<double>(row) : 0.0;
  }
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json subj = nlohmann::json::object();
  for (const auto& [s, a] : r.subject_accuracy) subj[std::to_string(s)] = a;
  return {{"kind", r.meta.kind},
          {"model", r.meta.model},
          {"selector", r.meta.selector},
          {"inputs", r.meta.inputs},
          {"seed", r.meta.seed},
          {"k", r.meta.k},
          {"num_classes", r.num_classes},
          {"tested", r.tested},
          {"accuracy", r.accuracy},
          {"mean_subject_accuracy", r.mean_subject_accuracy},
          {"subject_accuracy", subj},
          {"input_accuracy", r.input_accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"counts", r.counts},
          {"confusion_percent", r.percent()}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.meta.kind = j.at("kind");
    r.meta.model = j.at("model");
    r.meta.selector = j.at("selector");
    r.meta.inputs = j.at("inputs").get<std::vector<std::string>>();
    r.meta.seed = j.at("seed");
    r.meta.k = j.at("k");
    r.num_classes = j.at("num_classes");
    r.tested = j.at("tested");
    r.accuracy = j.at("accuracy");
    r.mean_subject_accuracy = j.at("mean_subject_accuracy");
    for (const auto& [s, a] : j.at("subject_accuracy").items()) r.subject_accuracy[std::stoi(s)] = a.get<double>();
    r.input_accuracy = j.at("input_accuracy").get<std::map<std::string, double>>();
    r.precision = j.at("precision").get<std::vector<double>>();
    r.recall = j.at("recall").get<std::vector<double>>();
    r.counts = j.at("counts").get<std::vector<std::vector<long>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("report: ") + e.what());
  }
  if (static_cast<int>(r.counts.size()) != r.num_classes) throw Error(ErrorCode::FormatError, "report: counts shape");
  for (const auto& row : r.counts)
    if (static_cast<int>(row.size()) != r.num_classes) throw Error(ErrorCode::FormatError, "report: counts shape");
  return r;
}

std::string confusion_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "truth";
  for (int c = 0; c < r.num_classes; ++c) os << ",pred_" << c;
  os << "\n";
  const auto p = r.percent();
  for (int t = 0; t < r.num_classes; ++t) {
    os << t;
    for (int c = 0; c < r.num_classes; ++c) os << "," << p[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
    os << "\n";
  }
  return os.str();
}

}  // namespace rmg::eval
