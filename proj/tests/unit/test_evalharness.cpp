#include "rmg/error.hpp"
#include "rmg/evalharness.hpp"
#include "rmg/learn/serialize.hpp"
#include "rmg/preprocess.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace rmg;
using namespace rmg::eval;

namespace {

// `per_class[c]` windows of class c for one subject, routines of `routine_len` in order.
std::vector<WindowInfo> make_windows(const std::vector<int>& per_class, int subject = 0, int routine_len = 60) {
  std::vector<WindowInfo> w;
  for (std::size_t c = 0; c < per_class.size(); ++c)
    for (int i = 0; i < per_class[c]; ++i) w.push_back({subject, 0, static_cast<int>(c), 0});
  std::mt19937_64 rng(7);
  std::shuffle(w.begin(), w.end(), rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i].routine_id = static_cast<int>(i) / routine_len;
    w[i].start_sample = static_cast<std::int64_t>(i) * 1250;
  }
  return w;
}

std::vector<int> uniform_counts(int total, int classes = 23) {
  std::vector<int> n(static_cast<std::size_t>(classes), total / classes);
  for (int c = 0; c < total % classes; ++c) ++n[static_cast<std::size_t>(c)];
  return n;
}

learn::Prediction pred(int label, std::vector<double> prob) { return {label, std::move(prob)}; }

std::vector<double> one_hot(int c, int n = 23, double p = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n), (1.0 - p) / (n - 1));
  v[static_cast<std::size_t>(c)] = p;
  return v;
}

// Separable Gaussian clusters: class means on distinct axes.
Bank cluster_bank(int per_class, int classes, int dim, double noise, int subject = 0, std::uint64_t seed = 3) {
  Bank b;
  b.subject_id = subject;
  b.series = {0};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  RowMatrixXf x(per_class * classes, dim);
  int r = 0;
  for (int i = 0; i < per_class; ++i)
    for (int c = 0; c < classes; ++c, ++r) {
      for (int d = 0; d < dim; ++d) x(r, d) = static_cast<float>((d == c % dim ? 2.0 : 0.0) + n(rng));
      b.windows.push_back({subject, r / 20, c, r});
    }
  b.inputs[InputKind::StftA] = x;
  for (int q = 0; q < x.rows(); ++q) b.digests.push_back(row_digest(x, q));
  return b;
}

CvOptions linear_opts() {
  CvOptions o;
  o.inputs = {InputKind::StftA};
  o.model = learn::ModelConfig::linear(1, 23);
  o.train.epochs = 30;
  o.train.lr = 0.05;
  o.train.batch_size = 16;
  return o;
}

}  // namespace

TEST_CASE("k-fold: 700 windows in 7 folds of 100, disjoint, covering, stratified") {
  const auto w = make_windows(uniform_counts(700));
  const auto plans = kfold_splits(w, 7, 42);
  REQUIRE(plans.size() == 7);
  std::vector<int> seen(w.size(), 0);
  std::map<int, int> total;
  for (const auto& x : w) ++total[x.label];
  for (const auto& p : plans) {
    CHECK(p.test_ids.size() == 100);
    CHECK(p.train_ids.size() == 600);
    std::set<int> tr(p.train_ids.begin(), p.train_ids.end());
    for (int i : p.test_ids) {
      CHECK(tr.count(i) == 0);
      ++seen[static_cast<std::size_t>(i)];
    }
    std::map<int, int> hist;
    for (int i : p.test_ids) ++hist[w[static_cast<std::size_t>(i)].label];
    for (const auto& [c, n] : total) {
      const double expected = n / 7.0;
      CHECK(std::abs(hist[c] - expected) <= 1.0);
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

TEST_CASE("k-fold property: fold sizes differ by at most one for any class mix") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> cnt(0, 40);
    std::vector<int> per(23);
    for (auto& c : per) c = cnt(rng);
    if (std::accumulate(per.begin(), per.end(), 0) < 10) continue;
    const int k = 2 + trial % 9;
    const auto w = make_windows(per);
    const auto plans = kfold_splits(w, k, static_cast<std::uint64_t>(trial));
    std::size_t lo = w.size(), hi = 0, sum = 0;
    for (const auto& p : plans) {
      lo = std::min(lo, p.test_ids.size());
      hi = std::max(hi, p.test_ids.size());
      sum += p.test_ids.size();
      CHECK(!p.test_ids.empty());
    }
    CHECK(hi - lo <= 1);
    CHECK(sum == w.size());
  }
}

TEST_CASE("k-fold is deterministic and seed dependent") {
  const auto w = make_windows(uniform_counts(300));
  CHECK(kfold_splits(w, 7, 1)[0].test_ids == kfold_splits(w, 7, 1)[0].test_ids);
  CHECK(kfold_splits(w, 7, 1)[0].test_ids != kfold_splits(w, 7, 2)[0].test_ids);
}

TEST_CASE("k-fold errors and warnings") {
  std::vector<std::string> warn;
  std::vector<int> per = uniform_counts(230);
  per[5] = 3;
  const auto w = make_windows(per);
  const auto plans = kfold_splits(w, 7, 42, &warn);
  CHECK(plans.size() == 7);
  REQUIRE(warn.size() == 1);
  CHECK(warn[0].find("StratifyError") != std::string::npos);
  for (const auto& p : plans) CHECK(!p.test_ids.empty());

  CHECK_THROWS_AS(kfold_splits(w, 1, 42), Error);
  try {
    kfold_splits(make_windows({3}), 7, 42);
    FAIL("expected StratifyError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StratifyError);
  }
}

TEST_CASE("k-fold keeps subjects apart") {
  auto a = make_windows(uniform_counts(140), 0);
  const auto b = make_windows(uniform_counts(70), 3);
  a.insert(a.end(), b.begin(), b.end());
  const auto plans = kfold_splits(a, 7, 42);
  REQUIRE(plans.size() == 14);
  for (const auto& p : plans) {
    for (int i : p.train_ids) CHECK(a[static_cast<std::size_t>(i)].subject_id == p.subject_id);
    for (int i : p.test_ids) CHECK(a[static_cast<std::size_t>(i)].subject_id == p.subject_id);
  }
}

TEST_CASE("routine splits: one plan per routine, never straddling, each window tested once") {
  const auto w = make_windows(uniform_counts(600), 0, 60);
  const auto plans = routine_splits(w);
  REQUIRE(plans.size() == 10);
  std::vector<int> seen(w.size(), 0);
  for (const auto& p : plans) {
    std::set<int> test_r, train_r;
    for (int i : p.test_ids) {
      test_r.insert(w[static_cast<std::size_t>(i)].routine_id);
      ++seen[static_cast<std::size_t>(i)];
    }
    for (int i : p.train_ids) train_r.insert(w[static_cast<std::size_t>(i)].routine_id);
    CHECK(test_r.size() == 1);
    CHECK(train_r.count(*test_r.begin()) == 0);
    CHECK(p.train_ids.size() + p.test_ids.size() == w.size());
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));

  try {
    routine_splits(make_windows(uniform_counts(50), 0, 100));
    FAIL("expected NotEnoughRoutines");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotEnoughRoutines);
  }
}

TEST_CASE("transfer split sizes and subject separation") {
  auto w = make_windows(uniform_counts(730), 4);
  const auto other = make_windows(uniform_counts(500), 1);
  w.insert(w.end(), other.begin(), other.end());
  const auto p5 = transfer_splits(w, 4, 5);
  CHECK(p5.train_ids.size() == 146);
  CHECK(p5.test_ids.size() == 584);
  CHECK(p5.pretrain_ids.size() == 500);
  for (int i : p5.pretrain_ids) CHECK(w[static_cast<std::size_t>(i)].subject_id != 4);
  std::set<int> tr(p5.train_ids.begin(), p5.train_ids.end());
  for (int i : p5.test_ids) CHECK(tr.count(i) == 0);
  const auto p4 = transfer_splits(w, 4, 4);
  CHECK(p4.train_ids.size() > p5.train_ids.size());
  try {
    transfer_splits(w, 9, 5);
    FAIL("expected SubjectError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SubjectError);
  }
}

TEST_CASE("ensemble vote: plurality, confidence tie-break, unanimity") {
  {
    std::vector<learn::Prediction> m = {pred(3, one_hot(3)), pred(3, one_hot(3)), pred(7, one_hot(7)),
                                        pred(3, one_hot(3)), pred(2, one_hot(2))};
    CHECK(ensemble_vote(m) == 3);
  }
  {
    std::vector<learn::Prediction> m = {pred(1, one_hot(1, 23, 0.5)), pred(1, one_hot(1, 23, 0.5)),
                                        pred(2, one_hot(2, 23, 0.9)), pred(2, one_hot(2, 23, 0.9)),
                                        pred(5, one_hot(5, 23, 0.9))};
    CHECK(ensemble_vote(m) == 2);
  }
  {
    std::vector<learn::Prediction> m(5, pred(9, one_hot(0, 23, 0.99)));
    CHECK(ensemble_vote(m) == 9);
  }
  {
    // Exact tie in votes and confidence goes to the lower index.
    std::vector<learn::Prediction> m = {pred(4, one_hot(4, 23, 0.6)), pred(6, one_hot(6, 23, 0.6))};
    CHECK(ensemble_vote(m) == 4);
  }
}

TEST_CASE("ensemble vote property: result is always a plurality class") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> lab(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<learn::Prediction> m;
    std::map<int, int> votes;
    for (int q = 0; q < 5; ++q) {
      std::vector<double> p(5);
      for (auto& v : p) v = u(rng);
      const int l = lab(rng);
      m.push_back(pred(l, p));
      ++votes[l];
    }
    int top = 0;
    for (auto& [l, n] : votes) top = std::max(top, n);
    CHECK(votes[ensemble_vote(m)] == top);
  }
}

TEST_CASE("channel selectors") {
  CHECK(selector_series(Selector::All16).size() == 48);
  const auto self = selector_series(Selector::Self4);
  CHECK(self.size() == 12);
  for (int s : self) {
    const int ch = preprocess::series_channel(s);
    CHECK(ch / 4 == ch % 4);
  }
  CHECK(selector_channels(Selector::Units3).size() == 9);
  CHECK(selector_series(Selector::Units3).size() == 27);
  for (int ch : selector_channels(Selector::Units3)) {
    CHECK(ch / 4 < 3);
    CHECK(ch % 4 < 3);
  }
  CHECK(parse_selector("self4") == Selector::Self4);
  try {
    parse_selector("none");
    FAIL("expected SelectorError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SelectorError);
  }
}

TEST_CASE("report: confusion rows sum to 100 and accuracy matches raw counts") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> lab(0, 22);
  std::vector<Outcome> out;
  for (int i = 0; i < 400; ++i) {
    Outcome o;
    o.subject_id = i % 3;
    o.window = i;
    o.truth = lab(rng) % 20;  // classes 20..22 untested
    o.predicted = (i % 4 == 0) ? lab(rng) : o.truth;
    o.members = {o.predicted, o.truth};
    out.push_back(o);
  }
  ReportMeta meta;
  meta.inputs = {"a", "b"};
  const EvalReport r = make_report(out, meta);
  const auto p = r.percent();
  long correct = 0;
  for (int c = 0; c < 23; ++c) {
    const long row = std::accumulate(r.counts[static_cast<std::size_t>(c)].begin(), r.counts[static_cast<std::size_t>(c)].end(), 0L);
    const double s = std::accumulate(p[static_cast<std::size_t>(c)].begin(), p[static_cast<std::size_t>(c)].end(), 0.0);
    if (row > 0) CHECK(s == doctest::Approx(100.0).epsilon(1e-4));
    else CHECK(s == 0.0);
    correct += r.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  }
  long direct = 0;
  for (const auto& o : out) direct += o.truth == o.predicted;
  CHECK(correct == direct);
  CHECK(std::abs(r.accuracy - static_cast<double>(direct) / 400.0) < 1e-9);
  CHECK(r.input_accuracy.at("b") == 1.0);
  CHECK(r.subject_accuracy.size() == 3);
  double mean = 0;
  for (auto& [s, a] : r.subject_accuracy) mean += a / 3.0;
  CHECK(r.mean_subject_accuracy == doctest::Approx(mean));

  const EvalReport back = report_from_json(to_json(r));
  CHECK(back.counts == r.counts);
  CHECK(back.accuracy == r.accuracy);
  CHECK(to_json(back) == to_json(r));

  const std::string csv = confusion_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 24);
}

TEST_CASE("run_plans learns separable clusters and ensembles members") {
  const Bank bank = cluster_bank(10, 23, 23, 0.3);
  CvOptions o = linear_opts();
  o.inputs = {InputKind::StftA, InputKind::StftA, InputKind::StftA};
  const auto plans = kfold_splits(bank.windows, 5, 1);
  const auto out = run_plans(bank, plans, o);
  CHECK(out.size() == bank.windows.size());
  ReportMeta meta;
  meta.inputs = {"a", "b", "c"};
  const EvalReport r = make_report(out, meta);
  CHECK(r.accuracy > 0.95);
  for (const auto& x : out) CHECK(x.members.size() == 3);
}

TEST_CASE("run_plans rejects leakage and degenerate plans") {
  Bank bank = cluster_bank(4, 23, 23, 0.3);
  auto plans = kfold_splits(bank.windows, 4, 1);
  // Duplicate a test window's content into a training row.
  const int t = plans[0].test_ids[0];
  const int tr = plans[0].train_ids[0];
  bank.inputs[InputKind::StftA].row(tr) = bank.inputs[InputKind::StftA].row(t);
  bank.digests[static_cast<std::size_t>(tr)] = row_digest(bank.inputs[InputKind::StftA], tr);
  const SplitPlan leaky[] = {plans[0]};
  try {
    run_plans(bank, leaky, linear_opts());
    FAIL("expected PlanError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlanError);
  }
  SplitPlan empty = plans[1];
  empty.test_ids.clear();
  const SplitPlan bad[] = {empty};
  CHECK_THROWS_AS(run_plans(bank, bad, linear_opts()), Error);
}

TEST_CASE("run_cv rejects k < 2 before loading anything") {
  bool loaded = false;
  Dataset d({0}, [&](int) {
    loaded = true;
    return std::vector<synth::RawRecording>{};
  });
  CvOptions o = linear_opts();
  o.k = 1;
  try {
    run_cv(d, PlanKind::KFold, o);
    FAIL("expected PlanError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlanError);
  }
  CHECK(!loaded);
}

TEST_CASE("dataset load: shapes, selectors and digests") {
  const synth::SynthConfig sc = synth::DatasetConfig::standard_synth();
  const auto layout = synth::nominal_layout(sc.seed);
  Dataset d({2}, [&](int s) {
    return std::vector<synth::RawRecording>{synth::synth_routine(s, 0, {0, 5, 22}, layout, sc)};
  });
  const InputKind kinds[] = {InputKind::CwtMorlet, InputKind::Waveform};
  const auto series = selector_series(Selector::Self4);
  const Bank b = d.load(2, kinds, series);
  REQUIRE(b.windows.size() == 3);
  CHECK(b.windows[1].label == 5);
  CHECK(b.input(InputKind::CwtMorlet).rows() == 3);
  CHECK(b.input(InputKind::CwtMorlet).cols() == 12 * 1600);
  CHECK(b.input(InputKind::Waveform).cols() == 64 * 1250);
  CHECK(std::set<std::uint64_t>(b.digests.begin(), b.digests.end()).size() == 3);
  CHECK_THROWS_AS(b.input(InputKind::StftA), Error);

  const auto vit = model_for(learn::ModelConfig::vit_desk(), b, InputKind::CwtMorlet);
  CHECK(vit.in_channels == 12);
  const auto c1 = model_for(learn::ModelConfig::cnn1d(), b, InputKind::Waveform);
  CHECK(c1.in_channels == 64);
  CHECK(c1.length == 1250);
  CHECK_THROWS_AS(model_for(learn::ModelConfig::cnn1d(), b, InputKind::CwtMorlet), Error);
  try {
    d.load(5, kinds);
    FAIL("expected SubjectError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SubjectError);
  }

  // Planes of a subset equal the matching planes of the full stack.
  const InputKind one[] = {InputKind::CwtMorlet};
  const Bank full = d.load(2, one);
  for (std::size_t q = 0; q < series.size(); ++q)
    CHECK(full.input(InputKind::CwtMorlet).row(0).segment(series[q] * 1600, 1600) ==
          b.input(InputKind::CwtMorlet).row(0).segment(static_cast<Eigen::Index>(q) * 1600, 1600));
}

TEST_CASE("transfer: fine-tuning a pretrained model uses the 1/m split") {
  const Bank bank = cluster_bank(10, 23, 23, 0.5, 7);
  TransferOptions t;
  t.cv = linear_opts();
  t.m = 5;
  t.finetune = t.cv.train;
  t.finetune.epochs = 3;
  // Pretrained on differently seeded clusters of the same structure.
  const Bank other = cluster_bank(20, 23, 23, 0.5, 1, 99);
  auto model = learn::make_model<float>(model_for(t.cv.model, other, InputKind::StftA), 1);
  learn::DataView v{&other.input(InputKind::StftA), {}, {}};
  for (std::size_t i = 0; i < other.windows.size(); ++i) {
    v.rows.push_back(static_cast<int>(i));
    v.labels.push_back(other.windows[i].label);
  }
  learn::train(*model, v, t.cv.train);
  Pretrained pre;
  pre.models[InputKind::StftA] = learn::serialize_model(*model);

  const TransferResult r = run_transfer(bank, pre, t);
  CHECK(r.with_tl.tested == 184);
  CHECK(r.without_tl.tested == 184);
  CHECK(r.with_tl.accuracy >= r.without_tl.accuracy);
  CHECK(r.with_tl.accuracy > 0.85);
}
