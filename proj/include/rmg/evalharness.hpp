#pragma once

// Cross-validation regimes, ensembling, channel ablations and transfer learning.

#include "rmg/learn/train.hpp"
#include "rmg/matrix.hpp"
#include "rmg/synth.hpp"
#include "rmg/timefreq.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rmg::eval {

struct WindowInfo {
  int subject_id = 0;
  int routine_id = 0;
  int label = 0;
  std::int64_t start_sample = 0;
};

enum class PlanKind { KFold, RoutineIndependent, Transfer };
std::string_view plan_kind_name(PlanKind k);
PlanKind parse_plan_kind(std::string_view name);

// Ids index the window list the plan was built from.
struct SplitPlan {
  PlanKind kind = PlanKind::KFold;
  int subject_id = 0;
  int fold_index = 0;
  int k = 0;  // folds (kfold), routines (routine), m (transfer)
  std::vector<int> train_ids;
  std::vector<int> test_ids;
  std::vector<int> pretrain_ids;  // transfer only
};

// Stratified k-fold per subject: each class is shuffled (seeded) and dealt
// round-robin, continuing from where the previous class stopped, so fold sizes
// differ by at most one. Classes with fewer than k windows are reported in
// `warnings` (StratifyError as a warning); a subject with fewer than k windows
// throws StratifyError.
std::vector<SplitPlan> kfold_splits(std::span<const WindowInfo> windows, int k = 7, std::uint64_t seed = 42,
                                    std::vector<std::string>* warnings = nullptr);

// Leave-one-routine-out per subject.
std::vector<SplitPlan> routine_splits(std::span<const WindowInfo> windows);

// Fine-tune on one stratified 1/m fold of `new_subject`, test on the rest,
// pretrain on every other subject.
SplitPlan transfer_splits(std::span<const WindowInfo> windows, int new_subject, int m, std::uint64_t seed = 42);

// Plurality vote; ties go to the tied class with the largest summed
// probability, then to the lowest class index.
int ensemble_vote(std::span<const learn::Prediction> members);

// ---------------------------------------------------------------------------
// Model inputs.

enum class InputKind { StftA, StftB, CwtMorlet, CwtRicker, CwtGaus, Waveform };
std::string_view input_name(InputKind k);
InputKind parse_input(std::string_view name);
InputKind input_for(timefreq::Transform t);
inline constexpr std::array<InputKind, 5> kSpectrogramInputs = {
    InputKind::StftA, InputKind::StftB, InputKind::CwtMorlet, InputKind::CwtRicker, InputKind::CwtGaus};

enum class Selector { All16, Self4, Units3 };
std::string_view selector_name(Selector s);
Selector parse_selector(std::string_view name);
// Physical channels kept by a selector.
std::vector<int> selector_channels(Selector s);
// Series (amplitude, phase, complex of each kept channel), ascending.
std::vector<int> selector_series(Selector s);

// Features of one subject: one float matrix per input, rows aligned with `windows`.
struct Bank {
  int subject_id = 0;
  std::vector<WindowInfo> windows;
  std::vector<int> series;  // spectrogram planes
  std::map<InputKind, RowMatrixXf> inputs;
  std::vector<std::uint64_t> digests;  // content digest per window (first loaded input)

  const RowMatrixXf& input(InputKind k) const;
};

// Per-subject recordings on demand; materializes feature banks lazily.
class Dataset {
 public:
  using Loader = std::function<std::vector<synth::RawRecording>(int subject)>;

  Dataset(std::vector<int> subjects, Loader loader, timefreq::FeatureConfig fc = {});
  static Dataset synthetic(const synth::DatasetConfig& cfg);

  const std::vector<int>& subjects() const { return subjects_; }
  std::vector<synth::RawRecording> recordings(int subject) const { return loader_(subject); }

  // Series restricts spectrogram planes (all 48 when empty).
  Bank load(int subject, std::span<const InputKind> kinds, std::span<const int> series = {}) const;

 private:
  std::vector<int> subjects_;
  Loader loader_;
  std::shared_ptr<timefreq::FeatureExtractor> fx_;
};

// Window content digest used for the leakage check.
std::uint64_t row_digest(const RowMatrixXf& x, Eigen::Index row);

// ---------------------------------------------------------------------------
// Running experiments.

struct CvOptions {
  std::vector<InputKind> inputs{kSpectrogramInputs.begin(), kSpectrogramInputs.end()};
  learn::ModelConfig model = learn::ModelConfig::vit_desk();
  learn::TrainConfig train = desk_train();
  int k = 7;
  std::uint64_t seed = 42;
  std::function<void(const std::string&)> log;

  static learn::TrainConfig desk_train();
};

// Model shape adapted to the bank's planes or waveform rows.
learn::ModelConfig model_for(const learn::ModelConfig& base, const Bank& bank, InputKind k);

// Serialized pretrained models, one per input.
struct Pretrained {
  std::map<InputKind, std::string> models;
};

struct TransferOptions {
  CvOptions cv;
  int m = 5;
  learn::TrainConfig pretrain = CvOptions::desk_train();
  learn::TrainConfig finetune = desk_finetune();

  static learn::TrainConfig desk_finetune();
};

// Outcome for one tested window.
struct Outcome {
  int subject_id = 0;
  int window = 0;  // index into the subject's bank
  int truth = 0;
  std::vector<int> members;  // per-input predictions, in CvOptions::inputs order
  int predicted = 0;         // ensemble
  int fold = 0;
};

struct ReportMeta {
  std::string kind = "kfold";
  std::string model = "vit";
  std::string selector = "all16";
  std::vector<std::string> inputs;
  std::uint64_t seed = 42;
  int k = 7;
};

struct EvalReport {
  ReportMeta meta;
  int num_classes = synth::kNumGestures;
  std::vector<std::vector<long>> counts;  // [truth][predicted]
  double accuracy = 0.0;                  // pooled over all tested windows
  double mean_subject_accuracy = 0.0;
  std::map<int, double> subject_accuracy;
  std::map<std::string, double> input_accuracy;  // single-model accuracy per input
  std::vector<double> precision, recall;
  long tested = 0;

  // Row-normalized percentages; rows without samples are all zero.
  std::vector<std::vector<double>> percent() const;
};

EvalReport make_report(std::span<const Outcome> outcomes, const ReportMeta& meta,
                       int num_classes = synth::kNumGestures);
nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string confusion_csv(const EvalReport& r);

// Trains one model per input on each plan's training ids (optionally starting
// from pretrained weights), predicts the test ids and ensembles. Training
// batches are checked against the test windows' digests; any overlap throws
// PlanError.
std::vector<Outcome> run_plans(const Bank& bank, std::span<const SplitPlan> plans, const CvOptions& opts,
                               const Pretrained* pre = nullptr, const learn::TrainConfig* train_override = nullptr);

// kfold or routine CV over every subject (or `subjects`), personal models.
EvalReport run_cv(const Dataset& data, PlanKind kind, const CvOptions& opts, std::span<const int> subjects = {},
                  Selector sel = Selector::All16);

// As run_cv with the series restricted to the selector's channels.
EvalReport channel_ablation(const Dataset& data, Selector sel, const CvOptions& opts,
                            std::span<const int> subjects = {});

// One model per input on every window of `subjects`, loaded one input at a time.
Pretrained pretrain(const Dataset& data, std::span<const int> subjects, const TransferOptions& opts);

struct TransferResult {
  EvalReport with_tl;
  EvalReport without_tl;
  std::vector<Outcome> with_outcomes, without_outcomes;
};

// Fine-tune `pre` on a 1/m split of `bank`, and train the same split from
// scratch for comparison.
TransferResult run_transfer(const Bank& bank, const Pretrained& pre, const TransferOptions& opts);

// Pretrain on the other subjects of `data` and evaluate on each held-out subject.
TransferResult transfer_cv(const Dataset& data, std::span<const int> new_subjects, const TransferOptions& opts);

struct ShiftResult {
  double acc_with_tl = 0.0;
  double acc_without_tl = 0.0;
  TransferResult detail;
};

// Synthesizes `subject` with its sensor layout shifted by shift_cm and
// compares fine-tuning `pre` against direct training on the same 1/m split.
ShiftResult position_shift_scenario(const synth::DatasetConfig& nominal, int subject, double shift_cm,
                                    const Pretrained& pre, const TransferOptions& opts);

}  // namespace rmg::eval
