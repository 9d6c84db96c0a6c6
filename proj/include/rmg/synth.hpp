#pragma once

// Synthetic MIMO near-field baseband generator.
//
// Four sensing units around the forearm give 4 x 4 = 16 Tx/Rx channels. Each
// channel is a complex baseband series whose deviation from a static carrier
// is driven by the activation of twelve forearm muscles through a per-unit
// coupling matrix. Companion two-channel sEMG-like traces are produced from
// the same activations for the benchmarking toolkit.

#include <Eigen/Core>

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rmg::synth {

inline constexpr int kNumMuscles = 12;
inline constexpr int kNumUnits = 4;
inline constexpr int kNumChannels = kNumUnits * kNumUnits;
inline constexpr int kNumGestures = 23;

enum class Muscle : int { ECU, ECRL, ECRB, FCU, FCR, ED, EDM, FDS, EPL, EI, FDP, FPL };
enum class Layer { Superficial, Intermediate, Deep };

std::string_view muscle_name(Muscle m);
Layer muscle_layer(Muscle m);
bool is_flexor(Muscle m);

enum class Basic { Grasp, PointThumb, PointIndex, PointIndMid, Point4, Fist, WristUp, WristDown, Rest };
enum class Tempo { Quick, Double, Slow, Static };

std::string_view basic_name(Basic b);
std::string_view tempo_name(Tempo t);

struct GestureSpec {
  int id = 0;
  Basic basic = Basic::Rest;
  Tempo tempo = Tempo::Static;
  std::vector<Muscle> step1;
  std::vector<Muscle> step2;
  double hold_s = 0.0;
  std::string code;  // short label, e.g. "P2x2" or "sF"
};

// Catalog order: 7 quick, 7 double, 8 slow, Rest; ids are the indices.
const std::vector<GestureSpec>& gesture_catalog();
const GestureSpec& gesture(int id);

// Envelope timing. Pulses are raised cosines of full width kPulseWidth.
inline constexpr double kPulseWidth = 0.4;
inline constexpr double kStepGap = 0.6;
inline constexpr double kHoldSeconds = 2.0;
inline constexpr double kDoubleRepeatGain = 0.85;

using Activation = std::array<double, kNumMuscles>;

// Activation of every muscle at time t (seconds into the 5 s window); the
// whole gesture timeline is shifted by `jitter`.
Activation activation_envelope(const GestureSpec& spec, double t, double jitter, double t_win_s = 5.0);

struct SensorLayout {
  std::array<std::array<double, kNumMuscles>, kNumUnits> coupling{};
  std::array<double, kNumMuscles> phase_offsets{};
  std::array<double, kNumChannels> carrier_phase{};
  double position_shift_cm = 0.0;
};

// Nominal placement: unit 1 near EPL/FPL, unit 2 over the extensors, unit 3
// over FCU/FCR/FDS and unit 4 over FDP. Phases are drawn from `seed`.
SensorLayout nominal_layout(std::uint64_t seed);

// Multiplicative log-normal coupling spread and phase jitter for one subject.
SensorLayout perturb_layout(const SensorLayout& base, double spread, std::uint64_t seed);

// Moving the armband by d cm rotates every coupling row by an angle
// proportional to d in a seeded direction and blurs it toward its mean.
SensorLayout shift_layout(const SensorLayout& base, double shift_cm, std::uint64_t seed);

struct SynthConfig {
  double fs = 250.0;
  double t_win_s = 5.0;
  double noise_std = 0.0;
  double subject_scale = 1.0;
  double timing_jitter_s = 0.15;
  double nonlin_beta = 0.0;
  // Static Tx->Rx leakage magnitude; 0 leaves only the muscle-driven terms.
  double carrier_level = 0.0;
  std::uint64_t seed = 0;
  double f_rf_hz = 9.0e8;  // metadata only

  double semg_noise_floor = 0.05;
  double semg_tail_s = 0.3;
  double semg_tail_gain = 0.3;

  int window_samples() const;
  void validate() const;
};

struct Annotation {
  std::int64_t start_sample = 0;
  int gesture_id = 0;
  int routine_id = 0;
  int subject_id = 0;
};

struct RawRecording {
  double fs = 250.0;
  // channels[i * 4 + j] is Tx unit i -> Rx unit j.
  std::vector<std::vector<std::complex<double>>> channels;
  std::vector<Annotation> annotations;

  std::size_t n_samples() const { return channels.empty() ? 0 : channels.front().size(); }
};

inline constexpr int channel_index(int tx, int rx) { return tx * kNumUnits + rx; }

// Activations as a 12 x N matrix (rows are muscles).
using ActivityMatrix = Eigen::MatrixXd;

ActivityMatrix window_activity(const GestureSpec& spec, const SynthConfig& cfg, double jitter);

// Channel (i, j) at sample n:
//   carrier_level * e^{i carrier_phase[ij]}
//   + sum_m c[i,m] c[j,m] a_m e^{i phase[m] (1 + (i - j) / 4)}
//   + beta (sum_m c[i,m] a_m)(sum_m c[j,m] a_m)
//   + complex Gaussian noise with total variance noise_std^2 (stream cfg.seed).
// The Tx/Rx-dependent factor on the muscle phase makes (i, j) and (j, i)
// observe different mixtures; self channels carry the bare muscle phase.
RawRecording mix_channels(const ActivityMatrix& activity, const SensorLayout& layout, const SynthConfig& cfg);

// Back-to-back 5 s windows of the given gestures, annotated. Per-window onset
// jitter and the subject amplitude scale are applied; output depends only on
// (subject, routine, sequence, layout, cfg).
RawRecording synth_routine(int subject_id, int routine_id, const std::vector<int>& gesture_sequence,
                           const SensorLayout& layout, const SynthConfig& cfg);

// Whole-routine activity (12 x N) for the given sequence, jitter included;
// synth_routine mixes exactly this matrix.
ActivityMatrix routine_activity(int subject_id, int routine_id, const std::vector<int>& gesture_sequence,
                                const SynthConfig& cfg);

struct SemgTraces {
  std::vector<double> anterior;
  std::vector<double> posterior;
};

// Two sEMG-like channels: flexor (anterior) and extensor (posterior) drive,
// advanced by lag_s, with an exponential tail and an additive noise floor.
SemgTraces synth_semg(const ActivityMatrix& activity, const SynthConfig& cfg, double lag_s);

// Raised-cosine pulse train (one muscle-like drive) at `rate_per_min` events,
// used for tempo-tracking scenarios. Events are centred at (k + 1/2) / rate.
std::vector<double> pulse_train(double rate_per_min, double duration_s, double fs, double width_s);

// ---------------------------------------------------------------------------
// Multi-subject datasets.

struct DatasetConfig {
  int subjects = 8;
  int reps = 30;
  int extra_reps_max = 4;           // each gesture gets reps + U{0..extra} repetitions
  std::optional<int> target_total;  // overrides the random extras to hit an exact total
  int routine_len = 60;
  double subject_spread = 0.25;     // log-normal coupling spread across subjects
  double routine_spread = 0.04;     // smaller spread between routines of one subject
  double scale_lo = 0.7;
  double scale_hi = 1.3;
  double shift_cm = 0.0;
  std::optional<int> shifted_subject;  // apply shift_cm to this subject only (all if empty)
  SynthConfig synth = standard_synth();

  static SynthConfig standard_synth();
};

struct RoutinePlan {
  int routine_id = 0;
  std::vector<int> gestures;
};

struct SubjectPlan {
  int subject_id = 0;
  double amplitude_scale = 1.0;
  std::vector<RoutinePlan> routines;
  std::size_t n_windows() const;
};

std::vector<SubjectPlan> plan_dataset(const DatasetConfig& cfg);

SensorLayout subject_layout(const DatasetConfig& cfg, int subject_id);

std::vector<RawRecording> synth_subject(const DatasetConfig& cfg, const SubjectPlan& plan);

// Deterministic digest of every field that affects generated samples.
std::uint64_t config_digest(const DatasetConfig& cfg);

}  // namespace rmg::synth
