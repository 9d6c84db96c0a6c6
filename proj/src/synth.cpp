#include "rmg/synth.hpp"

#include "rmg/error.hpp"
#include "rmg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace rmg::synth {

namespace {

using enum Muscle;

constexpr double kPi = std::numbers::pi;

int idx(Muscle m) { return static_cast<int>(m); }

// Raised cosine of full width `width` centred at `c`, peak 1.
double pulse(double t, double c, double width) {
  const double half = 0.5 * width;
  const double d = t - c;
  if (d <= -half || d >= half) return 0.0;
  return 0.5 * (1.0 + std::cos(2.0 * kPi * d / width));
}

// Rise over [t0, t0 + ramp], hold until t1, fall over [t1, t1 + ramp].
double plateau(double t, double t0, double t1, double ramp) {
  if (t <= t0 || t >= t1 + ramp) return 0.0;
  if (t < t0 + ramp) return 0.5 * (1.0 - std::cos(kPi * (t - t0) / ramp));
  if (t <= t1) return 1.0;
  return 0.5 * (1.0 + std::cos(kPi * (t - t1) / ramp));
}

std::vector<GestureSpec> build_catalog() {
  struct Row {
    Basic basic;
    const char* code;
    std::vector<Muscle> step1;
    std::vector<Muscle> step2;
  };
  // Major muscle groups per basic gesture (step 1 / step 2).
  const std::vector<Row> rows = {
      {Basic::PointThumb, "P1", {EPL}, {FPL}},
      {Basic::PointIndex, "P2", {EI}, {FDP, FDS}},
      {Basic::PointIndMid, "P23", {EI, ED}, {FDP, FDS}},
      {Basic::Point4, "P4", {EI, ED, EDM}, {FDP, FDS}},
      {Basic::Grasp, "G", {ED, EPL, EDM}, {FDP, FDS, FPL}},
      {Basic::WristUp, "U", {ECU, ECRL, ECRB}, {FCU, FCR}},
      {Basic::WristDown, "D", {FCU, FCR}, {ECU, ECRL, ECRB}},
  };

  std::vector<GestureSpec> out;
  auto add = [&](const Row& r, Tempo tempo, std::string code) {
    GestureSpec g;
    g.id = static_cast<int>(out.size());
    g.basic = r.basic;
    g.tempo = tempo;
    g.step1 = r.step1;
    g.step2 = r.step2;
    g.hold_s = tempo == Tempo::Slow ? kHoldSeconds : 0.0;
    g.code = std::move(code);
    out.push_back(std::move(g));
  };
  for (const auto& r : rows) add(r, Tempo::Quick, r.code);
  for (const auto& r : rows) add(r, Tempo::Double, std::string(r.code) + "x2");
  for (const auto& r : rows) add(r, Tempo::Slow, std::string("s") + r.code);
  add({Basic::Fist, "F", {FDP, FDS, FPL}, {}}, Tempo::Slow, "sF");
  add({Basic::Rest, "R", {}, {}}, Tempo::Static, "R");
  return out;
}

std::normal_distribution<double> unit_normal() { return std::normal_distribution<double>(0.0, 1.0); }

}  // namespace

std::string_view muscle_name(Muscle m) {
  static constexpr std::array<std::string_view, kNumMuscles> names = {
      "ECU", "ECRL", "ECRB", "FCU", "FCR", "ED", "EDM", "FDS", "EPL", "EI", "FDP", "FPL"};
  return names[static_cast<std::size_t>(m)];
}

Layer muscle_layer(Muscle m) {
  switch (m) {
    case FDS: return Layer::Intermediate;
    case EPL:
    case EI:
    case FDP:
    case FPL: return Layer::Deep;
    default: return Layer::Superficial;
  }
}

bool is_flexor(Muscle m) { return m == FCU || m == FCR || m == FDS || m == FDP || m == FPL; }

std::string_view basic_name(Basic b) {
  switch (b) {
    case Basic::Grasp: return "Grasp";
    case Basic::PointThumb: return "PointThumb";
    case Basic::PointIndex: return "PointIndex";
    case Basic::PointIndMid: return "PointIndMid";
    case Basic::Point4: return "Point4";
    case Basic::Fist: return "Fist";
    case Basic::WristUp: return "WristUp";
    case Basic::WristDown: return "WristDown";
    case Basic::Rest: return "Rest";
  }
  return "?";
}

std::string_view tempo_name(Tempo t) {
  switch (t) {
    case Tempo::Quick: return "quick";
    case Tempo::Double: return "double";
    case Tempo::Slow: return "slow";
    case Tempo::Static: return "static";
  }
  return "?";
}

const std::vector<GestureSpec>& gesture_catalog() {
  static const std::vector<GestureSpec> catalog = build_catalog();
  return catalog;
}

const GestureSpec& gesture(int id) {
  const auto& cat = gesture_catalog();
  if (id < 0 || id >= static_cast<int>(cat.size()))
    throw Error(ErrorCode::RangeError, "gesture id " + std::to_string(id) + " outside catalog");
  return cat[static_cast<std::size_t>(id)];
}

Activation activation_envelope(const GestureSpec& spec, double t, double jitter, double t_win_s) {
  constexpr double eps = 1e-9;
  if (!(t >= -eps && t <= t_win_s + eps))
    throw Error(ErrorCode::OutOfWindow, "t=" + std::to_string(t) + " outside [0, " + std::to_string(t_win_s) + "]");

  Activation a{};
  const double s = t - jitter;
  double g1 = 0.0;
  double g2 = 0.0;
  switch (spec.tempo) {
    case Tempo::Static:
      return a;
    case Tempo::Quick:
      g1 = pulse(s, 1.6, kPulseWidth);
      g2 = pulse(s, 1.6 + kStepGap, kPulseWidth);
      break;
    case Tempo::Double:
      g1 = pulse(s, 1.0, kPulseWidth) + kDoubleRepeatGain * pulse(s, 2.2, kPulseWidth);
      g2 = pulse(s, 1.0 + kStepGap, kPulseWidth) + kDoubleRepeatGain * pulse(s, 2.2 + kStepGap, kPulseWidth);
      break;
    case Tempo::Slow: {
      const double ramp = 0.5 * kPulseWidth;
      const double rise = 0.6;
      const double fall = rise + ramp + spec.hold_s;
      g1 = plateau(s, rise, fall, ramp);
      g2 = pulse(s, fall + 0.5 * ramp + kStepGap, kPulseWidth);
      break;
    }
  }
  for (Muscle m : spec.step1) a[static_cast<std::size_t>(idx(m))] = std::max(a[static_cast<std::size_t>(idx(m))], g1);
  for (Muscle m : spec.step2) a[static_cast<std::size_t>(idx(m))] = std::max(a[static_cast<std::size_t>(idx(m))], g2);
  return a;
}

SensorLayout nominal_layout(std::uint64_t seed) {
  SensorLayout l;
  auto set = [&](int unit, std::initializer_list<std::pair<Muscle, double>> w) {
    l.coupling[static_cast<std::size_t>(unit)].fill(0.08);
    for (auto [m, v] : w) l.coupling[static_cast<std::size_t>(unit)][static_cast<std::size_t>(idx(m))] = v;
  };
  // Unit 1: thumb muscles.
  set(0, {{EPL, 1.0}, {FPL, 0.9}, {EI, 0.3}, {ED, 0.22}, {FDS, 0.2}, {FDP, 0.18}});
  // Unit 2: extensors of wrist and fingers.
  set(1, {{ED, 1.0}, {ECU, 0.9}, {EDM, 0.8}, {ECRB, 0.75}, {EI, 0.7}, {ECRL, 0.6}, {EPL, 0.3}, {FCU, 0.12}});
  // Unit 3: superficial/intermediate flexors.
  set(2, {{FCR, 1.0}, {FCU, 0.9}, {FDS, 0.85}, {FDP, 0.4}, {FPL, 0.3}, {ECRL, 0.12}});
  // Unit 4: deep finger flexor.
  set(3, {{FDP, 1.0}, {FDS, 0.5}, {FCU, 0.4}, {FPL, 0.35}, {EDM, 0.12}});

  std::mt19937_64 rng(derive_seed(seed, {0x1a7}));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  for (auto& p : l.phase_offsets) p = angle(rng);
  for (auto& p : l.carrier_phase) p = angle(rng);
  return l;
}

SensorLayout perturb_layout(const SensorLayout& base, double spread, std::uint64_t seed) {
  SensorLayout l = base;
  std::mt19937_64 rng(seed);
  auto n = unit_normal();
  for (auto& row : l.coupling)
    for (auto& w : row) w *= std::exp(spread * n(rng));
  for (auto& p : l.phase_offsets) p += spread * n(rng);
  for (auto& p : l.carrier_phase) p += spread * n(rng);
  return l;
}

SensorLayout shift_layout(const SensorLayout& base, double shift_cm, std::uint64_t seed) {
  SensorLayout l = base;
  l.position_shift_cm = base.position_shift_cm + shift_cm;
  if (shift_cm == 0.0) return l;

  constexpr double kRadPerCm = 0.12;
  constexpr double kBlurPerCm = 0.05;
  const double theta = kRadPerCm * shift_cm;
  const double blur = std::min(0.6, kBlurPerCm * shift_cm);

  std::mt19937_64 rng(derive_seed(seed, {0x5417}));
  auto n = unit_normal();
  for (auto& row : l.coupling) {
    Eigen::Map<Eigen::Matrix<double, kNumMuscles, 1>> r(row.data());
    const double norm = r.norm();
    Eigen::Matrix<double, kNumMuscles, 1> u;
    for (int k = 0; k < kNumMuscles; ++k) u[k] = n(rng);
    u -= u.dot(r) / (norm * norm) * r;
    u.normalize();
    Eigen::Matrix<double, kNumMuscles, 1> rotated = std::cos(theta) * r + std::sin(theta) * norm * u;
    rotated = rotated.cwiseMax(0.0);
    const double mean = rotated.mean();
    r = (1.0 - blur) * rotated + Eigen::Matrix<double, kNumMuscles, 1>::Constant(blur * mean);
  }
  return l;
}

int SynthConfig::window_samples() const { return static_cast<int>(std::lround(fs * t_win_s)); }

void SynthConfig::validate() const {
  const double n = fs * t_win_s;
  if (!(fs > 0.0) || std::abs(n - std::round(n)) > 1e-9)
    throw Error(ErrorCode::ShapeMismatch, "fs * t_win_s must be a positive integer");
  if (noise_std < 0.0 || semg_noise_floor < 0.0) throw Error(ErrorCode::RangeError, "noise levels must be >= 0");
}

ActivityMatrix window_activity(const GestureSpec& spec, const SynthConfig& cfg, double jitter) {
  const int n = cfg.window_samples();
  ActivityMatrix a(kNumMuscles, n);
  for (int k = 0; k < n; ++k) {
    const Activation v = activation_envelope(spec, k / cfg.fs, jitter, cfg.t_win_s);
    for (int m = 0; m < kNumMuscles; ++m) a(m, k) = v[static_cast<std::size_t>(m)];
  }
  return a;
}

RawRecording mix_channels(const ActivityMatrix& activity, const SensorLayout& layout, const SynthConfig& cfg) {
  if (activity.rows() != kNumMuscles)
    throw Error(ErrorCode::ShapeMismatch,
                "activity has " + std::to_string(activity.rows()) + " rows, expected " + std::to_string(kNumMuscles));
  const Eigen::Index n = activity.cols();

  Eigen::Matrix<double, kNumUnits, kNumMuscles> c;
  for (int i = 0; i < kNumUnits; ++i)
    for (int m = 0; m < kNumMuscles; ++m) c(i, m) = layout.coupling[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)];

  Eigen::Matrix<std::complex<double>, kNumChannels, kNumMuscles> w;
  for (int i = 0; i < kNumUnits; ++i)
    for (int j = 0; j < kNumUnits; ++j)
      for (int m = 0; m < kNumMuscles; ++m) {
        const double phase = layout.phase_offsets[static_cast<std::size_t>(m)] * (1.0 + (i - j) / 4.0);
        w(channel_index(i, j), m) = c(i, m) * c(j, m) * std::polar(1.0, phase);
      }

  const Eigen::Matrix<std::complex<double>, kNumChannels, Eigen::Dynamic> linear = w * activity.cast<std::complex<double>>();
  const Eigen::Matrix<double, kNumUnits, Eigen::Dynamic> drive = c * activity;

  RawRecording rec;
  rec.fs = cfg.fs;
  rec.channels.assign(kNumChannels, std::vector<std::complex<double>>(static_cast<std::size_t>(n)));

  std::mt19937_64 rng(derive_seed(cfg.seed, {0x6e015e}));
  auto gauss = unit_normal();
  const double sigma = cfg.noise_std / std::sqrt(2.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int i = 0; i < kNumUnits; ++i) {
      for (int j = 0; j < kNumUnits; ++j) {
        const int ch = channel_index(i, j);
        std::complex<double> v = linear(ch, k) + cfg.nonlin_beta * drive(i, k) * drive(j, k);
        if (cfg.carrier_level != 0.0)
          v += std::polar(cfg.carrier_level, layout.carrier_phase[static_cast<std::size_t>(ch)]);
        if (sigma > 0.0) v += std::complex<double>(sigma * gauss(rng), sigma * gauss(rng));
        rec.channels[static_cast<std::size_t>(ch)][static_cast<std::size_t>(k)] = v;
      }
    }
  }
  return rec;
}

ActivityMatrix routine_activity(int subject_id, int routine_id, const std::vector<int>& gesture_sequence,
                                const SynthConfig& cfg) {
  if (gesture_sequence.empty()) throw Error(ErrorCode::EmptySequence, "routine has no gestures");
  cfg.validate();
  const int w = cfg.window_samples();
  ActivityMatrix a(kNumMuscles, static_cast<Eigen::Index>(w) * static_cast<Eigen::Index>(gesture_sequence.size()));

  std::mt19937_64 rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(subject_id), static_cast<std::uint64_t>(routine_id), 0x717e}));
  auto gauss = unit_normal();
  const double clamp = 3.0 * cfg.timing_jitter_s;
  for (std::size_t k = 0; k < gesture_sequence.size(); ++k) {
    const GestureSpec& spec = gesture(gesture_sequence[k]);
    const double jitter = std::clamp(cfg.timing_jitter_s * gauss(rng), -clamp, clamp);
    a.middleCols(static_cast<Eigen::Index>(k) * w, w) = window_activity(spec, cfg, jitter);
  }
  return a;
}

RawRecording synth_routine(int subject_id, int routine_id, const std::vector<int>& gesture_sequence,
                           const SensorLayout& layout, const SynthConfig& cfg) {
  const ActivityMatrix a = routine_activity(subject_id, routine_id, gesture_sequence, cfg) * cfg.subject_scale;

  SynthConfig mix_cfg = cfg;
  mix_cfg.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(subject_id), static_cast<std::uint64_t>(routine_id), 0x3a1});
  RawRecording rec = mix_channels(a, layout, mix_cfg);

  const int w = cfg.window_samples();
  rec.annotations.reserve(gesture_sequence.size());
  for (std::size_t k = 0; k < gesture_sequence.size(); ++k)
    rec.annotations.push_back({static_cast<std::int64_t>(k) * w, gesture_sequence[k], routine_id, subject_id});
  return rec;
}

SemgTraces synth_semg(const ActivityMatrix& activity, const SynthConfig& cfg, double lag_s) {
  if (activity.rows() != kNumMuscles) throw Error(ErrorCode::ShapeMismatch, "activity must have 12 rows");
  if (lag_s < 0.0) throw Error(ErrorCode::RangeError, "lag_s must be >= 0");
  const Eigen::Index n = activity.cols();

  std::vector<double> ant(static_cast<std::size_t>(n), 0.0);
  std::vector<double> post(static_cast<std::size_t>(n), 0.0);
  const double shift = lag_s * cfg.fs;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double src = static_cast<double>(k) + shift;
    const auto k0 = static_cast<Eigen::Index>(std::floor(src));
    const double frac = src - static_cast<double>(k0);
    for (int m = 0; m < kNumMuscles; ++m) {
      auto at = [&](Eigen::Index q) { return q < n ? activity(m, q) : 0.0; };
      const double v = (1.0 - frac) * at(k0) + frac * at(k0 + 1);
      (is_flexor(static_cast<Muscle>(m)) ? ant : post)[static_cast<std::size_t>(k)] += v;
    }
  }

  // Unit-gain exponential tail, truncated at five time constants.
  const auto taps = static_cast<std::size_t>(std::ceil(5.0 * cfg.semg_tail_s * cfg.fs)) + 1;
  std::vector<double> h(taps);
  for (std::size_t q = 0; q < taps; ++q) h[q] = std::exp(-static_cast<double>(q) / (cfg.semg_tail_s * cfg.fs));
  const double hsum = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& v : h) v /= hsum;

  auto tail = [&](const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      double acc = 0.0;
      const std::size_t qmax = std::min(taps, k + 1);
      for (std::size_t q = 0; q < qmax; ++q) acc += h[q] * x[k - q];
      y[k] = (1.0 - cfg.semg_tail_gain) * x[k] + cfg.semg_tail_gain * acc;
    }
    return y;
  };

  SemgTraces out{tail(ant), tail(post)};
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x5e36}));
  std::normal_distribution<double> floor(0.0, cfg.semg_noise_floor);
  if (cfg.semg_noise_floor > 0.0) {
    for (auto& v : out.anterior) v += floor(rng);
    for (auto& v : out.posterior) v += floor(rng);
  }
  return out;
}

std::vector<double> pulse_train(double rate_per_min, double duration_s, double fs, double width_s) {
  const auto n = static_cast<std::size_t>(std::lround(duration_s * fs));
  std::vector<double> x(n, 0.0);
  const double period = 60.0 / rate_per_min;
  for (double c = 0.5 * period; c < duration_s; c += period) {
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor((c - width_s) * fs)));
    const auto hi = std::min(n, static_cast<std::size_t>(std::ceil((c + width_s) * fs)) + 1);
    for (std::size_t k = lo; k < hi; ++k) x[k] += pulse(static_cast<double>(k) / fs, c, width_s);
  }
  return x;
}

// ---------------------------------------------------------------------------

SynthConfig DatasetConfig::standard_synth() {
  SynthConfig s;
  s.noise_std = 0.12;
  s.nonlin_beta = 0.15;
  s.carrier_level = 2.0;
  s.timing_jitter_s = 0.15;
  s.seed = 42;
  return s;
}

std::size_t SubjectPlan::n_windows() const {
  std::size_t n = 0;
  for (const auto& r : routines) n += r.gestures.size();
  return n;
}

std::vector<SubjectPlan> plan_dataset(const DatasetConfig& cfg) {
  if (cfg.subjects <= 0 || cfg.reps <= 0) throw Error(ErrorCode::RangeError, "subjects and reps must be positive");
  const std::uint64_t seed = cfg.synth.seed;

  // repetitions[s][g]
  std::vector<std::vector<int>> reps(static_cast<std::size_t>(cfg.subjects), std::vector<int>(kNumGestures, cfg.reps));
  if (cfg.target_total) {
    const long base = static_cast<long>(cfg.subjects) * kNumGestures * cfg.reps;
    long extra = *cfg.target_total - base;
    if (extra < 0) throw Error(ErrorCode::RangeError, "target_total below subjects * 23 * reps");
    std::vector<std::pair<int, int>> slots;
    for (int s = 0; s < cfg.subjects; ++s)
      for (int g = 0; g < kNumGestures; ++g) slots.emplace_back(s, g);
    std::mt19937_64 rng(derive_seed(seed, {0x7a29e7}));
    std::shuffle(slots.begin(), slots.end(), rng);
    for (std::size_t q = 0; extra > 0; ++q, --extra) {
      auto [s, g] = slots[q % slots.size()];
      ++reps[static_cast<std::size_t>(s)][static_cast<std::size_t>(g)];
    }
  } else if (cfg.extra_reps_max > 0) {
    std::mt19937_64 rng(derive_seed(seed, {0xe7a}));
    std::uniform_int_distribution<int> extra(0, cfg.extra_reps_max);
    for (auto& row : reps)
      for (auto& r : row) r += extra(rng);
  }

  std::vector<SubjectPlan> plans;
  for (int s = 0; s < cfg.subjects; ++s) {
    SubjectPlan p;
    p.subject_id = s;
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(s), 0x91a4}));
    p.amplitude_scale = std::uniform_real_distribution<double>(cfg.scale_lo, cfg.scale_hi)(rng);

    std::vector<int> seq;
    for (int g = 0; g < kNumGestures; ++g)
      for (int r = 0; r < reps[static_cast<std::size_t>(s)][static_cast<std::size_t>(g)]; ++r) seq.push_back(g);
    std::shuffle(seq.begin(), seq.end(), rng);

    const auto n = static_cast<long>(seq.size());
    const long n_routines = std::max(1L, std::lround(static_cast<double>(n) / cfg.routine_len));
    for (long r = 0; r < n_routines; ++r) {
      const long lo = n * r / n_routines;
      const long hi = n * (r + 1) / n_routines;
      p.routines.push_back({static_cast<int>(r), std::vector<int>(seq.begin() + lo, seq.begin() + hi)});
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

SensorLayout subject_layout(const DatasetConfig& cfg, int subject_id) {
  const std::uint64_t seed = cfg.synth.seed;
  SensorLayout l = nominal_layout(seed);
  l = perturb_layout(l, cfg.subject_spread, derive_seed(seed, {static_cast<std::uint64_t>(subject_id), 0x5b1}));
  if (cfg.shift_cm != 0.0 && (!cfg.shifted_subject || *cfg.shifted_subject == subject_id))
    l = shift_layout(l, cfg.shift_cm, derive_seed(seed, {static_cast<std::uint64_t>(subject_id), 0x54f7}));
  return l;
}

std::vector<RawRecording> synth_subject(const DatasetConfig& cfg, const SubjectPlan& plan) {
  const SensorLayout base = subject_layout(cfg, plan.subject_id);
  SynthConfig sc = cfg.synth;
  sc.subject_scale = plan.amplitude_scale;
  std::vector<RawRecording> out;
  out.reserve(plan.routines.size());
  for (const auto& r : plan.routines) {
    // Each routine restarts hardware and re-seats the armband slightly.
    const SensorLayout l = perturb_layout(
        base, cfg.routine_spread,
        derive_seed(cfg.synth.seed, {static_cast<std::uint64_t>(plan.subject_id), static_cast<std::uint64_t>(r.routine_id), 0x4e5}));
    out.push_back(synth_routine(plan.subject_id, r.routine_id, r.gestures, l, sc));
  }
  return out;
}

std::uint64_t config_digest(const DatasetConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  const SynthConfig& s = cfg.synth;
  os << "subjects=" << cfg.subjects << ";reps=" << cfg.reps << ";extra=" << cfg.extra_reps_max
     << ";target=" << (cfg.target_total ? *cfg.target_total : -1) << ";routine_len=" << cfg.routine_len
     << ";subject_spread=" << cfg.subject_spread << ";routine_spread=" << cfg.routine_spread << ";scale=" << cfg.scale_lo
     << "," << cfg.scale_hi << ";shift=" << cfg.shift_cm << ";shifted=" << (cfg.shifted_subject ? *cfg.shifted_subject : -1)
     << ";fs=" << s.fs << ";t_win=" << s.t_win_s << ";noise=" << s.noise_std << ";jitter=" << s.timing_jitter_s
     << ";beta=" << s.nonlin_beta << ";carrier=" << s.carrier_level << ";seed=" << s.seed;
  const std::string text = os.str();
  Fnv1a h;
  h.update(text.data(), text.size());
  return h.digest();
}

}  // namespace rmg::synth
