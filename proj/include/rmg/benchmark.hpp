#pragma once

// RMG vs sEMG comparison toolkit: envelopes, DTW averaging, pulse timing and
// rate estimation.

#include "rmg/synth.hpp"

#include <complex>
#include <span>
#include <utility>
#include <vector>

namespace rmg::bench {

struct Envelope {
  std::vector<double> values;
  bool passthrough = false;  // fewer than 3 local maxima; values == input
};

// Natural cubic spline through the local maxima, evaluated at every sample and
// held constant outside the first and last maximum.
Envelope envelope_spline(std::span<const double> x);

// Centered window of w samples; edges use the samples that exist.
std::vector<double> moving_average(std::span<const double> x, int w);

struct DtwResult {
  double distance = 0.0;
  std::vector<std::pair<int, int>> path;  // (index in a, index in b), from (0, 0)
};

// Global DTW, squared local cost, steps (1,0), (0,1), (1,1).
DtwResult dtw(std::span<const double> a, std::span<const double> b);

struct DbaResult {
  std::vector<double> average;
  std::vector<double> cost;  // total DTW cost before each iteration and after the last
};

// DTW barycenter averaging of equal-length series. Starts from `init` when
// given, otherwise from the medoid. Throws InvariantViolation if the total
// cost ever increases.
DbaResult dtw_barycenter(const std::vector<std::vector<double>>& set, int iterations,
                         const std::vector<double>* init = nullptr);

struct PulseFeature {
  double peak_time = 0.0;  // s
  double width = 0.0;      // s between half-magnitude crossings
  double peak_value = 0.0;
};

// Global maximum of the smoothed spline envelope; half magnitude is measured
// from the envelope minimum. Crossings are linearly interpolated.
PulseFeature detect_peak(std::span<const double> x, double fs, double smooth_s = 0.04);

struct ModalityComparison {
  double pearson_r = 0.0;
  bool r_degenerate = false;  // zero variance in a peak-time vector; r set to 1
  double mean_delay_s = 0.0;  // mean(rmg_peak - semg_peak)
  std::vector<std::pair<double, double>> peak_pairs;   // (rmg, semg)
  std::vector<std::pair<double, double>> width_pairs;  // (rmg, semg)
  std::vector<int> used;                               // input index of each pair
  int n_samples = 0;
  int excluded = 0;  // pairs where either side had no peak
  int skipped = 0;   // non-quick labels
};

ModalityComparison compare_modalities(const std::vector<std::vector<double>>& rmg,
                                      const std::vector<std::vector<double>>& semg, const std::vector<int>& labels,
                                      double fs);

// Events per minute: local maxima whose prominence is at least half the
// median local-maximum height.
double estimate_rate(std::span<const double> x, double fs);

// |h(t) - h(0)| of one baseband channel: the magnitude of the change from the
// window's first sample.
std::vector<double> baseband_deviation(std::span<const std::complex<double>> h);

// Paired quick-gesture windows from one synthetic activation: the RMG series
// is the baseband deviation of the extensor self channel (Tx2-Rx2) and the
// sEMG series the posterior trace, leading the activation by lag_s.
struct ModalityPairs {
  std::vector<std::vector<double>> rmg, semg;
  std::vector<int> labels;
  double fs = 250.0;
};

inline constexpr int kExtensorSelfChannel = synth::channel_index(1, 1);

ModalityPairs quick_gesture_pairs(const synth::SynthConfig& cfg, const synth::SensorLayout& layout, int subject,
                                  int reps, double lag_s);

}  // namespace rmg::bench
