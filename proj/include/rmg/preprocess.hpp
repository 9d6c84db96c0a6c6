#pragma once

// Raw 16-channel baseband -> labeled, detrended 5 s windows.
//
// Every physical channel contributes three series: amplitude, unwrapped
// phase and the complex value itself (48 series). The complex series is
// stored as two quadrature rows, so the row layout of a SeriesSet or a
// GestureWindow is
//   [0, 16)  amplitude of channel c
//   [16, 32) unwrapped phase of channel c
//   [32, 48) in-phase part of channel c
//   [48, 64) quadrature part of channel c

#include "rmg/matrix.hpp"
#include "rmg/synth.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace rmg::preprocess {

inline constexpr int kNumSeries = 48;
inline constexpr int kNumRows = 64;

enum class SeriesKind { Amplitude, Phase, Complex };

SeriesKind series_kind(int series);
int series_channel(int series);
// Data rows holding one series (1 row, or 2 quadrature rows for complex).
std::vector<int> series_rows(int series);
std::string series_name(int series);

struct SeriesSet {
  double fs = 250.0;
  RowMatrixXd rows;  // kNumRows x N
};

struct GestureWindow {
  int subject_id = 0;
  int routine_id = 0;
  int label = 0;
  std::int64_t start_sample = 0;
  double fs = 250.0;
  RowMatrixXd data;  // kNumRows x (fs * 5)
};

std::vector<double> unwrap_phase(std::span<const double> wrapped);

SeriesSet augment_channels(const synth::RawRecording& rec);

struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Second-order Butterworth high-pass at lo cascaded with a second-order
// Butterworth low-pass at hi (bilinear transform, prewarped).
std::vector<Biquad> design_bandpass(double lo_hz, double hi_hz, double fs);

// Complex frequency response magnitude of the cascade at f (single pass).
double response_magnitude(std::span<const Biquad> sos, double f_hz, double fs);

// Forward-backward filtering with steady-state initial conditions and odd
// extension at both ends.
std::vector<double> sosfiltfilt(std::span<const Biquad> sos, std::span<const double> x, std::size_t padlen);

std::vector<double> bandpass(std::span<const double> x, double fs, double lo_hz = 0.1, double hi_hz = 5.0);

// Zero mean, unit population standard deviation.
std::vector<double> normalize(std::span<const double> x);

// One window per annotation, in annotation order.
std::vector<GestureWindow> segment(const SeriesSet& s, std::span<const synth::Annotation> annotations,
                                   int window_samples);

void detrend_row(std::span<double> row);
GestureWindow detrend(GestureWindow w);

struct PipelineOptions {
  double lo_hz = 0.1;
  double hi_hz = 5.0;
  double t_win_s = 5.0;
};

// bandpass -> normalize (per routine) -> segment -> annotate -> detrend.
std::vector<GestureWindow> preprocess_pipeline(const synth::RawRecording& rec,
                                               std::span<const synth::Annotation> annotations,
                                               const PipelineOptions& opts = {});

}  // namespace rmg::preprocess
