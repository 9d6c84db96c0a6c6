#pragma once

// Time-frequency images for a gesture window: two STFT variants and three
// CWT variants, each plane min-max scaled and resized to a fixed grid.

#include "rmg/matrix.hpp"
#include "rmg/preprocess.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rmg::timefreq {

enum class Transform { StftA, StftB, CwtMorlet, CwtRicker, CwtGaus };
inline constexpr int kNumTransforms = 5;
inline constexpr std::array<Transform, kNumTransforms> kAllTransforms = {
    Transform::StftA, Transform::StftB, Transform::CwtMorlet, Transform::CwtRicker, Transform::CwtGaus};

std::string_view transform_name(Transform t);
Transform parse_transform(std::string_view name);

enum class Wavelet { Morlet, Ricker, Gaus4 };
Wavelet parse_wavelet(std::string_view name);
std::string_view wavelet_name(Wavelet w);

// Mother wavelets on a unit scale.
//   morlet: pi^-1/4 exp(i 6 t) exp(-t^2/2)
//   ricker: 2 / (sqrt(3) pi^1/4) (1 - t^2) exp(-t^2/2)
//   gaus4:  (t^4 - 6 t^2 + 3) exp(-t^2/2) / sqrt(105 sqrt(pi) / 16)   (4th derivative of a Gaussian)
std::complex<double> mother_wavelet(Wavelet w, double t);

// Angular frequency at which the wavelet's spectrum peaks (6, sqrt(2), 2).
double peak_angular_frequency(Wavelet w);

double pseudo_frequency(Wavelet w, double scale_s);
double scale_for_frequency(Wavelet w, double f_hz);

// `count` scales whose pseudo-frequencies are log-spaced from f_lo to f_hi
// (ascending frequency, i.e. descending scale).
std::vector<double> log_scales(Wavelet w, double f_lo, double f_hi, int count);

// One-sided magnitude STFT with a periodic Hann window and nfft = window
// length. Rows are frequency bins (0 .. win/2), columns are frames.
RowMatrixXd stft(std::span<const double> x, double window_len_s, double hop_s, double fs);

// |W(scale, b)| with W(s, b) = sum_n x[n] conj(psi((n - b) / (s fs)) / s) / fs,
// evaluated by FFT convolution. Rows follow `scales`.
RowMatrixXd cwt(std::span<const double> x, Wavelet w, std::span<const double> scales_s, double fs);
RowMatrixXd cwt(std::span<const double> x, std::string_view wavelet, std::span<const double> scales_s, double fs);

// Precomputed kernel spectra for a fixed (wavelet, scales, length, fs).
class CwtBank {
 public:
  CwtBank(Wavelet w, std::vector<double> scales_s, std::size_t n, double fs);
  ~CwtBank();
  CwtBank(const CwtBank&) = delete;
  CwtBank& operator=(const CwtBank&) = delete;

  RowMatrixXd magnitude(std::span<const double> x) const;
  // sqrt(|W(re)|^2 + |W(im)|^2) of a complex series given as two quadratures.
  RowMatrixXd magnitude(std::span<const double> re, std::span<const double> im) const;

  std::size_t length() const { return n_; }
  const std::vector<double>& scales() const { return scales_; }

 private:
  struct Impl;
  std::vector<double> scales_;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

// Bilinear resize with corner-aligned sampling.
RowMatrixXd resize_bilinear(const RowMatrixXd& plane, int h, int w);

struct FeatureConfig {
  double feature_fs = 50.0;  // windows are decimated to this rate first
  double stft_a_win_s = 0.5;
  double stft_a_hop_s = 0.1;
  double stft_b_win_s = 1.0;
  double stft_b_hop_s = 0.2;
  double stft_max_hz = 10.0;
  int cwt_scales = 16;
  double cwt_f_lo = 0.1;
  double cwt_f_hi = 5.0;
  int grid = 40;
};

struct Spectrogram {
  Transform transform = Transform::StftA;
  int planes = 0;
  int height = 40;
  int width = 40;
  std::vector<float> values;             // planes x height x width, each plane in [0, 1]
  std::vector<int> series;               // source series per plane
  std::vector<std::uint8_t> degenerate;  // plane had no dynamic range
  std::vector<double> freq_axis;         // Hz per output row
  std::vector<double> time_axis;         // s per output column

  std::span<const float> plane(int p) const {
    return {values.data() + static_cast<std::size_t>(p) * height * width, static_cast<std::size_t>(height * width)};
  }
};

struct FeatureSet {
  int label = 0;
  int subject_id = 0;
  int routine_id = 0;
  std::int64_t start_sample = 0;
  std::array<Spectrogram, kNumTransforms> spectrograms;
};

// Reusable extractor; holds FFT plans and wavelet banks for one window shape.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig cfg = {});
  ~FeatureExtractor();
  FeatureExtractor(const FeatureExtractor&) = delete;
  FeatureExtractor& operator=(const FeatureExtractor&) = delete;

  const FeatureConfig& config() const { return cfg_; }

  // Planes for the requested series (all 48 when empty).
  Spectrogram spectrogram(const preprocess::GestureWindow& w, Transform t, std::span<const int> series = {}) const;
  FeatureSet feature_set(const preprocess::GestureWindow& w, std::span<const int> series = {}) const;

 private:
  struct Impl;
  FeatureConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

FeatureSet make_feature_sets(const preprocess::GestureWindow& w, const FeatureConfig& cfg = {});

}  // namespace rmg::timefreq
