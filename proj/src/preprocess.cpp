#include "rmg/preprocess.hpp"

#include "rmg/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace rmg::preprocess {

namespace {

constexpr double kPi = std::numbers::pi;

Error with_context(const Error& e, const std::string& where) { return Error(e.code(), where + ": " + e.what()); }

}  // namespace

SeriesKind series_kind(int series) {
  if (series < 16) return SeriesKind::Amplitude;
  if (series < 32) return SeriesKind::Phase;
  return SeriesKind::Complex;
}

int series_channel(int series) { return series % synth::kNumChannels; }

std::vector<int> series_rows(int series) {
  if (series < 0 || series >= kNumSeries) throw Error(ErrorCode::RangeError, "series index out of range");
  if (series < 32) return {series};
  return {series, series + 16};
}

std::string series_name(int series) {
  const int c = series_channel(series);
  const std::string ch = "[" + std::to_string(c / 4 + 1) + "," + std::to_string(c % 4 + 1) + "]";
  switch (series_kind(series)) {
    case SeriesKind::Amplitude: return "amp" + ch;
    case SeriesKind::Phase: return "phase" + ch;
    case SeriesKind::Complex: return "cplx" + ch;
  }
  return "?";
}

std::vector<double> unwrap_phase(std::span<const double> wrapped) {
  std::vector<double> out(wrapped.begin(), wrapped.end());
  double offset = 0.0;
  for (std::size_t k = 1; k < out.size(); ++k) {
    const double d = wrapped[k] - wrapped[k - 1];
    // Choose the 2*pi multiple that brings the step into [-pi, pi].
    offset -= 2.0 * kPi * std::round(d / (2.0 * kPi));
    out[k] = wrapped[k] + offset;
  }
  return out;
}

SeriesSet augment_channels(const synth::RawRecording& rec) {
  if (rec.channels.size() != static_cast<std::size_t>(synth::kNumChannels))
    throw Error(ErrorCode::ChannelCountError,
                "expected 16 channels, got " + std::to_string(rec.channels.size()));
  const std::size_t n = rec.n_samples();
  for (const auto& ch : rec.channels)
    if (ch.size() != n) throw Error(ErrorCode::ShapeMismatch, "channels differ in length");

  SeriesSet s;
  s.fs = rec.fs;
  s.rows.resize(kNumRows, static_cast<Eigen::Index>(n));
  std::vector<double> angle(n);
  for (int c = 0; c < synth::kNumChannels; ++c) {
    const auto& ch = rec.channels[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      s.rows(c, kk) = std::abs(ch[k]);
      s.rows(32 + c, kk) = ch[k].real();
      s.rows(48 + c, kk) = ch[k].imag();
      angle[k] = std::arg(ch[k]);
    }
    const auto unwrapped = unwrap_phase(angle);
    for (std::size_t k = 0; k < n; ++k) s.rows(16 + c, static_cast<Eigen::Index>(k)) = unwrapped[k];
  }
  return s;
}

std::vector<Biquad> design_bandpass(double lo_hz, double hi_hz, double fs) {
  if (!(fs > 2.0 * hi_hz)) throw Error(ErrorCode::NyquistError, "fs must exceed 2 * hi");
  if (!(lo_hz > 0.0 && lo_hz < hi_hz)) throw Error(ErrorCode::RangeError, "need 0 < lo < hi");

  const double sqrt2 = std::numbers::sqrt2;
  auto section = [&](double fc, bool highpass) {
    const double k = std::tan(kPi * fc / fs);
    const double norm = 1.0 / (1.0 + sqrt2 * k + k * k);
    Biquad q{};
    if (highpass) {
      q.b0 = norm;
      q.b1 = -2.0 * norm;
      q.b2 = norm;
    } else {
      q.b0 = k * k * norm;
      q.b1 = 2.0 * q.b0;
      q.b2 = q.b0;
    }
    q.a1 = 2.0 * (k * k - 1.0) * norm;
    q.a2 = (1.0 - sqrt2 * k + k * k) * norm;
    return q;
  };
  return {section(lo_hz, true), section(hi_hz, false)};
}

double response_magnitude(std::span<const Biquad> sos, double f_hz, double fs) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * kPi * f_hz / fs);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& q : sos) h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
  return std::abs(h);
}

namespace {

// Direct form II transposed, in place. `zi` holds the per-section state for a
// unit step already at steady state; it is scaled by `x0`.
void sosfilt_inplace(std::span<const Biquad> sos, std::vector<double>& x, double x0) {
  double gain = 1.0;
  for (const auto& q : sos) {
    const double dc = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double z2_ss = q.b2 - q.a2 * dc;
    const double z1_ss = q.b1 - q.a1 * dc + z2_ss;
    double z1 = z1_ss * gain * x0;
    double z2 = z2_ss * gain * x0;
    for (double& v : x) {
      const double in = v;
      const double y = q.b0 * in + z1;
      z1 = q.b1 * in - q.a1 * y + z2;
      z2 = q.b2 * in - q.a2 * y;
      v = y;
    }
    gain *= dc;
  }
}

}  // namespace

std::vector<double> sosfiltfilt(std::span<const Biquad> sos, std::span<const double> x, std::size_t padlen) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  padlen = std::min(padlen, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t k = padlen; k >= 1; --k) ext.push_back(2.0 * x[0] - x[k]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t k = 1; k <= padlen; ++k) ext.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

  sosfilt_inplace(sos, ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen), ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

std::vector<double> bandpass(std::span<const double> x, double fs, double lo_hz, double hi_hz) {
  const auto sos = design_bandpass(lo_hz, hi_hz, fs);
  const auto padlen = static_cast<std::size_t>(std::ceil(3.0 * fs / lo_hz));
  return sosfiltfilt(sos, x, padlen);
}

std::vector<double> normalize(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::DegenerateSeries, "need at least two samples");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw Error(ErrorCode::DegenerateSeries, "zero variance");
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mean) / sd;
  return out;
}

std::vector<GestureWindow> segment(const SeriesSet& s, std::span<const synth::Annotation> annotations,
                                   int window_samples) {
  const auto n = static_cast<std::int64_t>(s.rows.cols());
  std::vector<std::pair<std::int64_t, std::size_t>> order;
  for (std::size_t k = 0; k < annotations.size(); ++k) {
    const auto& a = annotations[k];
    if (a.start_sample < 0 || a.start_sample + window_samples > n)
      throw Error(ErrorCode::RangeError, "annotation at sample " + std::to_string(a.start_sample) +
                                             " exceeds recording of " + std::to_string(n) + " samples");
    order.emplace_back(a.start_sample, k);
  }
  std::sort(order.begin(), order.end());
  for (std::size_t k = 1; k < order.size(); ++k)
    if (order[k].first < order[k - 1].first + window_samples)
      throw Error(ErrorCode::AnnotationOverlap, "annotations at samples " + std::to_string(order[k - 1].first) +
                                                    " and " + std::to_string(order[k].first) + " overlap");

  std::vector<GestureWindow> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations) {
    GestureWindow w;
    w.subject_id = a.subject_id;
    w.routine_id = a.routine_id;
    w.label = a.gesture_id;
    w.start_sample = a.start_sample;
    w.fs = s.fs;
    w.data = s.rows.middleCols(static_cast<Eigen::Index>(a.start_sample), window_samples);
    out.push_back(std::move(w));
  }
  return out;
}

void detrend_row(std::span<double> row) {
  const std::size_t n = row.size();
  if (n < 2) {
    for (double& v : row) v = 0.0;
    return;
  }
  const double tmean = 0.5 * static_cast<double>(n - 1);
  const double xmean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dt = static_cast<double>(k) - tmean;
    sxy += dt * (row[k] - xmean);
    sxx += dt * dt;
  }
  const double slope = sxy / sxx;
  for (std::size_t k = 0; k < n; ++k) row[k] = row[k] - xmean - slope * (static_cast<double>(k) - tmean);
}

GestureWindow detrend(GestureWindow w) {
  for (Eigen::Index r = 0; r < w.data.rows(); ++r)
    detrend_row(std::span<double>(w.data.row(r).data(), static_cast<std::size_t>(w.data.cols())));
  return w;
}

std::vector<GestureWindow> preprocess_pipeline(const synth::RawRecording& rec,
                                               std::span<const synth::Annotation> annotations,
                                               const PipelineOptions& opts) {
  if (annotations.empty()) return {};
  SeriesSet s = augment_channels(rec);
  const std::string where = "subject " + std::to_string(annotations.front().subject_id) + " routine " +
                            std::to_string(annotations.front().routine_id);

  const auto n = static_cast<std::size_t>(s.rows.cols());
  for (Eigen::Index r = 0; r < s.rows.rows(); ++r) {
    std::span<double> row(s.rows.row(r).data(), n);
    try {
      const auto filtered = bandpass(row, s.fs, opts.lo_hz, opts.hi_hz);
      const auto normed = normalize(filtered);
      std::copy(normed.begin(), normed.end(), row.begin());
    } catch (const Error& e) {
      throw with_context(e, where + " row " + std::to_string(r));
    }
  }

  const int w = static_cast<int>(std::lround(s.fs * opts.t_win_s));
  std::vector<GestureWindow> windows;
  try {
    windows = segment(s, annotations, w);
  } catch (const Error& e) {
    throw with_context(e, where);
  }
  for (auto& win : windows) win = detrend(std::move(win));
  return windows;
}

}  // namespace rmg::preprocess
