#include "rmg/timefreq.hpp"

#include "fft.hpp"
#include "rmg/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace rmg::timefreq {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));
  return w;
}

struct StftShape {
  std::size_t win;
  std::size_t hop;
  std::size_t frames;
};

StftShape stft_shape(std::size_t n, double window_len_s, double hop_s, double fs) {
  const auto win = static_cast<std::size_t>(std::lround(window_len_s * fs));
  const auto hop = static_cast<std::size_t>(std::lround(hop_s * fs));
  if (win < 4) throw Error(ErrorCode::RangeError, "STFT window shorter than 4 samples");
  if (hop < 1 || hop > win) throw Error(ErrorCode::RangeError, "STFT hop must be in [1, window]");
  if (win > n)
    throw Error(ErrorCode::WindowTooLong,
                "window of " + std::to_string(win) + " samples exceeds series of " + std::to_string(n));
  return {win, hop, (n - win) / hop + 1};
}

// Magnitude STFT with a shared plan; rows limited to `max_bins`.
RowMatrixXd stft_with(const detail::R2CPlan& plan, const std::vector<double>& window, const StftShape& shape,
                      std::span<const double> x, std::size_t max_bins) {
  const std::size_t bins = std::min(shape.win / 2 + 1, max_bins);
  RowMatrixXd out(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(shape.frames));
  detail::FftwBuffer<double> in(shape.win);
  detail::FftwBuffer<fftw_complex> spec(shape.win / 2 + 1);
  for (std::size_t f = 0; f < shape.frames; ++f) {
    const std::size_t off = f * shape.hop;
    for (std::size_t k = 0; k < shape.win; ++k) in[k] = window[k] * x[off + k];
    plan.execute(in.data(), spec.data());
    for (std::size_t b = 0; b < bins; ++b)
      out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f)) = std::hypot(spec[b][0], spec[b][1]);
  }
  return out;
}

void minmax_scale(RowMatrixXd& m, bool& degenerate) {
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  const double range = hi - lo;
  degenerate = !(range > 1e-12 * std::max(1.0, std::abs(hi)));
  if (degenerate)
    m.setZero();
  else
    m = (m.array() - lo) / range;
}

}  // namespace

std::string_view transform_name(Transform t) {
  switch (t) {
    case Transform::StftA: return "stft-a";
    case Transform::StftB: return "stft-b";
    case Transform::CwtMorlet: return "cwt-morlet";
    case Transform::CwtRicker: return "cwt-ricker";
    case Transform::CwtGaus: return "cwt-gaus";
  }
  return "?";
}

Transform parse_transform(std::string_view name) {
  for (Transform t : kAllTransforms)
    if (transform_name(t) == name) return t;
  throw Error(ErrorCode::FormatError, "unknown transform '" + std::string(name) + "'");
}

Wavelet parse_wavelet(std::string_view name) {
  if (name == "morlet") return Wavelet::Morlet;
  if (name == "ricker") return Wavelet::Ricker;
  if (name == "gaus4") return Wavelet::Gaus4;
  throw Error(ErrorCode::UnknownWavelet, "unknown wavelet '" + std::string(name) + "'");
}

std::string_view wavelet_name(Wavelet w) {
  switch (w) {
    case Wavelet::Morlet: return "morlet";
    case Wavelet::Ricker: return "ricker";
    case Wavelet::Gaus4: return "gaus4";
  }
  return "?";
}

std::complex<double> mother_wavelet(Wavelet w, double t) {
  const double g = std::exp(-0.5 * t * t);
  switch (w) {
    case Wavelet::Morlet:
      return std::pow(kPi, -0.25) * g * std::polar(1.0, 6.0 * t);
    case Wavelet::Ricker:
      return 2.0 / (std::sqrt(3.0) * std::pow(kPi, 0.25)) * (1.0 - t * t) * g;
    case Wavelet::Gaus4: {
      static const double norm = 1.0 / std::sqrt(105.0 * std::sqrt(kPi) / 16.0);
      const double t2 = t * t;
      return norm * (t2 * t2 - 6.0 * t2 + 3.0) * g;
    }
  }
  return 0.0;
}

double peak_angular_frequency(Wavelet w) {
  switch (w) {
    case Wavelet::Morlet: return 6.0;
    case Wavelet::Ricker: return std::numbers::sqrt2;
    case Wavelet::Gaus4: return 2.0;
  }
  return 1.0;
}

double pseudo_frequency(Wavelet w, double scale_s) { return peak_angular_frequency(w) / (2.0 * kPi * scale_s); }

double scale_for_frequency(Wavelet w, double f_hz) { return peak_angular_frequency(w) / (2.0 * kPi * f_hz); }

std::vector<double> log_scales(Wavelet w, double f_lo, double f_hi, int count) {
  if (count < 2 || !(f_lo > 0.0 && f_lo < f_hi)) throw Error(ErrorCode::RangeError, "invalid scale range");
  std::vector<double> s(static_cast<std::size_t>(count));
  const double step = std::log(f_hi / f_lo) / (count - 1);
  for (int k = 0; k < count; ++k) s[static_cast<std::size_t>(k)] = scale_for_frequency(w, f_lo * std::exp(step * k));
  return s;
}

RowMatrixXd stft(std::span<const double> x, double window_len_s, double hop_s, double fs) {
  const StftShape shape = stft_shape(x.size(), window_len_s, hop_s, fs);
  const detail::R2CPlan plan(shape.win);
  return stft_with(plan, periodic_hann(shape.win), shape, x, shape.win / 2 + 1);
}

// ---------------------------------------------------------------------------

struct CwtBank::Impl {
  std::size_t m = 0;
  detail::C2CPlan forward;
  detail::C2CPlan inverse;
  std::vector<std::vector<std::complex<double>>> kernels;  // spectrum of the flipped kernel per scale

  Impl(std::size_t m_, std::size_t nscales) : m(m_), forward(m_, FFTW_FORWARD), inverse(m_, FFTW_BACKWARD) {
    kernels.reserve(nscales);
  }

  // Spectrum of a real series, zero padded to m.
  void spectrum(std::span<const double> x, detail::FftwBuffer<fftw_complex>& buf,
                detail::FftwBuffer<fftw_complex>& out) const {
    for (std::size_t k = 0; k < m; ++k) {
      buf[k][0] = k < x.size() ? x[k] : 0.0;
      buf[k][1] = 0.0;
    }
    forward.execute(buf.data(), out.data());
  }

  // |IFFT(X * K_s)| for n output samples, accumulated as squares into `acc`.
  void accumulate_power(const detail::FftwBuffer<fftw_complex>& xs, std::size_t n, RowMatrixXd& acc,
                        detail::FftwBuffer<fftw_complex>& buf, detail::FftwBuffer<fftw_complex>& out) const {
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t s = 0; s < kernels.size(); ++s) {
      const auto& ker = kernels[s];
      for (std::size_t k = 0; k < m; ++k) {
        const std::complex<double> v = std::complex<double>(xs[k][0], xs[k][1]) * ker[k];
        buf[k][0] = v.real();
        buf[k][1] = v.imag();
      }
      inverse.execute(buf.data(), out.data());
      for (std::size_t b = 0; b < n; ++b) {
        const double re = out[b][0] * inv_m;
        const double im = out[b][1] * inv_m;
        acc(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)) += re * re + im * im;
      }
    }
  }
};

CwtBank::CwtBank(Wavelet w, std::vector<double> scales_s, std::size_t n, double fs)
    : scales_(std::move(scales_s)), n_(n) {
  if (n == 0) throw Error(ErrorCode::EmptySeries, "CWT of an empty series");
  const std::size_t m = next_pow2(2 * n - 1);
  impl_ = std::make_unique<Impl>(m, scales_.size());

  detail::FftwBuffer<fftw_complex> buf(m), out(m);
  const auto ln = static_cast<long>(n);
  for (double s : scales_) {
    if (!(s > 0.0)) throw Error(ErrorCode::RangeError, "scales must be positive");
    // W(b) = sum_n x[n] g[n - b] with g[k] = conj(psi(k / (s fs))) / (s fs);
    // as a convolution the kernel is h[k] = g[-k], stored circularly.
    for (std::size_t k = 0; k < m; ++k) buf[k][0] = buf[k][1] = 0.0;
    for (long lag = -(ln - 1); lag <= ln - 1; ++lag) {
      const std::complex<double> g = std::conj(mother_wavelet(w, static_cast<double>(lag) / (s * fs))) / (s * fs);
      const long k = -lag;
      const std::size_t slot = static_cast<std::size_t>((k % static_cast<long>(m) + static_cast<long>(m)) % static_cast<long>(m));
      buf[slot][0] = g.real();
      buf[slot][1] = g.imag();
    }
    impl_->forward.execute(buf.data(), out.data());
    std::vector<std::complex<double>> spec(m);
    for (std::size_t k = 0; k < m; ++k) spec[k] = {out[k][0], out[k][1]};
    impl_->kernels.push_back(std::move(spec));
  }
}

CwtBank::~CwtBank() = default;

RowMatrixXd CwtBank::magnitude(std::span<const double> x) const {
  if (x.size() != n_) throw Error(ErrorCode::ShapeMismatch, "series length differs from CWT bank");
  const std::size_t m = impl_->m;
  detail::FftwBuffer<fftw_complex> xs(m), buf(m), out(m);
  RowMatrixXd acc = RowMatrixXd::Zero(static_cast<Eigen::Index>(scales_.size()), static_cast<Eigen::Index>(n_));
  impl_->spectrum(x, buf, xs);
  impl_->accumulate_power(xs, n_, acc, buf, out);
  return acc.array().sqrt();
}

RowMatrixXd CwtBank::magnitude(std::span<const double> re, std::span<const double> im) const {
  if (re.size() != n_ || im.size() != n_) throw Error(ErrorCode::ShapeMismatch, "series length differs from CWT bank");
  const std::size_t m = impl_->m;
  detail::FftwBuffer<fftw_complex> xs(m), buf(m), out(m);
  RowMatrixXd acc = RowMatrixXd::Zero(static_cast<Eigen::Index>(scales_.size()), static_cast<Eigen::Index>(n_));
  impl_->spectrum(re, buf, xs);
  impl_->accumulate_power(xs, n_, acc, buf, out);
  impl_->spectrum(im, buf, xs);
  impl_->accumulate_power(xs, n_, acc, buf, out);
  return acc.array().sqrt();
}

RowMatrixXd cwt(std::span<const double> x, Wavelet w, std::span<const double> scales_s, double fs) {
  const CwtBank bank(w, std::vector<double>(scales_s.begin(), scales_s.end()), x.size(), fs);
  return bank.magnitude(x);
}

RowMatrixXd cwt(std::span<const double> x, std::string_view wavelet, std::span<const double> scales_s, double fs) {
  return cwt(x, parse_wavelet(wavelet), scales_s, fs);
}

// ---------------------------------------------------------------------------

RowMatrixXd resize_bilinear(const RowMatrixXd& plane, int h, int w) {
  const auto sh = static_cast<int>(plane.rows());
  const auto sw = static_cast<int>(plane.cols());
  if (sh < 1 || sw < 1 || h < 1 || w < 1) throw Error(ErrorCode::ShapeMismatch, "empty plane in resize");
  RowMatrixXd out(h, w);
  auto coord = [](int i, int dst, int src) {
    if (dst == 1 || src == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
  };
  for (int r = 0; r < h; ++r) {
    const double y = coord(r, h, sh);
    const int y0 = std::min(static_cast<int>(std::floor(y)), sh - 1);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double fy = y - y0;
    for (int c = 0; c < w; ++c) {
      const double x = coord(c, w, sw);
      const int x0 = std::min(static_cast<int>(std::floor(x)), sw - 1);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double fx = x - x0;
      const double top = (1.0 - fx) * plane(y0, x0) + fx * plane(y0, x1);
      const double bot = (1.0 - fx) * plane(y1, x0) + fx * plane(y1, x1);
      out(r, c) = (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct FeatureExtractor::Impl {
  struct Banks {
    std::size_t n = 0;
    double fs = 0.0;
    StftShape shape_a{}, shape_b{};
    std::unique_ptr<detail::R2CPlan> plan_a, plan_b;
    std::vector<double> hann_a, hann_b;
    std::array<std::unique_ptr<CwtBank>, 3> cwt;
  };
  std::mutex mutex;
  std::map<std::pair<std::size_t, long>, std::shared_ptr<const Banks>> cache;

  std::shared_ptr<const Banks> banks(const FeatureConfig& cfg, std::size_t n, double fs) {
    std::lock_guard lock(mutex);
    const auto key = std::make_pair(n, std::lround(fs * 1000.0));
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto b = std::make_shared<Banks>();
    b->n = n;
    b->fs = fs;
    b->shape_a = stft_shape(n, cfg.stft_a_win_s, cfg.stft_a_hop_s, fs);
    b->shape_b = stft_shape(n, cfg.stft_b_win_s, cfg.stft_b_hop_s, fs);
    b->plan_a = std::make_unique<detail::R2CPlan>(b->shape_a.win);
    b->plan_b = std::make_unique<detail::R2CPlan>(b->shape_b.win);
    b->hann_a = periodic_hann(b->shape_a.win);
    b->hann_b = periodic_hann(b->shape_b.win);
    const std::array<Wavelet, 3> ws = {Wavelet::Morlet, Wavelet::Ricker, Wavelet::Gaus4};
    for (std::size_t k = 0; k < 3; ++k)
      b->cwt[k] = std::make_unique<CwtBank>(ws[k], log_scales(ws[k], cfg.cwt_f_lo, cfg.cwt_f_hi, cfg.cwt_scales), n, fs);
    cache.emplace(key, b);
    return b;
  }
};

FeatureExtractor::FeatureExtractor(FeatureConfig cfg) : cfg_(cfg), impl_(std::make_unique<Impl>()) {}
FeatureExtractor::~FeatureExtractor() = default;

Spectrogram FeatureExtractor::spectrogram(const preprocess::GestureWindow& w, Transform t,
                                          std::span<const int> series) const {
  std::vector<int> sel(series.begin(), series.end());
  if (sel.empty())
    for (int s = 0; s < preprocess::kNumSeries; ++s) sel.push_back(s);
  if (w.data.rows() != preprocess::kNumRows) throw Error(ErrorCode::ShapeMismatch, "window must have 64 rows");

  const auto q = static_cast<Eigen::Index>(std::lround(w.fs / cfg_.feature_fs));
  if (q < 1 || std::abs(static_cast<double>(q) * cfg_.feature_fs - w.fs) > 1e-6)
    throw Error(ErrorCode::RangeError, "window rate must be an integer multiple of the feature rate");
  const Eigen::Index n = (w.data.cols() + q - 1) / q;
  const double fs = cfg_.feature_fs;
  const auto banks = impl_->banks(cfg_, static_cast<std::size_t>(n), fs);

  auto decimated = [&](int row) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = w.data(row, k * q);
    return v;
  };

  const int grid = cfg_.grid;
  Spectrogram out;
  out.transform = t;
  out.planes = static_cast<int>(sel.size());
  out.height = grid;
  out.width = grid;
  out.values.resize(sel.size() * static_cast<std::size_t>(grid * grid));
  out.series = sel;
  out.degenerate.assign(sel.size(), 0);

  const bool is_stft = t == Transform::StftA || t == Transform::StftB;
  std::size_t stft_bins = 0;
  if (is_stft) {
    const StftShape& shape = t == Transform::StftA ? banks->shape_a : banks->shape_b;
    const double df = fs / static_cast<double>(shape.win);
    stft_bins = std::min(shape.win / 2 + 1, static_cast<std::size_t>(std::floor(cfg_.stft_max_hz / df + 1e-9)) + 1);
  }

  auto plane_of = [&](std::span<const double> x) -> RowMatrixXd {
    switch (t) {
      case Transform::StftA: return stft_with(*banks->plan_a, banks->hann_a, banks->shape_a, x, stft_bins);
      case Transform::StftB: return stft_with(*banks->plan_b, banks->hann_b, banks->shape_b, x, stft_bins);
      case Transform::CwtMorlet: return banks->cwt[0]->magnitude(x);
      case Transform::CwtRicker: return banks->cwt[1]->magnitude(x);
      case Transform::CwtGaus: return banks->cwt[2]->magnitude(x);
    }
    return {};
  };

  for (std::size_t p = 0; p < sel.size(); ++p) {
    const auto rows = preprocess::series_rows(sel[p]);
    RowMatrixXd plane;
    if (rows.size() == 1) {
      const auto x = decimated(rows[0]);
      plane = plane_of(x);
    } else {
      const auto re = decimated(rows[0]);
      const auto im = decimated(rows[1]);
      if (is_stft) {
        const RowMatrixXd a = plane_of(re);
        const RowMatrixXd b = plane_of(im);
        plane = (a.array().square() + b.array().square()).sqrt();
      } else {
        const int k = t == Transform::CwtMorlet ? 0 : (t == Transform::CwtRicker ? 1 : 2);
        plane = banks->cwt[static_cast<std::size_t>(k)]->magnitude(re, im);
      }
    }
    bool degenerate = false;
    minmax_scale(plane, degenerate);
    out.degenerate[p] = degenerate ? 1 : 0;
    const RowMatrixXd resized = resize_bilinear(plane, grid, grid);
    float* dst = out.values.data() + p * static_cast<std::size_t>(grid * grid);
    for (int r = 0; r < grid; ++r)
      for (int c = 0; c < grid; ++c) dst[r * grid + c] = static_cast<float>(resized(r, c));
  }

  // Axes of the resized grid.
  out.freq_axis.resize(static_cast<std::size_t>(grid));
  out.time_axis.resize(static_cast<std::size_t>(grid));
  const double duration = static_cast<double>(w.data.cols()) / w.fs;
  for (int k = 0; k < grid; ++k) {
    const double u = grid == 1 ? 0.0 : static_cast<double>(k) / (grid - 1);
    out.time_axis[static_cast<std::size_t>(k)] = u * duration;
    if (is_stft) {
      const StftShape& shape = t == Transform::StftA ? banks->shape_a : banks->shape_b;
      out.freq_axis[static_cast<std::size_t>(k)] = u * static_cast<double>(stft_bins - 1) * fs / static_cast<double>(shape.win);
    } else {
      out.freq_axis[static_cast<std::size_t>(k)] = cfg_.cwt_f_lo * std::pow(cfg_.cwt_f_hi / cfg_.cwt_f_lo, u);
    }
  }
  return out;
}

FeatureSet FeatureExtractor::feature_set(const preprocess::GestureWindow& w, std::span<const int> series) const {
  FeatureSet fs;
  fs.label = w.label;
  fs.subject_id = w.subject_id;
  fs.routine_id = w.routine_id;
  fs.start_sample = w.start_sample;
  for (std::size_t k = 0; k < kAllTransforms.size(); ++k) fs.spectrograms[k] = spectrogram(w, kAllTransforms[k], series);
  return fs;
}

FeatureSet make_feature_sets(const preprocess::GestureWindow& w, const FeatureConfig& cfg) {
  const FeatureExtractor fx(cfg);
  return fx.feature_set(w);
}

}  // namespace rmg::timefreq
