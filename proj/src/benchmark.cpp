#include "rmg/benchmark.hpp"

#include "rmg/error.hpp"
#include "rmg/rng.hpp"
#include "rmg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rmg::bench {

namespace {

std::vector<std::size_t> local_maxima(std::span<const double> x) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 1; k + 1 < x.size(); ++k)
    if (x[k] > x[k - 1] && x[k] >= x[k + 1]) idx.push_back(k);
  return idx;
}

}  // namespace

Envelope envelope_spline(std::span<const double> x) {
  Envelope e;
  const auto knots = local_maxima(x);
  if (knots.size() < 3) {
    e.values.assign(x.begin(), x.end());
    e.passthrough = true;
    return e;
  }
  const std::size_t n = knots.size();
  std::vector<double> t(n), y(n), h(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(knots[i]);
    y[i] = x[knots[i]];
  }
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = t[i + 1] - t[i];

  // Second derivatives with natural end conditions (Thomas algorithm).
  std::vector<double> m(n, 0.0), c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double a = h[i - 1], b = 2.0 * (h[i - 1] + h[i]), cc = h[i];
    const double r = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    d[i] = (r - a * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m[i] = d[i] - c[i] * m[i + 1];
    if (i == 1) break;
  }

  e.values.resize(x.size());
  std::size_t seg = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double s = static_cast<double>(k);
    if (s <= t.front()) {
      e.values[k] = y.front();
      continue;
    }
    if (s >= t.back()) {
      e.values[k] = y.back();
      continue;
    }
    while (s > t[seg + 1]) ++seg;
    const double hi = h[seg];
    const double A = (t[seg + 1] - s) / hi, B = (s - t[seg]) / hi;
    e.values[k] = A * y[seg] + B * y[seg + 1] +
                  ((A * A * A - A) * m[seg] + (B * B * B - B) * m[seg + 1]) * hi * hi / 6.0;
  }
  return e;
}

std::vector<double> moving_average(std::span<const double> x, int w) {
  if (w < 1) throw Error(ErrorCode::RangeError, "moving average window must be >= 1");
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) prefix[k + 1] = prefix[k] + x[k];
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t left = (w - 1) / 2, right = w / 2;
  std::vector<double> y(x.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - left), hi = std::min(n - 1, k + right);
    y[static_cast<std::size_t>(k)] = (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) /
                                     static_cast<double>(hi - lo + 1);
  }
  return y;
}

DtwResult dtw(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySeries, "dtw needs nonempty series");
  const std::size_t n = a.size(), m = b.size(), w = m + 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> D((n + 1) * w, inf);
  D[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const double c = (a[i - 1] - b[j - 1]) * (a[i - 1] - b[j - 1]);
      D[i * w + j] = c + std::min({D[(i - 1) * w + j - 1], D[(i - 1) * w + j], D[i * w + j - 1]});
    }
  DtwResult r;
  r.distance = D[n * w + m];
  std::size_t i = n, j = m;
  while (true) {
    r.path.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
    if (i == 1 && j == 1) break;
    const double diag = D[(i - 1) * w + j - 1], up = D[(i - 1) * w + j], lt = D[i * w + j - 1];
    if (diag <= up && diag <= lt) {
      --i;
      --j;
    } else if (up <= lt) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

DbaResult dtw_barycenter(const std::vector<std::vector<double>>& set, int iterations, const std::vector<double>* init) {
  if (set.empty()) throw Error(ErrorCode::EmptySeries, "barycenter of an empty set");
  if (iterations < 0) throw Error(ErrorCode::RangeError, "iterations must be >= 0");
  const std::size_t len = set.front().size();
  for (const auto& s : set)
    if (s.size() != len || s.empty()) throw Error(ErrorCode::ShapeMismatch, "barycenter series must share a length");

  DbaResult r;
  if (init) {
    if (init->size() != len) throw Error(ErrorCode::ShapeMismatch, "init length");
    r.average = *init;
  } else {
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < set.size(); ++i) {
      double c = 0.0;
      for (std::size_t j = 0; j < set.size() && c < best_cost; ++j)
        if (j != i) c += dtw(set[i], set[j]).distance;
      if (c < best_cost) {
        best_cost = c;
        best = i;
      }
    }
    r.average = set[best];
  }

  std::vector<DtwResult> align(set.size());
  auto total = [&]() {
    double c = 0.0;
    for (std::size_t s = 0; s < set.size(); ++s) {
      align[s] = dtw(r.average, set[s]);
      c += align[s].distance;
    }
    return c;
  };
  r.cost.push_back(total());
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> sum(len, 0.0);
    std::vector<int> count(len, 0);
    for (std::size_t s = 0; s < set.size(); ++s)
      for (const auto& [i, j] : align[s].path) {
        sum[static_cast<std::size_t>(i)] += set[s][static_cast<std::size_t>(j)];
        ++count[static_cast<std::size_t>(i)];
      }
    for (std::size_t i = 0; i < len; ++i) r.average[i] = sum[i] / count[i];
    const double c = total();
    const double prev = r.cost.back();
    if (c > prev + 1e-9 * std::max(1.0, prev))
      throw Error(ErrorCode::InvariantViolation, "DBA cost rose from " + std::to_string(prev) + " to " + std::to_string(c));
    r.cost.push_back(c);
  }
  return r;
}

PulseFeature detect_peak(std::span<const double> x, double fs, double smooth_s) {
  if (x.empty()) throw Error(ErrorCode::EmptySeries, "empty window");
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  if (*xmax - *xmin < 1e-6) throw Error(ErrorCode::NoPeak, "flat window");
  const int w = 2 * static_cast<int>(std::lround(0.5 * smooth_s * fs)) + 1;
  const std::vector<double> s = moving_average(envelope_spline(x).values, w);
  const auto mx = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  const double lo = *std::min_element(s.begin(), s.end());
  if (s[mx] - lo < 1e-6 * (*xmax - *xmin)) throw Error(ErrorCode::NoPeak, "flat envelope");
  const double half = lo + 0.5 * (s[mx] - lo);

  double left = 0.0;
  for (std::size_t k = mx; k > 0; --k)
    if (s[k - 1] < half) {
      left = static_cast<double>(k - 1) + (half - s[k - 1]) / (s[k] - s[k - 1]);
      break;
    }
  double right = static_cast<double>(s.size() - 1);
  for (std::size_t k = mx; k + 1 < s.size(); ++k)
    if (s[k + 1] < half) {
      right = static_cast<double>(k) + (s[k] - half) / (s[k] - s[k + 1]);
      break;
    }
  PulseFeature p;
  p.peak_time = static_cast<double>(mx) / fs;
  p.width = (right - left) / fs;
  p.peak_value = s[mx];
  return p;
}

ModalityComparison compare_modalities(const std::vector<std::vector<double>>& rmg,
                                      const std::vector<std::vector<double>>& semg, const std::vector<int>& labels,
                                      double fs) {
  if (rmg.size() != semg.size() || rmg.size() != labels.size())
    throw Error(ErrorCode::ShapeMismatch, "rmg, semg and labels must pair up");
  ModalityComparison c;
  for (std::size_t i = 0; i < rmg.size(); ++i) {
    if (synth::gesture(labels[i]).tempo != synth::Tempo::Quick) {
      ++c.skipped;
      continue;
    }
    try {
      const PulseFeature a = detect_peak(rmg[i], fs);
      const PulseFeature b = detect_peak(semg[i], fs);
      c.peak_pairs.emplace_back(a.peak_time, b.peak_time);
      c.width_pairs.emplace_back(a.width, b.width);
      c.used.push_back(static_cast<int>(i));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPeak) throw;
      ++c.excluded;
    }
  }
  c.n_samples = static_cast<int>(c.peak_pairs.size());
  if (c.n_samples == 0) {
    c.r_degenerate = true;
    c.pearson_r = 1.0;
    return c;
  }
  double ma = 0.0, mb = 0.0;
  for (auto [a, b] : c.peak_pairs) {
    ma += a;
    mb += b;
  }
  ma /= c.n_samples;
  mb /= c.n_samples;
  double sab = 0.0, saa = 0.0, sbb = 0.0, delay = 0.0;
  for (auto [a, b] : c.peak_pairs) {
    sab += (a - ma) * (b - mb);
    saa += (a - ma) * (a - ma);
    sbb += (b - mb) * (b - mb);
    delay += a - b;
  }
  c.mean_delay_s = delay / c.n_samples;
  if (saa <= 0.0 || sbb <= 0.0) {
    c.r_degenerate = true;
    c.pearson_r = 1.0;
  } else {
    c.pearson_r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  }
  return c;
}

double estimate_rate(std::span<const double> x, double fs) {
  if (x.size() < 3) throw Error(ErrorCode::NoEvents, "series too short");
  const auto peaks = local_maxima(x);
  if (peaks.empty()) throw Error(ErrorCode::NoEvents, "no local maxima");
  std::vector<double> heights;
  for (auto k : peaks) heights.push_back(x[k]);
  std::nth_element(heights.begin(), heights.begin() + static_cast<std::ptrdiff_t>(heights.size() / 2), heights.end());
  double median = heights[heights.size() / 2];
  if (heights.size() % 2 == 0) {
    const double lower = *std::max_element(heights.begin(), heights.begin() + static_cast<std::ptrdiff_t>(heights.size() / 2));
    median = 0.5 * (median + lower);
  }
  const double threshold = 0.5 * median;

  int count = 0;
  for (auto k : peaks) {
    // Prominence: height above the higher of the two bases, each base being
    // the minimum between the peak and the nearest higher sample (or the edge).
    double left_min = x[k];
    for (std::size_t q = k; q-- > 0;) {
      if (x[q] > x[k]) break;
      left_min = std::min(left_min, x[q]);
    }
    double right_min = x[k];
    for (std::size_t q = k + 1; q < x.size(); ++q) {
      if (x[q] > x[k]) break;
      right_min = std::min(right_min, x[q]);
    }
    const double prominence = x[k] - std::max(left_min, right_min);
    if (prominence > 0.0 && prominence >= threshold) ++count;
  }
  if (count == 0) throw Error(ErrorCode::NoEvents, "no peak passes the prominence threshold");
  const double duration = static_cast<double>(x.size()) / fs;
  return 60.0 * count / duration;
}

std::vector<double> baseband_deviation(std::span<const std::complex<double>> h) {
  std::vector<double> out;
  out.reserve(h.size());
  for (const auto& v : h) out.push_back(std::abs(v - h.front()));
  return out;
}

ModalityPairs quick_gesture_pairs(const synth::SynthConfig& cfg, const synth::SensorLayout& layout, int subject,
                                  int reps, double lag_s) {
  if (reps <= 0) throw Error(ErrorCode::RangeError, "reps must be positive");
  ModalityPairs out;
  out.fs = cfg.fs;
  for (const auto& g : synth::gesture_catalog()) {
    if (g.tempo != synth::Tempo::Quick) continue;
    for (int r = 0; r < reps; ++r) {
      const int routine = g.id * reps + r;
      const synth::ActivityMatrix a = synth::routine_activity(subject, routine, {g.id}, cfg) * cfg.subject_scale;
      synth::SynthConfig mix = cfg;
      mix.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(routine), 0xbe7c});
      const auto rec = synth::mix_channels(a, layout, mix);
      out.rmg.push_back(baseband_deviation(rec.channels[kExtensorSelfChannel]));
      out.semg.push_back(synth::synth_semg(a, mix, lag_s).posterior);
      out.labels.push_back(g.id);
    }
  }
  return out;
}

}  // namespace rmg::bench
