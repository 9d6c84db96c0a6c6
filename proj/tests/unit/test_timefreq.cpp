#include "rmg/error.hpp"
#include "rmg/timefreq.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace rmg;
using namespace rmg::timefreq;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sine(double f, double fs, int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) x[static_cast<std::size_t>(k)] = std::sin(2.0 * kPi * f * k / fs);
  return x;
}

std::vector<double> noise(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = g(rng);
  return x;
}

preprocess::GestureWindow random_window(unsigned seed) {
  preprocess::GestureWindow w;
  w.fs = 250.0;
  w.data = RowMatrixXd(64, 1250);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (Eigen::Index r = 0; r < 64; ++r)
    for (Eigen::Index k = 0; k < 1250; ++k) w.data(r, k) = std::sin(0.01 * (r + 1) * k) + 0.2 * g(rng);
  return w;
}

}  // namespace

TEST_CASE("stft shape, zero input and errors") {
  const auto z = stft(std::vector<double>(1000, 0.0), 1.0, 0.2, 250.0);
  CHECK(z.rows() == 126);
  CHECK(z.cols() == (1000 - 250) / 50 + 1);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  try {
    stft(std::vector<double>(100, 0.0), 1.0, 0.2, 250.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowTooLong);
  }
}

TEST_CASE("stft sinusoid bin") {
  const auto s = stft(sine(2.0, 250.0, 2500), 1.0, 0.1, 250.0);
  for (Eigen::Index f = 0; f < s.cols(); ++f) {
    Eigen::Index arg = 0;
    s.col(f).maxCoeff(&arg);
    CHECK(arg == 2);  // bin spacing 1 Hz
  }
}

TEST_CASE("stft frame Parseval against a direct DFT") {
  const auto x = noise(600, 4);
  const int win = 125;
  const auto s = stft(x, 0.5, 0.1, 250.0);
  for (int frame : {0, 3}) {
    const int off = frame * 25;
    std::vector<double> wx(win);
    double energy = 0.0;
    for (int k = 0; k < win; ++k) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * k / win);
      wx[static_cast<std::size_t>(k)] = w * x[static_cast<std::size_t>(off + k)];
      energy += wx[static_cast<std::size_t>(k)] * wx[static_cast<std::size_t>(k)];
    }
    // Direct DFT oracle for every bin.
    double full = 0.0;
    for (int b = 0; b < win; ++b) {
      std::complex<double> acc = 0.0;
      for (int k = 0; k < win; ++k) acc += wx[static_cast<std::size_t>(k)] * std::polar(1.0, -2.0 * kPi * b * k / win);
      full += std::norm(acc);
      if (b <= win / 2) CHECK(s(b, frame) == doctest::Approx(std::abs(acc)).epsilon(1e-9));
    }
    CHECK(full == doctest::Approx(win * energy).epsilon(1e-6));
    // One-sided reconstruction of the same sum.
    double onesided = s(0, frame) * s(0, frame);
    for (int b = 1; b <= win / 2; ++b) onesided += 2.0 * s(b, frame) * s(b, frame);
    CHECK(onesided == doctest::Approx(win * energy).epsilon(1e-6));
  }
}

TEST_CASE("stft sign flip and hop shift") {
  auto x = noise(800, 9);
  const auto a = stft(x, 0.5, 0.1, 250.0);
  for (auto& v : x) v = -v;
  const auto b = stft(x, 0.5, 0.1, 250.0);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);

  std::vector<double> shifted(x.begin() + 25, x.end());
  const auto c = stft(shifted, 0.5, 0.1, 250.0);
  for (Eigen::Index f = 0; f + 1 < a.cols() && f < c.cols(); ++f)
    CHECK((c.col(f) - b.col(f + 1)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("cwt delta response equals the reversed wavelet") {
  const double fs = 50.0;
  const int n = 250;
  const int n0 = 120;
  std::vector<double> x(n, 0.0);
  x[n0] = 1.0;
  for (Wavelet w : {Wavelet::Ricker, Wavelet::Morlet, Wavelet::Gaus4}) {
    const auto scales = log_scales(w, 0.1, 5.0, 16);
    const auto m = cwt(x, w, scales, fs);
    for (std::size_t s = 0; s < scales.size(); ++s)
      for (int b = 0; b < n; b += 3) {
        const double expect = std::abs(mother_wavelet(w, (n0 - b) / (scales[s] * fs))) / (scales[s] * fs);
        CHECK(std::abs(m(static_cast<Eigen::Index>(s), b) - expect) < 1e-9);
      }
  }
}

TEST_CASE("cwt matches direct summation") {
  const auto x = noise(180, 2);
  const double fs = 50.0;
  const auto scales = log_scales(Wavelet::Morlet, 0.1, 5.0, 8);
  const auto m = cwt(x, "morlet", scales, fs);
  for (std::size_t s = 0; s < scales.size(); ++s)
    for (int b = 0; b < 180; b += 11) {
      std::complex<double> acc = 0.0;
      for (int k = 0; k < 180; ++k)
        acc += x[static_cast<std::size_t>(k)] * std::conj(mother_wavelet(Wavelet::Morlet, (k - b) / (scales[s] * fs))) /
               (scales[s] * fs);
      CHECK(std::abs(m(static_cast<Eigen::Index>(s), b) - std::abs(acc)) < 1e-9);
    }
}

TEST_CASE("cwt zero input, sign flip, wavelet names") {
  const auto scales = log_scales(Wavelet::Ricker, 0.1, 5.0, 10);
  const auto z = cwt(std::vector<double>(100, 0.0), Wavelet::Ricker, scales, 50.0);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  auto x = noise(100, 1);
  const auto a = cwt(x, Wavelet::Gaus4, scales, 50.0);
  for (auto& v : x) v = -v;
  CHECK((a - cwt(x, Wavelet::Gaus4, scales, 50.0)).cwiseAbs().maxCoeff() < 1e-12);
  try {
    cwt(x, "haar", scales, 50.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownWavelet);
  }
}

TEST_CASE("cwt 1 Hz sinusoid peaks near 1 Hz") {
  const double fs = 50.0;
  const auto x = sine(1.0, fs, 500);
  for (Wavelet w : {Wavelet::Morlet, Wavelet::Ricker, Wavelet::Gaus4}) {
    const auto scales = log_scales(w, 0.1, 5.0, 32);
    const auto m = cwt(x, w, scales, fs);
    Eigen::Index best = 0;
    // Energy over interior columns.
    m.middleCols(150, 200).rowwise().squaredNorm().maxCoeff(&best);
    const double f = pseudo_frequency(w, scales[static_cast<std::size_t>(best)]);
    CHECK(f >= 0.8);
    CHECK(f <= 1.25);
  }
}

TEST_CASE("wavelets have unit energy") {
  for (Wavelet w : {Wavelet::Morlet, Wavelet::Ricker, Wavelet::Gaus4}) {
    double e = 0.0;
    const double dt = 1e-3;
    for (double t = -20.0; t <= 20.0; t += dt) e += std::norm(mother_wavelet(w, t)) * dt;
    CHECK(e == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("log scales span the requested pseudo-frequencies") {
  const auto s = log_scales(Wavelet::Morlet, 0.1, 5.0, 16);
  CHECK(pseudo_frequency(Wavelet::Morlet, s.front()) == doctest::Approx(0.1));
  CHECK(pseudo_frequency(Wavelet::Morlet, s.back()) == doctest::Approx(5.0));
  for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k] < s[k - 1]);
}

TEST_CASE("resize_bilinear") {
  RowMatrixXd c = RowMatrixXd::Constant(7, 13, 3.0);
  const auto r = resize_bilinear(c, 40, 40);
  CHECK((r.array() - 3.0).abs().maxCoeff() == 0.0);

  RowMatrixXd two(2, 2);
  two << 0, 1, 1, 2;
  const auto u = resize_bilinear(two, 40, 40);
  CHECK(u(0, 0) == 0.0);
  CHECK(u(0, 39) == 1.0);
  CHECK(u(39, 0) == 1.0);
  CHECK(u(39, 39) == 2.0);

  RowMatrixXd ramp(9, 17);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 17; ++j) ramp(i, j) = 0.7 * i - 0.3 * j + 1.0;
  const auto q = resize_bilinear(ramp, 40, 40);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) {
      const double y = i * 8.0 / 39.0;
      const double x = j * 16.0 / 39.0;
      CHECK(std::abs(q(i, j) - (0.7 * y - 0.3 * x + 1.0)) < 1e-6);
    }
  CHECK(q.minCoeff() >= ramp.minCoeff() - 1e-12);
  CHECK(q.maxCoeff() <= ramp.maxCoeff() + 1e-12);
}

TEST_CASE("feature sets: shape, range, zero window, determinism") {
  const auto w = random_window(3);
  const FeatureExtractor fx;
  const FeatureSet fs = fx.feature_set(w);
  for (std::size_t t = 0; t < 5; ++t) {
    const auto& s = fs.spectrograms[t];
    CHECK(s.transform == kAllTransforms[t]);
    CHECK(s.planes == 48);
    CHECK(s.height == 40);
    CHECK(s.width == 40);
    CHECK(s.values.size() == 48u * 1600u);
    for (float v : s.values) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  const FeatureSet again = make_feature_sets(w);
  for (std::size_t t = 0; t < 5; ++t) CHECK(again.spectrograms[t].values == fs.spectrograms[t].values);

  preprocess::GestureWindow zero = w;
  zero.data.setZero();
  const FeatureSet z = fx.feature_set(zero);
  for (const auto& s : z.spectrograms) {
    for (float v : s.values) CHECK(v == 0.0f);
    for (auto d : s.degenerate) CHECK(d == 1);
  }

  // Label does not influence features.
  preprocess::GestureWindow relabeled = w;
  relabeled.label = 17;
  CHECK(fx.feature_set(relabeled).spectrograms[2].values == fs.spectrograms[2].values);
  CHECK(fx.feature_set(relabeled).label == 17);
}

TEST_CASE("plane subsets match the full stack") {
  const auto w = random_window(8);
  const FeatureExtractor fx;
  const auto full = fx.spectrogram(w, Transform::CwtRicker);
  const std::vector<int> sel = {0, 5, 21, 40};
  const auto part = fx.spectrogram(w, Transform::CwtRicker, sel);
  REQUIRE(part.planes == 4);
  for (std::size_t p = 0; p < sel.size(); ++p) {
    const auto a = part.plane(static_cast<int>(p));
    const auto b = full.plane(sel[p]);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("quick vs slow STFT time marginal") {
  // A single short pulse gives one energy peak; a held plateau does not.
  preprocess::GestureWindow quick, slow;
  quick.fs = slow.fs = 250.0;
  quick.data = RowMatrixXd::Zero(64, 1250);
  slow.data = RowMatrixXd::Zero(64, 1250);
  for (int k = 0; k < 1250; ++k) {
    const double t = k / 250.0;
    const double q = std::abs(t - 2.0) < 0.2 ? 0.5 * (1 + std::cos(kPi * (t - 2.0) / 0.2)) : 0.0;
    const double s = (t > 0.8 && t < 3.0) ? 1.0 : 0.0;
    quick.data.row(0)(k) = q * std::sin(2 * kPi * 3 * t);
    slow.data.row(0)(k) = s * std::sin(2 * kPi * 3 * t);
  }
  const FeatureExtractor fx;
  const std::vector<int> sel = {0};
  auto marginal = [&](const preprocess::GestureWindow& w) {
    const auto s = fx.spectrogram(w, Transform::StftA, sel);
    std::vector<double> m(40, 0.0);
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 40; ++c) m[static_cast<std::size_t>(c)] += s.values[static_cast<std::size_t>(r * 40 + c)];
    return m;
  };
  auto above_half = [](const std::vector<double>& m) {
    const double mx = *std::max_element(m.begin(), m.end());
    int n = 0;
    for (double v : m) n += v > 0.5 * mx;
    return n;
  };
  CHECK(above_half(marginal(slow)) > 2 * above_half(marginal(quick)));
}
