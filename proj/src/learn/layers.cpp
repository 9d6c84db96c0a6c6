#include "rmg/learn/layers.hpp"

#include "rmg/error.hpp"

#include <cmath>
#include <numbers>

namespace rmg::learn {

namespace {

template <typename T>
void fill_uniform(Mat<T>& m, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
}

template <typename T>
void fill_normal(Mat<T>& m, double sd, Rng& rng) {
  std::normal_distribution<double> n(0.0, sd);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(n(rng));
}

}  // namespace

// --- Linear -----------------------------------------------------------------

template <typename T>
void Linear<T>::init(ParamStore<T>& ps, const std::string& name, int in_dim, int out_dim, Rng& rng, double gain) {
  in = in_dim;
  out = out_dim;
  w = ps.add(name + ".weight", "linear", {in, out}, in, out);
  b = ps.add(name + ".bias", "linear", {out}, 1, out);
  fill_uniform(ps.value(w), gain * std::sqrt(6.0 / (in + out)), rng);
}

template <typename T>
Mat<T> Linear<T>::forward(ParamStore<T>& ps, Mat<T> input) {
  if (input.cols() != in) throw Error(ErrorCode::ShapeMismatch, "linear input width");
  x = std::move(input);
  Mat<T> y = x * ps.value(w);
  y.rowwise() += ps.value(b).row(0);
  return y;
}

template <typename T>
Mat<T> Linear<T>::backward(ParamStore<T>& ps, const Mat<T>& dy) {
  ps.grad(w).noalias() += x.transpose() * dy;
  ps.grad(b).row(0) += dy.colwise().sum();
  if (!input_grad) return {};
  return dy * ps.value(w).transpose();
}

// --- LayerNorm --------------------------------------------------------------

template <typename T>
void LayerNorm<T>::init(ParamStore<T>& ps, const std::string& name, int d) {
  dim = d;
  gamma = ps.add(name + ".gamma", "layernorm", {d}, 1, d);
  beta = ps.add(name + ".beta", "layernorm", {d}, 1, d);
  ps.value(gamma).setOnes();
}

template <typename T>
Mat<T> LayerNorm<T>::forward(ParamStore<T>& ps, const Mat<T>& input) {
  const Eigen::Index n = input.rows();
  xhat.resize(n, dim);
  rstd.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T mu = input.row(r).mean();
    const T var = (input.row(r).array() - mu).square().mean();
    rstd(r) = T(1) / std::sqrt(var + static_cast<T>(eps));
    xhat.row(r) = (input.row(r).array() - mu) * rstd(r);
  }
  Mat<T> y = xhat.array().rowwise() * ps.value(gamma).row(0).array();
  y.rowwise() += ps.value(beta).row(0);
  return y;
}

template <typename T>
Mat<T> LayerNorm<T>::backward(ParamStore<T>& ps, const Mat<T>& dy) {
  ps.grad(gamma).row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  ps.grad(beta).row(0) += dy.colwise().sum();
  const Mat<T> dxhat = dy.array().rowwise() * ps.value(gamma).row(0).array();
  Mat<T> dx(dy.rows(), dim);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T m1 = dxhat.row(r).mean();
    const T m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
    dx.row(r) = rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
  }
  return dx;
}

// --- activations ------------------------------------------------------------

template <typename T>
Mat<T> Gelu<T>::forward(const Mat<T>& input) {
  x = input;
  return x.unaryExpr([](T v) { return static_cast<T>(0.5) * v * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>)); });
}

template <typename T>
Mat<T> Gelu<T>::backward(const Mat<T>& dy) {
  const T inv_sqrt_2pi = static_cast<T>(1.0 / std::sqrt(2.0 * std::numbers::pi));
  const Mat<T> d = x.unaryExpr([&](T v) {
    return static_cast<T>(0.5) * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>)) +
           v * inv_sqrt_2pi * std::exp(static_cast<T>(-0.5) * v * v);
  });
  return dy.cwiseProduct(d);
}

template <typename T>
Mat<T> Relu<T>::forward(const Mat<T>& input) {
  mask = (input.array() > T(0)).template cast<T>();
  return input.cwiseProduct(mask);
}

template <typename T>
Mat<T> Relu<T>::backward(const Mat<T>& dy) {
  return dy.cwiseProduct(mask);
}

template <typename T>
Mat<T> Dropout<T>::forward(const Mat<T>& input, bool train, Rng* rng) {
  active = train && p > 0.0 && rng != nullptr;
  if (!active) return input;
  mask.resize(input.rows(), input.cols());
  std::bernoulli_distribution keep(1.0 - p);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : T(0);
  return input.cwiseProduct(mask);
}

template <typename T>
Mat<T> Dropout<T>::backward(const Mat<T>& dy) {
  return active ? Mat<T>(dy.cwiseProduct(mask)) : dy;
}

// --- attention --------------------------------------------------------------

template <typename T>
void SelfAttention<T>::init(ParamStore<T>& ps, const std::string& name, int d, int h, Rng& rng) {
  if (h <= 0 || d % h != 0) throw Error(ErrorCode::ShapeMismatch, "embed dim must be divisible by heads");
  dim = d;
  heads = h;
  qkv.init(ps, name + ".qkv", d, 3 * d, rng);
  proj.init(ps, name + ".proj", d, d, rng);
}

template <typename T>
Mat<T> SelfAttention<T>::forward(ParamStore<T>& ps, const Mat<T>& input, int batch_size, int n_tokens) {
  batch = batch_size;
  tokens = n_tokens;
  qkv_out = qkv.forward(ps, input);
  const int dh = dim / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  probs.assign(static_cast<std::size_t>(batch * heads), Mat<T>());
  Mat<T> ctx(input.rows(), dim);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv_out.block(b * tokens, h * dh, tokens, dh);
      const auto k = qkv_out.block(b * tokens, dim + h * dh, tokens, dh);
      const auto v = qkv_out.block(b * tokens, 2 * dim + h * dh, tokens, dh);
      Mat<T> s = (q * k.transpose()) * scale;
      Mat<T>& p = probs[static_cast<std::size_t>(b * heads + h)];
      p = softmax_rows<T>(s);
      ctx.block(b * tokens, h * dh, tokens, dh).noalias() = p * v;
    }
  }
  return proj.forward(ps, ctx);
}

template <typename T>
Mat<T> SelfAttention<T>::backward(ParamStore<T>& ps, const Mat<T>& dy) {
  const Mat<T> dctx = proj.backward(ps, dy);
  const int dh = dim / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Mat<T> dqkv(qkv_out.rows(), qkv_out.cols());
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv_out.block(b * tokens, h * dh, tokens, dh);
      const auto k = qkv_out.block(b * tokens, dim + h * dh, tokens, dh);
      const auto v = qkv_out.block(b * tokens, 2 * dim + h * dh, tokens, dh);
      const Mat<T>& p = probs[static_cast<std::size_t>(b * heads + h)];
      const auto dc = dctx.block(b * tokens, h * dh, tokens, dh);
      const Mat<T> dp = dc * v.transpose();
      Mat<T> ds = p.cwiseProduct(dp);
      const Eigen::Matrix<T, Eigen::Dynamic, 1> rs = ds.rowwise().sum();
      ds -= p.cwiseProduct(rs.replicate(1, tokens));
      ds *= scale;
      dqkv.block(b * tokens, h * dh, tokens, dh).noalias() = ds * k;
      dqkv.block(b * tokens, dim + h * dh, tokens, dh).noalias() = ds.transpose() * q;
      dqkv.block(b * tokens, 2 * dim + h * dh, tokens, dh).noalias() = p.transpose() * dc;
    }
  }
  return qkv.backward(ps, dqkv);
}

// --- convolution ------------------------------------------------------------

template <typename T>
void Conv2d<T>::init(ParamStore<T>& ps, const std::string& name, int in_ch, int out_ch, int kernel_h, int kernel_w,
                     int height, int width, Rng& rng) {
  if (kernel_h % 2 == 0 || kernel_w % 2 == 0) throw Error(ErrorCode::ShapeMismatch, "kernel sizes must be odd");
  cin = in_ch;
  cout = out_ch;
  kh = kernel_h;
  kw = kernel_w;
  h = height;
  wd = width;
  w = ps.add(name + ".weight", "conv", {cout, cin, kh, kw}, cout, cin * kh * kw);
  b = ps.add(name + ".bias", "conv", {cout}, 1, cout);
  fill_normal(ps.value(w), std::sqrt(2.0 / (cin * kh * kw)), rng);
}

template <typename T>
Mat<T> Conv2d<T>::forward(ParamStore<T>& ps, const Mat<T>& input) {
  const int hw = h * wd;
  if (input.cols() != static_cast<Eigen::Index>(cin) * hw) throw Error(ErrorCode::ShapeMismatch, "conv input width");
  const int rh = kh / 2, rw = kw / 2;
  const auto n = static_cast<std::size_t>(input.rows());
  cols.resize(n);
  Mat<T> out(input.rows(), static_cast<Eigen::Index>(cout) * hw);
  for (std::size_t s = 0; s < n; ++s) {
    Mat<T>& c = cols[s];
    c.setZero(static_cast<Eigen::Index>(cin) * kh * kw, hw);
    const T* src = input.row(static_cast<Eigen::Index>(s)).data();
    for (int ci = 0; ci < cin; ++ci)
      for (int dy = 0; dy < kh; ++dy)
        for (int dx = 0; dx < kw; ++dx) {
          T* dst = c.row((ci * kh + dy) * kw + dx).data();
          for (int y = 0; y < h; ++y) {
            const int yy = y + dy - rh;
            if (yy < 0 || yy >= h) continue;
            const T* line = src + ci * hw + yy * wd;
            const int x0 = std::max(0, rw - dx);
            const int x1 = std::min(wd, wd + rw - dx);
            for (int x = x0; x < x1; ++x) dst[y * wd + x] = line[x + dx - rw];
          }
        }
    Eigen::Map<Mat<T>> o(out.row(static_cast<Eigen::Index>(s)).data(), cout, hw);
    o.noalias() = ps.value(w) * c;
    o.colwise() += ps.value(b).row(0).transpose();
  }
  return out;
}

template <typename T>
Mat<T> Conv2d<T>::backward(ParamStore<T>& ps, const Mat<T>& dy) {
  const int hw = h * wd;
  const int rh = kh / 2, rw = kw / 2;
  Mat<T> dx = Mat<T>::Zero(input_grad ? dy.rows() : 0, static_cast<Eigen::Index>(cin) * hw);
  Mat<T> dcols;
  for (Eigen::Index s = 0; s < dy.rows(); ++s) {
    Eigen::Map<const Mat<T>> g(dy.row(s).data(), cout, hw);
    ps.grad(w).noalias() += g * cols[static_cast<std::size_t>(s)].transpose();
    ps.grad(b).row(0) += g.rowwise().sum().transpose();
    if (!input_grad) continue;
    dcols.noalias() = ps.value(w).transpose() * g;
    T* dst = dx.row(s).data();
    for (int ci = 0; ci < cin; ++ci)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          const T* src = dcols.row((ci * kh + ky) * kw + kx).data();
          for (int y = 0; y < h; ++y) {
            const int yy = y + ky - rh;
            if (yy < 0 || yy >= h) continue;
            T* line = dst + ci * hw + yy * wd;
            const int x0 = std::max(0, rw - kx);
            const int x1 = std::min(wd, wd + rw - kx);
            for (int x = x0; x < x1; ++x) line[x + kx - rw] += src[y * wd + x];
          }
        }
  }
  return dx;
}

// --- batch norm -------------------------------------------------------------

template <typename T>
void BatchNorm<T>::init(ParamStore<T>& ps, const std::string& name, int c, int s) {
  channels = c;
  spatial = s;
  gamma = ps.add(name + ".gamma", "batchnorm", {c}, 1, c);
  beta = ps.add(name + ".beta", "batchnorm", {c}, 1, c);
  run_mean = ps.add(name + ".running_mean", "buffer", {c}, 1, c, false);
  run_var = ps.add(name + ".running_var", "buffer", {c}, 1, c, false);
  ps.value(gamma).setOnes();
  ps.value(run_var).setOnes();
}

template <typename T>
Mat<T> BatchNorm<T>::forward(ParamStore<T>& ps, const Mat<T>& input, bool train) {
  if (input.cols() != static_cast<Eigen::Index>(channels) * spatial)
    throw Error(ErrorCode::ShapeMismatch, "batch norm input width");
  const Eigen::Index n = input.rows();
  used_batch_stats = train;
  xhat.resize(n, input.cols());
  rstd.resize(channels);
  Mat<T> y(n, input.cols());
  const double count = static_cast<double>(n) * spatial;
  for (int c = 0; c < channels; ++c) {
    const auto blk = input.middleCols(static_cast<Eigen::Index>(c) * spatial, spatial);
    double mean = 0.0, var = 0.0;
    if (train) {
      mean = static_cast<double>(blk.template cast<double>().sum()) / count;
      var = static_cast<double>((blk.template cast<double>().array() - mean).square().sum()) / count;
      T& rm = ps.value(run_mean)(0, c);
      T& rv = ps.value(run_var)(0, c);
      const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
      rm = static_cast<T>((1.0 - momentum) * static_cast<double>(rm) + momentum * mean);
      rv = static_cast<T>((1.0 - momentum) * static_cast<double>(rv) + momentum * unbiased);
    } else {
      mean = static_cast<double>(ps.value(run_mean)(0, c));
      var = static_cast<double>(ps.value(run_var)(0, c));
    }
    rstd(c) = static_cast<T>(1.0 / std::sqrt(var + eps));
    auto xh = xhat.middleCols(static_cast<Eigen::Index>(c) * spatial, spatial);
    xh = (blk.array() - static_cast<T>(mean)) * rstd(c);
    y.middleCols(static_cast<Eigen::Index>(c) * spatial, spatial) =
        (xh.array() * ps.value(gamma)(0, c) + ps.value(beta)(0, c)).matrix();
  }
  return y;
}

template <typename T>
Mat<T> BatchNorm<T>::backward(ParamStore<T>& ps, const Mat<T>& dy) {
  Mat<T> dx(dy.rows(), dy.cols());
  const T count = static_cast<T>(dy.rows() * spatial);
  for (int c = 0; c < channels; ++c) {
    const auto g = dy.middleCols(static_cast<Eigen::Index>(c) * spatial, spatial);
    const auto xh = xhat.middleCols(static_cast<Eigen::Index>(c) * spatial, spatial);
    const T sum_g = g.sum();
    const T sum_gx = (g.array() * xh.array()).sum();
    ps.grad(gamma)(0, c) += sum_gx;
    ps.grad(beta)(0, c) += sum_g;
    const T k = ps.value(gamma)(0, c) * rstd(c);
    auto d = dx.middleCols(static_cast<Eigen::Index>(c) * spatial, spatial);
    if (used_batch_stats)
      d = (k / count) * (count * g.array() - sum_g - xh.array() * sum_gx);
    else
      d = k * g;
  }
  return dx;
}

// --- pooling ----------------------------------------------------------------

template <typename T>
void MaxPool<T>::init(int c, int height, int width, int pool_h, int pool_w) {
  channels = c;
  h = height;
  w = width;
  ph = pool_h;
  pw = pool_w;
  oh = h / ph;
  ow = w / pw;
  if (oh < 1 || ow < 1) throw Error(ErrorCode::ShapeMismatch, "pool larger than input");
}

template <typename T>
Mat<T> MaxPool<T>::forward(const Mat<T>& input) {
  const Eigen::Index n = input.rows();
  Mat<T> out(n, static_cast<Eigen::Index>(channels) * oh * ow);
  argmax.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(channels * oh * ow)));
  for (Eigen::Index s = 0; s < n; ++s) {
    const T* src = input.row(s).data();
    auto& am = argmax[static_cast<std::size_t>(s)];
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          int best = c * h * w + (y * ph) * w + x * pw;
          for (int dy = 0; dy < ph; ++dy)
            for (int dx = 0; dx < pw; ++dx) {
              const int idx = c * h * w + (y * ph + dy) * w + x * pw + dx;
              if (src[idx] > src[best]) best = idx;
            }
          const int o = (c * oh + y) * ow + x;
          am[static_cast<std::size_t>(o)] = best;
          out(s, o) = src[best];
        }
  }
  return out;
}

template <typename T>
Mat<T> MaxPool<T>::backward(const Mat<T>& dy) {
  Mat<T> dx = Mat<T>::Zero(dy.rows(), static_cast<Eigen::Index>(channels) * h * w);
  for (Eigen::Index s = 0; s < dy.rows(); ++s) {
    const auto& am = argmax[static_cast<std::size_t>(s)];
    for (Eigen::Index o = 0; o < dy.cols(); ++o) dx(s, am[static_cast<std::size_t>(o)]) += dy(s, o);
  }
  return dx;
}

// --- loss -------------------------------------------------------------------

template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits) {
  Mat<T> p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

template <typename T>
double softmax_cross_entropy(const Mat<T>& logits, const std::vector<int>& labels, Mat<T>& dlogits) {
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw Error(ErrorCode::ShapeMismatch, "labels vs logits");
  dlogits = softmax_rows<T>(logits);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols()) throw Error(ErrorCode::LabelError, "label " + std::to_string(y) + " out of range");
    const double mx = static_cast<double>(logits.row(r).maxCoeff());
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<double>(logits(r, c)) - mx);
    loss += mx + std::log(z) - static_cast<double>(logits(r, y));
    dlogits(r, y) -= T(1);
  }
  dlogits /= static_cast<T>(n);
  return loss / static_cast<double>(n);
}

#define RMG_INSTANTIATE(T)                                                                          \
  template struct Linear<T>;                                                                        \
  template struct LayerNorm<T>;                                                                     \
  template struct Gelu<T>;                                                                          \
  template struct Relu<T>;                                                                          \
  template struct Dropout<T>;                                                                       \
  template struct SelfAttention<T>;                                                                 \
  template struct Conv2d<T>;                                                                        \
  template struct BatchNorm<T>;                                                                     \
  template struct MaxPool<T>;                                                                       \
  template Mat<T> softmax_rows<T>(const Mat<T>&);                                                   \
  template double softmax_cross_entropy<T>(const Mat<T>&, const std::vector<int>&, Mat<T>&);

RMG_INSTANTIATE(float)
RMG_INSTANTIATE(double)

#undef RMG_INSTANTIATE

}  // namespace rmg::learn
