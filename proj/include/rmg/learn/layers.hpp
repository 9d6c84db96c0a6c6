#pragma once

// Batched layers with hand-written backward passes. Activations are row-major
// matrices with one row per sample (or per token); each layer caches what its
// backward pass needs from the most recent forward call and accumulates
// parameter gradients into the store.

#include "rmg/learn/params.hpp"

#include <random>
#include <string>
#include <vector>

namespace rmg::learn {

using Rng = std::mt19937_64;

template <typename T>
struct Linear {
  int w = -1, b = -1;
  int in = 0, out = 0;
  bool input_grad = true;  // false for a first layer whose input needs no gradient
  Mat<T> x;

  void init(ParamStore<T>& ps, const std::string& name, int in_dim, int out_dim, Rng& rng, double gain = 1.0);
  Mat<T> forward(ParamStore<T>& ps, Mat<T> input);
  Mat<T> backward(ParamStore<T>& ps, const Mat<T>& dy);
};

// Normalizes each row over its columns.
template <typename T>
struct LayerNorm {
  int gamma = -1, beta = -1;
  int dim = 0;
  double eps = 1e-5;
  Mat<T> xhat;
  Vec<T> rstd;

  void init(ParamStore<T>& ps, const std::string& name, int d);
  Mat<T> forward(ParamStore<T>& ps, const Mat<T>& input);
  Mat<T> backward(ParamStore<T>& ps, const Mat<T>& dy);
};

template <typename T>
struct Gelu {
  Mat<T> x;
  Mat<T> forward(const Mat<T>& input);
  Mat<T> backward(const Mat<T>& dy);
};

template <typename T>
struct Relu {
  Mat<T> mask;
  Mat<T> forward(const Mat<T>& input);
  Mat<T> backward(const Mat<T>& dy);
};

// Inverted dropout; identity when not training or p == 0.
template <typename T>
struct Dropout {
  double p = 0.0;
  Mat<T> mask;
  bool active = false;
  Mat<T> forward(const Mat<T>& input, bool train, Rng* rng);
  Mat<T> backward(const Mat<T>& dy);
};

// Multi-head self-attention over `batch` sequences of `tokens` rows each.
template <typename T>
struct SelfAttention {
  Linear<T> qkv, proj;
  int dim = 0, heads = 0;
  int batch = 0, tokens = 0;
  Mat<T> qkv_out;
  std::vector<Mat<T>> probs;  // batch * heads matrices of tokens x tokens

  void init(ParamStore<T>& ps, const std::string& name, int d, int h, Rng& rng);
  Mat<T> forward(ParamStore<T>& ps, const Mat<T>& input, int batch_size, int n_tokens);
  Mat<T> backward(ParamStore<T>& ps, const Mat<T>& dy);
};

// 2-D convolution, stride 1, "same" zero padding, odd kernel. Rows of the
// input are samples laid out as (channel, height, width).
template <typename T>
struct Conv2d {
  int w = -1, b = -1;
  int cin = 0, cout = 0, kh = 1, kw = 1, h = 0, wd = 0;
  bool input_grad = true;
  std::vector<Mat<T>> cols;

  void init(ParamStore<T>& ps, const std::string& name, int in_ch, int out_ch, int kernel_h, int kernel_w, int height,
            int width, Rng& rng);
  Mat<T> forward(ParamStore<T>& ps, const Mat<T>& input);
  Mat<T> backward(ParamStore<T>& ps, const Mat<T>& dy);
};

// Per-channel batch normalization over (batch, spatial).
template <typename T>
struct BatchNorm {
  int gamma = -1, beta = -1, run_mean = -1, run_var = -1;
  int channels = 0, spatial = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  bool used_batch_stats = false;
  Mat<T> xhat;
  Vec<T> rstd;

  void init(ParamStore<T>& ps, const std::string& name, int c, int s);
  Mat<T> forward(ParamStore<T>& ps, const Mat<T>& input, bool train);
  Mat<T> backward(ParamStore<T>& ps, const Mat<T>& dy);
};

// Non-overlapping max pooling (ph x pw), floor semantics.
template <typename T>
struct MaxPool {
  int channels = 0, h = 0, w = 0, ph = 1, pw = 1;
  int oh = 0, ow = 0;
  std::vector<std::vector<int>> argmax;

  void init(int c, int height, int width, int pool_h, int pool_w);
  Mat<T> forward(const Mat<T>& input);
  Mat<T> backward(const Mat<T>& dy);
};

// Row-wise softmax.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits);

// Mean cross-entropy; writes d(loss)/d(logits) into `dlogits`.
template <typename T>
double softmax_cross_entropy(const Mat<T>& logits, const std::vector<int>& labels, Mat<T>& dlogits);

}  // namespace rmg::learn
