#pragma once

// Classifiers: vision transformer, 2-D CNN over spectrogram stacks, 1-D CNN
// over time waveforms, and a single linear layer (used to validate gradients).

#include "rmg/learn/layers.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace rmg::learn {

enum class Arch { ViT, CNN2D, CNN1D, Linear };

std::string_view arch_name(Arch a);
Arch parse_arch(std::string_view name);

struct ModelConfig {
  Arch arch = Arch::ViT;
  int in_channels = 48;
  int height = 40;
  int width = 40;
  int length = 1250;  // CNN1D samples per channel
  int num_classes = 23;

  int patch = 5;
  int embed = 512;
  int depth = 6;
  int heads = 16;
  int mlp = 64;
  double dropout = 0.1;

  std::vector<int> channels = {4, 8, 16};
  int kernel = 3;
  int pool = 2;
  int hidden = 32;

  int input_dim() const;
  void validate() const;

  static ModelConfig vit_full();
  static ModelConfig vit_desk();
  static ModelConfig cnn2d();
  static ModelConfig cnn1d();
  static ModelConfig linear(int in_dim, int classes = 23);
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // x has one row per sample of width config().input_dim(). `train` enables
  // dropout (when rng is given) and batch statistics in batch norm.
  Mat<T> forward(const Mat<T>& x, bool train, Rng* rng = nullptr);
  // Accumulates parameter gradients for the last forward call.
  virtual void backward(const Mat<T>& dlogits) = 0;

 protected:
  virtual Mat<T> forward_impl(const Mat<T>& x, bool train, Rng* rng) = 0;
  ModelConfig cfg_;
  ParamStore<T> params_;
};

template <typename T>
class VisionTransformer final : public Model<T> {
 public:
  VisionTransformer(const ModelConfig& cfg, Rng& rng);
  void backward(const Mat<T>& dlogits) override;

  int tokens() const { return n_patches_ + 1; }
  // Token matrix after embedding, class token and positions: (batch * tokens) x embed.
  const Mat<T>& embedded() const { return embedded_; }
  // Attention probabilities of block `layer`, one tokens x tokens matrix per (sample, head).
  const std::vector<Mat<T>>& attention(int layer) const { return blocks_[static_cast<std::size_t>(layer)].attn.probs; }

 protected:
  Mat<T> forward_impl(const Mat<T>& x, bool train, Rng* rng) override;

 private:
  struct Block {
    LayerNorm<T> ln1, ln2;
    SelfAttention<T> attn;
    Dropout<T> drop1, drop2;
    Linear<T> fc1, fc2;
    Gelu<T> act;
  };
  int n_patches_ = 0;
  int patch_dim_ = 0;
  int batch_ = 0;
  Linear<T> embed_;
  int cls_ = -1, pos_ = -1;
  Dropout<T> drop_;
  std::vector<Block> blocks_;
  LayerNorm<T> norm_;
  Linear<T> head_;
  Mat<T> embedded_;
};

// Convolution stages (conv, batch norm, ReLU, max pool) then two linear layers.
// CNN1D is the same network with height 1 and a 1 x k kernel.
template <typename T>
class ConvNet final : public Model<T> {
 public:
  ConvNet(const ModelConfig& cfg, Rng& rng);
  void backward(const Mat<T>& dlogits) override;

  int flat_dim() const { return flat_; }
  const Mat<T>& stage_output(int stage) const { return bn_out_[static_cast<std::size_t>(stage)]; }

 protected:
  Mat<T> forward_impl(const Mat<T>& x, bool train, Rng* rng) override;

 private:
  struct Stage {
    Conv2d<T> conv;
    BatchNorm<T> bn;
    Relu<T> act;
    MaxPool<T> pool;
  };
  std::vector<Stage> stages_;
  std::vector<Mat<T>> bn_out_;
  int flat_ = 0;
  Linear<T> fc1_, fc2_;
  Relu<T> act_;
  Dropout<T> drop_;
};

template <typename T>
class LinearModel final : public Model<T> {
 public:
  LinearModel(const ModelConfig& cfg, Rng& rng);
  void backward(const Mat<T>& dlogits) override;

 protected:
  Mat<T> forward_impl(const Mat<T>& x, bool train, Rng* rng) override;

 private:
  Linear<T> fc_;
};

template <typename T>
std::unique_ptr<Model<T>> make_model(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace rmg::learn
