#include "rmg/learn/models.hpp"

#include "rmg/error.hpp"

#include <json.hpp>

#include <cmath>

namespace rmg::learn {

std::string_view arch_name(Arch a) {
  switch (a) {
    case Arch::ViT: return "vit";
    case Arch::CNN2D: return "cnn2d";
    case Arch::CNN1D: return "cnn1d";
    case Arch::Linear: return "linear";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  for (Arch a : {Arch::ViT, Arch::CNN2D, Arch::CNN1D, Arch::Linear})
    if (arch_name(a) == name) return a;
  throw Error(ErrorCode::FormatError, "unknown model '" + std::string(name) + "'");
}

int ModelConfig::input_dim() const {
  switch (arch) {
    case Arch::CNN1D: return in_channels * length;
    case Arch::Linear: return in_channels;
    default: return in_channels * height * width;
  }
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw Error(ErrorCode::ShapeMismatch, "need at least two classes");
  if (in_channels < 1) throw Error(ErrorCode::ShapeMismatch, "need at least one input channel");
  if (arch == Arch::ViT) {
    if (patch < 1 || height % patch != 0 || width % patch != 0)
      throw Error(ErrorCode::ShapeMismatch, "image size must be divisible by the patch size");
    if (heads < 1 || embed % heads != 0) throw Error(ErrorCode::ShapeMismatch, "embed dim must be divisible by heads");
    if (depth < 1 || mlp < 1) throw Error(ErrorCode::ShapeMismatch, "depth and mlp must be positive");
  }
  if (arch == Arch::CNN2D || arch == Arch::CNN1D) {
    if (channels.empty() || kernel % 2 == 0 || pool < 1 || hidden < 1)
      throw Error(ErrorCode::ShapeMismatch, "invalid convolution settings");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::RangeError, "dropout must be in [0, 1)");
}

ModelConfig ModelConfig::vit_full() {
  ModelConfig c;
  c.arch = Arch::ViT;
  return c;
}

ModelConfig ModelConfig::vit_desk() {
  ModelConfig c = vit_full();
  c.embed = 64;
  c.depth = 1;
  c.heads = 4;
  c.mlp = 64;
  return c;
}

ModelConfig ModelConfig::cnn2d() {
  ModelConfig c;
  c.arch = Arch::CNN2D;
  c.channels = {4, 8, 16};
  c.kernel = 3;
  c.pool = 2;
  c.hidden = 32;
  return c;
}

ModelConfig ModelConfig::cnn1d() {
  ModelConfig c;
  c.arch = Arch::CNN1D;
  c.in_channels = 64;
  c.height = 1;
  c.length = 1250;
  c.channels = {8, 16, 16};
  c.kernel = 9;
  c.pool = 4;
  c.hidden = 32;
  return c;
}

ModelConfig ModelConfig::linear(int in_dim, int classes) {
  ModelConfig c;
  c.arch = Arch::Linear;
  c.in_channels = in_dim;
  c.num_classes = classes;
  c.dropout = 0.0;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"arch", arch_name(c.arch)}, {"in_channels", c.in_channels}, {"height", c.height}, {"width", c.width},
          {"length", c.length},        {"num_classes", c.num_classes}, {"patch", c.patch},   {"embed", c.embed},
          {"depth", c.depth},          {"heads", c.heads},             {"mlp", c.mlp},       {"dropout", c.dropout},
          {"channels", c.channels},    {"kernel", c.kernel},           {"pool", c.pool},     {"hidden", c.hidden}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.arch = parse_arch(j.at("arch").get<std::string>());
    c.in_channels = j.at("in_channels");
    c.height = j.at("height");
    c.width = j.at("width");
    c.length = j.at("length");
    c.num_classes = j.at("num_classes");
    c.patch = j.at("patch");
    c.embed = j.at("embed");
    c.depth = j.at("depth");
    c.heads = j.at("heads");
    c.mlp = j.at("mlp");
    c.dropout = j.at("dropout");
    c.channels = j.at("channels").get<std::vector<int>>();
    c.kernel = j.at("kernel");
    c.pool = j.at("pool");
    c.hidden = j.at("hidden");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
Mat<T> Model<T>::forward(const Mat<T>& x, bool train, Rng* rng) {
  if (x.cols() != cfg_.input_dim())
    throw Error(ErrorCode::ShapeMismatch,
                "input width " + std::to_string(x.cols()) + ", expected " + std::to_string(cfg_.input_dim()));
  // NaN or Inf anywhere turns the sum into NaN; much cheaper than allFinite().
  if (!std::isfinite((x.array() * T(0)).sum())) throw Error(ErrorCode::NonFiniteInput, "model input contains NaN or Inf");
  return forward_impl(x, train, rng);
}

// --- ViT --------------------------------------------------------------------

template <typename T>
VisionTransformer<T>::VisionTransformer(const ModelConfig& cfg, Rng& rng) : Model<T>(cfg) {
  cfg.validate();
  auto& ps = this->params_;
  const int g = (cfg.height / cfg.patch) * (cfg.width / cfg.patch);
  n_patches_ = g;
  patch_dim_ = cfg.in_channels * cfg.patch * cfg.patch;
  embed_.init(ps, "patch_embed", patch_dim_, cfg.embed, rng);
  embed_.input_grad = false;
  cls_ = ps.add("cls_token", "embedding", {cfg.embed}, 1, cfg.embed);
  pos_ = ps.add("pos_embed", "embedding", {g + 1, cfg.embed}, g + 1, cfg.embed);
  std::normal_distribution<double> n(0.0, 0.02);
  for (Eigen::Index i = 0; i < ps.value(cls_).size(); ++i) ps.value(cls_).data()[i] = static_cast<T>(n(rng));
  for (Eigen::Index i = 0; i < ps.value(pos_).size(); ++i) ps.value(pos_).data()[i] = static_cast<T>(n(rng));
  drop_.p = cfg.dropout;
  blocks_.resize(static_cast<std::size_t>(cfg.depth));
  for (int d = 0; d < cfg.depth; ++d) {
    auto& b = blocks_[static_cast<std::size_t>(d)];
    const std::string name = "block" + std::to_string(d);
    b.ln1.init(ps, name + ".ln1", cfg.embed);
    b.attn.init(ps, name + ".attn", cfg.embed, cfg.heads, rng);
    b.ln2.init(ps, name + ".ln2", cfg.embed);
    b.fc1.init(ps, name + ".mlp.fc1", cfg.embed, cfg.mlp, rng);
    b.fc2.init(ps, name + ".mlp.fc2", cfg.mlp, cfg.embed, rng);
    b.drop1.p = cfg.dropout;
    b.drop2.p = cfg.dropout;
  }
  norm_.init(ps, "norm", cfg.embed);
  head_.init(ps, "head", cfg.embed, cfg.num_classes, rng);
}

template <typename T>
Mat<T> VisionTransformer<T>::forward_impl(const Mat<T>& x, bool train, Rng* rng) {
  const ModelConfig& c = this->cfg_;
  auto& ps = this->params_;
  batch_ = static_cast<int>(x.rows());
  const int p = c.patch;
  const int gw = c.width / p;
  const int hw = c.height * c.width;
  const int tok = n_patches_ + 1;

  Mat<T> patches(static_cast<Eigen::Index>(batch_) * n_patches_, patch_dim_);
  for (int b = 0; b < batch_; ++b) {
    const T* src = x.row(b).data();
    for (int t = 0; t < n_patches_; ++t) {
      const int py = t / gw, px = t % gw;
      T* dst = patches.row(static_cast<Eigen::Index>(b) * n_patches_ + t).data();
      for (int ch = 0; ch < c.in_channels; ++ch)
        for (int i = 0; i < p; ++i) {
          const T* line = src + ch * hw + (py * p + i) * c.width + px * p;
          for (int j = 0; j < p; ++j) *dst++ = line[j];
        }
    }
  }
  const Mat<T> emb = embed_.forward(ps, std::move(patches));
  embedded_.resize(static_cast<Eigen::Index>(batch_) * tok, c.embed);
  for (int b = 0; b < batch_; ++b) {
    embedded_.row(static_cast<Eigen::Index>(b) * tok) = ps.value(cls_).row(0) + ps.value(pos_).row(0);
    embedded_.middleRows(static_cast<Eigen::Index>(b) * tok + 1, n_patches_) =
        emb.middleRows(static_cast<Eigen::Index>(b) * n_patches_, n_patches_) + ps.value(pos_).bottomRows(n_patches_);
  }
  Mat<T> h = drop_.forward(embedded_, train, rng);
  for (auto& blk : blocks_) {
    h += blk.drop1.forward(blk.attn.forward(ps, blk.ln1.forward(ps, h), batch_, tok), train, rng);
    h += blk.drop2.forward(blk.fc2.forward(ps, blk.act.forward(blk.fc1.forward(ps, blk.ln2.forward(ps, h)))), train, rng);
  }
  const Mat<T> normed = norm_.forward(ps, h);
  Mat<T> cls(batch_, c.embed);
  for (int b = 0; b < batch_; ++b) cls.row(b) = normed.row(static_cast<Eigen::Index>(b) * tok);
  return head_.forward(ps, cls);
}

template <typename T>
void VisionTransformer<T>::backward(const Mat<T>& dlogits) {
  const ModelConfig& c = this->cfg_;
  auto& ps = this->params_;
  const int tok = n_patches_ + 1;
  const Mat<T> dcls = head_.backward(ps, dlogits);
  Mat<T> dnormed = Mat<T>::Zero(static_cast<Eigen::Index>(batch_) * tok, c.embed);
  for (int b = 0; b < batch_; ++b) dnormed.row(static_cast<Eigen::Index>(b) * tok) = dcls.row(b);
  Mat<T> dh = norm_.backward(ps, dnormed);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    auto& blk = *it;
    dh += blk.ln2.backward(ps, blk.fc1.backward(ps, blk.act.backward(blk.fc2.backward(ps, blk.drop2.backward(dh)))));
    dh += blk.ln1.backward(ps, blk.attn.backward(ps, blk.drop1.backward(dh)));
  }
  const Mat<T> demb = drop_.backward(dh);
  Mat<T> dpatch(static_cast<Eigen::Index>(batch_) * n_patches_, c.embed);
  for (int b = 0; b < batch_; ++b) {
    ps.grad(cls_).row(0) += demb.row(static_cast<Eigen::Index>(b) * tok);
    ps.grad(pos_) += demb.middleRows(static_cast<Eigen::Index>(b) * tok, tok);
    dpatch.middleRows(static_cast<Eigen::Index>(b) * n_patches_, n_patches_) =
        demb.middleRows(static_cast<Eigen::Index>(b) * tok + 1, n_patches_);
  }
  embed_.backward(ps, dpatch);
}

// --- ConvNet ----------------------------------------------------------------

template <typename T>
ConvNet<T>::ConvNet(const ModelConfig& cfg, Rng& rng) : Model<T>(cfg) {
  cfg.validate();
  auto& ps = this->params_;
  const bool one_d = cfg.arch == Arch::CNN1D;
  int h = one_d ? 1 : cfg.height;
  int w = one_d ? cfg.length : cfg.width;
  const int kh = one_d ? 1 : cfg.kernel;
  const int ph = one_d ? 1 : cfg.pool;
  int cin = cfg.in_channels;
  stages_.resize(cfg.channels.size());
  for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
    const int cout = cfg.channels[s];
    auto& st = stages_[s];
    const std::string name = "conv" + std::to_string(s);
    st.conv.init(ps, name, cin, cout, kh, cfg.kernel, h, w, rng);
    st.conv.input_grad = s > 0;
    st.bn.init(ps, name + ".bn", cout, h * w);
    st.pool.init(cout, h, w, ph, cfg.pool);
    h = st.pool.oh;
    w = st.pool.ow;
    cin = cout;
  }
  flat_ = cin * h * w;
  fc1_.init(ps, "fc1", flat_, cfg.hidden, rng);
  fc2_.init(ps, "fc2", cfg.hidden, cfg.num_classes, rng);
  drop_.p = cfg.dropout;
  bn_out_.resize(stages_.size());
}

template <typename T>
Mat<T> ConvNet<T>::forward_impl(const Mat<T>& x, bool train, Rng* rng) {
  auto& ps = this->params_;
  Mat<T> h = x;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    auto& st = stages_[s];
    bn_out_[s] = st.bn.forward(ps, st.conv.forward(ps, h), train);
    h = st.pool.forward(st.act.forward(bn_out_[s]));
  }
  return fc2_.forward(ps, drop_.forward(act_.forward(fc1_.forward(ps, h)), train, rng));
}

template <typename T>
void ConvNet<T>::backward(const Mat<T>& dlogits) {
  auto& ps = this->params_;
  Mat<T> d = fc1_.backward(ps, act_.backward(drop_.backward(fc2_.backward(ps, dlogits))));
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it)
    d = it->conv.backward(ps, it->bn.backward(ps, it->act.backward(it->pool.backward(d))));
}

// --- Linear -----------------------------------------------------------------

template <typename T>
LinearModel<T>::LinearModel(const ModelConfig& cfg, Rng& rng) : Model<T>(cfg) {
  cfg.validate();
  fc_.init(this->params_, "fc", cfg.in_channels, cfg.num_classes, rng);
}

template <typename T>
Mat<T> LinearModel<T>::forward_impl(const Mat<T>& x, bool, Rng*) {
  return fc_.forward(this->params_, x);
}

template <typename T>
void LinearModel<T>::backward(const Mat<T>& dlogits) {
  fc_.backward(this->params_, dlogits);
}

template <typename T>
std::unique_ptr<Model<T>> make_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  switch (cfg.arch) {
    case Arch::ViT: return std::make_unique<VisionTransformer<T>>(cfg, rng);
    case Arch::CNN2D:
    case Arch::CNN1D: return std::make_unique<ConvNet<T>>(cfg, rng);
    case Arch::Linear: return std::make_unique<LinearModel<T>>(cfg, rng);
  }
  throw Error(ErrorCode::FormatError, "unknown architecture");
}

template class Model<float>;
template class Model<double>;
template class VisionTransformer<float>;
template class VisionTransformer<double>;
template class ConvNet<float>;
template class ConvNet<double>;
template class LinearModel<float>;
template class LinearModel<double>;
template std::unique_ptr<Model<float>> make_model<float>(const ModelConfig&, std::uint64_t);
template std::unique_ptr<Model<double>> make_model<double>(const ModelConfig&, std::uint64_t);

}  // namespace rmg::learn
