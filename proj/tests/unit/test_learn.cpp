#include "rmg/error.hpp"
#include "rmg/learn/serialize.hpp"
#include "rmg/learn/train.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace rmg;
using namespace rmg::learn;

namespace {

template <typename T>
Mat<T> random_input(int n, int dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat<T> x(n, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<T>(u(rng));
  return x;
}

ModelConfig tiny_vit() {
  ModelConfig c = ModelConfig::vit_full();
  c.in_channels = 3;
  c.height = c.width = 10;
  c.embed = 16;
  c.depth = 1;
  c.heads = 2;
  c.mlp = 8;
  c.num_classes = 5;
  return c;
}

ModelConfig tiny_cnn() {
  ModelConfig c = ModelConfig::cnn2d();
  c.in_channels = 3;
  c.height = c.width = 8;
  c.channels = {2, 3};
  c.hidden = 6;
  c.num_classes = 5;
  return c;
}

// Ten separable samples: each class lights up a different block of features.
RowMatrixXf overfit_set(int n, int dim, int classes, std::vector<int>& labels, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  RowMatrixXf x(n, dim);
  labels.clear();
  for (int r = 0; r < n; ++r) {
    const int y = r % classes;
    labels.push_back(y);
    for (int c = 0; c < dim; ++c) x(r, c) = static_cast<float>(g(rng) + ((c * classes / dim) == y ? 1.0 : 0.0));
  }
  return x;
}

}  // namespace

TEST_CASE("full-size ViT parameter count and token shape") {
  const ModelConfig c = ModelConfig::vit_full();
  CHECK(c.patch == 5);
  CHECK(c.embed == 512);
  CHECK(c.depth == 6);
  CHECK(c.heads == 16);
  CHECK(c.mlp == 64);
  CHECK(c.dropout == 0.1);
  auto m = make_model<float>(c, 1);
  // embed 1200*512+512, cls 512, pos 65*512, 6 blocks of
  // (2*1024 LN + 512*1536+1536 + 512*512+512 + 512*64+64 + 64*512+512), LN 1024, head 512*23+23.
  const std::size_t block = 2 * 1024 + (512 * 1536 + 1536) + (512 * 512 + 512) + (512 * 64 + 64) + (64 * 512 + 512);
  const std::size_t expect = (1200 * 512 + 512) + 512 + 65 * 512 + 6 * block + 1024 + (512 * 23 + 23);
  CHECK(expect == 7374231u);
  CHECK(m->params().count() == expect);

  auto& vit = dynamic_cast<VisionTransformer<float>&>(*m);
  CHECK(vit.tokens() == 65);
  const auto logits = m->forward(random_input<float>(1, c.input_dim(), 2), false);
  CHECK(logits.cols() == 23);
  CHECK(vit.embedded().rows() == 65);
  CHECK(vit.embedded().cols() == 512);
  const auto p = predict_logits(std::vector<double>(logits.data(), logits.data() + 23));
  CHECK(std::accumulate(p.prob.begin(), p.prob.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("attention rows sum to one in every head and layer") {
  ModelConfig c = tiny_vit();
  c.depth = 2;
  auto m = make_model<double>(c, 3);
  m->forward(random_input<double>(3, c.input_dim(), 4), false);
  auto& vit = dynamic_cast<VisionTransformer<double>&>(*m);
  for (int layer = 0; layer < 2; ++layer) {
    REQUIRE(vit.attention(layer).size() == 3u * 2u);
    for (const auto& p : vit.attention(layer))
      for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("eval-mode ViT has no cross-sample leakage") {
  const ModelConfig c = tiny_vit();
  auto m = make_model<double>(c, 5);
  const auto x = random_input<double>(4, c.input_dim(), 6);
  Mat<double> swapped = x;
  swapped.row(0) = x.row(2);
  swapped.row(2) = x.row(0);
  const auto a = m->forward(x, false);
  const auto b = m->forward(swapped, false);
  CHECK((a.row(0) - b.row(2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.row(2) - b.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.row(1) - b.row(1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("without position embeddings the ViT ignores patch order") {
  const ModelConfig c = tiny_vit();
  auto m = make_model<double>(c, 7);
  auto& ps = m->params();
  ps.value(*ps.find("pos_embed")).setZero();
  const auto x = random_input<double>(1, c.input_dim(), 8);
  // Swap patch (0,0) with patch (1,1) in every channel.
  Mat<double> y = x;
  for (int ch = 0; ch < c.in_channels; ++ch)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const int a = ch * 100 + i * 10 + j;
        const int b = ch * 100 + (5 + i) * 10 + (5 + j);
        std::swap(y(0, a), y(0, b));
      }
  const auto la = m->forward(x, false);
  const auto lb = m->forward(y, false);
  CHECK((la - lb).cwiseAbs().maxCoeff() < 1e-12);
  // With position embeddings restored the order matters.
  auto m2 = make_model<double>(c, 7);
  CHECK((m2->forward(x, false) - m2->forward(y, false)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("gradient checks") {
  SUBCASE("tiny ViT, full patch grid") {
    ModelConfig c = ModelConfig::vit_full();
    c.embed = 16;
    c.depth = 1;
    c.heads = 2;
    c.mlp = 16;
    const auto x = random_input<double>(2, c.input_dim(), 9);
    const auto r = grad_check(c, x, {3, 17}, 1e-5, 200, 11);
    MESSAGE("ViT max rel err " << r.max_relative_error);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.per_kind.count("layernorm") == 1);
    CHECK(r.per_kind.count("embedding") == 1);
  }
  SUBCASE("tiny CNN2D") {
    ModelConfig c = ModelConfig::cnn2d();
    const auto x = random_input<double>(3, c.input_dim(), 10);
    const auto r = grad_check(c, x, {1, 2, 22}, 1e-5, 200, 12);
    MESSAGE("CNN2D max rel err " << r.max_relative_error);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.per_kind.count("batchnorm") == 1);
    CHECK(r.per_kind.count("conv") == 1);
  }
  SUBCASE("CNN1D") {
    ModelConfig c = ModelConfig::cnn1d();
    c.in_channels = 4;
    c.length = 200;
    const auto x = random_input<double>(2, c.input_dim(), 13);
    const auto r = grad_check(c, x, {0, 4}, 1e-5, 200, 14);
    CHECK(r.max_relative_error < 1e-4);
  }
  SUBCASE("linear model") {
    const ModelConfig c = ModelConfig::linear(20, 4);
    const auto x = random_input<double>(3, 20, 15);
    const auto r = grad_check(c, x, {0, 1, 3}, 1e-5, 200, 16);
    MESSAGE("linear max rel err " << r.max_relative_error);
    CHECK(r.max_relative_error < 1e-7);
  }
}

TEST_CASE("10-sample overfit, determinism and lr=0") {
  std::vector<int> labels;
  ModelConfig c = tiny_vit();
  c.dropout = 0.0;
  const RowMatrixXf x = overfit_set(10, c.input_dim(), c.num_classes, labels, 1);
  DataView d{&x, {}, labels};
  d.rows.resize(10);
  std::iota(d.rows.begin(), d.rows.end(), 0);
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.epochs = 80;
  tc.batch_size = 10;
  tc.seed = 4;

  auto m = make_model<float>(c, 3);
  const auto res = train(*m, d, tc);
  CHECK(res.loss_curve.back() < 0.05);
  for (std::size_t e = 1; e < res.loss_curve.size(); ++e) CHECK(res.loss_curve[e] < res.loss_curve[e - 1]);
  CHECK(res.final_train_accuracy == 1.0);
  const auto pred = predict(*m, x, d.rows);
  for (std::size_t k = 0; k < 10; ++k) CHECK(pred[k].label == labels[k]);

  auto m2 = make_model<float>(c, 3);
  const auto res2 = train(*m2, d, tc);
  CHECK(std::abs(res2.loss_curve.back() - res.loss_curve.back()) <= 1e-12);

  TrainConfig frozen = tc;
  frozen.lr = 0.0;
  frozen.epochs = 3;
  auto m3 = make_model<float>(c, 3);
  const auto before = serialize_model(*m3);
  const auto res3 = train(*m3, d, frozen);
  CHECK(serialize_model(*m3) == before);
  CHECK(res3.loss_curve[0] == doctest::Approx(res3.loss_curve[2]).epsilon(1e-6));
}

TEST_CASE("training errors") {
  std::vector<int> labels;
  const ModelConfig c = ModelConfig::linear(8, 3);
  const RowMatrixXf x = overfit_set(6, 8, 3, labels, 2);
  auto m = make_model<float>(c, 1);
  DataView d{&x, {0, 1, 2}, {0, 1, 7}};
  try {
    train(*m, d, TrainConfig{});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LabelError);
  }
  RowMatrixXf huge = x * 1e30f;
  DataView big{&huge, {0, 1, 2, 3}, {0, 1, 2, 0}};
  TrainConfig tc;
  tc.lr = 1e30;
  tc.epochs = 5;
  try {
    train(*m, big, tc);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::DivergenceError || e.code() == ErrorCode::NonFiniteInput));
  }
  RowMatrixXf bad = x;
  bad(0, 0) = std::nanf("");
  try {
    m->forward(bad.cast<float>(), false);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteInput);
  }
}

TEST_CASE("shuffled labels keep the loss near ln 23") {
  // Balanced 23-class set with labels independent of the inputs.
  ModelConfig c = ModelConfig::linear(16, 23);
  const int n = 23 * 20;
  std::vector<int> labels(n);
  for (int k = 0; k < n; ++k) labels[static_cast<std::size_t>(k)] = k % 23;
  std::mt19937_64 rng(3);
  std::shuffle(labels.begin(), labels.end(), rng);
  RowMatrixXf x = random_input<float>(n, 16, 4);
  DataView d{&x, std::vector<int>(n), labels};
  std::iota(d.rows.begin(), d.rows.end(), 0);
  TrainConfig tc;
  tc.lr = 1e-4;
  tc.epochs = 3;
  auto m = make_model<float>(c, 2);
  const auto res = train(*m, d, tc);
  for (double l : res.loss_curve) CHECK(std::abs(l - std::log(23.0)) < 0.25);
}

TEST_CASE("CNN behaviour") {
  SUBCASE("zero image gives finite logits") {
    auto m = make_model<float>(ModelConfig::cnn2d(), 1);
    const auto l = m->forward(Mat<float>::Zero(2, m->config().input_dim()), false);
    CHECK(l.allFinite());
    CHECK(l.cols() == 23);
    CHECK((m->forward(Mat<float>::Zero(2, m->config().input_dim()), false) - l).cwiseAbs().maxCoeff() == 0.0f);
  }
  SUBCASE("default flat sizes") {
    auto m2 = make_model<float>(ModelConfig::cnn2d(), 1);
    CHECK(dynamic_cast<ConvNet<float>&>(*m2).flat_dim() == 400);
    auto m1 = make_model<float>(ModelConfig::cnn1d(), 1);
    CHECK(dynamic_cast<ConvNet<float>&>(*m1).flat_dim() == 304);
    const auto l = m1->forward(random_input<float>(2, 64 * 1250, 3), false);
    CHECK(l.cols() == 23);
  }
  SUBCASE("batch norm output mean equals the shift parameter") {
    auto m = make_model<double>(tiny_cnn(), 2);
    auto& ps = m->params();
    ps.value(*ps.find("conv0.bn.beta")) << 0.3, -0.7;
    m->forward(random_input<double>(256, m->config().input_dim(), 5), true);
    const auto& out = dynamic_cast<ConvNet<double>&>(*m).stage_output(0);
    const int spatial = 64;
    CHECK(std::abs(out.middleCols(0, spatial).mean() - 0.3) < 1e-3);
    CHECK(std::abs(out.middleCols(spatial, spatial).mean() + 0.7) < 1e-3);
  }
}

TEST_CASE("prediction tie rule and shift invariance") {
  const auto z = predict_logits(std::vector<double>(23, 0.0));
  CHECK(z.label == 0);
  std::vector<double> l = {0.3, 2.0, -1.0, 2.0};
  const auto a = predict_logits(l);
  CHECK(a.label == 1);
  for (auto& v : l) v += 100.0;
  const auto b = predict_logits(l);
  CHECK(b.label == 1);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(a.prob[k] - b.prob[k]) < 1e-9);
}

TEST_CASE("RMGM round trip is bit exact") {
  for (const ModelConfig& c : {tiny_vit(), tiny_cnn(), ModelConfig::linear(7, 3)}) {
    auto m = make_model<float>(c, 9);
    const std::string bytes = serialize_model(*m);
    CHECK(bytes.substr(0, 4) == "RMGM");
    auto back = deserialize_model<float>(bytes);
    CHECK(serialize_model(*back) == bytes);
    for (std::size_t i = 0; i < m->params().size(); ++i)
      CHECK(m->params()[static_cast<int>(i)].value == back->params()[static_cast<int>(i)].value);

    std::string corrupt = bytes;
    corrupt[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(deserialize_model<float>(corrupt), Error);
    CHECK_THROWS_AS(deserialize_model<float>(bytes.substr(0, bytes.size() - 3)), Error);
  }
}
