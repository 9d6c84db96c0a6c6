#include "rmg/learn/train.hpp"

#include "rmg/error.hpp"
#include "rmg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rmg::learn {

template <typename T>
Adam<T>::Adam(ParamStore<T>& ps, const TrainConfig& cfg) : cfg_(cfg) {
  for (const auto& p : ps) {
    m_.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
  }
}

template <typename T>
void Adam<T>::step(ParamStore<T>& ps) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T lr_t = static_cast<T>(cfg_.lr * std::sqrt(c2) / c1);
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T eps_t = static_cast<T>(cfg_.eps * std::sqrt(c2));
  std::size_t k = 0;
  for (auto& p : ps) {
    if (p.trainable) {
      auto& m = m_[k];
      auto& v = v_[k];
      m = b1 * m + (T(1) - b1) * p.grad;
      v = b2 * v + (T(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr_t * m.array() / (v.array().sqrt() + eps_t);
    }
    ++k;
  }
}

namespace {

template <typename T>
Mat<T> gather(const RowMatrixXf& x, std::span<const int> rows) {
  Mat<T> out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]).template cast<T>();
  return out;
}

}  // namespace

template <typename T>
TrainResult train(Model<T>& model, const DataView& data, const TrainConfig& cfg,
                  const std::function<void(std::span<const int>)>& on_batch) {
  if (data.x == nullptr || data.rows.empty()) throw Error(ErrorCode::ShapeMismatch, "empty training set");
  if (data.labels.size() != data.rows.size()) throw Error(ErrorCode::ShapeMismatch, "labels vs rows");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw Error(ErrorCode::RangeError, "invalid batch size or epochs");
  for (int y : data.labels)
    if (y < 0 || y >= model.config().num_classes)
      throw Error(ErrorCode::LabelError, "label " + std::to_string(y) + " out of range");

  auto& ps = model.params();
  Adam<T> opt(ps, cfg);
  Rng dropout_rng(derive_seed(cfg.seed, {0xd209}));
  std::vector<std::size_t> order(data.rows.size());
  TrainResult res;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {0x5e1, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<int> rows, labels;
      for (std::size_t i = start; i < end; ++i) {
        rows.push_back(data.rows[order[i]]);
        labels.push_back(data.labels[order[i]]);
      }
      if (on_batch) on_batch(rows);
      const Mat<T> xb = gather<T>(*data.x, rows);
      ps.zero_grad();
      const Mat<T> logits = model.forward(xb, true, &dropout_rng);
      Mat<T> dlogits;
      const double loss = softmax_cross_entropy<T>(logits, labels, dlogits);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::DivergenceError, "loss became non-finite in epoch " + std::to_string(epoch));
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c)
          if (logits(r, c) > logits(r, best)) best = static_cast<int>(c);
        correct += best == labels[static_cast<std::size_t>(r)];
      }
      model.backward(dlogits);
      opt.step(ps);
      total += loss * static_cast<double>(rows.size());
    }
    res.loss_curve.push_back(total / static_cast<double>(order.size()));
    res.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
  }
  return res;
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

Prediction predict_logits(std::span<const double> logits) {
  Prediction p;
  if (logits.empty()) throw Error(ErrorCode::ShapeMismatch, "no logits");
  for (double v : logits)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  p.prob.resize(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) z += p.prob[k] = std::exp(logits[k] - mx);
  for (auto& v : p.prob) v /= z;
  p.label = argmax_lowest(logits);
  return p;
}

template <typename T>
Prediction predict_one(Model<T>& model, const Mat<T>& sample) {
  const Mat<T> logits = model.forward(sample, false);
  std::vector<double> l(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) l[static_cast<std::size_t>(c)] = static_cast<double>(logits(0, c));
  return predict_logits(l);
}

template <typename T>
std::vector<Prediction> predict(Model<T>& model, const RowMatrixXf& x, std::span<const int> rows, int batch) {
  std::vector<Prediction> out;
  out.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(rows.size(), start + static_cast<std::size_t>(batch));
    const Mat<T> xb = gather<T>(x, rows.subspan(start, end - start));
    const Mat<T> logits = model.forward(xb, false);
    std::vector<double> l(static_cast<std::size_t>(logits.cols()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) l[static_cast<std::size_t>(c)] = static_cast<double>(logits(r, c));
      out.push_back(predict_logits(l));
    }
  }
  return out;
}

GradCheckResult grad_check(const ModelConfig& cfg_in, const Mat<double>& x, const std::vector<int>& labels,
                           double epsilon, int per_kind, std::uint64_t seed, double floor) {
  ModelConfig cfg = cfg_in;
  cfg.dropout = 0.0;
  auto model = make_model<double>(cfg, seed);
  auto& ps = model->params();

  auto loss_at = [&]() {
    Mat<double> d;
    return softmax_cross_entropy<double>(model->forward(x, true), labels, d);
  };

  ps.zero_grad();
  {
    const Mat<double> logits = model->forward(x, true);
    Mat<double> d;
    softmax_cross_entropy<double>(logits, labels, d);
    model->backward(d);
  }

  std::map<std::string, std::vector<std::pair<int, Eigen::Index>>> groups;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[static_cast<int>(i)];
    if (!p.trainable) continue;
    for (Eigen::Index k = 0; k < p.value.size(); ++k) groups[p.kind].emplace_back(static_cast<int>(i), k);
  }

  GradCheckResult res;
  Rng rng(derive_seed(seed, {0x9c}));
  for (auto& [kind, entries] : groups) {
    std::shuffle(entries.begin(), entries.end(), rng);
    const std::size_t n = std::min(entries.size(), static_cast<std::size_t>(per_kind));
    double worst = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      const auto [pi, k] = entries[q];
      double& v = ps.value(pi).data()[k];
      const double analytic = ps.grad(pi).data()[k];
      const double saved = v;
      v = saved + epsilon;
      const double lp = loss_at();
      v = saved - epsilon;
      const double lm = loss_at();
      v = saved;
      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      worst = std::max(worst, rel);
      ++res.checked;
    }
    res.per_kind[kind] = worst;
    res.max_relative_error = std::max(res.max_relative_error, worst);
  }
  return res;
}

template class Adam<float>;
template class Adam<double>;
template TrainResult train<float>(Model<float>&, const DataView&, const TrainConfig&,
                                  const std::function<void(std::span<const int>)>&);
template TrainResult train<double>(Model<double>&, const DataView&, const TrainConfig&,
                                   const std::function<void(std::span<const int>)>&);
template std::vector<Prediction> predict<float>(Model<float>&, const RowMatrixXf&, std::span<const int>, int);
template std::vector<Prediction> predict<double>(Model<double>&, const RowMatrixXf&, std::span<const int>, int);
template Prediction predict_one<float>(Model<float>&, const Mat<float>&);
template Prediction predict_one<double>(Model<double>&, const Mat<double>&);

}  // namespace rmg::learn
