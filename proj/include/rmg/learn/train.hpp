#pragma once

#include "rmg/learn/models.hpp"
#include "rmg/matrix.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rmg::learn {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
};

// Rows of `x` selected for training, with one label per selected row.
struct DataView {
  const RowMatrixXf* x = nullptr;
  std::vector<int> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean training loss per epoch
  double final_train_accuracy = 0.0;
};

template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& ps, const TrainConfig& cfg);
  void step(ParamStore<T>& ps);

 private:
  TrainConfig cfg_;
  std::vector<Mat<T>> m_, v_;
  long t_ = 0;
};

// Mini-batch Adam on softmax cross-entropy. Iteration order, initialization
// and dropout masks derive from cfg.seed. `on_batch` sees the source rows of
// every batch before it is used.
template <typename T>
TrainResult train(Model<T>& model, const DataView& data, const TrainConfig& cfg,
                  const std::function<void(std::span<const int>)>& on_batch = {});

struct Prediction {
  int label = 0;
  std::vector<double> prob;
};

// Argmax of the softmax; ties go to the lowest class index.
int argmax_lowest(std::span<const double> v);

template <typename T>
std::vector<Prediction> predict(Model<T>& model, const RowMatrixXf& x, std::span<const int> rows, int batch = 64);

template <typename T>
Prediction predict_one(Model<T>& model, const Mat<T>& sample);

Prediction predict_logits(std::span<const double> logits);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::map<std::string, double> per_kind;  // worst relative error per layer type
  int checked = 0;
};

// Central differences against back-propagation in double precision with
// dropout disabled. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const ModelConfig& cfg, const Mat<double>& x, const std::vector<int>& labels,
                           double epsilon = 1e-5, int per_kind = 200, std::uint64_t seed = 1, double floor = 1e-6);

}  // namespace rmg::learn
