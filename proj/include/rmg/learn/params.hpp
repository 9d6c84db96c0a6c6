#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rmg::learn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vec = Eigen::Matrix<T, 1, Eigen::Dynamic, Eigen::RowMajor>;

// One named tensor. Values are stored as a 2-D matrix; `shape` is the logical
// shape written to disk (its product equals rows * cols).
template <typename T>
struct Param {
  std::string name;
  std::string kind;  // layer type, used to group parameters for gradient checks
  std::vector<int> shape;
  Mat<T> value;
  Mat<T> grad;
  bool trainable = true;  // false for running statistics
};

template <typename T>
class ParamStore {
 public:
  int add(std::string name, std::string kind, std::vector<int> shape, Eigen::Index rows, Eigen::Index cols,
          bool trainable = true) {
    Param<T> p;
    p.name = std::move(name);
    p.kind = std::move(kind);
    p.shape = std::move(shape);
    p.value = Mat<T>::Zero(rows, cols);
    p.grad = Mat<T>::Zero(rows, cols);
    p.trainable = trainable;
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
  }

  Param<T>& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Param<T>& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  Mat<T>& value(int i) { return params_[static_cast<std::size_t>(i)].value; }
  const Mat<T>& value(int i) const { return params_[static_cast<std::size_t>(i)].value; }
  Mat<T>& grad(int i) { return params_[static_cast<std::size_t>(i)].grad; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::optional<int> find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return static_cast<int>(i);
    return std::nullopt;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  // Number of trainable scalars.
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p.trainable) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

 private:
  std::vector<Param<T>> params_;
};

}  // namespace rmg::learn
