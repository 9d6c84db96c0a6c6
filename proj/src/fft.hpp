#pragma once

// Thin RAII layer over FFTW. Planning is serialized through one mutex; plans
// are executed with the new-array interface so a const plan can be shared.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>

namespace rmg::detail {

std::mutex& fftw_planner_mutex();

template <typename T>
class FftwBuffer {
 public:
  explicit FftwBuffer(std::size_t n) : n_(n), p_(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (!p_) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p_); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  T* data() { return p_; }
  const T* data() const { return p_; }
  T& operator[](std::size_t i) { return p_[i]; }
  const T& operator[](std::size_t i) const { return p_[i]; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  T* p_;
};

class C2CPlan {
 public:
  C2CPlan(std::size_t n, int sign);
  ~C2CPlan();
  C2CPlan(const C2CPlan&) = delete;
  C2CPlan& operator=(const C2CPlan&) = delete;

  void execute(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(plan_, in, out); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

class R2CPlan {
 public:
  explicit R2CPlan(std::size_t n);
  ~R2CPlan();
  R2CPlan(const R2CPlan&) = delete;
  R2CPlan& operator=(const R2CPlan&) = delete;

  void execute(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(plan_, in, out); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

}  // namespace rmg::detail
