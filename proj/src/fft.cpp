#include "fft.hpp"

namespace rmg::detail {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

C2CPlan::C2CPlan(std::size_t n, int sign) : n_(n) {
  FftwBuffer<fftw_complex> in(n), out(n);
  std::lock_guard lock(fftw_planner_mutex());
  plan_ = fftw_plan_dft_1d(static_cast<int>(n), in.data(), out.data(), sign, FFTW_ESTIMATE);
}

C2CPlan::~C2CPlan() {
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan_);
}

R2CPlan::R2CPlan(std::size_t n) : n_(n) {
  FftwBuffer<double> in(n);
  FftwBuffer<fftw_complex> out(n / 2 + 1);
  std::lock_guard lock(fftw_planner_mutex());
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE);
}

R2CPlan::~R2CPlan() {
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan_);
}

}  // namespace rmg::detail
