// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>

#include <fftw3.h>

namespace levmag {

namespace detail {
// FFTW's planner is not re-entrant; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
} // namespace detail

/// Real-to-complex / complex-to-real transform pair of fixed length, owning
/// its buffers. Unnormalized, FFTW sign conventions. FFTW_ESTIMATE planning
/// keeps results independent of timing.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n < 2) throw std::invalid_argument("FFT length must be >= 2");
    real_ = fftw_alloc_real(n_);
    spec_ = fftw_alloc_complex(n_ / 2 + 1);
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spec_, real_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  std::span<double> real() { return {real_, n_}; }
  std::span<std::complex<double>> spectrum() {
    return {reinterpret_cast<std::complex<double>*>(spec_), bins()};
  }

  /// real() -> spectrum()
  void forward() { fftw_execute(forward_); }
  /// spectrum() -> real(); destroys spectrum()
  void backward() { fftw_execute(backward_); }

 private:
  std::size_t n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

} // namespace levmag
