#include "limbsense/fft.hpp"

#include <algorithm>
#include <mutex>

#include <fftw3.h>

#include "limbsense/error.hpp"

namespace limbsense {

namespace {

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw Error(ErrorKind::EmptyInput, "FFT of length 0");
  std::lock_guard lock(planner_mutex());
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
}

FftPlan::~FftPlan() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

std::vector<std::complex<double>> FftPlan::forward(std::span<const double> input) const {
  if (input.size() != n_) throw Error(ErrorKind::DimensionMismatch, "FFT input length differs from plan");
  double* in = fftw_alloc_real(n_);
  fftw_complex* out = fftw_alloc_complex(n_ / 2 + 1);
  std::copy(input.begin(), input.end(), in);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_), in, out);
  std::vector<std::complex<double>> bins(n_ / 2 + 1);
  for (std::size_t k = 0; k < bins.size(); ++k) bins[k] = {out[k][0], out[k][1]};
  fftw_free(in);
  fftw_free(out);
  return bins;
}

}  // namespace limbsense
