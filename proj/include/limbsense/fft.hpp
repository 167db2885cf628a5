#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace limbsense {

/// Real-input forward DFT of one fixed length, backed by an FFTW plan.
/// Executing a plan is thread-safe; creating one is serialized internally.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return n_; }

  /// X[k] = sum_j x[j] exp(-2 pi i j k / n) for k = 0 .. n/2.
  std::vector<std::complex<double>> forward(std::span<const double> input) const;

 private:
  std::size_t n_;
  void* plan_ = nullptr;
};

}  // namespace limbsense
