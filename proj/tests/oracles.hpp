// Independent reference computations used only by tests. Nothing here shares
// code with the production paths it checks.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace oracle {

inline constexpr double kTwoPi = 6.283185307179586476925;

/// O(N^2) one-sided power spectrum, |X[k]|^2 / N^2 with interior bins doubled.
inline std::vector<double> brute_power_spectrum(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> power(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    long double re = 0.0L;
    long double im = 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
      // Reduce j*k mod n before the trig call to keep the angle small.
      const auto angle = -static_cast<long double>(kTwoPi) * static_cast<long double>((j * k) % n) /
                         static_cast<long double>(n);
      re += x[j] * std::cos(angle);
      im += x[j] * std::sin(angle);
    }
    double p = static_cast<double>((re * re + im * im) / (static_cast<long double>(n) * n));
    const bool nyquist = n % 2 == 0 && k == n / 2;
    if (k != 0 && !nyquist) p *= 2.0;
    power[k] = p;
  }
  return power;
}

/// P(score_pos > score_neg) + 0.5 P(tie) by explicit pair counting.
inline double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

/// Posterior of class 1 for 1-D Gaussian classes with the given parameters.
inline double gaussian_posterior(double x, double mean0, double var0, double mean1, double var1, double prior1) {
  auto density = [](double v, double m, double s2) { return std::exp(-0.5 * (v - m) * (v - m) / s2) / std::sqrt(kTwoPi * s2); };
  const double a = prior1 * density(x, mean1, var1);
  const double b = (1.0 - prior1) * density(x, mean0, var0);
  return a / (a + b);
}

}  // namespace oracle
