#include "gspdc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace gspdc::rng {

namespace {

// Inversion by sequential search; fine up to mean ~10 (one uniform per draw).
std::uint64_t poisson_inversion(Stream& stream, double mean) {
  const double u = stream.next_unit();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  while (u >= cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
    if (k > 1000) break; // cdf has numerically saturated
  }
  return k;
}

// Hormann (1993) transformed rejection with squeeze, valid for mean >= 10.
std::uint64_t poisson_ptrs(Stream& stream, double mean) {
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);

  for (;;) {
    double u = stream.next_unit() - 0.5;
    double v = stream.next_unit();
    double us = 0.5 - std::abs(u);
    double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * log_mean - mean - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

} // namespace

std::uint64_t poisson(Stream& stream, double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) return poisson_inversion(stream, mean);
  return poisson_ptrs(stream, mean);
}

double normal(Stream& stream) {
  // Box-Muller; clamp the first uniform away from 0 so log stays finite.
  double u1 = stream.next_unit();
  double u2 = stream.next_unit();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

} // namespace gspdc::rng
