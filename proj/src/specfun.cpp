#include "evfuse/specfun.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "evfuse/error.hpp"

namespace evfuse::specfun {
namespace {

// The asymptotic series below are accurate to ~1e-17 once x >= 10.
constexpr double kAsymptoticThreshold = 10.0;

void check_domain(double x, const char* name) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError(std::string(name) + ": argument must be finite and > 0, got " +
                      std::to_string(x));
  }
}

}  // namespace

double ln_gamma(double x) {
  check_domain(x, "ln_gamma");
  if (x == 1.0 || x == 2.0) return 0.0;  // exact roots, the series below leaves ~1e-15
  // ln G(x) = ln G(x + n) - ln(x (x+1) ... (x+n-1))
  double product = 1.0;
  while (x < kAsymptoticThreshold) {
    product *= x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Stirling series, Bernoulli coefficients B_{2n} / (2n (2n-1)).
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - std::log(product);
}

double digamma(double x) {
  check_domain(x, "digamma");
  // psi(x) = psi(x + n) - sum 1/(x+i)
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift += 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
  return std::log(x) - 0.5 / x - series - shift;
}

double trigamma(double x) {
  check_domain(x, "trigamma");
  // psi'(x) = psi'(x + n) + sum 1/(x+i)^2
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv + inv2 * (0.5 +
                    inv * (1.0 / 6.0 -
                           inv2 * (1.0 / 30.0 -
                                   inv2 * (1.0 / 42.0 -
                                           inv2 * (1.0 / 30.0 -
                                                   inv2 * (5.0 / 66.0 -
                                                           inv2 * (691.0 / 2730.0 -
                                                                   inv2 * (7.0 / 6.0))))))));
  return series + shift;
}

}  // namespace evfuse::specfun
