#pragma once

// Test-side numeric oracles, independent of the library implementation
// paths they are used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

// Composite Simpson rule with a fixed (odd) node count.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        int nodes = 200001) {
  if (nodes % 2 == 0) ++nodes;
  const double h = (b - a) / (nodes - 1);
  double acc = f(a) + f(b);
  for (int i = 1; i < nodes - 1; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Moment of order k of the (p, a, b) GiG kernel, normalized. Integrated in
// log space: the window is located by scanning the log-kernel for its peak
// and cutting 80 nats below it, where the superexponential tails are dead.
inline double gig_moment(double p, double a, double b, int k) {
  auto log_kernel = [&](double u) {
    return p * u - 0.5 * (a * std::exp(u) + b * std::exp(-u));  // includes du Jacobian
  };
  double peak = -1e300, upeak = 0.0;
  for (double u = -80.0; u <= 80.0; u += 0.01) {
    const double lk = log_kernel(u) + std::abs(k) * std::abs(u);
    if (lk > peak) {
      peak = lk;
      upeak = u;
    }
  }
  double lo = upeak, hi = upeak;
  while (log_kernel(lo) + std::abs(k) * std::abs(lo) > peak - 80.0) lo -= 0.05;
  while (log_kernel(hi) + std::abs(k) * std::abs(hi) > peak - 80.0) hi += 0.05;

  auto kernel = [&](double u) { return std::exp(log_kernel(u) - peak); };
  auto kernel_k = [&](double u) { return kernel(u) * std::exp(k * u); };
  const double z = integrate(kernel, lo, hi);
  const double m = integrate(kernel_k, lo, hi);
  return m / z;
}

// Regularized lower incomplete gamma P(s, x), series + continued fraction.
inline double gamma_p(double s, double x) {
  if (x < 0.0 || s <= 0.0) throw std::domain_error("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(s);
  if (x < s + 1.0) {
    double sum = 1.0 / s, term = sum;
    for (int n = 1; n < 500; ++n) {
      term *= x / (s + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + s * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(s, x)
  const double tiny = 1e-300;
  double b0 = x + 1.0 - s, c = 1.0 / tiny, d = 1.0 / b0, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - s);
    b0 += 2.0;
    d = an * d + b0;
    if (std::abs(d) < tiny) d = tiny;
    c = b0 + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + s * std::log(x) - lg) * h;
  return 1.0 - q;
}

// CDF of Gamma(shape, rate) in the shape-rate formulation.
inline double gamma_cdf(double x, double shape, double rate) {
  if (x <= 0.0) return 0.0;
  return gamma_p(shape, rate * x);
}

}  // namespace oracles
