#pragma once

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tensorart/rng.hpp"
#include "tensorart/tensor.hpp"

namespace tensorart {

/// Mean tensor plus one covariance matrix per mode. The law of vec(X) is
/// N(vec(M), Sigma_N (x) ... (x) Sigma_1).
struct TensorNormalParams {
  Tensor mean;
  std::vector<Matrix> covs;

  void validate() const {
    if (static_cast<Index>(covs.size()) != mean.order())
      throw std::domain_error("TensorNormalParams: one covariance per mode required");
    for (std::size_t j = 0; j < covs.size(); ++j) {
      const Matrix& s = covs[j];
      if (s.rows() != mean.dim(static_cast<Index>(j)) || s.cols() != s.rows())
        throw std::domain_error("TensorNormalParams: covariance size mismatch");
      if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff()))
        throw std::domain_error("TensorNormalParams: covariance not symmetric");
    }
  }
};

namespace detail {

inline Eigen::LLT<Matrix> cholesky_or_throw(const Matrix& s, const char* what) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::domain_error(std::string(what) + ": matrix is not positive definite");
  return llt;
}

}  // namespace detail

/// Log-density of the mode-wise Gaussian law, evaluated without forming the
/// Kronecker covariance: the quadratic form comes from per-mode triangular
/// solves and the log-determinant from sum_j (I*/I_j) log|Sigma_j|.
inline double tensor_normal_logpdf(const Tensor& x, const TensorNormalParams& params) {
  params.validate();
  if (x.dims() != params.mean.dims())
    throw std::domain_error("tensor_normal_logpdf: dimension mismatch");
  const Index total = x.size();
  Tensor delta = x - params.mean;
  double logdet = 0.0;
  for (std::size_t j = 0; j < params.covs.size(); ++j) {
    auto llt = detail::cholesky_or_throw(params.covs[j], "tensor_normal_logpdf");
    Matrix l = llt.matrixL();
    const double mode_logdet = 2.0 * l.diagonal().array().log().sum();
    logdet += static_cast<double>(total / params.covs[j].rows()) * mode_logdet;
    Matrix linv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(l.rows(), l.cols()));
    delta = mode_multiply(delta, linv, static_cast<Index>(j));
  }
  const double quad = delta.flat().squaredNorm();
  return -0.5 * (static_cast<double>(total) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

/// Draw from the tensor normal by scaling an iid standard normal tensor with
/// the per-mode Cholesky factors.
inline Tensor tensor_normal_sample(const TensorNormalParams& params, Rng& rng) {
  params.validate();
  Tensor z(params.mean.dims());
  for (Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  for (std::size_t j = 0; j < params.covs.size(); ++j) {
    auto llt = detail::cholesky_or_throw(params.covs[j], "tensor_normal_sample");
    z = mode_multiply(z, Matrix(llt.matrixL()), static_cast<Index>(j));
  }
  return params.mean + z;
}

/// Generalized inverse Gaussian parameters for the kernel
/// x^{p-1} exp(-(a x + b / x) / 2) on x > 0.
struct GigParams {
  double p;
  double a;
  double b;

  void validate() const {
    if (a < 0.0 || b < 0.0 || !std::isfinite(p) || !std::isfinite(a) || !std::isfinite(b))
      throw std::domain_error("GigParams: a and b must be finite and nonnegative");
    if (!(a > 0.0 || p < 0.0) || !(b > 0.0 || p > 0.0))
      throw std::domain_error("GigParams: need (a>0 or p<0) and (b>0 or p>0)");
  }
};

namespace detail {

// Devroye (2014) sampler for the two-parameter GiG with kernel
// y^{lam-1} exp(-omega (y + 1/y) / 2), lam >= 0, omega > 0. Uniformly fast
// over the whole parameter range.
inline double gig2_devroye(double lam, double omega, Rng& rng) {
  const double alpha = std::sqrt(omega * omega + lam * lam) - lam;
  auto psi = [&](double v) {
    return -alpha * (std::cosh(v) - 1.0) - lam * (std::exp(v) - v - 1.0);
  };
  auto psi_prime = [&](double v) { return -alpha * std::sinh(v) - lam * (std::exp(v) - 1.0); };

  double t;
  double m = -psi(1.0);
  if (m >= 0.5 && m <= 2.0)
    t = 1.0;
  else if (m > 2.0)
    t = std::sqrt(2.0 / (alpha + lam));
  else
    t = std::log(4.0 / (alpha + 2.0 * lam));

  double s;
  m = -psi(-1.0);
  if (m >= 0.5 && m <= 2.0)
    s = 1.0;
  else if (m > 2.0)
    s = std::sqrt(4.0 / (alpha * std::cosh(1.0) + lam));
  else
    s = std::min(1.0 / lam,
                 std::log(1.0 + 1.0 / alpha + std::sqrt(1.0 / (alpha * alpha) + 2.0 / alpha)));

  const double eta = -psi(t);
  const double zeta = -psi_prime(t);
  const double theta = -psi(-s);
  const double xi = psi_prime(-s);

  const double pp = 1.0 / xi;
  const double rr = 1.0 / zeta;
  const double td = t - rr * eta;
  const double sd = s - pp * theta;
  const double q = td + sd;

  double x, chi;
  for (;;) {
    const double u = rng.uniform_pos();
    const double v = rng.uniform_pos();
    const double w = rng.uniform_pos();
    if (u < q / (pp + q + rr))
      x = -sd + q * v;
    else if (u < (q + rr) / (pp + q + rr))
      x = td + rr * std::log(1.0 / v);
    else
      x = -sd - pp * std::log(1.0 / v);
    if (x >= -sd && x <= td)
      chi = 1.0;
    else if (x > td)
      chi = std::exp(-eta - zeta * (x - t));  // tangent at t, zero at td
    else
      chi = std::exp(-theta + xi * (x + s));  // tangent at -s, zero at -sd
    if (std::exp(psi(x)) >= w * chi) break;
  }
  const double mode = (lam + std::sqrt(lam * lam + omega * omega)) / omega;
  return mode * std::exp(x);
}

// log of the modified Bessel function K_nu(x); asymptotic expansion once the
// library value underflows.
inline double log_bessel_k(double nu, double x) {
  nu = std::abs(nu);
  if (x <= 0.0) throw std::domain_error("log_bessel_k: argument must be positive");
  if (x < 500.0) {
    const double k = std::cyl_bessel_k(nu, x);
    if (k > 0.0 && std::isfinite(k)) return std::log(k);
  }
  const double mu = 4.0 * nu * nu;
  double series = 1.0 + (mu - 1.0) / (8.0 * x) + (mu - 1.0) * (mu - 9.0) / (128.0 * x * x) +
                  (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (3072.0 * x * x * x);
  return 0.5 * std::log(std::numbers::pi / (2.0 * x)) - x + std::log(series);
}

}  // namespace detail

/// Draw from GiG(p, a, b). Boundary cases reduce to Gamma (b = 0) and
/// inverse Gamma (a = 0); otherwise Devroye's method on the standardized
/// two-parameter form, with p < 0 handled through the reciprocal identity.
inline double gig_sample(const GigParams& params, Rng& rng) {
  params.validate();
  const double p = params.p, a = params.a, b = params.b;
  // boundary (and near-underflow) reductions
  if (b == 0.0 || (p > 0.0 && b < 1e-280)) return rng.gamma(p, a / 2.0);
  if (a == 0.0 || (p < 0.0 && a < 1e-280)) return 1.0 / rng.gamma(-p, b / 2.0);
  const double omega = std::sqrt(a) * std::sqrt(b);
  if (omega <= 0.0 || !std::isfinite(omega))
    throw std::domain_error("gig_sample: degenerate parameter product");
  const double scale = std::sqrt(b) / std::sqrt(a);
  double y = detail::gig2_devroye(std::abs(p), omega, rng);
  if (p < 0.0) y = 1.0 / y;
  return scale * y;
}

/// Normalized log-density of GiG(p, a, b) at x > 0.
inline double gig_logpdf(double x, const GigParams& params) {
  params.validate();
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  const double p = params.p, a = params.a, b = params.b;
  if (b == 0.0)  // Gamma(p, a/2)
    return p * std::log(a / 2.0) - std::lgamma(p) + (p - 1.0) * std::log(x) - a / 2.0 * x;
  if (a == 0.0)  // inverse Gamma(-p, b/2)
    return -p * std::log(b / 2.0) - std::lgamma(-p) + (p - 1.0) * std::log(x) - b / (2.0 * x);
  const double lognc =
      0.5 * p * std::log(a / b) - std::log(2.0) - detail::log_bessel_k(p, std::sqrt(a * b));
  return lognc + (p - 1.0) * std::log(x) - 0.5 * (a * x + b / x);
}

/// Draw an SPD matrix from the inverse Wishart IW(df, scale) via the
/// Bartlett decomposition of the Wishart(df, scale^{-1}) companion.
inline Matrix inverse_wishart_sample(double df, const Matrix& scale, Rng& rng) {
  const Index d = scale.rows();
  if (scale.cols() != d) throw std::domain_error("inverse_wishart_sample: scale must be square");
  if (df <= static_cast<double>(d) - 1.0)
    throw std::domain_error("inverse_wishart_sample: df must exceed dim - 1");
  auto scale_llt = detail::cholesky_or_throw(scale, "inverse_wishart_sample");
  // chol(scale^{-1}) from chol(scale): scale = LL' implies scale^{-1} = L'^{-T} L^{-1}.
  Matrix l = scale_llt.matrixL();
  Matrix linv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));

  Matrix bart = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    bart(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) bart(i, j) = rng.normal();
  }
  // W = (L^{-T} A)(L^{-T} A)' ~ Wishart(df, scale^{-1}); return W^{-1}.
  Matrix f = linv.transpose() * bart;
  Matrix w = f * f.transpose();
  Matrix inv = w.llt().solve(Matrix::Identity(d, d));
  return 0.5 * (inv + inv.transpose());
}

inline Vector dirichlet_sample(const Vector& alpha, Rng& rng) {
  Vector g(alpha.size());
  for (Index i = 0; i < alpha.size(); ++i) g[i] = rng.gamma(alpha[i], 1.0);
  const double total = g.sum();
  if (total <= 0.0) throw std::domain_error("dirichlet_sample: degenerate draw");
  return g / total;
}

inline double gamma_sample(double shape, double rate, Rng& rng) { return rng.gamma(shape, rate); }

inline double exponential_sample(double rate, Rng& rng) { return rng.exponential(rate); }

inline double gamma_logpdf(double x, double shape, double rate) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace tensorart
