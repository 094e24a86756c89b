#pragma once

#include <string>
#include <vector>

#include "tensorart/art_model.hpp"
#include "tensorart/errors.hpp"
#include "tensorart/gibbs.hpp"
#include "tensorart/tensor.hpp"

namespace tensorart {

/// Block partition factors of an SPD covariance with a leading n x n block:
///   Sigma = L D L' (unit-lower block LDU) and Sigma = P P' (block Cholesky),
/// with A the leading block, S = C - B' A^{-1} B its Schur complement and
/// D = blockdiag(A, S).
struct BlockFactors {
  Index n = 0;
  Matrix a, b, c, s;
  Matrix l, d, p;
};

inline BlockFactors block_factors(const Matrix& sigma, Index n) {
  const Index m = sigma.rows();
  if (sigma.cols() != m) throw ValidationError("block_factors: covariance must be square");
  if (n < 1 || n > m) throw ValidationError("block_factors: block size out of range");

  BlockFactors f;
  f.n = n;
  f.a = sigma.topLeftCorner(n, n);
  f.b = sigma.topRightCorner(n, m - n);
  f.c = sigma.bottomRightCorner(m - n, m - n);

  Eigen::LLT<Matrix> llt_a(f.a);
  if (llt_a.info() != Eigen::Success)
    throw NumericalError("block_factors: leading block A is not positive definite");
  f.s = f.c - f.b.transpose() * llt_a.solve(f.b);

  f.l = Matrix::Identity(m, m);
  if (n < m) f.l.bottomLeftCorner(m - n, n) = f.b.transpose() * llt_a.solve(Matrix::Identity(n, n));

  f.d = Matrix::Zero(m, m);
  f.d.topLeftCorner(n, n) = f.a;
  f.d.bottomRightCorner(m - n, m - n) = f.s;

  Matrix l_d = Matrix::Zero(m, m);
  l_d.topLeftCorner(n, n) = llt_a.matrixL();
  if (n < m) {
    Eigen::LLT<Matrix> llt_s(f.s);
    if (llt_s.info() != Eigen::Success)
      throw NumericalError("block_factors: Schur complement S is not positive definite");
    l_d.bottomRightCorner(m - n, m - n) = llt_s.matrixL();
  }
  f.p = f.l * l_d;
  return f;
}

/// Shock specification: the flat (vec-order, zero-based) indices of the
/// jointly shocked variables and the shock vector delta* aligned with them.
/// The implied ordering moves the targets to the leading block, everything
/// else following in ascending index order.
struct ShockSpec {
  std::vector<Index> targets;
  Vector delta;

  Index block_size() const { return static_cast<Index>(targets.size()); }

  void validate(Index total) const {
    if (targets.empty()) throw ValidationError("ShockSpec: at least one target required");
    if (delta.size() != static_cast<Index>(targets.size()))
      throw ValidationError("ShockSpec: delta length must match target count");
    if (!delta.allFinite()) throw ValidationError("ShockSpec: delta must be finite");
    std::vector<char> seen(static_cast<std::size_t>(total), 0);
    for (Index t : targets) {
      if (t < 0 || t >= total) throw ValidationError("ShockSpec: target index out of range");
      if (seen[static_cast<std::size_t>(t)]++) throw ValidationError("ShockSpec: duplicate target");
    }
  }

  /// Permutation pi with shocked variables first: position k of the reordered
  /// system holds original variable pi[k].
  std::vector<Index> ordering(Index total) const {
    validate(total);
    std::vector<Index> pi(targets.begin(), targets.end());
    std::vector<char> used(static_cast<std::size_t>(total), 0);
    for (Index t : targets) used[static_cast<std::size_t>(t)] = 1;
    for (Index k = 0; k < total; ++k)
      if (!used[static_cast<std::size_t>(k)]) pi.push_back(k);
    return pi;
  }
};

enum class IrfMethod { oirf, girf };

inline std::string irf_method_name(IrfMethod m) {
  return m == IrfMethod::oirf ? "oirf" : "girf";
}

/// Horizon-indexed responses of all I* variables; column h is the response
/// vector at horizon h (devectorizable to a response tensor).
struct IrfResult {
  IrfMethod method = IrfMethod::oirf;
  Matrix responses;  // I* x (H+1)

  Vector at(Index h) const { return responses.col(h); }
};

namespace detail {

inline Matrix permutation_matrix(const std::vector<Index>& pi) {
  const Index n = static_cast<Index>(pi.size());
  Matrix q = Matrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) q(k, pi[static_cast<std::size_t>(k)]) = 1.0;
  return q;  // (q v)[k] = v[pi[k]]
}

inline IrfResult irf_point(const ArtModel& model, const ShockSpec& shock, Index horizon,
                           IrfMethod method) {
  model.validate();
  if (horizon < 0) throw ValidationError("irf: horizon must be nonnegative");
  const Index total = model.state_size();
  shock.validate(total);

  const VarForm var = to_var(model);
  const auto pi = shock.ordering(total);
  const Matrix q = permutation_matrix(pi);
  const Matrix sigma_perm = q * var.noise_cov * q.transpose();
  const Index n = shock.block_size();
  const BlockFactors f = block_factors(sigma_perm, n);

  // horizon-0 core: P E_n delta (oirf; P is the block Cholesky factor of
  // Sigma, unit-lower L already folded in) or L D E_n A^{-1} delta (girf,
  // the Gaussian conditional mean of the noise given its leading block).
  Vector core;
  if (method == IrfMethod::oirf) {
    core = f.p.leftCols(n) * shock.delta;
  } else {
    Eigen::LLT<Matrix> llt_a(f.a);
    core = f.l * (f.d.leftCols(n) * llt_a.solve(shock.delta));
  }
  Vector base = q.transpose() * core;  // back to the original variable order

  const auto psi = ma_coefficients(model, horizon);
  IrfResult out;
  out.method = method;
  out.responses = Matrix::Zero(total, horizon + 1);
  for (Index h = 0; h <= horizon; ++h)
    out.responses.col(h) = psi[static_cast<std::size_t>(h)] * base;
  return out;
}

}  // namespace detail

/// Block Cholesky (orthogonalized) impulse responses: Psi_h L P E_n delta*.
inline IrfResult oirf(const ArtModel& model, const ShockSpec& shock, Index horizon) {
  return detail::irf_point(model, shock, horizon, IrfMethod::oirf);
}

/// Block generalized impulse responses: Psi_h L D E_n A^{-1} delta*.
inline IrfResult girf(const ArtModel& model, const ShockSpec& shock, Index horizon) {
  return detail::irf_point(model, shock, horizon, IrfMethod::girf);
}

/// Pointwise posterior median and credible bands of the IRF across the
/// draws of a trace. Bands are equal-tailed at 68% and 90%; a cell is
/// flagged significant when its 90% band excludes zero.
struct IrfSummary {
  IrfMethod method = IrfMethod::oirf;
  Matrix median, q05, q16, q84, q95;   // I* x (H+1)
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> significant;
};

inline IrfSummary irf_summarize_over_trace(const Trace& trace, const ShockSpec& shock,
                                           Index horizon, IrfMethod method) {
  if (trace.draws.empty()) throw ValidationError("irf_summarize_over_trace: empty trace");
  const Index total = product_of(trace.dims);
  shock.validate(total);

  std::vector<Matrix> responses;
  responses.reserve(trace.draws.size());
  for (const auto& draw : trace.draws) {
    ArtModel m = ArtModel::zero(trace.dims, 1);
    m.coeffs[0] = Tensor(m.coeffs[0].dims(), draw.coeff.flat());
    m.covs = draw.sigma;
    responses.push_back(detail::irf_point(m, shock, horizon, method).responses);
  }

  IrfSummary out;
  out.method = method;
  out.median = Matrix::Zero(total, horizon + 1);
  out.q05 = out.median;
  out.q16 = out.median;
  out.q84 = out.median;
  out.q95 = out.median;
  out.significant.resize(total, horizon + 1);

  std::vector<double> cell(responses.size());
  for (Index i = 0; i < total; ++i) {
    for (Index h = 0; h <= horizon; ++h) {
      for (std::size_t d = 0; d < responses.size(); ++d) cell[d] = responses[d](i, h);
      std::sort(cell.begin(), cell.end());
      out.median(i, h) = quantile_of_sorted(cell, 0.5);
      out.q05(i, h) = quantile_of_sorted(cell, 0.05);
      out.q16(i, h) = quantile_of_sorted(cell, 0.16);
      out.q84(i, h) = quantile_of_sorted(cell, 0.84);
      out.q95(i, h) = quantile_of_sorted(cell, 0.95);
      out.significant(i, h) = out.q05(i, h) > 0.0 || out.q95(i, h) < 0.0;
    }
  }
  return out;
}

}  // namespace tensorart
