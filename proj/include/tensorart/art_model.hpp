#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "tensorart/distributions.hpp"
#include "tensorart/parafac.hpp"
#include "tensorart/rng.hpp"
#include "tensorart/tensor.hpp"

namespace tensorart {

/// Tensor-valued time series: T observations sharing one dimension vector.
struct TensorSeries {
  std::vector<Index> dims;
  std::vector<Tensor> obs;

  Index length() const { return static_cast<Index>(obs.size()); }

  void validate() const {
    for (const auto& y : obs)
      if (y.dims() != dims) throw std::domain_error("TensorSeries: observation dims mismatch");
  }
};

/// Autoregressive tensor model of order p.
///
/// Lag coefficients are held in the mode-(N+1) form: coeffs[j] has dims
/// (I_1,...,I_N, I*) and acts on vec(Y_{t-j-1}) through the mode-(N+1)
/// product. One covariance matrix per response mode. The order-2N contracted
/// form of a coefficient is a pure reshape away (see to_square_form).
struct ArtModel {
  std::vector<Index> dims;
  int p = 1;
  Tensor intercept;               // response dims; zero by default
  std::vector<Tensor> coeffs;     // p tensors of dims (dims..., I*)
  std::vector<Matrix> covs;       // N mode covariances

  Index state_size() const { return product_of(dims); }

  void validate() const {
    if (dims.empty()) throw std::domain_error("ArtModel: dims must be nonempty");
    if (p < 1) throw std::domain_error("ArtModel: lag order must be >= 1");
    if (static_cast<int>(coeffs.size()) != p)
      throw std::domain_error("ArtModel: one coefficient tensor per lag required");
    const Index istar = state_size();
    std::vector<Index> expect = dims;
    expect.push_back(istar);
    for (const auto& a : coeffs)
      if (a.dims() != expect)
        throw std::domain_error("ArtModel: coefficient dims must be (dims..., I*)");
    if (!intercept.dims().empty() && intercept.dims() != dims)
      throw std::domain_error("ArtModel: intercept dims mismatch");
    if (covs.size() != dims.size())
      throw std::domain_error("ArtModel: one covariance per mode required");
    for (std::size_t j = 0; j < covs.size(); ++j)
      if (covs[j].rows() != dims[j] || covs[j].cols() != dims[j])
        throw std::domain_error("ArtModel: covariance size mismatch");
  }

  static ArtModel zero(std::vector<Index> dims, int p) {
    ArtModel m;
    m.dims = dims;
    m.p = p;
    m.intercept = Tensor(dims);
    const Index istar = product_of(dims);
    std::vector<Index> cd = dims;
    cd.push_back(istar);
    for (int j = 0; j < p; ++j) m.coeffs.emplace_back(cd);
    for (Index d : dims) m.covs.push_back(Matrix::Identity(d, d));
    return m;
  }
};

/// Reshape a mode-(N+1) coefficient (dims..., I*) into the order-2N
/// contracted-product form (dims..., dims...). The flat storage is
/// identical; only the dimension vector changes.
inline Tensor to_square_form(const Tensor& coeff, const std::vector<Index>& dims) {
  std::vector<Index> sq = dims;
  sq.insert(sq.end(), dims.begin(), dims.end());
  return Tensor(sq, coeff.flat());
}

inline Tensor from_square_form(const Tensor& sq, const std::vector<Index>& dims) {
  std::vector<Index> cd = dims;
  cd.push_back(product_of(dims));
  return Tensor(cd, sq.flat());
}

/// Equivalent VAR representation: y_t = c + sum_j A_j y_{t-j} + e_t with
/// A_j = mat_(N+1)(coeff_j)' and noise covariance Sigma_N (x) ... (x) Sigma_1.
struct VarForm {
  Vector intercept;
  std::vector<Matrix> lag;
  Matrix noise_cov;
};

inline VarForm to_var(const ArtModel& model) {
  model.validate();
  VarForm var;
  var.intercept = model.intercept.dims().empty() ? Vector::Zero(model.state_size())
                                                 : vectorize(model.intercept);
  for (const auto& a : model.coeffs)
    var.lag.push_back(mode_matricize(a, a.order() - 1).transpose());
  var.noise_cov = Matrix::Identity(1, 1);
  for (const auto& s : model.covs) var.noise_cov = detail::kron(s, var.noise_cov);
  return var;
}

/// One deterministic step: intercept + sum_j coeff_j x_(N+1) vec(y_lags[j]).
/// y_lags[0] is the most recent value.
inline Tensor art_step_mean(const ArtModel& model, const std::vector<Tensor>& y_lags) {
  Tensor mean = model.intercept.dims().empty() ? Tensor(model.dims) : model.intercept;
  for (int j = 0; j < model.p; ++j) {
    const Tensor& a = model.coeffs[static_cast<std::size_t>(j)];
    mean += mode_product(a, vectorize(y_lags[static_cast<std::size_t>(j)]), a.order() - 1);
  }
  return mean;
}

/// Simulate T observations driven by the provided noise tensors
/// (deterministic). init holds the p pre-sample values in chronological
/// order: init.back() is y_0.
inline TensorSeries simulate_with_noise(const ArtModel& model, const std::vector<Tensor>& init,
                                        const std::vector<Tensor>& noise) {
  model.validate();
  if (static_cast<int>(init.size()) < model.p)
    throw std::domain_error("simulate_with_noise: need at least p initial tensors");
  TensorSeries out;
  out.dims = model.dims;
  std::vector<Tensor> lags(init.rbegin(), init.rbegin() + model.p);  // lags[0] = y_{t-1}
  for (const auto& l : lags)
    if (l.dims() != model.dims) throw std::domain_error("simulate_with_noise: init dims mismatch");
  for (const auto& e : noise) {
    if (e.dims() != model.dims) throw std::domain_error("simulate_with_noise: noise dims mismatch");
    Tensor y = art_step_mean(model, lags) + e;
    lags.insert(lags.begin(), y);
    lags.pop_back();
    out.obs.push_back(std::move(y));
  }
  return out;
}

/// Simulate T observations with iid tensor-normal noise. Zero initial
/// conditions by default; pass burn_in > 0 to discard a warm-up stretch
/// before recording (stationary-regime sampling).
inline TensorSeries simulate(const ArtModel& model, Index T, Rng& rng,
                             std::optional<std::vector<Tensor>> init = std::nullopt,
                             Index burn_in = 0) {
  model.validate();
  std::vector<Tensor> start;
  if (init) {
    start = *init;
  } else {
    for (int j = 0; j < model.p; ++j) start.emplace_back(model.dims);
  }
  TensorNormalParams noise_law{Tensor(model.dims), model.covs};
  std::vector<Tensor> noise;
  noise.reserve(static_cast<std::size_t>(T + burn_in));
  for (Index t = 0; t < T + burn_in; ++t) noise.push_back(tensor_normal_sample(noise_law, rng));
  TensorSeries full = simulate_with_noise(model, start, noise);
  if (burn_in > 0) full.obs.erase(full.obs.begin(), full.obs.begin() + burn_in);
  return full;
}

/// Companion form of Lemma-1 type: an ART(p) restacked as an ART(1) whose
/// first dim is p*I_1. Coefficient blocks: lag-k coefficients across the top
/// block row, identity links on the first sub-diagonal. The returned
/// covariances pad modes below the first block with identities; they
/// parametrize no noise law for the stacked process (the exact embedding
/// puts E_t in the leading block and zeros below) and exist so the result
/// is a well-formed model for spectral analysis and deterministic
/// propagation.
inline ArtModel companion_form(const ArtModel& model) {
  model.validate();
  if (model.p == 1) return model;
  const Index i1 = model.dims[0];
  const Index n = static_cast<Index>(model.dims.size());
  std::vector<Index> cdims = model.dims;
  cdims[0] = model.p * i1;

  std::vector<Index> sq = cdims;
  sq.insert(sq.end(), cdims.begin(), cdims.end());
  Tensor big(sq);

  // top block row: lag-k coefficient occupies column block k
  for (int k = 0; k < model.p; ++k) {
    const Tensor a = to_square_form(model.coeffs[static_cast<std::size_t>(k)], model.dims);
    for (Index flat = 0; flat < a.size(); ++flat) {
      const auto idx = a.multi_index(flat);
      std::vector<Index> target(idx.begin(), idx.end());
      target[static_cast<std::size_t>(n)] += static_cast<Index>(k) * i1;
      big(target) = a[flat];
    }
  }
  // identity links: block (k+1, k) for k = 1..p-1
  const Tensor eye = identity_tensor(model.dims);
  for (int k = 1; k < model.p; ++k) {
    for (Index flat = 0; flat < eye.size(); ++flat) {
      if (eye[flat] == 0.0) continue;
      auto idx = eye.multi_index(flat);
      std::vector<Index> target(idx.begin(), idx.end());
      target[0] += static_cast<Index>(k) * i1;
      target[static_cast<std::size_t>(n)] += static_cast<Index>(k - 1) * i1;
      big(target) = 1.0;
    }
  }

  ArtModel comp;
  comp.dims = cdims;
  comp.p = 1;
  comp.intercept = Tensor(cdims);
  comp.coeffs.push_back(from_square_form(big, cdims));
  comp.covs = model.covs;
  Matrix pad = Matrix::Identity(comp.dims[0], comp.dims[0]);
  pad.topLeftCorner(i1, i1) = model.covs[0];
  comp.covs[0] = pad;
  return comp;
}

/// Embed a response-shaped noise tensor into the companion state: E_t in the
/// leading mode-1 block, zeros below.
inline Tensor companion_embed(const Tensor& noise, const std::vector<Index>& dims, int p) {
  std::vector<Index> cdims = dims;
  cdims[0] *= p;
  Tensor out(cdims);
  for (Index flat = 0; flat < noise.size(); ++flat) {
    auto idx = noise.multi_index(flat);
    out(idx) = noise[flat];
  }
  return out;
}

struct StationarityReport {
  double rho;
  bool stationary;
};

/// Spectral radius of the companion-form coefficient; stationary iff < 1.
inline StationarityReport check_stationarity(const ArtModel& model) {
  const ArtModel comp = companion_form(model);
  const double rho = spectral_radius(to_square_form(comp.coeffs[0], comp.dims));
  return {rho, rho < 1.0};
}

/// MA coefficient matrices Psi_0..Psi_H of the vectorized process:
/// Psi_0 = I and Psi_h = A^h for an ART(1) with A = mat_(N+1)(coeff)'.
/// Orders p > 1 go through the VAR companion stacking.
inline std::vector<Matrix> ma_coefficients(const ArtModel& model, Index horizon) {
  model.validate();
  if (horizon < 0) throw std::domain_error("ma_coefficients: horizon must be nonnegative");
  const Index istar = model.state_size();
  const VarForm var = to_var(model);
  std::vector<Matrix> psi;
  psi.reserve(static_cast<std::size_t>(horizon) + 1);
  if (model.p == 1) {
    Matrix power = Matrix::Identity(istar, istar);
    psi.push_back(power);
    for (Index h = 1; h <= horizon; ++h) {
      power = var.lag[0] * power;
      psi.push_back(power);
    }
    return psi;
  }
  const Index big = istar * model.p;
  Matrix companion = Matrix::Zero(big, big);
  for (int j = 0; j < model.p; ++j)
    companion.block(0, j * istar, istar, istar) = var.lag[static_cast<std::size_t>(j)];
  companion.block(istar, 0, big - istar, big - istar)
      .diagonal()
      .setOnes();
  Matrix power = Matrix::Identity(big, big);
  psi.push_back(Matrix::Identity(istar, istar));
  for (Index h = 1; h <= horizon; ++h) {
    power = companion * power;
    psi.push_back(power.topLeftCorner(istar, istar));
  }
  return psi;
}

/// Fixed-point solver for the discrete Lyapunov equation G = A G A' + Q.
inline Matrix lyapunov_fixed_point(const Matrix& a, const Matrix& q, double tol = 1e-12,
                                   int max_iter = 100000) {
  Matrix g = q;
  for (int it = 0; it < max_iter; ++it) {
    Matrix next = a * g * a.transpose() + q;
    const double delta = (next - g).cwiseAbs().maxCoeff();
    g = next;
    if (delta < tol * std::max(1.0, g.cwiseAbs().maxCoeff())) return g;
  }
  throw std::runtime_error("lyapunov_fixed_point: no convergence (is the model stationary?)");
}

/// Stationary autocovariance of the vectorized ART(1) at lag h: A^h Gamma_0.
inline Matrix stationary_vec_autocovariance(const ArtModel& model, Index h) {
  if (model.p != 1)
    throw std::domain_error("stationary_vec_autocovariance: reduce to ART(1) first");
  const VarForm var = to_var(model);
  Matrix gamma0 = lyapunov_fixed_point(var.lag[0], var.noise_cov);
  Matrix out = gamma0;
  for (Index k = 0; k < h; ++k) out = var.lag[0] * out;
  return out;
}

}  // namespace tensorart
