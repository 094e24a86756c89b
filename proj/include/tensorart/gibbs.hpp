#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tensorart/art_model.hpp"
#include "tensorart/distributions.hpp"
#include "tensorart/errors.hpp"
#include "tensorart/parafac.hpp"
#include "tensorart/rng.hpp"
#include "tensorart/tensor.hpp"

namespace tensorart {

// ---------------------------------------------------------------------------
// configuration and state
// ---------------------------------------------------------------------------

/// Hyperparameters of the global-local shrinkage hierarchy and the
/// covariance priors. The marginal groups are J = 4: three response modes
/// plus the regressor mode of length I_4 = I_1 I_2 I_3.
struct PriorConfig {
  Index rank = 1;
  double alpha = 1.0;
  double a_tau = 0.0;  // 0 means "use the default alpha * R"
  double b_tau = 0.0;  // 0 means "use the default alpha * R^{1/4}"
  double a_lambda = 3.0;
  double b_lambda = 1.0;
  std::vector<double> nu;    // IW dof per response mode; default I_j + 2
  std::vector<Matrix> psi;   // IW scale per response mode; default identity
  double a_gamma = 1.0;
  double b_gamma = 1.0;

  static PriorConfig defaults(const std::vector<Index>& dims, Index rank) {
    PriorConfig c;
    c.rank = rank;
    c.a_tau = c.alpha * static_cast<double>(rank);
    c.b_tau = c.alpha * std::pow(static_cast<double>(rank), 0.25);
    for (Index d : dims) {
      c.nu.push_back(static_cast<double>(d) + 2.0);
      c.psi.push_back(Matrix::Identity(d, d));
    }
    return c;
  }

  void validate(const std::vector<Index>& dims) const {
    if (rank < 1) throw ValidationError("PriorConfig: rank must be positive");
    if (alpha <= 0.0 || a_tau <= 0.0 || b_tau <= 0.0 || a_lambda <= 0.0 || b_lambda <= 0.0 ||
        a_gamma <= 0.0 || b_gamma <= 0.0)
      throw ValidationError("PriorConfig: hyperparameters must be positive");
    if (nu.size() != dims.size() || psi.size() != dims.size())
      throw ValidationError("PriorConfig: one (nu, Psi) pair per response mode required");
    for (std::size_t j = 0; j < dims.size(); ++j) {
      if (nu[j] <= static_cast<double>(dims[j]) - 1.0)
        throw ValidationError("PriorConfig: nu_j must exceed I_j - 1");
      if (psi[j].rows() != dims[j] || psi[j].cols() != dims[j])
        throw ValidationError("PriorConfig: Psi_j size mismatch");
      Eigen::LLT<Matrix> llt(psi[j]);
      if (llt.info() != Eigen::Success) throw ValidationError("PriorConfig: Psi_j not SPD");
    }
  }

  /// Marginal group lengths (I_1, I_2, I_3, I_4).
  static std::vector<Index> group_dims(const std::vector<Index>& dims) {
    if (dims.size() != 3)
      throw ValidationError("estimation path requires a 3-order response");
    return {dims[0], dims[1], dims[2], product_of(dims)};
  }
};

/// Current draw of every sampled quantity.
struct McmcState {
  ParafacCoefficient coeff;                 // beta_j^(r), J = 4
  Vector phi;                               // simplex, length R
  double tau = 1.0;
  std::vector<std::vector<double>> lambda;  // [r][j]
  std::vector<std::vector<Vector>> w;       // [r][j], diagonal of W_{j,r}
  std::vector<Matrix> sigma;                // response-mode covariances
  double gamma = 1.0;

  void validate() const {
    if (std::abs(phi.sum() - 1.0) > 1e-8) throw NumericalError("McmcState: phi off the simplex");
    if (tau <= 0.0 || gamma <= 0.0) throw NumericalError("McmcState: nonpositive scale");
  }
};

/// Regression pairs (x_t, Y_t) with x_t = vec(Y_{t-1}); a series of length
/// T yields T-1 pairs.
struct RegressionData {
  std::vector<Index> dims;
  std::vector<Tensor> y;
  std::vector<Vector> x;

  Index size() const { return static_cast<Index>(y.size()); }
};

inline RegressionData make_regression_data(const TensorSeries& series) {
  series.validate();
  if (series.length() < 2)
    throw ValidationError("make_regression_data: need at least two observations");
  RegressionData d;
  d.dims = series.dims;
  for (Index t = 1; t < series.length(); ++t) {
    d.x.push_back(vectorize(series.obs[static_cast<std::size_t>(t - 1)]));
    d.y.push_back(series.obs[static_cast<std::size_t>(t)]);
  }
  return d;
}

/// Draw every parameter from the prior hierarchy.
inline McmcState prior_draw(const std::vector<Index>& dims, const PriorConfig& priors, Rng& rng) {
  priors.validate(dims);
  const auto gd = PriorConfig::group_dims(dims);
  const Index r_count = priors.rank;
  McmcState s;
  s.phi = dirichlet_sample(priors.alpha * Vector::Ones(r_count), rng);
  s.tau = rng.gamma(priors.a_tau, priors.b_tau);
  s.gamma = rng.gamma(priors.a_gamma, priors.b_gamma);
  for (std::size_t j = 0; j < dims.size(); ++j)
    s.sigma.push_back(inverse_wishart_sample(priors.nu[j], s.gamma * priors.psi[j], rng));
  for (Index r = 0; r < r_count; ++r) {
    std::vector<double> lam_row;
    std::vector<Vector> w_row;
    std::vector<Vector> betas;
    for (std::size_t j = 0; j < gd.size(); ++j) {
      const double lam = rng.gamma(priors.a_lambda, priors.b_lambda);
      lam_row.push_back(lam);
      Vector wj(gd[j]);
      Vector beta(gd[j]);
      for (Index p = 0; p < gd[j]; ++p) {
        wj[p] = rng.exponential(lam * lam / 2.0);
        beta[p] = std::sqrt(s.tau * s.phi[r] * wj[p]) * rng.normal();
      }
      w_row.push_back(std::move(wj));
      betas.push_back(std::move(beta));
    }
    s.lambda.push_back(std::move(lam_row));
    s.w.push_back(std::move(w_row));
    s.coeff.marginals.push_back(std::move(betas));
  }
  return s;
}

/// ART(1) model implied by a state (for simulation and IRFs).
inline ArtModel model_from_state(const std::vector<Index>& dims, const McmcState& state) {
  ArtModel m = ArtModel::zero(dims, 1);
  m.coeffs[0] = reconstruct(state.coeff);
  m.covs = state.sigma;
  return m;
}

// ---------------------------------------------------------------------------
// step (I): global and middle scales
// ---------------------------------------------------------------------------

/// Step-size state of the HMC move on log tau, adapted during burn-in.
struct HmcState {
  bool enabled = false;
  int leapfrog = 10;
  double step_size = 0.05;
  bool adapting = false;
  long attempts = 0;
  long accepts = 0;
};

namespace detail {

inline double quadratic_sum_c(const McmcState& s, Index r) {
  double c = 0.0;
  const auto& group = s.coeff.marginals[static_cast<std::size_t>(r)];
  for (std::size_t j = 0; j < group.size(); ++j)
    c += (group[j].array().square() / s.w[static_cast<std::size_t>(r)][j].array()).sum();
  return c;
}

// One HMC transition on theta = log tau targeting the GiG(order, a, b)
// conditional with the log-scale Jacobian absorbed:
//   log pi(theta) = order * theta - (a e^theta + b e^-theta) / 2.
inline double hmc_log_tau(double order, double a, double b, double tau, Rng& rng, HmcState& hmc) {
  auto logp = [&](double th) { return order * th - 0.5 * (a * std::exp(th) + b * std::exp(-th)); };
  auto grad = [&](double th) { return order - 0.5 * (a * std::exp(th) - b * std::exp(-th)); };
  double theta = std::log(tau);
  double momentum = rng.normal();
  const double h0 = -logp(theta) + 0.5 * momentum * momentum;
  double th = theta, mo = momentum;
  const double eps = hmc.step_size;
  mo += 0.5 * eps * grad(th);
  for (int l = 0; l < hmc.leapfrog; ++l) {
    th += eps * mo;
    if (l + 1 < hmc.leapfrog) mo += eps * grad(th);
  }
  mo += 0.5 * eps * grad(th);
  const double h1 = -logp(th) + 0.5 * mo * mo;
  const double accept_prob = std::min(1.0, std::exp(h0 - h1));
  ++hmc.attempts;
  if (rng.uniform() < accept_prob) {
    ++hmc.accepts;
    theta = th;
  }
  if (hmc.adapting) {
    // Robbins-Monro drive toward the 60-80% acceptance window
    const double eta = 0.05;
    hmc.step_size = std::exp(std::log(hmc.step_size) + eta * (accept_prob - 0.7));
  }
  return std::exp(theta);
}

}  // namespace detail

/// Step (I): draw psi_r ~ GiG(alpha - I_0/2, 2 b_tau, C_r) per component,
/// renormalize into phi, then refresh tau from its GiG conditional (or an
/// HMC move on log tau when enabled).
inline void step_global_scales(McmcState& state, const PriorConfig& priors, Rng& rng,
                               HmcState* hmc = nullptr) {
  const Index r_count = state.coeff.rank();
  const auto gd = state.coeff.dims();
  double i0 = 0.0;
  for (Index d : gd) i0 += static_cast<double>(d);

  const double psi_order = priors.alpha - i0 / 2.0;
  Vector psi(r_count);
  std::vector<double> c(static_cast<std::size_t>(r_count));
  for (Index r = 0; r < r_count; ++r) {
    const double cr = detail::quadratic_sum_c(state, r);
    if (!std::isfinite(cr)) throw NumericalError("step_global_scales: non-finite C_r");
    c[static_cast<std::size_t>(r)] = cr;
    if (cr > 0.0) {
      psi[r] = gig_sample({psi_order, 2.0 * priors.b_tau, cr}, rng);
    } else if (psi_order > 0.0) {
      psi[r] = rng.gamma(psi_order, priors.b_tau);
    } else {
      throw NumericalError("step_global_scales: degenerate GiG boundary (C_r = 0, order <= 0)");
    }
  }
  state.phi = psi / psi.sum();

  const double tau_order = priors.a_tau - static_cast<double>(r_count) * i0 / 2.0;
  double tau_b = 0.0;
  for (Index r = 0; r < r_count; ++r) tau_b += c[static_cast<std::size_t>(r)] / state.phi[r];
  if (hmc != nullptr && hmc->enabled) {
    state.tau = detail::hmc_log_tau(tau_order, 2.0 * priors.b_tau, tau_b, state.tau, rng, *hmc);
  } else if (tau_b > 0.0) {
    state.tau = gig_sample({tau_order, 2.0 * priors.b_tau, tau_b}, rng);
  } else if (tau_order > 0.0) {
    state.tau = rng.gamma(tau_order, priors.b_tau);
  } else {
    throw NumericalError("step_global_scales: degenerate tau conditional");
  }
}

// ---------------------------------------------------------------------------
// step (II): local scales and marginals
// ---------------------------------------------------------------------------

struct BetaConditional {
  Vector mean;
  Matrix precision;
};

namespace detail {

// Residual tensors excluding component r, premultiplied per mode by the
// covariance inverses: G_t = (Y_t - B_{-r} x_4 x_t) x_j Sigma_j^{-1}.
struct ComponentWorkspace {
  std::vector<Tensor> residual;   // E_t^{(-r)}
  std::vector<Tensor> weighted;   // G_t
  double sxx = 0.0;               // sum_t <beta_4, x_t>^2
  std::vector<double> score;      // <beta_4, x_t>
};

inline ComponentWorkspace component_workspace(const McmcState& state, const RegressionData& data,
                                              Index r, const std::vector<Matrix>& sigma_inv) {
  ComponentWorkspace ws;
  const Index r_count = state.coeff.rank();
  const auto& g4 = state.coeff.marginals[static_cast<std::size_t>(r)][3];
  for (Index t = 0; t < data.size(); ++t) {
    const Vector& x = data.x[static_cast<std::size_t>(t)];
    Vector pred = Vector::Zero(data.y[static_cast<std::size_t>(t)].size());
    for (Index l = 0; l < r_count; ++l) {
      if (l == r) continue;
      const auto& g = state.coeff.marginals[static_cast<std::size_t>(l)];
      pred += rank_one_vec({g[0], g[1], g[2]}) * g[3].dot(x);
    }
    Tensor resid = data.y[static_cast<std::size_t>(t)] -
                   Tensor(data.dims, pred);
    Tensor weighted = resid;
    for (Index j = 0; j < 3; ++j)
      weighted = mode_multiply(weighted, sigma_inv[static_cast<std::size_t>(j)], j);
    ws.residual.push_back(std::move(resid));
    ws.weighted.push_back(std::move(weighted));
    const double s = g4.dot(x);
    ws.score.push_back(s);
    ws.sxx += s * s;
  }
  return ws;
}

inline std::vector<Matrix> sigma_inverses(const McmcState& state) {
  std::vector<Matrix> inv;
  for (const auto& s : state.sigma) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success)
      throw NumericalError("gibbs: covariance draw lost positive definiteness");
    inv.push_back(llt.solve(Matrix::Identity(s.rows(), s.cols())));
  }
  return inv;
}

}  // namespace detail

namespace detail {

inline BetaConditional beta_conditional_core(const McmcState& state, const RegressionData& data,
                                             Index r, Index j,
                                             const std::vector<Matrix>& sigma_inv,
                                             const ComponentWorkspace& ws) {
  const auto& g = state.coeff.marginals[static_cast<std::size_t>(r)];
  const Index t_count = data.size();

  std::array<double, 3> quad;  // beta_i' Sigma_i^{-1} beta_i per response mode
  for (Index i = 0; i < 3; ++i)
    quad[static_cast<std::size_t>(i)] =
        g[static_cast<std::size_t>(i)].dot(sigma_inv[static_cast<std::size_t>(i)] *
                                           g[static_cast<std::size_t>(i)]);

  Matrix s_mat;
  Vector m = Vector::Zero(g[static_cast<std::size_t>(j)].size());
  if (j < 3) {
    double factor = ws.sxx;
    for (Index i = 0; i < 3; ++i)
      if (i != j) factor *= quad[static_cast<std::size_t>(i)];
    s_mat = factor * sigma_inv[static_cast<std::size_t>(j)];
    for (Index t = 0; t < t_count; ++t) {
      Tensor contracted = ws.weighted[static_cast<std::size_t>(t)];
      for (Index i = 2; i >= 0; --i)
        if (i != j) contracted = mode_product(contracted, g[static_cast<std::size_t>(i)], i);
      m += ws.score[static_cast<std::size_t>(t)] * contracted.flat();
    }
  } else {
    const double factor = quad[0] * quad[1] * quad[2];
    Matrix sxx = Matrix::Zero(m.size(), m.size());
    for (Index t = 0; t < t_count; ++t) {
      const Vector& x = data.x[static_cast<std::size_t>(t)];
      sxx += x * x.transpose();
      Tensor contracted = ws.weighted[static_cast<std::size_t>(t)];
      for (Index i = 2; i >= 0; --i)
        contracted = mode_product(contracted, g[static_cast<std::size_t>(i)], i);
      m += contracted[0] * x;
    }
    s_mat = factor * sxx;
  }

  const Vector& wdiag = state.w[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
  Matrix precision = s_mat;
  precision.diagonal() += (1.0 / (state.tau * state.phi[r])) * wdiag.cwiseInverse();

  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("beta_full_conditional: posterior precision not PD");
  BetaConditional out;
  out.precision = precision;
  out.mean = llt.solve(m);
  return out;
}

}  // namespace detail

/// Full conditional of beta_j^(r): Gaussian with precision S_j + (W phi tau)^{-1}
/// and mean precision^{-1} m_j, assembled from mode products only (the
/// Kronecker covariance is never materialized).
inline BetaConditional beta_full_conditional(const McmcState& state, const RegressionData& data,
                                             Index r, Index j) {
  const auto sigma_inv = detail::sigma_inverses(state);
  const auto ws = detail::component_workspace(state, data, r, sigma_inv);
  return detail::beta_conditional_core(state, data, r, j, sigma_inv, ws);
}

/// Step (II): for each component r and mode group j, refresh lambda from its
/// collapsed Gamma conditional, the local scales w from their GiG
/// conditionals, then the marginal from its Gaussian conditional.
inline void step_local_scales_and_marginals(McmcState& state, const RegressionData& data,
                                            const PriorConfig& priors, Rng& rng) {
  const Index r_count = state.coeff.rank();
  const auto gd = state.coeff.dims();
  const auto sigma_inv = detail::sigma_inverses(state);

  for (Index r = 0; r < r_count; ++r) {
    const auto ws = detail::component_workspace(state, data, r, sigma_inv);
    auto& group = state.coeff.marginals[static_cast<std::size_t>(r)];
    for (Index j = 0; j < 4; ++j) {
      auto& beta = group[static_cast<std::size_t>(j)];
      const double scale = std::sqrt(state.tau * state.phi[r]);

      // lambda_{j,r} | beta (W collapsed)
      const double lam_rate = priors.b_lambda + beta.template lpNorm<1>() / scale;
      const double lam =
          rng.gamma(priors.a_lambda + static_cast<double>(gd[static_cast<std::size_t>(j)]),
                    lam_rate);
      state.lambda[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] = lam;

      // w_{j,r,p} | lambda, beta
      Vector& wvec = state.w[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
      for (Index p = 0; p < beta.size(); ++p) {
        const double b = beta[p] * beta[p] / (state.tau * state.phi[r]);
        wvec[p] = gig_sample({0.5, lam * lam, b}, rng);
      }

      // beta_j^(r) | everything else
      BetaConditional cond = detail::beta_conditional_core(state, data, r, j, sigma_inv, ws);
      Eigen::LLT<Matrix> llt(cond.precision);
      if (llt.info() != Eigen::Success)
        throw NumericalError("step_local_scales_and_marginals: precision not PD");
      Vector z(beta.size());
      for (Index p = 0; p < z.size(); ++p) z[p] = rng.normal();
      Matrix lt = llt.matrixU();
      beta = cond.mean + lt.triangularView<Eigen::Upper>().solve(z);
    }
  }
}

// ---------------------------------------------------------------------------
// step (III): covariances and latent scale
// ---------------------------------------------------------------------------

struct SigmaConditional {
  double df;
  Matrix scale;
};

/// Full conditional of Sigma_j: inverse Wishart with df nu_j + T I*_{-j} and
/// scale gamma Psi_j + S_j, where S_j contracts the residuals against the
/// other modes' inverse covariances in descending mode order.
inline SigmaConditional sigma_full_conditional(const McmcState& state, const RegressionData& data,
                                               const PriorConfig& priors, Index j) {
  const auto sigma_inv = detail::sigma_inverses(state);
  const Tensor coeff = reconstruct(state.coeff);
  const Index t_count = data.size();
  Matrix s = Matrix::Zero(state.sigma[static_cast<std::size_t>(j)].rows(),
                          state.sigma[static_cast<std::size_t>(j)].cols());
  double istar_others = 1.0;
  for (std::size_t i = 0; i < data.dims.size(); ++i)
    if (static_cast<Index>(i) != j) istar_others *= static_cast<double>(data.dims[i]);
  for (Index t = 0; t < t_count; ++t) {
    Tensor resid = data.y[static_cast<std::size_t>(t)] -
                   mode_product(coeff, data.x[static_cast<std::size_t>(t)], 3);
    Tensor weighted = resid;
    for (Index i = 0; i < 3; ++i)
      if (i != j) weighted = mode_multiply(weighted, sigma_inv[static_cast<std::size_t>(i)], i);
    s += mode_matricize(resid, j) * mode_matricize(weighted, j).transpose();
  }
  SigmaConditional out;
  out.df = priors.nu[static_cast<std::size_t>(j)] + static_cast<double>(t_count) * istar_others;
  out.scale = state.gamma * priors.psi[static_cast<std::size_t>(j)] + s;
  return out;
}

struct GammaConditional {
  double shape;
  double rate;
};

/// Full conditional of the latent covariance scale:
/// Gamma(a_gamma + sum_j nu_j I_j / 2, b_gamma + sum_j tr(Psi_j Sigma_j^{-1}) / 2).
inline GammaConditional gamma_full_conditional(const McmcState& state,
                                               const PriorConfig& priors) {
  GammaConditional out{priors.a_gamma, priors.b_gamma};
  for (std::size_t j = 0; j < state.sigma.size(); ++j) {
    out.shape += 0.5 * priors.nu[j] * static_cast<double>(state.sigma[j].rows());
    Eigen::LLT<Matrix> llt(state.sigma[j]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("gamma_full_conditional: covariance not PD");
    out.rate += 0.5 * (priors.psi[j] * llt.solve(Matrix::Identity(state.sigma[j].rows(),
                                                                  state.sigma[j].cols())))
                          .trace();
  }
  return out;
}

/// Step (III): refresh each Sigma_j from its inverse Wishart conditional and
/// gamma from its Gamma conditional.
inline void step_covariances(McmcState& state, const RegressionData& data,
                             const PriorConfig& priors, Rng& rng) {
  for (Index j = 0; j < static_cast<Index>(state.sigma.size()); ++j) {
    SigmaConditional cond = sigma_full_conditional(state, data, priors, j);
    state.sigma[static_cast<std::size_t>(j)] = inverse_wishart_sample(cond.df, cond.scale, rng);
  }
  GammaConditional g = gamma_full_conditional(state, priors);
  state.gamma = rng.gamma(g.shape, g.rate);
}

/// Log-likelihood of the regression pairs under the current state.
inline double log_likelihood(const McmcState& state, const RegressionData& data) {
  const Tensor coeff = reconstruct(state.coeff);
  double acc = 0.0;
  for (Index t = 0; t < data.size(); ++t) {
    TensorNormalParams law{mode_product(coeff, data.x[static_cast<std::size_t>(t)], 3),
                           state.sigma};
    acc += tensor_normal_logpdf(data.y[static_cast<std::size_t>(t)], law);
  }
  return acc;
}

/// One full Gibbs cycle: (I) global scales, (II) local scales and marginals,
/// (III) covariances and latent scale.
inline void gibbs_transition(McmcState& state, const RegressionData& data,
                             const PriorConfig& priors, Rng& rng, HmcState* hmc = nullptr) {
  step_global_scales(state, priors, rng, hmc);
  step_local_scales_and_marginals(state, data, priors, rng);
  step_covariances(state, data, priors, rng);
}

// ---------------------------------------------------------------------------
// sampler driver and trace
// ---------------------------------------------------------------------------

struct SamplerControls {
  long iterations = 10000;
  long burn_in = 1000;
  long thin = 1;
  std::uint64_t seed = 1;
  bool hmc_enabled = true;
  int hmc_leapfrog = 10;

  void validate() const {
    if (iterations <= 0 || burn_in < 0 || thin < 1)
      throw ValidationError("SamplerControls: iterations > 0, burn_in >= 0, thin >= 1 required");
    if (burn_in > iterations)
      throw ValidationError("SamplerControls: burn-in exceeds iteration count");
  }
};

inline long retained_draw_count(long iterations, long burn_in, long thin) {
  return (iterations - burn_in) / thin;
}

struct TraceDraw {
  long iteration = 0;
  Tensor coeff;                // reconstructed coefficient tensor draw
  std::vector<Matrix> sigma;   // covariance draws
  double tau = 0.0;
  double gamma = 0.0;
  Vector phi;
};

struct Trace {
  std::vector<Index> dims;
  long iterations = 0;
  long burn_in = 0;
  long thin = 1;
  std::uint64_t seed = 0;
  std::vector<TraceDraw> draws;
};

/// Run the three-block sampler. Initial state is a prior draw from a child
/// stream of the seed; fixed seeds give bit-identical traces. An optional
/// abort flag is checked between iterations.
inline Trace run_sampler(const TensorSeries& series, const PriorConfig& priors,
                         const SamplerControls& controls,
                         const std::atomic<bool>* abort = nullptr) {
  controls.validate();
  const RegressionData data = make_regression_data(series);
  priors.validate(data.dims);

  Rng root(controls.seed);
  Rng init_rng = root.child(0x696e6974);   // "init"
  Rng chain_rng = root.child(0x636861696e);  // "chain"

  McmcState state = prior_draw(data.dims, priors, init_rng);
  HmcState hmc;
  hmc.enabled = controls.hmc_enabled;
  hmc.leapfrog = controls.hmc_leapfrog;
  hmc.adapting = true;

  Trace trace;
  trace.dims = data.dims;
  trace.iterations = controls.iterations;
  trace.burn_in = controls.burn_in;
  trace.thin = controls.thin;
  trace.seed = controls.seed;
  trace.draws.reserve(static_cast<std::size_t>(
      std::max(0L, retained_draw_count(controls.iterations, controls.burn_in, controls.thin))));

  for (long iter = 1; iter <= controls.iterations; ++iter) {
    if (abort != nullptr && abort->load()) throw UserAbort();
    if (iter > controls.burn_in) hmc.adapting = false;  // freeze after burn-in
    try {
      gibbs_transition(state, data, priors, chain_rng, &hmc);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (iteration " + std::to_string(iter) + ")");
    }
    if (iter > controls.burn_in && (iter - controls.burn_in) % controls.thin == 0) {
      TraceDraw draw;
      draw.iteration = iter;
      draw.coeff = reconstruct(state.coeff);
      draw.sigma = state.sigma;
      draw.tau = state.tau;
      draw.gamma = state.gamma;
      draw.phi = state.phi;
      trace.draws.push_back(std::move(draw));
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// summaries and diagnostics
// ---------------------------------------------------------------------------

inline double quantile_of_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile: empty sample");
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  if (sorted[lo] == sorted[hi]) return sorted[lo];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// Effective sample size by Geyer's initial positive sequence on the
/// autocovariances.
inline double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = x[i] - mean;
  auto gamma_hat = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = lag; i < n; ++i) acc += centered[i] * centered[i - lag];
    return acc / static_cast<double>(n);
  };
  const double g0 = gamma_hat(0);
  if (g0 <= 0.0) return static_cast<double>(n);
  double sum_rho = 0.0;
  for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
    const double pair = gamma_hat(lag) + gamma_hat(lag + 1);
    if (pair <= 0.0) break;
    sum_rho += pair / g0;
    if (lag > 2000) break;
  }
  const double ess = static_cast<double>(n) / (1.0 + 2.0 * sum_rho);
  return std::min(ess, static_cast<double>(n));
}

/// Split-Rhat: the chain is halved and the usual between/within ratio taken.
inline double split_rhat(const std::vector<double>& x) {
  const std::size_t n = x.size() / 2;
  if (n < 2) return 1.0;
  auto moments = [&](std::size_t begin) {
    double m = 0.0, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[begin + i];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) s += (x[begin + i] - m) * (x[begin + i] - m);
    s /= static_cast<double>(n - 1);
    return std::pair<double, double>{m, s};
  };
  auto [m1, v1] = moments(0);
  auto [m2, v2] = moments(x.size() - n);
  const double w = 0.5 * (v1 + v2);
  const double mbar = 0.5 * (m1 + m2);
  const double b = static_cast<double>(n) * ((m1 - mbar) * (m1 - mbar) + (m2 - mbar) * (m2 - mbar));
  if (w <= 0.0) return 1.0;
  const double var_plus =
      (static_cast<double>(n - 1) / static_cast<double>(n)) * w + b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

struct EntrySummary {
  Tensor mean, median, q05, q16, q84, q95;
};

struct ScalarDiagnostics {
  double ess = 0.0;
  double rhat = 1.0;
};

struct PosteriorSummary {
  EntrySummary coeff;
  std::vector<Matrix> sigma_mean;  // scale-normalized: Sigma_j(0,0) = 1 for j >= 2
  double rho_of_mean = 0.0;
  std::map<std::string, ScalarDiagnostics> diagnostics;
};

namespace detail {

// Report-side normalization: the likelihood identifies only the Kronecker
// product, so summaries rescale Sigma_j (j >= 2) to unit leading entry and
// push the product of those scales into Sigma_1.
inline std::vector<Matrix> normalize_sigma_draw(const std::vector<Matrix>& sigma) {
  std::vector<Matrix> out = sigma;
  double carry = 1.0;
  for (std::size_t j = 1; j < out.size(); ++j) {
    const double c = out[j](0, 0);
    if (c <= 0.0) throw NumericalError("normalize_sigma_draw: nonpositive leading entry");
    out[j] /= c;
    carry *= c;
  }
  out[0] *= carry;
  return out;
}

}  // namespace detail

/// Entrywise summaries of the identified quantities (the reconstructed
/// coefficient tensor and the normalized covariances) plus convergence
/// diagnostics for a handful of monitored scalars.
inline PosteriorSummary posterior_summary(const Trace& trace) {
  if (trace.draws.empty()) throw ValidationError("posterior_summary: empty trace");
  const std::size_t n = trace.draws.size();
  const Index coeff_size = trace.draws[0].coeff.size();
  const auto coeff_dims = trace.draws[0].coeff.dims();

  PosteriorSummary out;
  out.coeff.mean = Tensor(coeff_dims);
  out.coeff.median = Tensor(coeff_dims);
  out.coeff.q05 = Tensor(coeff_dims);
  out.coeff.q16 = Tensor(coeff_dims);
  out.coeff.q84 = Tensor(coeff_dims);
  out.coeff.q95 = Tensor(coeff_dims);

  std::vector<double> column(n);
  for (Index k = 0; k < coeff_size; ++k) {
    double mean = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      column[d] = trace.draws[d].coeff[k];
      mean += column[d];
    }
    std::sort(column.begin(), column.end());
    out.coeff.mean[k] = mean / static_cast<double>(n);
    out.coeff.median[k] = quantile_of_sorted(column, 0.5);
    out.coeff.q05[k] = quantile_of_sorted(column, 0.05);
    out.coeff.q16[k] = quantile_of_sorted(column, 0.16);
    out.coeff.q84[k] = quantile_of_sorted(column, 0.84);
    out.coeff.q95[k] = quantile_of_sorted(column, 0.95);
  }

  for (std::size_t j = 0; j < trace.draws[0].sigma.size(); ++j)
    out.sigma_mean.push_back(Matrix::Zero(trace.draws[0].sigma[j].rows(),
                                          trace.draws[0].sigma[j].cols()));
  for (const auto& draw : trace.draws) {
    const auto norm = detail::normalize_sigma_draw(draw.sigma);
    for (std::size_t j = 0; j < norm.size(); ++j) out.sigma_mean[j] += norm[j];
  }
  for (auto& s : out.sigma_mean) s /= static_cast<double>(n);

  out.rho_of_mean = spectral_radius(to_square_form(out.coeff.mean, trace.dims));

  auto diag_for = [&](const std::string& name, auto getter) {
    std::vector<double> xs(n);
    for (std::size_t d = 0; d < n; ++d) xs[d] = getter(trace.draws[d]);
    out.diagnostics[name] = {effective_sample_size(xs), split_rhat(xs)};
  };
  diag_for("tau", [](const TraceDraw& d) { return d.tau; });
  diag_for("gamma", [](const TraceDraw& d) { return d.gamma; });
  const Index step = std::max(Index{1}, coeff_size / 8);
  for (Index k = 0; k < coeff_size; k += step)
    diag_for("coeff[" + std::to_string(k) + "]",
             [k](const TraceDraw& d) { return d.coeff[k]; });
  return out;
}

}  // namespace tensorart
