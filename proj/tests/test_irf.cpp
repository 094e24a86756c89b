#include <catch2/catch_amalgamated.hpp>

#include "tensorart/irf.hpp"
#include "tensorart/rng.hpp"

using namespace tensorart;

namespace {

Matrix random_spd(Index d, Rng& rng, double jitter = 0.5) {
  Matrix a(d, d);
  for (Index i = 0; i < d * d; ++i) a(i / d, i % d) = rng.normal();
  return a * a.transpose() + jitter * Matrix::Identity(d, d);
}

ArtModel random_model(const std::vector<Index>& dims, double target_rho, Rng& rng) {
  ArtModel m = ArtModel::zero(dims, 1);
  for (Index k = 0; k < m.coeffs[0].size(); ++k) m.coeffs[0][k] = rng.normal();
  const double rho = check_stationarity(m).rho;
  if (rho > 0) m.coeffs[0] *= target_rho / rho;
  for (std::size_t j = 0; j < m.covs.size(); ++j) m.covs[j] = random_spd(m.covs[j].rows(), rng);
  return m;
}

}  // namespace

TEST_CASE("block factors") {
  Rng rng(81);

  SECTION("single block: L is the identity and P the Cholesky factor") {
    Matrix sigma = random_spd(4, rng);
    BlockFactors f = block_factors(sigma, 4);
    CHECK((f.l - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.d - sigma).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.p * f.p.transpose() - sigma).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("diagonal covariance: S = C, L = I, P = sqrt") {
    Vector d(5);
    d << 1.0, 4.0, 9.0, 0.25, 2.0;
    Matrix sigma = d.asDiagonal();
    BlockFactors f = block_factors(sigma, 2);
    CHECK((f.s - sigma.bottomRightCorner(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.l - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.p - d.cwiseSqrt().asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() < 1e-14);
  }

  SECTION("random SPD reconstructions at every block size") {
    Matrix sigma = random_spd(6, rng);
    for (Index n = 1; n <= 6; ++n) {
      BlockFactors f = block_factors(sigma, n);
      CHECK((f.l * f.d * f.l.transpose() - sigma).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((f.p * f.p.transpose() - sigma).cwiseAbs().maxCoeff() < 1e-10);
      // D is the block-diagonalization of Sigma by L
      Matrix l_inv = f.l.inverse();
      CHECK((l_inv * sigma * l_inv.transpose() - f.d).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SECTION("invalid inputs are rejected") {
    Matrix sigma = random_spd(4, rng);
    CHECK_THROWS_AS(block_factors(sigma, 0), ValidationError);
    CHECK_THROWS_AS(block_factors(sigma, 5), ValidationError);
    Matrix bad = -Matrix::Identity(4, 4);
    CHECK_THROWS_AS(block_factors(bad, 2), NumericalError);
  }
}

TEST_CASE("orthogonalized impulse responses") {
  Rng rng(82);

  SECTION("identity covariance, full block, horizon zero") {
    ArtModel m = random_model({2, 2}, 0.5, rng);
    for (auto& s : m.covs) s = Matrix::Identity(s.rows(), s.cols());
    ShockSpec shock;
    shock.targets = {2};
    shock.delta = Vector::Constant(1, 1.5);
    // single-target shock but full ordering: use n = I* by listing all
    ShockSpec full;
    full.targets = {2, 0, 1, 3};
    full.delta = Vector::Zero(4);
    full.delta[0] = 1.5;
    IrfResult r = oirf(m, full, 0);
    Vector expect = Vector::Zero(4);
    expect[2] = 1.5;
    CHECK((r.at(0) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("diagonal dynamics decay geometrically") {
    ArtModel m = ArtModel::zero({2, 2}, 1);
    m.coeffs[0] = from_square_form(0.5 * identity_tensor({2, 2}), {2, 2});
    ShockSpec shock;
    shock.targets = {1};
    shock.delta = Vector::Constant(1, 2.0);
    IrfResult r = oirf(m, shock, 6);
    for (Index h = 0; h <= 6; ++h) {
      Vector expect = Vector::Zero(4);
      expect[1] = 2.0 * std::pow(0.5, static_cast<double>(h));
      CHECK((r.at(h) - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SECTION("full-block oirf equals the classical Cholesky IRF") {
    ArtModel m = random_model({2, 3}, 0.6, rng);
    VarForm var = to_var(m);
    Matrix chol = var.noise_cov.llt().matrixL();
    ShockSpec shock;
    shock.targets = {0, 1, 2, 3, 4, 5};
    shock.delta = Vector::Zero(6);
    shock.delta[2] = 1.0;
    IrfResult r = oirf(m, shock, 4);
    auto psi = ma_coefficients(m, 4);
    for (Index h = 0; h <= 4; ++h) {
      Vector expect = psi[static_cast<std::size_t>(h)] * (chol * shock.delta);
      CHECK((r.at(h) - expect).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SECTION("matches the conditional-expectation difference by simulation") {
    // Condition the standardized block-orthogonal shocks: with
    // eps_t = P u_t, fixing the first block of u_t at delta* gives
    // E[y_{t+h} | u block] - E[y_{t+h}] = Psi_h P E_n delta*.
    ArtModel m = random_model({2, 2, 1}, 0.55, rng);
    const Index total = 4, n = 2, horizon = 2;
    ShockSpec shock;
    shock.targets = {0, 1};
    shock.delta = Vector::Zero(2);
    shock.delta << 1.0, -0.5;
    IrfResult r = oirf(m, shock, horizon);

    VarForm var = to_var(m);
    BlockFactors f = block_factors(var.noise_cov, n);
    const int paths = 100000;
    Matrix mean_shocked = Matrix::Zero(total, horizon + 1);
    Matrix mean_base = Matrix::Zero(total, horizon + 1);
    Matrix sq_diff = Matrix::Zero(total, horizon + 1);
    Rng sim_rng(991);
    for (int p = 0; p < paths; ++p) {
      // one path pair with common future noise (variance reduction)
      Vector u(total);
      for (Index k = 0; k < total; ++k) u[k] = sim_rng.normal();
      Vector u_shocked = u;
      u_shocked.head(n) = shock.delta;
      Vector y_s = f.p * u_shocked;
      Vector y_b = f.p * u;
      mean_shocked.col(0) += y_s;
      mean_base.col(0) += y_b;
      Vector d0 = y_s - y_b;
      sq_diff.col(0) += d0.cwiseProduct(d0);
      for (Index h = 1; h <= horizon; ++h) {
        Vector e(total);
        for (Index k = 0; k < total; ++k) e[k] = sim_rng.normal();
        Vector noise = var.noise_cov.llt().matrixL() * e;
        y_s = var.lag[0] * y_s + noise;
        y_b = var.lag[0] * y_b + noise;
        mean_shocked.col(h) += y_s;
        mean_base.col(h) += y_b;
        Vector dh = y_s - y_b;
        sq_diff.col(h) += dh.cwiseProduct(dh);
      }
    }
    for (Index h = 0; h <= horizon; ++h) {
      Vector diff = (mean_shocked.col(h) - mean_base.col(h)) / paths;
      for (Index k = 0; k < total; ++k) {
        const double var_hat =
            sq_diff(k, h) / paths - diff[k] * diff[k];
        const double se = std::sqrt(std::max(var_hat, 1e-30) / paths);
        CHECK(std::abs(diff[k] - r.responses(k, h)) <= std::max(3.0 * se, 1e-9));
      }
    }
  }
}

TEST_CASE("generalized impulse responses") {
  Rng rng(83);

  SECTION("diagonal covariance: girf and oirf are proportional per column") {
    ArtModel m = random_model({2, 2}, 0.5, rng);
    Vector d(2);
    d << 2.0, 0.5;
    m.covs[0] = d.asDiagonal();
    m.covs[1] = Matrix::Identity(2, 2);
    ShockSpec shock;
    shock.targets = {1};
    shock.delta = Vector::Constant(1, 1.0);
    IrfResult g = girf(m, shock, 3);
    IrfResult o = oirf(m, shock, 3);
    // both propagate e_1 scaled: ratio constant across cells and horizons
    double ratio = 0.0;
    for (Index h = 0; h <= 3; ++h)
      for (Index k = 0; k < 4; ++k) {
        if (std::abs(o.responses(k, h)) < 1e-12) {
          CHECK(std::abs(g.responses(k, h)) < 1e-12);
          continue;
        }
        const double r = g.responses(k, h) / o.responses(k, h);
        if (ratio == 0.0) ratio = r;
        CHECK(r == Catch::Approx(ratio).epsilon(1e-10));
      }
  }

  SECTION("n=1 reproduces the classic generalized IRF") {
    ArtModel m = random_model({2, 3}, 0.6, rng);
    VarForm var = to_var(m);
    const Index j = 4;
    const double sigma_jj = var.noise_cov(j, j);
    const double delta = std::sqrt(sigma_jj);
    ShockSpec shock;
    shock.targets = {j};
    shock.delta = Vector::Constant(1, delta);
    IrfResult r = girf(m, shock, 3);
    auto psi = ma_coefficients(m, 3);
    for (Index h = 0; h <= 3; ++h) {
      Vector expect = psi[static_cast<std::size_t>(h)] * var.noise_cov.col(j) / sigma_jj * delta;
      CHECK((r.at(h) - expect).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SECTION("h=0 equals the Gaussian conditional mean given the shocked block") {
    ArtModel m = random_model({2, 2, 1}, 0.5, rng);
    VarForm var = to_var(m);
    ShockSpec shock;
    shock.targets = {0, 1};
    shock.delta = Vector::Zero(2);
    shock.delta << 0.7, -1.2;
    IrfResult r = girf(m, shock, 0);
    // E[eps | eps_{0:1} = delta] = [delta; Sigma_21 Sigma_11^{-1} delta]
    Matrix s11 = var.noise_cov.topLeftCorner(2, 2);
    Matrix s21 = var.noise_cov.bottomLeftCorner(2, 2);
    Vector tail = s21 * s11.llt().solve(shock.delta);
    Vector expect(4);
    expect << shock.delta[0], shock.delta[1], tail[0], tail[1];
    CHECK((r.at(0) - expect).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("irf shared properties") {
  Rng rng(84);
  ArtModel m = random_model({2, 2}, 0.6, rng);

  SECTION("linearity in the shock vector") {
    ShockSpec shock;
    shock.targets = {0, 3};
    shock.delta = Vector::Zero(2);
    shock.delta << 0.3, -0.8;
    ShockSpec scaled = shock;
    scaled.delta *= 2.5;
    for (auto method : {IrfMethod::oirf, IrfMethod::girf}) {
      IrfResult a = detail::irf_point(m, shock, 3, method);
      IrfResult b = detail::irf_point(m, scaled, 3, method);
      CHECK((b.responses - 2.5 * a.responses).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SECTION("stationary responses decay below the spectral bound") {
    VarForm var = to_var(m);
    Eigen::EigenSolver<Matrix> es(var.lag[0]);
    const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
    REQUIRE(rho < 1.0);
    ShockSpec shock;
    shock.targets = {1};
    shock.delta = Vector::Constant(1, 1.0);
    IrfResult r = oirf(m, shock, 60);
    CHECK(r.at(60).cwiseAbs().maxCoeff() < 1e-6);
    // max-norm eventually decreasing
    double prev = r.at(30).cwiseAbs().maxCoeff();
    for (Index h = 31; h <= 60; ++h) {
      const double cur = r.at(h).cwiseAbs().maxCoeff();
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }

  SECTION("oirf depends on the ordering, single-target girf impact does not") {
    ArtModel corr = random_model({2, 2}, 0.5, rng);  // correlated covariances
    ShockSpec first;
    first.targets = {0, 2};
    first.delta = Vector::Zero(2);
    first.delta << 1.0, 0.0;
    ShockSpec swapped;
    swapped.targets = {2, 0};
    swapped.delta = Vector::Zero(2);
    swapped.delta << 0.0, 1.0;
    // same physical shock (unit to variable 0), different ordering
    IrfResult o1 = oirf(corr, first, 2);
    IrfResult o2 = oirf(corr, swapped, 2);
    CHECK((o1.responses - o2.responses).cwiseAbs().maxCoeff() > 1e-6);

    ShockSpec g1, g2;
    g1.targets = {0};
    g1.delta = Vector::Constant(1, 1.0);
    IrfResult ga = girf(corr, g1, 0);
    // girf at h=0 with n=1 only involves Sigma's column: ordering-free
    Vector expect = to_var(corr).noise_cov.col(0) / to_var(corr).noise_cov(0, 0);
    CHECK((ga.at(0) - expect).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("invalid shocks are rejected") {
    ShockSpec bad;
    bad.targets = {9};
    bad.delta = Vector::Constant(1, 1.0);
    CHECK_THROWS_AS(oirf(m, bad, 2), ValidationError);
    ShockSpec dup;
    dup.targets = {1, 1};
    dup.delta = Vector::Zero(2);
    CHECK_THROWS_AS(oirf(m, dup, 2), ValidationError);
    ShockSpec ok;
    ok.targets = {0};
    ok.delta = Vector::Constant(1, 1.0);
    CHECK_THROWS_AS(oirf(m, ok, -1), ValidationError);
  }
}

TEST_CASE("irf summaries over traces") {
  Rng rng(85);

  auto make_draw = [&](const Tensor& coeff, double scale) {
    TraceDraw d;
    d.iteration = 1;
    d.coeff = coeff;
    d.sigma = {scale * Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(1, 1)};
    d.tau = 1.0;
    d.gamma = 1.0;
    d.phi = Vector::Ones(1);
    return d;
  };

  SECTION("single draw collapses the bands to the point IRF") {
    ArtModel m = random_model({2, 2, 1}, 0.5, rng);
    Trace t;
    t.dims = {2, 2, 1};
    TraceDraw d = make_draw(Tensor(m.coeffs[0].dims(), m.coeffs[0].flat()), 1.0);
    d.sigma = m.covs;
    t.draws.push_back(d);
    ShockSpec shock;
    shock.targets = {0};
    shock.delta = Vector::Constant(1, 1.0);
    IrfSummary s = irf_summarize_over_trace(t, shock, 3, IrfMethod::oirf);
    IrfResult point = oirf(m, shock, 3);
    CHECK((s.median - point.responses).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.q05 - s.q95).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("two symmetric draws give a zero median") {
    Trace t;
    t.dims = {2, 2, 1};
    Tensor c({2, 2, 1, 4});
    for (Index k = 0; k < c.size(); ++k) c[k] = 0.1 * static_cast<double>(k % 3) - 0.1;
    Tensor cneg = -1.0 * c;
    t.draws.push_back(make_draw(c, 1.0));
    t.draws.push_back(make_draw(cneg, 1.0));
    ShockSpec shock;
    shock.targets = {1};
    shock.delta = Vector::Constant(1, 0.5);
    IrfSummary s = irf_summarize_over_trace(t, shock, 1, IrfMethod::oirf);
    // odd-horizon responses flip sign with the coefficient draw, so the
    // median of the +/- pair is zero there
    for (Index k = 0; k < 4; ++k) CHECK(std::abs(s.median(k, 1)) < 1e-14);
  }

  SECTION("significance flags require the 90% band to exclude zero") {
    Trace t;
    t.dims = {1, 1, 1};
    for (int d = 0; d < 50; ++d) {
      TraceDraw draw;
      draw.iteration = d + 1;
      Tensor c({1, 1, 1, 1});
      c[0] = 0.5;
      draw.coeff = c;
      draw.sigma = {Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
      draw.tau = 1.0;
      draw.gamma = 1.0;
      draw.phi = Vector::Ones(1);
      t.draws.push_back(draw);
    }
    ShockSpec shock;
    shock.targets = {0};
    shock.delta = Vector::Constant(1, 1.0);
    IrfSummary s = irf_summarize_over_trace(t, shock, 1, IrfMethod::oirf);
    CHECK(s.significant(0, 0));
    CHECK(s.significant(0, 1));
  }

  SECTION("empty trace is rejected") {
    Trace t;
    ShockSpec shock;
    shock.targets = {0};
    shock.delta = Vector::Constant(1, 1.0);
    CHECK_THROWS_AS(irf_summarize_over_trace(t, shock, 1, IrfMethod::oirf), ValidationError);
  }
}
