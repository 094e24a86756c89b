#include <catch2/catch_amalgamated.hpp>

#include "tensorart/art_model.hpp"
#include "tensorart/rng.hpp"

using namespace tensorart;

namespace {

// random model with coefficient scaled to the requested spectral radius
ArtModel random_model(const std::vector<Index>& dims, int p, double target_rho, Rng& rng,
                      double noise_scale = 1.0) {
  ArtModel m = ArtModel::zero(dims, p);
  for (auto& a : m.coeffs)
    for (Index k = 0; k < a.size(); ++k) a[k] = rng.normal();
  const double rho = check_stationarity(m).rho;
  if (rho > 0.0)
    for (auto& a : m.coeffs) a *= target_rho / rho;
  for (auto& s : m.covs) s *= noise_scale;
  return m;
}

std::vector<Tensor> draw_noise(const ArtModel& m, Index T, Rng& rng) {
  TensorNormalParams law{Tensor(m.dims), m.covs};
  std::vector<Tensor> out;
  for (Index t = 0; t < T; ++t) out.push_back(tensor_normal_sample(law, rng));
  return out;
}

// stack chronological values (oldest first) into the companion state:
// block 0 = newest, block k = k steps back
Tensor companion_stack(const std::vector<Tensor>& chron, const std::vector<Index>& dims, int p) {
  std::vector<Index> cdims = dims;
  cdims[0] *= p;
  Tensor out(cdims);
  for (int k = 0; k < p; ++k) {
    const Tensor& y = chron[chron.size() - 1 - static_cast<std::size_t>(k)];
    for (Index flat = 0; flat < y.size(); ++flat) {
      auto idx = y.multi_index(flat);
      idx[0] += static_cast<Index>(k) * dims[0];
      out(idx) = y[flat];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("simulation basics") {
  Rng rng(51);

  SECTION("zero coefficients give an iid series") {
    ArtModel m = ArtModel::zero({2, 2}, 1);
    TensorSeries s = simulate(m, 4000, rng);
    REQUIRE(s.length() == 4000);
    double lag1 = 0.0, var = 0.0;
    for (Index t = 1; t < s.length(); ++t) {
      lag1 += s.obs[static_cast<std::size_t>(t)].flat().dot(
          s.obs[static_cast<std::size_t>(t - 1)].flat());
      var += s.obs[static_cast<std::size_t>(t)].flat().squaredNorm();
    }
    CHECK(std::abs(lag1 / var) < 0.05);
  }

  SECTION("scalar dims reduce to a univariate AR(1)") {
    ArtModel m = ArtModel::zero({1, 1, 1}, 1);
    m.coeffs[0][0] = 0.5;
    TensorSeries s = simulate(m, 20000, rng, std::nullopt, 200);
    double num = 0.0, den = 0.0;
    for (Index t = 1; t < s.length(); ++t) {
      num += s.obs[static_cast<std::size_t>(t)][0] * s.obs[static_cast<std::size_t>(t - 1)][0];
      den += s.obs[static_cast<std::size_t>(t - 1)][0] * s.obs[static_cast<std::size_t>(t - 1)][0];
    }
    CHECK(num / den == Catch::Approx(0.5).margin(0.03));
  }

  SECTION("identical seeds give identical paths") {
    ArtModel m = random_model({2, 3}, 1, 0.6, rng);
    Rng r1(77), r2(77);
    TensorSeries a = simulate(m, 50, r1);
    TensorSeries b = simulate(m, 50, r2);
    for (Index t = 0; t < 50; ++t)
      REQUIRE((a.obs[static_cast<std::size_t>(t)].flat() -
               b.obs[static_cast<std::size_t>(t)].flat())
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
  }

  SECTION("dimension mismatches are rejected") {
    ArtModel m = ArtModel::zero({2, 2}, 1);
    std::vector<Tensor> bad_init = {Tensor({3, 2})};
    std::vector<Tensor> noise = {Tensor({2, 2})};
    CHECK_THROWS_AS(simulate_with_noise(m, bad_init, noise), std::domain_error);
    std::vector<Tensor> init = {Tensor({2, 2})};
    std::vector<Tensor> bad_noise = {Tensor({2, 3})};
    CHECK_THROWS_AS(simulate_with_noise(m, init, bad_noise), std::domain_error);
  }
}

TEST_CASE("VAR equivalence") {
  Rng rng(52);

  SECTION("N=1 lag matrices are the coefficients themselves") {
    ArtModel m = random_model({3}, 1, 0.5, rng);
    VarForm var = to_var(m);
    Matrix direct = mode_matricize(m.coeffs[0], 1).transpose();
    CHECK((var.lag[0] - direct).cwiseAbs().maxCoeff() == 0.0);
    CHECK((var.noise_cov - m.covs[0]).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("noise covariance is the reversed Kronecker product") {
    ArtModel m = ArtModel::zero({2, 3, 2}, 1);
    Rng local(5);
    for (auto& s : m.covs) {
      Matrix a(s.rows(), s.cols());
      for (Index k = 0; k < a.size(); ++k) a(k / a.cols(), k % a.cols()) = local.normal();
      s = a * a.transpose() + Matrix::Identity(s.rows(), s.cols());
    }
    VarForm var = to_var(m);
    Matrix expect = detail::kron(m.covs[2], detail::kron(m.covs[1], m.covs[0]));
    CHECK((var.noise_cov - expect).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("one-step deterministic propagation agrees") {
    ArtModel m = random_model({2, 2}, 1, 0.7, rng);
    Tensor y0({2, 2});
    for (Index k = 0; k < 4; ++k) y0[k] = rng.normal();
    Tensor mean = art_step_mean(m, {y0});
    VarForm var = to_var(m);
    Vector vec_mean = var.intercept + var.lag[0] * vectorize(y0);
    CHECK((vectorize(mean) - vec_mean).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("matched noise gives identical paths (50 random models)") {
    for (int rep = 0; rep < 50; ++rep) {
      ArtModel m = random_model({2, 3, 2}, 1, 0.1 + 0.015 * rep, rng);
      const Index T = 30;
      std::vector<Tensor> noise = draw_noise(m, T, rng);
      std::vector<Tensor> init = {Tensor({2, 3, 2})};
      TensorSeries tensor_path = simulate_with_noise(m, init, noise);

      VarForm var = to_var(m);
      Vector y = Vector::Zero(m.state_size());
      double worst = 0.0;
      for (Index t = 0; t < T; ++t) {
        y = var.intercept + var.lag[0] * y + vectorize(noise[static_cast<std::size_t>(t)]);
        worst = std::max(worst,
                         (vectorize(tensor_path.obs[static_cast<std::size_t>(t)]) - y)
                             .cwiseAbs()
                             .maxCoeff());
      }
      REQUIRE(worst < 1e-10);
    }
  }
}

TEST_CASE("companion form") {
  Rng rng(53);

  SECTION("p=1 returns the model unchanged") {
    ArtModel m = random_model({2, 2}, 1, 0.5, rng);
    ArtModel c = companion_form(m);
    CHECK(c.p == 1);
    CHECK((c.coeffs[0].flat() - m.coeffs[0].flat()).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("scalar AR(2) produces the 2x2 companion matrix") {
    ArtModel m = ArtModel::zero({1, 1, 1}, 2);
    m.coeffs[0][0] = 0.5;
    m.coeffs[1][0] = -0.3;
    ArtModel c = companion_form(m);
    REQUIRE(c.dims == std::vector<Index>{2, 1, 1});
    Matrix f = square_matricize(to_square_form(c.coeffs[0], c.dims));
    Matrix expect(2, 2);
    expect << 0.5, -0.3, 1.0, 0.0;
    CHECK((f - expect).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("first-block path equality under matched noise embedding") {
    ArtModel m = random_model({2, 2, 1}, 2, 0.8, rng);
    const Index T = 50;
    std::vector<Tensor> noise = draw_noise(m, T, rng);
    std::vector<Tensor> init = {Tensor({2, 2, 1}), Tensor({2, 2, 1})};
    TensorSeries direct = simulate_with_noise(m, init, noise);

    ArtModel comp = companion_form(m);
    std::vector<Tensor> cinit = {companion_stack(init, m.dims, m.p)};
    std::vector<Tensor> cnoise;
    for (const auto& e : noise) cnoise.push_back(companion_embed(e, m.dims, m.p));
    TensorSeries stacked = simulate_with_noise(comp, cinit, cnoise);

    double worst = 0.0;
    for (Index t = 0; t < T; ++t) {
      const Tensor& y = direct.obs[static_cast<std::size_t>(t)];
      const Tensor& z = stacked.obs[static_cast<std::size_t>(t)];
      for (Index flat = 0; flat < y.size(); ++flat) {
        auto idx = y.multi_index(flat);
        worst = std::max(worst, std::abs(y[flat] - z(idx)));
      }
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("stationarity diagnosis") {
  Rng rng(54);

  SECTION("zero coefficients") {
    ArtModel m = ArtModel::zero({2, 2}, 1);
    auto rep = check_stationarity(m);
    CHECK(rep.rho == 0.0);
    CHECK(rep.stationary);
  }

  SECTION("scaled identity coefficient") {
    ArtModel m = ArtModel::zero({2, 2}, 1);
    m.coeffs[0] = from_square_form(1.2 * identity_tensor({2, 2}), {2, 2});
    auto rep = check_stationarity(m);
    CHECK(rep.rho == Catch::Approx(1.2).epsilon(1e-10));
    CHECK_FALSE(rep.stationary);
  }

  SECTION("ART(2) spectral radius matches the stacked VAR companion") {
    for (int rep = 0; rep < 20; ++rep) {
      ArtModel m = random_model({2, 2}, 2, 0.3 + 0.05 * rep, rng);
      VarForm var = to_var(m);
      const Index istar = m.state_size();
      Matrix f = Matrix::Zero(2 * istar, 2 * istar);
      f.block(0, 0, istar, istar) = var.lag[0];
      f.block(0, istar, istar, istar) = var.lag[1];
      f.block(istar, 0, istar, istar).setIdentity();
      Eigen::EigenSolver<Matrix> es(f);
      const double oracle = es.eigenvalues().cwiseAbs().maxCoeff();
      CHECK(check_stationarity(m).rho == Catch::Approx(oracle).epsilon(1e-10));
    }
  }

  SECTION("verdicts agree with the VAR criterion on 100 random models") {
    int agree = 0;
    for (int rep = 0; rep < 100; ++rep) {
      ArtModel m = random_model({2, 2}, 1, 0.2 + 0.016 * rep, rng);
      VarForm var = to_var(m);
      Eigen::EigenSolver<Matrix> es(var.lag[0]);
      const bool var_stationary = es.eigenvalues().cwiseAbs().maxCoeff() < 1.0;
      if (check_stationarity(m).stationary == var_stationary) ++agree;
    }
    CHECK(agree == 100);
  }
}

TEST_CASE("MA coefficients") {
  Rng rng(55);

  SECTION("horizon zero is the identity") {
    ArtModel m = random_model({2, 2}, 1, 0.5, rng);
    auto psi = ma_coefficients(m, 0);
    REQUIRE(psi.size() == 1);
    CHECK((psi[0] - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("half identity dynamics decay geometrically") {
    ArtModel m = ArtModel::zero({2, 2}, 1);
    m.coeffs[0] = from_square_form(0.5 * identity_tensor({2, 2}), {2, 2});
    auto psi = ma_coefficients(m, 5);
    for (Index h = 0; h <= 5; ++h) {
      Matrix expect = std::pow(0.5, static_cast<double>(h)) * Matrix::Identity(4, 4);
      CHECK((psi[static_cast<std::size_t>(h)] - expect).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  SECTION("random stable model matches repeated multiplication, norms decay") {
    ArtModel m = random_model({2, 3}, 1, 0.6, rng);
    VarForm var = to_var(m);
    auto psi = ma_coefficients(m, 6);
    Matrix power = Matrix::Identity(6, 6);
    for (Index h = 1; h <= 6; ++h) {
      power = var.lag[0] * power;
      CHECK((psi[static_cast<std::size_t>(h)] - power).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(psi[6].norm() < psi[1].norm());
    CHECK_THROWS_AS(ma_coefficients(m, -1), std::domain_error);
  }

  SECTION("p=2 goes through the VAR companion") {
    ArtModel m = random_model({2, 1, 1}, 2, 0.7, rng);
    auto psi = ma_coefficients(m, 4);
    // oracle: Psi_h = A1 Psi_{h-1} + A2 Psi_{h-2}
    VarForm var = to_var(m);
    std::vector<Matrix> oracle = {Matrix::Identity(2, 2)};
    for (Index h = 1; h <= 4; ++h) {
      Matrix next = var.lag[0] * oracle[static_cast<std::size_t>(h - 1)];
      if (h >= 2) next += var.lag[1] * oracle[static_cast<std::size_t>(h - 2)];
      oracle.push_back(next);
    }
    for (Index h = 0; h <= 4; ++h)
      CHECK((psi[static_cast<std::size_t>(h)] - oracle[static_cast<std::size_t>(h)])
                .cwiseAbs()
                .maxCoeff() < 1e-12);
  }
}

TEST_CASE("stationary moments follow the Lyapunov solution") {
  Rng rng(56);
  ArtModel m = random_model({2, 2}, 1, 0.6, rng, 1.0);
  const Index T = 100000;
  TensorSeries s = simulate(m, T, rng, std::nullopt, 500);

  std::vector<Matrix> empirical(4, Matrix::Zero(4, 4));
  for (Index t = 3; t < T; ++t)
    for (Index h = 0; h <= 3; ++h)
      empirical[static_cast<std::size_t>(h)] +=
          vectorize(s.obs[static_cast<std::size_t>(t)]) *
          vectorize(s.obs[static_cast<std::size_t>(t - h)]).transpose();
  for (auto& g : empirical) g /= static_cast<double>(T - 3);

  for (Index h = 0; h <= 3; ++h) {
    Matrix expect = stationary_vec_autocovariance(m, h);
    const double rel = (empirical[static_cast<std::size_t>(h)] - expect).norm() / expect.norm();
    INFO("lag " << h);
    CHECK(rel < 0.10);
  }
}

TEST_CASE("special-case reductions") {
  Rng rng(57);

  SECTION("dims (m,1,1) with zero lags is a SUR draw with covariance Sigma_1") {
    ArtModel m = ArtModel::zero({3, 1, 1}, 1);
    Matrix s1(3, 3);
    s1 << 2.0, 0.5, 0.1, 0.5, 1.5, 0.2, 0.1, 0.2, 1.0;
    m.covs[0] = s1;
    const Index T = 60000;
    TensorSeries s = simulate(m, T, rng);
    Matrix acc = Matrix::Zero(3, 3);
    for (const auto& y : s.obs) acc += vectorize(y) * vectorize(y).transpose();
    acc /= static_cast<double>(T);
    CHECK((acc - s1).cwiseAbs().maxCoeff() < 0.06);
  }

  SECTION("dims (1,1,1) intercept-only is univariate regression") {
    ArtModel m = ArtModel::zero({1, 1, 1}, 1);
    m.intercept[0] = 2.0;
    const Index T = 40000;
    TensorSeries s = simulate(m, T, rng);
    double mean = 0.0;
    for (const auto& y : s.obs) mean += y[0];
    mean /= static_cast<double>(T);
    CHECK(mean == Catch::Approx(2.0).margin(0.05));
  }
}
