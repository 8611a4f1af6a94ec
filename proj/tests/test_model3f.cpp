#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "qprdc/model3f.hpp"

using namespace qprdc;

namespace {

ModelParams market_params(bool correlated) {
  ModelParams p;
  p.s0 = 88.17;
  p.sigma_s = 0.5;
  p.sigma_d = 0.005;
  p.sigma_f = 0.005;
  if (correlated) {
    p.rho_sf = -0.0272;
    p.rho_sd = 0.1574;
    p.rho_df = 0.6558;
  }
  p.curve_d = InitialCurve::flat(0.015);
  p.curve_f = InitialCurve::flat(0.01);
  return p;
}

// Transition matrix of the Markov recursion over a step of length delta:
// X' = X + sigma_f delta W^f + G1, W^f' = W^f + G2,
// Y' = Y - sigma_d delta W^d + G3, W^d' = W^d + G4.
Eigen::Matrix4d step_matrix(const ModelParams& p, double delta) {
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  a(0, 1) = p.sigma_f * delta;
  a(2, 3) = -p.sigma_d * delta;
  return a;
}

}  // namespace

TEST_CASE("initial curve: flat, tabulated, csv") {
  const InitialCurve flat = InitialCurve::flat(0.015);
  CHECK(flat.discount(0.0) == 1.0);
  CHECK(flat.discount(2.0) == doctest::Approx(std::exp(-0.03)).epsilon(1e-15));

  const InitialCurve tab = InitialCurve::tabulated(
      {{0.0, 1.0}, {1.0, 0.98}, {3.0, 0.93}});
  CHECK(tab.discount(1.0) == doctest::Approx(0.98).epsilon(1e-14));
  // Log-linear between 1y and 3y.
  CHECK(tab.discount(2.0) ==
        doctest::Approx(std::exp(0.5 * std::log(0.98) + 0.5 * std::log(0.93)))
            .epsilon(1e-14));
  // Flat-forward extrapolation past the last pillar.
  CHECK(tab.discount(4.0) ==
        doctest::Approx(0.93 * std::pow(0.93 / 0.98, 0.5)).epsilon(1e-14));

  CHECK_THROWS_AS(InitialCurve::tabulated({{0.5, 0.99}}), ModelError);
  CHECK_THROWS_AS(InitialCurve::tabulated({{0.0, 1.0}, {1.0, 1.2}}),
                  ModelError);
  CHECK_THROWS_AS(InitialCurve::tabulated({{0.0, 1.0}, {1.0, 0.9},
                                           {1.0, 0.8}}),
                  ModelError);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "qprdc_curve_test";
  fs::create_directories(dir);
  const std::string path = (dir / "curve.csv").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs("tenor_years,discount\n0,1\n1,0.985\n5,0.92\n", f);
    std::fclose(f);
  }
  const InitialCurve csv = InitialCurve::from_csv(path);
  CHECK(csv.discount(1.0) == doctest::Approx(0.985).epsilon(1e-14));
  CHECK_THROWS_AS(InitialCurve::from_csv((dir / "nope.csv").string()),
                  ModelError);
  fs::remove_all(dir);
}

TEST_CASE("parameter validation") {
  ModelParams p = market_params(true);
  CHECK_NOTHROW(p.validate());
  CHECK_FALSE(p.zero_correlations());
  CHECK(market_params(false).zero_correlations());

  ModelParams bad = p;
  bad.s0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), ModelError);
  bad = p;
  bad.sigma_s = -0.1;
  CHECK_THROWS_AS(bad.validate(), ModelError);
  bad = p;
  // rho_sd = rho_sf = 0.9, rho_df = -0.9 is not a valid correlation matrix.
  bad.rho_sd = 0.9;
  bad.rho_sf = 0.9;
  bad.rho_df = -0.9;
  CHECK_THROWS_AS(bad.validate(), ModelError);
}

TEST_CASE("phi functions reproduce the discount adjustments") {
  const ModelParams p = market_params(true);
  const double t = 2.0;
  CHECK(phi_d(p, t) ==
        doctest::Approx(std::exp(-0.015 * t) *
                        std::exp(-0.005 * 0.005 * 8.0 / 6.0))
            .epsilon(1e-15));
  CHECK(phi_f(p, t) ==
        doctest::Approx(std::exp(-0.01 * t) *
                        std::exp(0.0272 * 0.5 * 0.005 * 4.0 / 2.0 -
                                 0.005 * 0.005 * 8.0 / 6.0))
            .epsilon(1e-15));
  CHECK(phi_d(p, 0.0) == 1.0);
  CHECK(phi_f(p, 0.0) == 1.0);
}

TEST_CASE("state covariance composes through the Markov recursion") {
  // If S_{k+1} = A S_k + G with G independent of S_k, then
  // Cov(S_{k+1}) = A Cov(S_k) A^T + Cov(G). The closed-form state and
  // increment covariances must satisfy this identity exactly.
  const ModelParams p = market_params(true);
  const double t0 = 0.8, t1 = 2.3;
  const Eigen::Matrix4d a = step_matrix(p, t1 - t0);
  const Eigen::Matrix4d lhs = state_cov(p, t1);
  const Eigen::Matrix4d rhs =
      a * state_cov(p, t0) * a.transpose() + increment_cov(p, t0, t1);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);

  // state_cov(t) is the increment law from time zero.
  CHECK((state_cov(p, 1.7) - increment_cov(p, 0.0, 1.7))
            .cwiseAbs()
            .maxCoeff() < 1e-16);
  CHECK(state_cov(p, 0.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross-covariance with G independent of the past (MC check)") {
  // Sample covariance of simulated states matches the closed form.
  const ModelParams p = market_params(true);
  const std::vector<double> dates = {0.5, 1.25, 2.0};
  const std::size_t n_paths = 200000;
  const auto paths = simulate_states(p, dates, n_paths, 20260823);

  for (std::size_t k = 0; k < dates.size(); ++k) {
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    Eigen::Matrix4d second = Eigen::Matrix4d::Zero();
    for (const auto& path : paths) {
      const Eigen::Vector4d s = path.col(static_cast<Eigen::Index>(k));
      mean += s;
      second += s * s.transpose();
    }
    mean /= static_cast<double>(n_paths);
    second /= static_cast<double>(n_paths);
    const Eigen::Matrix4d cov = second - mean * mean.transpose();
    const Eigen::Matrix4d want = state_cov(p, dates[k]);

    // Normalize each entry by the product of marginal scales; 200k paths
    // put the sampling error of a normalized entry near 1/sqrt(n) ~ 2e-3.
    for (int i = 0; i < 4; ++i) {
      CHECK(std::fabs(mean[i]) < 4.0 * std::sqrt(want(i, i) /
                                                 static_cast<double>(n_paths)));
      for (int j = 0; j < 4; ++j) {
        const double scale = std::sqrt(want(i, i) * want(j, j));
        CHECK(std::fabs(cov(i, j) - want(i, j)) / scale < 1.2e-2);
      }
    }
  }
}

TEST_CASE("simulation is deterministic and batch independent") {
  const ModelParams p = market_params(false);
  const std::vector<double> dates = {1.0, 2.0};
  const auto a = simulate_states(p, dates, 8, 7);
  const auto b = simulate_states(p, dates, 8, 7);
  const auto c = simulate_states(p, dates, 3, 7);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK((a[i] - b[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((a[i] - c[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  const auto d = simulate_states(p, dates, 3, 8);
  CHECK((a[0] - d[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("discounted spot is a martingale in closed form") {
  // With D_t = phi_d(t) e^{-Y_t}: E[D_t] = P^d(0,t) and
  // E[D_t S_t] = S_0 P^f(0,t), both exactly, using the lognormal moment
  // formula with the model covariances.
  const ModelParams p = market_params(true);
  for (double t : {0.5, 2.0, 10.0}) {
    const Eigen::Matrix4d cov = state_cov(p, t);
    const double var_x = cov(0, 0);
    const double var_y = cov(2, 2);
    const double cov_xy = cov(0, 2);

    const double e_disc = phi_d(p, t) * std::exp(var_y / 2.0);
    CHECK(e_disc ==
          doctest::Approx(p.curve_d.discount(t)).epsilon(1e-14));

    // D_t S_t = S_0 phi_f e^{-sigma_s^2 t/2 + X_t}; E[e^X] = e^{var_x/2}.
    const double e_disc_spot =
        p.s0 * phi_f(p, t) *
        std::exp(-p.sigma_s * p.sigma_s * t / 2.0 + var_x / 2.0);
    CHECK(e_disc_spot ==
          doctest::Approx(p.s0 * p.curve_f.discount(t)).epsilon(1e-13));

    // And the same identity through spot_from_state at a few states.
    const double x = 0.3, y = -0.02;
    const double s_direct = p.s0 * (phi_f(p, t) / phi_d(p, t)) *
                            std::exp(-p.sigma_s * p.sigma_s * t / 2.0 + x + y);
    CHECK(spot_from_state(p, t, x, y) ==
          doctest::Approx(s_direct).epsilon(1e-14));
    CHECK(spot_from_state(p, t, x, y, phi_d(p, t) * std::exp(-y)) ==
          doctest::Approx(s_direct).epsilon(1e-14));
    (void)cov_xy;
  }
}

TEST_CASE("psd_sqrt squares back and rejects indefinite input") {
  const ModelParams p = market_params(true);
  const Eigen::MatrixXd cov = state_cov(p, 3.0);
  const Eigen::MatrixXd root = psd_sqrt(cov);
  CHECK((root * root - cov).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((root - root.transpose()).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd indef = Eigen::MatrixXd::Identity(2, 2);
  indef(1, 1) = -0.5;
  CHECK_THROWS_AS(psd_sqrt(indef), ModelError);
}
