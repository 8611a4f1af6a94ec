#include <doctest.h>

#include <cmath>

#include "qprdc/closed_form.hpp"
#include "qprdc/mc_oracle.hpp"

using namespace qprdc;

namespace {

ModelParams model(bool correlated, double sigma_curves = 0.05) {
  ModelParams p;
  p.s0 = 88.17;
  p.sigma_s = 0.5;
  p.sigma_d = sigma_curves;
  p.sigma_f = sigma_curves;
  if (correlated) {
    p.rho_sf = -0.0272;
    p.rho_sd = 0.1574;
    p.rho_df = 0.6558;
  }
  p.curve_d = InitialCurve::flat(0.015);
  p.curve_f = InitialCurve::flat(0.01);
  return p;
}

ProductSpec product(std::vector<double> dates) {
  ProductSpec s;
  s.exercise_dates = std::move(dates);
  const std::size_t n = s.exercise_dates.size();
  s.cd.assign(n, 0.15);
  s.cf.assign(n, 0.189);
  s.cap.assign(n, 0.0555);
  s.floor.assign(n, 0.0);
  s.s0_ref = 88.17;
  return s;
}

}  // namespace

TEST_CASE("mc_european matches the closed form within error bars") {
  for (bool correlated : {false, true}) {
    const ModelParams p = model(correlated);
    const ProductSpec spec = product({5.0});
    const double want = european_prdc(p, spec, 5.0);
    const McEstimate est = mc_european(p, spec, 400000, 7);
    CHECK(std::fabs(est.value - want) <= 4.0 * est.stderr_);
  }
}

TEST_CASE("unit coupon recovers the zero-coupon bond") {
  const ModelParams p = model(false);
  ProductSpec spec = product({5.0});
  spec.cd = {0.0};
  spec.floor = {1.0};
  spec.cap = {1.0};
  const McEstimate est = mc_european(p, spec, 200000, 11);
  CHECK(std::fabs(est.value - std::exp(-0.015 * 5.0)) <= 4.0 * est.stderr_);
}

TEST_CASE("seed determinism and CLT scaling") {
  const ModelParams p = model(true);
  const ProductSpec spec = product({5.0});
  const McEstimate a = mc_european(p, spec, 50000, 3, false);
  const McEstimate b = mc_european(p, spec, 50000, 3, false);
  CHECK(a.value == b.value);
  CHECK(a.stderr_ == b.stderr_);

  const McEstimate big = mc_european(p, spec, 200000, 3, false);
  // Quadrupling paths halves the standard error, within 10%.
  CHECK(a.stderr_ / big.stderr_ == doctest::Approx(2.0).epsilon(0.1));

  // Antithetic variates reduce variance for this payoff.
  const McEstimate anti = mc_european(p, spec, 50000, 3, true);
  CHECK(anti.stderr_ < a.stderr_);
}

TEST_CASE("mc transition rows match deterministic 2D rows") {
  const ModelParams p = model(false, 0.005);
  const ProductSpec spec = product({1.0, 2.0});
  const QuantTree tree =
      build_tree(p, spec, allocate_sizes(200, TreeMode::TwoD));
  const TransitionMatrix det = transitions_2d(tree, 1);

  const std::size_t n = 200000;
  std::size_t within = 0, total = 0;
  for (std::size_t i : {std::size_t{0}, std::size_t{50}, std::size_t{120}}) {
    const auto row = mc_transition_row(p, tree, 1, i, n, 1000 + i);
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      sum += row[j];
      const double pd = det.entry(i, j);
      const double se = std::sqrt(std::max(pd * (1.0 - pd), 1e-12) /
                                  static_cast<double>(n));
      ++total;
      if (std::fabs(row[j] - pd) <= 4.0 * se) ++within;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(static_cast<double>(within) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("mc transition rows match factorized 4D rows") {
  const ModelParams p = model(false, 0.005);
  const ProductSpec spec = product({1.0, 2.0});
  const QuantTree tree =
      build_tree(p, spec, allocate_sizes(100, TreeMode::FourD));
  const TransitionMatrix det = transitions_4d(tree, 1);

  const std::size_t n = 200000;
  const std::size_t i = 33;
  const auto row = mc_transition_row(p, tree, 1, i, n, 5);
  std::size_t within = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double pd = det.entry(i, j);
    const double se = std::sqrt(std::max(pd * (1.0 - pd), 1e-12) /
                                static_cast<double>(n));
    if (std::fabs(row[j] - pd) <= 4.0 * se) ++within;
  }
  CHECK(static_cast<double>(within) >=
        0.95 * static_cast<double>(row.size()));
}

TEST_CASE("degenerate volatilities concentrate the row") {
  ModelParams p = model(false);
  p.sigma_s = 0.0;
  p.sigma_d = 0.0;
  p.sigma_f = 0.0;
  const ProductSpec spec = product({1.0, 2.0});
  GridSizes sizes;
  sizes.mode = TreeMode::TwoD;
  sizes.nx = sizes.ny = 1;  // all state variances vanish
  const QuantTree tree = build_tree(p, spec, sizes);
  const auto row = mc_transition_row(p, tree, 1, 0, 1000, 1);
  REQUIRE(row.size() == 1);
  CHECK(row[0] == 1.0);
}
