#pragma once

// Three-factor Gaussian FX model: flat-vol zero-coupon curves in two
// currencies plus a lognormal FX rate. Houses the deterministic discount
// functions phi_d / phi_f, the exact Gaussian law of the state
// (X, W^f, Y, W^d) and of its increments, and exact path simulation.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qprdc {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Initial discount curve: flat continuously-compounded rate or tabulated
// discounts with log-linear interpolation.
class InitialCurve {
 public:
  static InitialCurve flat(double rate);
  // Pairs (tenor_years, discount); tenors strictly increasing from 0,
  // discounts in (0, 1].
  static InitialCurve tabulated(std::vector<std::pair<double, double>> pts);
  static InitialCurve from_csv(const std::string& path);

  double discount(double t) const;

 private:
  InitialCurve() = default;
  bool flat_ = true;
  double rate_ = 0.0;
  std::vector<std::pair<double, double>> pts_;
};

struct ModelParams {
  double s0 = 0.0;        // spot FX, domestic units per foreign unit
  double sigma_s = 0.0;   // FX volatility
  double sigma_d = 0.0;   // domestic zero-coupon volatility
  double sigma_f = 0.0;   // foreign zero-coupon volatility
  double rho_sd = 0.0;
  double rho_sf = 0.0;
  double rho_df = 0.0;
  InitialCurve curve_d = InitialCurve::flat(0.0);
  InitialCurve curve_f = InitialCurve::flat(0.0);

  // Checks vols, spot and the PSD-ness of the driver correlation matrix.
  void validate() const;
  bool zero_correlations() const {
    return rho_sd == 0.0 && rho_sf == 0.0 && rho_df == 0.0;
  }
};

// Deterministic discount-factor functions:
//   phi_d(t) = P^d(0,t) exp(-sigma_d^2 t^3/6)
//   phi_f(t) = P^f(0,t) exp(-rho_sf sigma_s sigma_f t^2/2 - sigma_f^2 t^3/6)
double phi_d(const ModelParams& p, double t);
double phi_f(const ModelParams& p, double t);

// Covariance of the zero-mean Gaussian state (X_t, W^f_t, Y_t, W^d_t).
using StateCov = Eigen::Matrix4d;
StateCov state_cov(const ModelParams& p, double t);

// Covariance of the increments (G1, G2, G3, G4) over [t_k, t_k1], where
//   G1 = sigma_s dW^S + sigma_f int (t_k1 - s) dW^f,  G2 = dW^f,
//   G3 = -sigma_d int (t_k1 - s) dW^d,                G4 = dW^d.
using IncrementCov = Eigen::Matrix4d;
IncrementCov increment_cov(const ModelParams& p, double t_k, double t_k1);

// Symmetric PSD square root with a small negative-eigenvalue clamp;
// throws ModelError when an eigenvalue is materially negative.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov);

// Exact (discretization-free) simulation of (X, W^f, Y, W^d) on the given
// dates. Result layout: paths[p] holds one 4-row matrix with a column per
// date. Deterministic for a fixed seed, independent of batching.
std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>> simulate_states(
    const ModelParams& p, const std::vector<double>& dates,
    std::size_t n_paths, std::uint64_t seed);

// Spot from the state and a realized discount factor exp(-int_0^t r^d):
//   S = S_0 (phi_f(t)/discount) exp(-sigma_s^2 t/2 + x).
double spot_from_state(const ModelParams& p, double t, double x, double y,
                       double discount);

// Convenience form with the model-implied discount phi_d(t) e^{-y}:
//   S = S_0 (phi_f/phi_d)(t) exp(-sigma_s^2 t/2 + x + y).
double spot_from_state(const ModelParams& p, double t, double x, double y);

}  // namespace qprdc
