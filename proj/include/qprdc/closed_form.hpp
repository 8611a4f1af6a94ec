#pragma once

// Closed-form European prices under the constant-volatility 3-factor
// model: FX call, and the PRDC coupon via its call decomposition. Serves
// as the benchmark oracle for the quantization trees.

#include <stdexcept>

#include "qprdc/model3f.hpp"
#include "qprdc/payoff.hpp"

namespace qprdc {

struct ClosedFormError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Total log-variance parameters of the forward FX ratio at maturity t:
//   mu = (sigma_s^2 t + sigma_f^2 t^3/3 + sigma_d^2 t^3/3)/2
//        + rho_sf sigma_s sigma_f t^2/2 - rho_sd sigma_s sigma_d t^2/2
//        - rho_df sigma_f sigma_d t^3/3,
//   sigma = sqrt(2 mu).
// Throws ClosedFormError when mu <= 0 (degenerate model).
struct MuSigma {
  double mu;
  double sigma;
};
MuSigma mu_sigma(const ModelParams& params, double t);

// European FX call, strike in spot units, price in domestic currency per
// unit foreign notional:
//   V0 = S0 P^f(0,t) Phi(d+) - K P^d(0,t) Phi(d-),
//   d± = (log(S0 P^f / (K P^d)) ± mu) / sigma.
double european_call(const ModelParams& params, double strike, double t);

// European PRDC coupon paid at t (which must equal one of the spec's
// exercise dates), per unit notional:
//   floor*P^d(0,t) + a*(call(K2) - call(K1)).
double european_prdc(const ModelParams& params, const ProductSpec& spec,
                     double t);

}  // namespace qprdc
