#include "qprdc/closed_form.hpp"

#include <cmath>

#include "qprdc/gaussian.hpp"

namespace qprdc {

MuSigma mu_sigma(const ModelParams& params, double t) {
  if (!(t > 0.0)) throw ClosedFormError("mu_sigma: t must be > 0");
  const double ss = params.sigma_s, sd = params.sigma_d, sf = params.sigma_f;
  const double t2 = t * t, t3 = t * t * t;
  const double mu = 0.5 * (ss * ss * t + sf * sf * t3 / 3.0 +
                           sd * sd * t3 / 3.0) +
                    params.rho_sf * ss * sf * t2 / 2.0 -
                    params.rho_sd * ss * sd * t2 / 2.0 -
                    params.rho_df * sf * sd * t3 / 3.0;
  if (!(mu > 0.0)) {
    throw ClosedFormError("mu_sigma: non-positive total variance");
  }
  return MuSigma{mu, std::sqrt(2.0 * mu)};
}

double european_call(const ModelParams& params, double strike, double t) {
  if (strike < 0.0) throw ClosedFormError("european_call: negative strike");
  const double pf = params.curve_f.discount(t);
  const double pd = params.curve_d.discount(t);
  if (strike == 0.0) return params.s0 * pf;
  const MuSigma ms = mu_sigma(params, t);
  const double log_m = std::log(params.s0 * pf / (strike * pd));
  const double d_plus = (log_m + ms.mu) / ms.sigma;
  const double d_minus = (log_m - ms.mu) / ms.sigma;
  return params.s0 * pf * norm_cdf(d_plus) - strike * pd * norm_cdf(d_minus);
}

double european_prdc(const ModelParams& params, const ProductSpec& spec,
                     double t) {
  std::size_t k = spec.n_dates();
  for (std::size_t i = 0; i < spec.n_dates(); ++i) {
    if (spec.exercise_dates[i] == t) {
      k = i;
      break;
    }
  }
  if (k == spec.n_dates()) {
    throw ClosedFormError("european_prdc: t is not an exercise date");
  }
  const CallDecomposition d = call_decomposition(spec, k);
  return d.floor_leg * params.curve_d.discount(t) +
         d.a * (european_call(params, d.k2, t) -
                european_call(params, d.k1, t));
}

}  // namespace qprdc
