#pragma once

// PRDC coupon payoff, its decomposition into a difference of calls, and
// the discounted obstacle h_k(x, y) evaluated on tree states.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qprdc/model3f.hpp"

namespace qprdc {

struct PayoffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schedule of a PRDC coupon: at each exercise date t_k the holder may take
//   psi_k(s) = min(max(Cf_k/s0_ref * s - Cd_k, floor_k), cap_k),
// a fraction of notional. All quantities are per unit notional.
struct ProductSpec {
  std::vector<double> exercise_dates;  // strictly increasing, > 0
  std::vector<double> cd;              // domestic coupon per date
  std::vector<double> cf;              // foreign coupon per date, > 0
  std::vector<double> cap;
  std::vector<double> floor;
  double s0_ref = 0.0;  // reference spot in the payoff, normally model s0
  // Exercise right at the valuation date t_0 = 0 (off by default; the
  // schedule proper starts at t_1).
  bool include_t0_exercise = false;

  std::size_t n_dates() const { return exercise_dates.size(); }
  void validate() const;

  // JSON with fields exercise_dates[], Cd[], Cf[], cap[], floor[], s0_ref
  // and optional include_t0_exercise; scalars broadcast to all dates.
  static ProductSpec from_json_text(const std::string& text);
  static ProductSpec from_json_file(const std::string& path);
};

// Coupon fraction paid on exercise at date index k (0-based) and spot s.
// Monotone nondecreasing in s, bounded in [floor_k, cap_k].
double prdc_payoff(const ProductSpec& spec, std::size_t k, double s);

// psi_k(s) = floor_k - a*(s - k1)_+ + a*(s - k2)_+ with k2 <= k1.
struct CallDecomposition {
  double floor_leg;
  double a;
  double k1;
  double k2;
};
CallDecomposition call_decomposition(const ProductSpec& spec, std::size_t k);

// Discounted obstacle on the (x, y) state at date t_k:
//   h_k(x,y) = phi_d(t_k) e^{-y} psi_k(spot_from_state(t_k, x, y)).
double obstacle_h(const ModelParams& params, const ProductSpec& spec,
                  std::size_t k, double x, double y);

// Generic extension point: same discounting and spot mapping applied to an
// arbitrary (Lipschitz) payoff of the spot. PRDC is the shipped instance.
using SpotPayoff = std::function<double(double)>;
double obstacle_generic(const ModelParams& params, double t,
                        const SpotPayoff& psi, double x, double y);

}  // namespace qprdc
