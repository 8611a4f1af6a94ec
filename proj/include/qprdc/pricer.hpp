#pragma once

// Backward induction on a quantization tree: Bermudan pricing via the
// quantized backward dynamic programming principle, and the single-date
// European cubature.

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qprdc/payoff.hpp"
#include "qprdc/tree.hpp"

namespace qprdc {

struct PricerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PriceResult {
  double v0 = 0.0;  // value at t=0 per unit notional, domestic currency
  TreeMode mode = TreeMode::TwoD;
  std::vector<std::size_t> layer_sizes;  // realized node count per layer
  // exercise_flags[k][i]: exercise optimal at date index k (layer k+1),
  // node i; ties count as exercise.
  std::vector<std::vector<char>> exercise_flags;
  // Per-layer value vectors, retained only on request.
  std::vector<Eigen::VectorXd> values;
  bool retained = false;
  double build_ms = 0.0;       // grid construction (filled by callers)
  double transition_ms = 0.0;  // transition-matrix computation
  double induction_ms = 0.0;   // backward sweep
};

struct PricerOptions {
  bool retain_layers = false;
  std::optional<McParams> mc;  // required for correlated 4D trees
};

// Snell envelope of the discounted obstacle on the tree's exercise dates:
// terminal value h_n, then v_k = max(h_k, pi_k v_{k+1}) backwards; t_0 is
// valuation-only unless spec.include_t0_exercise.
PriceResult price_bermudan(const QuantTree& tree, const ProductSpec& spec,
                           const PricerOptions& opt = {});

// Single-date European cubature: the root transition row dotted with the
// terminal obstacle. The tree must have exactly the layers {t_0, T}.
PriceResult european_cubature(const QuantTree& tree, const ProductSpec& spec,
                              const PricerOptions& opt = {});

// Node indices where exercise is optimal at date index k (0-based over
// exercise dates). Requires retain_layers.
std::vector<std::size_t> exercise_boundary(const PriceResult& result,
                                           std::size_t k);

}  // namespace qprdc
