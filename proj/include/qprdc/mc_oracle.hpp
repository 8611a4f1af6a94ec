#pragma once

// Independent Monte-Carlo checks: European prices by exact Gaussian
// simulation and empirical one-step transition rows.

#include <cstdint>
#include <vector>

#include "qprdc/model3f.hpp"
#include "qprdc/payoff.hpp"
#include "qprdc/tree.hpp"

namespace qprdc {

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;  // sample stdev / sqrt(n_paths)
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
};

// Mean of the discounted obstacle h at the spec's single (last) exercise
// date over exact draws of (X_T, Y_T). Antithetic variates on by default;
// turn off for CLT studies.
McEstimate mc_european(const ModelParams& params, const ProductSpec& spec,
                       std::size_t n_paths, std::uint64_t seed,
                       bool antithetic = true);

// Empirical arrival-cell frequencies of one exact step from the given
// source node's coordinates; sums to 1 exactly. Works for both tree modes
// (2D rows sample the Brownian levels W^f_{t_k}, W^d_{t_k} afresh, as the
// tree's own approximation prescribes).
std::vector<double> mc_transition_row(const ModelParams& params,
                                      const QuantTree& tree, std::size_t k,
                                      std::size_t source_node,
                                      std::size_t n_samples,
                                      std::uint64_t seed);

}  // namespace qprdc
